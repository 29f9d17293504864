// Command-line pipeline driver: synth | mine | train | label | eval |
// ablate. One JSON config file feeds every stage; command-line flags
// override single values. Each run writes its effective configuration
// next to its outputs (no filesystem paths inside, so re-running a
// stage in a fresh directory stays byte-identical), returns nonzero on
// any error, and removes partial outputs when a stage fails.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "gazelabel/errors.hpp"
#include "gazelabel/metrics.hpp"
#include "gazelabel/mining.hpp"
#include "gazelabel/model.hpp"
#include "gazelabel/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace gazelabel;

namespace {

// ---------------------------------------------------------------- basics

// Deletes every registered file unless the run commits, so failed
// stages leave no half-written artifacts behind.
class OutputTracker {
 public:
  ~OutputTracker() {
    if (committed_) return;
    for (const fs::path& p : files_) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }
  fs::path track(fs::path p) {
    files_.push_back(p);
    return files_.back();
  }
  void commit() { committed_ = true; }

 private:
  std::vector<fs::path> files_;
  bool committed_ = false;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("short write to " + path.string());
}

// ------------------------------------------------------------ run config

// Extra knobs that belong to the pipeline rather than the library.
struct PipelineConfig {
  double val_fraction = 0.1;      // identity share held out for early stopping
  std::uint64_t split_seed = 1;
  std::string mine_strategy = "ordered";  // grid | ordered | sorted-points | wild
  std::vector<LossWeights> sweep;         // ablate only
};

struct AppConfig {
  SynthConfig synth;
  GridSpec grid;
  WildConfig wild;
  ModelConfig model;
  TrainConfig train;
  PipelineConfig pipeline;
};

std::string mode_name(Mode mode) {
  return mode == Mode::TwoLabels ? "two-labels" : "one-label";
}

Mode parse_mode(const std::string& name) {
  if (name == "two-labels") return Mode::TwoLabels;
  if (name == "one-label") return Mode::OneLabel;
  throw InvalidConfig("unknown mode '" + name +
                      "' (expected two-labels or one-label)");
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw InvalidConfig("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void assign(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

LossWeights parse_weights(const json& arr, const std::string& where) {
  if (!arr.is_array() || arr.size() != 4) {
    throw InvalidConfig(where + " must be a 4-element array");
  }
  LossWeights w;
  w.regression = arr[0].get<double>();
  w.consistency = arr[1].get<double>();
  w.divergence = arr[2].get<double>();
  w.embedding = arr[3].get<double>();
  return w;
}

void load_config_file(const fs::path& path, AppConfig& cfg) {
  json root;
  try {
    root = json::parse(slurp(path));
  } catch (const json::parse_error& e) {
    throw ParseError("config " + path.string() + ": " + e.what());
  }
  if (!root.is_object()) throw ParseError("config root must be an object");
  check_keys(root, "config",
             {"synth", "grid", "wild", "mine", "model", "train", "ablate"});

  if (root.contains("synth")) {
    const json& s = root["synth"];
    check_keys(s, "synth",
               {"n_identities", "trajectories_per_identity",
                "frames_per_trajectory", "feature_dim", "appearance_dim",
                "noise_sigma", "min_arc_deg", "max_arc_deg", "seed",
                "mixing_seed"});
    assign(s, "n_identities", cfg.synth.n_identities);
    assign(s, "trajectories_per_identity",
           cfg.synth.trajectories_per_identity);
    assign(s, "frames_per_trajectory", cfg.synth.frames_per_trajectory);
    assign(s, "feature_dim", cfg.synth.feature_dim);
    assign(s, "appearance_dim", cfg.synth.appearance_dim);
    assign(s, "noise_sigma", cfg.synth.noise_sigma);
    assign(s, "min_arc_deg", cfg.synth.min_arc_deg);
    assign(s, "max_arc_deg", cfg.synth.max_arc_deg);
    assign(s, "seed", cfg.synth.seed);
    assign(s, "mixing_seed", cfg.synth.mixing_seed);
  }
  if (root.contains("grid")) {
    const json& g = root["grid"];
    check_keys(g, "grid",
               {"cols", "rows", "horizontal", "vertical", "diagonal",
                "anti_diagonal", "bidirectional"});
    assign(g, "cols", cfg.grid.cols);
    assign(g, "rows", cfg.grid.rows);
    assign(g, "horizontal", cfg.grid.horizontal);
    assign(g, "vertical", cfg.grid.vertical);
    assign(g, "diagonal", cfg.grid.diagonal);
    assign(g, "anti_diagonal", cfg.grid.anti_diagonal);
    assign(g, "bidirectional", cfg.grid.bidirectional);
  }
  if (root.contains("wild")) {
    const json& w = root["wild"];
    check_keys(w, "wild",
               {"smooth_window", "sign_threshold_deg", "min_len",
                "max_head_yaw_deg"});
    assign(w, "smooth_window", cfg.wild.smooth_window);
    assign(w, "sign_threshold_deg", cfg.wild.sign_threshold_deg);
    assign(w, "min_len", cfg.wild.min_len);
    assign(w, "max_head_yaw_deg", cfg.wild.max_head_yaw_deg);
  }
  if (root.contains("mine")) {
    const json& m = root["mine"];
    check_keys(m, "mine", {"strategy"});
    assign(m, "strategy", cfg.pipeline.mine_strategy);
  }
  if (root.contains("model")) {
    const json& m = root["model"];
    check_keys(m, "model",
               {"feature_dim", "latent_dim", "encoder_hidden", "head_dim1",
                "head_dim2", "mode", "motion_abs", "seed"});
    assign(m, "feature_dim", cfg.model.feature_dim);
    assign(m, "latent_dim", cfg.model.latent_dim);
    assign(m, "encoder_hidden", cfg.model.encoder_hidden);
    assign(m, "head_dim1", cfg.model.head_dim1);
    assign(m, "head_dim2", cfg.model.head_dim2);
    if (m.contains("mode")) cfg.model.mode = parse_mode(m["mode"]);
    assign(m, "motion_abs", cfg.model.motion_abs);
    assign(m, "seed", cfg.model.seed);
  }
  if (root.contains("train")) {
    const json& t = root["train"];
    check_keys(t, "train",
               {"lr0", "decay", "multiplicative_decay", "batch_size",
                "max_epochs", "patience", "seed", "weights", "kl_true_start",
                "embedding_root", "val_fraction", "split_seed"});
    assign(t, "lr0", cfg.train.lr0);
    assign(t, "decay", cfg.train.decay);
    assign(t, "multiplicative_decay", cfg.train.multiplicative_decay);
    assign(t, "batch_size", cfg.train.batch_size);
    assign(t, "max_epochs", cfg.train.max_epochs);
    assign(t, "patience", cfg.train.patience);
    assign(t, "seed", cfg.train.seed);
    if (t.contains("weights")) {
      cfg.train.weights = parse_weights(t["weights"], "train.weights");
    }
    assign(t, "kl_true_start", cfg.train.options.kl_true_start);
    assign(t, "embedding_root", cfg.train.options.embedding_root);
    assign(t, "val_fraction", cfg.pipeline.val_fraction);
    assign(t, "split_seed", cfg.pipeline.split_seed);
  }
  if (root.contains("ablate")) {
    const json& a = root["ablate"];
    check_keys(a, "ablate", {"sweep"});
    if (a.contains("sweep")) {
      if (!a["sweep"].is_array() || a["sweep"].empty()) {
        throw InvalidConfig("ablate.sweep must be a nonempty array");
      }
      cfg.pipeline.sweep.clear();
      for (const json& row : a["sweep"]) {
        cfg.pipeline.sweep.push_back(parse_weights(row, "ablate.sweep entry"));
      }
    }
  }
}

ordered_json synth_json(const SynthConfig& s) {
  return ordered_json{{"n_identities", s.n_identities},
                      {"trajectories_per_identity",
                       s.trajectories_per_identity},
                      {"frames_per_trajectory", s.frames_per_trajectory},
                      {"feature_dim", s.feature_dim},
                      {"appearance_dim", s.appearance_dim},
                      {"noise_sigma", s.noise_sigma},
                      {"min_arc_deg", s.min_arc_deg},
                      {"max_arc_deg", s.max_arc_deg},
                      {"seed", s.seed},
                      {"mixing_seed", s.mixing_seed}};
}

ordered_json grid_json(const GridSpec& g) {
  return ordered_json{{"cols", g.cols},
                      {"rows", g.rows},
                      {"horizontal", g.horizontal},
                      {"vertical", g.vertical},
                      {"diagonal", g.diagonal},
                      {"anti_diagonal", g.anti_diagonal},
                      {"bidirectional", g.bidirectional}};
}

ordered_json wild_json(const WildConfig& w) {
  return ordered_json{{"smooth_window", w.smooth_window},
                      {"sign_threshold_deg", w.sign_threshold_deg},
                      {"min_len", w.min_len},
                      {"max_head_yaw_deg", w.max_head_yaw_deg}};
}

ordered_json model_json(const ModelConfig& m) {
  return ordered_json{{"feature_dim", m.feature_dim},
                      {"latent_dim", m.latent_dim},
                      {"encoder_hidden", m.encoder_hidden},
                      {"head_dim1", m.head_dim1},
                      {"head_dim2", m.head_dim2},
                      {"mode", mode_name(m.mode)},
                      {"motion_abs", m.motion_abs},
                      {"seed", m.seed}};
}

ordered_json train_json(const TrainConfig& t, const PipelineConfig& p) {
  return ordered_json{
      {"lr0", t.lr0},
      {"decay", t.decay},
      {"multiplicative_decay", t.multiplicative_decay},
      {"batch_size", t.batch_size},
      {"max_epochs", t.max_epochs},
      {"patience", t.patience},
      {"seed", t.seed},
      {"weights",
       {t.weights.regression, t.weights.consistency, t.weights.divergence,
        t.weights.embedding}},
      {"kl_true_start", t.options.kl_true_start},
      {"embedding_root", t.options.embedding_root},
      {"val_fraction", p.val_fraction},
      {"split_seed", p.split_seed}};
}

void write_resolved_config(OutputTracker& tracker, const fs::path& out_dir,
                           ordered_json body) {
  spill(tracker.track(out_dir / "resolved_config.json"), body.dump(2) + "\n");
}

// ------------------------------------------------------- dataset helpers

std::vector<FrameRecord> flatten(const std::vector<Trajectory>& trajectories) {
  std::vector<FrameRecord> frames;
  for (const Trajectory& t : trajectories) {
    frames.insert(frames.end(), t.frames.begin(), t.frames.end());
  }
  return frames;
}

std::map<std::string, const FrameRecord*> index_frames(
    const std::vector<Trajectory>& trajectories) {
  std::map<std::string, const FrameRecord*> index;
  for (const Trajectory& t : trajectories) {
    for (const FrameRecord& f : t.frames) {
      if (!index.emplace(f.frame_id, &f).second) {
        throw ParseError("duplicate frame id '" + f.frame_id +
                         "' in manifest");
      }
    }
  }
  return index;
}

// Sets are persisted as frame-id triples and rehydrated against a
// manifest; ordering metadata is renumbered because grid-mined sets
// carry synthetic trajectory ids that exist only in memory.
void write_sets_file(const fs::path& path,
                     const std::vector<ThreeFrameSet>& sets) {
  std::string body = "# start|middle|end\n";
  for (const ThreeFrameSet& s : sets) {
    body += s.start.frame_id + "|" + s.unlabelled.frame_id + "|" +
            s.end.frame_id + "\n";
  }
  spill(path, body);
}

std::vector<ThreeFrameSet> read_sets_file(
    const fs::path& path,
    const std::map<std::string, const FrameRecord*>& frames) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<ThreeFrameSet> sets;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto a = line.find('|');
    const auto b = line.find('|', a == std::string::npos ? a : a + 1);
    if (a == std::string::npos || b == std::string::npos ||
        line.find('|', b + 1) != std::string::npos) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": expected start|middle|end");
    }
    const std::string ids[3] = {line.substr(0, a), line.substr(a + 1, b - a - 1),
                                line.substr(b + 1)};
    const FrameRecord* recs[3];
    for (int i = 0; i < 3; ++i) {
      auto it = frames.find(ids[i]);
      if (it == frames.end()) {
        throw ParseError(path.string() + ":" + std::to_string(lineno) +
                         ": unknown frame id '" + ids[i] + "'");
      }
      recs[i] = it->second;
    }
    ThreeFrameSet set{*recs[0], *recs[1], *recs[2]};
    const std::string traj = "set_" + std::to_string(sets.size());
    int order = 0;
    for (FrameRecord* f : {&set.start, &set.unlabelled, &set.end}) {
      f->trajectory_id = traj;
      f->order_index = order++;
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

// Identity groups in first-appearance order, so output order does not
// depend on the job count.
template <typename Item>
std::vector<std::pair<std::string, std::vector<Item>>> group_by_identity(
    const std::vector<Item>& items, const std::string& (*identity)(const Item&)) {
  std::vector<std::pair<std::string, std::vector<Item>>> groups;
  std::map<std::string, std::size_t> where;
  for (const Item& item : items) {
    const std::string& id = identity(item);
    auto it = where.find(id);
    if (it == where.end()) {
      where.emplace(id, groups.size());
      groups.push_back({id, {item}});
    } else {
      groups[it->second].second.push_back(item);
    }
  }
  return groups;
}

const std::string& frame_identity(const FrameRecord& f) {
  return f.identity_id;
}
const std::string& trajectory_identity(const Trajectory& t) {
  return t.identity_id;
}

// Runs one mining job per identity, optionally across threads, and
// concatenates the results in first-appearance identity order.
template <typename Group>
std::vector<ThreeFrameSet> mine_groups(
    const std::vector<Group>& groups, int jobs,
    std::vector<ThreeFrameSet> (*mine_one)(const Group&, const AppConfig&),
    const AppConfig& cfg) {
  std::vector<std::vector<ThreeFrameSet>> parts(groups.size());
  if (jobs > 1) {
    std::vector<std::future<std::vector<ThreeFrameSet>>> futures;
    futures.reserve(groups.size());
    for (const Group& g : groups) {
      futures.push_back(std::async(std::launch::async, mine_one, std::cref(g),
                                   std::cref(cfg)));
    }
    for (std::size_t i = 0; i < futures.size(); ++i) parts[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < groups.size(); ++i) {
      parts[i] = mine_one(groups[i], cfg);
    }
  }
  std::vector<ThreeFrameSet> sets;
  for (auto& p : parts) {
    sets.insert(sets.end(), std::make_move_iterator(p.begin()),
                std::make_move_iterator(p.end()));
  }
  return sets;
}

std::vector<ThreeFrameSet> mine_one_identity(
    const std::pair<std::string, std::vector<FrameRecord>>& group,
    const AppConfig& cfg) {
  const std::string& strategy = cfg.pipeline.mine_strategy;
  std::vector<ThreeFrameSet> sets;
  if (strategy == "grid") {
    return mine_grid_sets(group.second, cfg.grid);
  }
  if (strategy == "wild") {
    for (const Trajectory& run :
         detect_wild_trajectories(group.second, cfg.wild)) {
      auto mined = mine_ordered_sets(run);
      sets.insert(sets.end(), mined.begin(), mined.end());
    }
    return sets;
  }
  throw InvalidConfig("frame strategy dispatch got '" + strategy + "'");
}

std::vector<ThreeFrameSet> mine_one_identity_trajectories(
    const std::pair<std::string, std::vector<Trajectory>>& group,
    const AppConfig& cfg) {
  const std::string& strategy = cfg.pipeline.mine_strategy;
  std::vector<ThreeFrameSet> sets;
  for (const Trajectory& t : group.second) {
    std::vector<ThreeFrameSet> mined;
    if (strategy == "ordered") {
      mined = mine_ordered_sets(t);
    } else if (strategy == "sorted-points") {
      mined = mine_ordered_sets(sort_points_into_trajectory(t));
    } else {
      throw InvalidConfig("trajectory strategy dispatch got '" + strategy +
                          "'");
    }
    sets.insert(sets.end(), mined.begin(), mined.end());
  }
  return sets;
}

// --------------------------------------------------------- eval helpers

std::string report_csv_row(const std::string& source, const EvalReport& r) {
  std::string cc = r.cc ? format_real(*r.cc) : "";
  return source + "," + std::to_string(r.n) + "," + format_real(r.mae) + "," +
         cc + "," + format_real(r.angular_error_deg) + "\n";
}

std::string report_text(const std::string& source, const EvalReport& r) {
  std::string cc = r.cc ? format_real(*r.cc) : "undefined";
  return source + ": n=" + std::to_string(r.n) + " mae=" +
         format_real(r.mae) + " cc=" + cc +
         " angular=" + format_real(r.angular_error_deg) + " deg\n";
}

EvalReport score_labels_file(
    const fs::path& path,
    const std::map<std::string, const FrameRecord*>& frames) {
  const auto records = read_labels(path);
  if (records.empty()) throw EmptyInput("no labels in " + path.string());
  std::vector<Vec3> preds, targets;
  preds.reserve(records.size());
  targets.reserve(records.size());
  for (const LabelRecord& r : records) {
    auto it = frames.find(r.frame_id);
    if (it == frames.end()) {
      throw MissingData("label for unknown frame '" + r.frame_id + "'");
    }
    if (!it->second->label) {
      throw MissingLabel("frame '" + r.frame_id +
                         "' has no ground-truth label to score against");
    }
    preds.push_back(r.label);
    targets.push_back(normalize(*it->second->label));
  }
  return report_from_pairs(preds, targets);
}

// ------------------------------------------------------------- commands

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
};

fs::path ensure_out_dir(const std::string& out) {
  if (out.empty()) throw InvalidConfig("--out is required");
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

int cmd_synth(const AppConfig& cfg, const CommonArgs& common,
              bool feature_files) {
  if (cfg.synth.frames_per_trajectory < 3) {
    throw InvalidConfig(
        "frames_per_trajectory must be at least 3: three-frame mining "
        "needs a start, a middle and an end in every trajectory");
  }
  const fs::path out = ensure_out_dir(common.out_dir);
  OutputTracker tracker;

  const auto trajectories = synth_generate(cfg.synth);
  const fs::path manifest = tracker.track(out / "manifest.txt");
  write_manifest(manifest, trajectories,
                 feature_files ? FeatureStorage::Files
                               : FeatureStorage::Inline);
  ordered_json resolved{{"command", "synth"},
                        {"synth", synth_json(cfg.synth)},
                        {"feature_files", feature_files}};
  write_resolved_config(tracker, out, std::move(resolved));
  tracker.commit();
  std::cout << "wrote " << manifest.string() << " ("
            << trajectories.size() << " trajectories)\n";
  return 0;
}

int cmd_mine(const AppConfig& cfg, const CommonArgs& common,
             const std::string& manifest_path, int jobs) {
  const std::string& strategy = cfg.pipeline.mine_strategy;
  if (strategy != "grid" && strategy != "ordered" &&
      strategy != "sorted-points" && strategy != "wild") {
    throw InvalidConfig("unknown mining strategy '" + strategy + "'");
  }
  if (jobs < 1) throw InvalidConfig("--jobs must be at least 1");
  const fs::path out = ensure_out_dir(common.out_dir);
  OutputTracker tracker;

  const auto trajectories = load_manifest(manifest_path);
  std::vector<ThreeFrameSet> sets;
  std::size_t total_frames = 0;
  if (strategy == "grid" || strategy == "wild") {
    const auto frames = flatten(trajectories);
    total_frames = frames.size();
    sets = mine_groups(group_by_identity(frames, frame_identity), jobs,
                       mine_one_identity, cfg);
  } else {
    total_frames = flatten(trajectories).size();
    sets = mine_groups(group_by_identity(trajectories, trajectory_identity),
                       jobs, mine_one_identity_trajectories, cfg);
  }

  const fs::path sets_path = tracker.track(out / "sets.txt");
  write_sets_file(sets_path, sets);

  const BudgetReport budget = annotation_budget(sets, total_frames);
  std::string body;
  body += "total_frames=" + std::to_string(budget.total_frames) + "\n";
  body += "n_sets=" + std::to_string(budget.n_sets) + "\n";
  body += "consumed_two_labels=" + std::to_string(budget.consumed_two_labels) +
          "\n";
  body += "consumed_one_label=" + std::to_string(budget.consumed_one_label) +
          "\n";
  body += "two_labels_fraction=" + format_real(budget.two_labels_fraction) +
          "\n";
  body += "one_label_fraction=" + format_real(budget.one_label_fraction) +
          "\n";
  spill(tracker.track(out / "budget.txt"), body);

  ordered_json resolved{{"command", "mine"}, {"strategy", strategy}};
  if (strategy == "grid") resolved["grid"] = grid_json(cfg.grid);
  if (strategy == "wild") resolved["wild"] = wild_json(cfg.wild);
  write_resolved_config(tracker, out, std::move(resolved));
  tracker.commit();
  std::cout << "mined " << sets.size() << " sets; 2-labels budget "
            << format_real(100.0 * budget.two_labels_fraction)
            << "% of frames, 1-label "
            << format_real(100.0 * budget.one_label_fraction) << "%\n";
  return 0;
}

// Feature width comes from the data unless the config pins it.
ModelConfig resolve_model_config(const AppConfig& cfg,
                                 const std::vector<ThreeFrameSet>& sets) {
  ModelConfig mc = cfg.model;
  if (mc.feature_dim == 0 && !sets.empty()) {
    mc.feature_dim = static_cast<int>(sets.front().start.features.size());
  }
  return mc;
}

std::pair<std::vector<ThreeFrameSet>, std::vector<ThreeFrameSet>>
pipeline_split(const AppConfig& cfg, const std::vector<ThreeFrameSet>& sets) {
  return make_validation_split(sets, cfg.pipeline.val_fraction,
                               cfg.pipeline.split_seed);
}

int cmd_train(const AppConfig& cfg, const CommonArgs& common,
              const std::string& manifest_path, const std::string& sets_path) {
  const fs::path out = ensure_out_dir(common.out_dir);
  OutputTracker tracker;

  const auto trajectories = load_manifest(manifest_path);
  const auto frame_index = index_frames(trajectories);
  const auto sets = read_sets_file(sets_path, frame_index);
  auto [train_sets, val_sets] = pipeline_split(cfg, sets);

  const ModelConfig mc = resolve_model_config(cfg, sets);
  TrainResult result = train(init_model(mc), train_sets, val_sets, cfg.train);

  const fs::path ckpt = tracker.track(out / "checkpoint.bin");
  save_checkpoint(ckpt, result.model);
  const fs::path hist = tracker.track(out / "history.csv");
  write_history(hist.string(), result.history);

  ordered_json resolved{{"command", "train"},
                        {"model", model_json(mc)},
                        {"train", train_json(cfg.train, cfg.pipeline)}};
  write_resolved_config(tracker, out, std::move(resolved));
  tracker.commit();
  std::cout << "trained " << result.history.size() << " epochs; best val MAE "
            << format_real(result.best_val_mae) << " at epoch "
            << result.best_epoch << "\n";
  return 0;
}

int cmd_label(const AppConfig& cfg, const CommonArgs& common,
              const std::string& manifest_path, const std::string& sets_path,
              const std::string& checkpoint_path, bool use_slerp,
              const std::string& trajectory_filter) {
  const fs::path out = ensure_out_dir(common.out_dir);
  OutputTracker tracker;

  const auto trajectories = load_manifest(manifest_path);
  std::vector<LabelRecord> records;
  if (use_slerp) {
    if (!checkpoint_path.empty()) {
      throw InvalidConfig("--slerp and --checkpoint are mutually exclusive");
    }
    bool matched = false;
    for (const Trajectory& t : trajectories) {
      if (!trajectory_filter.empty() && t.trajectory_id != trajectory_filter) {
        continue;
      }
      matched = true;
      if (t.frames.size() < 2) {
        throw MissingData("trajectory '" + t.trajectory_id +
                          "' is too short for geodesic labelling");
      }
      if (!t.frames.front().label || !t.frames.back().label) {
        throw MissingLabel("trajectory '" + t.trajectory_id +
                           "' lacks terminal labels for geodesic labelling");
      }
      auto part = slerp_pseudo_labels(t, *t.frames.front().label,
                                      *t.frames.back().label);
      records.insert(records.end(), part.begin(), part.end());
    }
    if (!matched) {
      throw MissingData("no trajectory matches '" + trajectory_filter + "'");
    }
  } else {
    if (checkpoint_path.empty()) {
      throw InvalidConfig("label needs either --checkpoint or --slerp");
    }
    if (sets_path.empty()) {
      throw InvalidConfig("--sets is required when labelling with a model");
    }
    const Model model = load_checkpoint(checkpoint_path);
    const auto frame_index = index_frames(trajectories);
    const auto sets = read_sets_file(sets_path, frame_index);
    records = label_unlabelled(model, sets);
  }

  const fs::path labels = tracker.track(out / "labels.csv");
  write_labels(labels, records);
  ordered_json resolved{{"command", "label"}, {"slerp", use_slerp}};
  write_resolved_config(tracker, out, std::move(resolved));
  tracker.commit();
  std::cout << "wrote " << records.size() << " labels\n";
  (void)cfg;
  return 0;
}

int cmd_eval(const AppConfig& cfg, const CommonArgs& common,
             const std::string& manifest_path, const std::string& sets_path,
             const std::string& checkpoint_path,
             const std::vector<std::string>& label_files) {
  if (checkpoint_path.empty() && label_files.empty()) {
    throw InvalidConfig("eval needs --checkpoint and/or --labels");
  }
  const fs::path out = ensure_out_dir(common.out_dir);
  OutputTracker tracker;

  const auto trajectories = load_manifest(manifest_path);
  const auto frame_index = index_frames(trajectories);

  std::vector<std::pair<std::string, EvalReport>> rows;
  if (!checkpoint_path.empty()) {
    if (sets_path.empty()) {
      throw InvalidConfig("--sets is required when evaluating a checkpoint");
    }
    const Model model = load_checkpoint(checkpoint_path);
    const auto sets = read_sets_file(sets_path, frame_index);
    rows.emplace_back("model", evaluate(model, sets));
  }
  std::map<std::string, int> stem_uses;
  for (const std::string& file : label_files) {
    // Row names come from file stems (never full paths); repeated stems
    // get a deterministic ordinal suffix.
    std::string name = fs::path(file).stem().string();
    const int uses = ++stem_uses[name];
    if (uses > 1) name += "#" + std::to_string(uses);
    rows.emplace_back(name, score_labels_file(file, frame_index));
  }

  std::string csv = "source,n,mae,cc,angular_error_deg\n";
  std::string text;
  for (const auto& [name, report] : rows) {
    csv += report_csv_row(name, report);
    text += report_text(name, report);
  }
  spill(tracker.track(out / "report.csv"), csv);
  spill(tracker.track(out / "report.txt"), text);
  write_resolved_config(tracker, out, ordered_json{{"command", "eval"}});
  tracker.commit();
  std::cout << text;
  (void)cfg;
  return 0;
}

int cmd_ablate(const AppConfig& cfg, const CommonArgs& common,
               const std::string& manifest_path,
               const std::string& sets_path) {
  if (cfg.pipeline.sweep.empty()) {
    throw InvalidConfig(
        "ablate needs a nonempty ablate.sweep in the config file");
  }
  const fs::path out = ensure_out_dir(common.out_dir);
  OutputTracker tracker;

  const auto trajectories = load_manifest(manifest_path);
  const auto frame_index = index_frames(trajectories);
  const auto sets = read_sets_file(sets_path, frame_index);
  auto [train_sets, val_sets] = pipeline_split(cfg, sets);
  const ModelConfig mc = resolve_model_config(cfg, sets);

  const auto entries =
      ablation_run(train_sets, val_sets, mc, cfg.train, cfg.pipeline.sweep);

  std::string csv =
      "l_reg,l_consistency,l_divergence,l_embedding,val_mae,cc,"
      "angular_error_deg,best_epoch\n";
  for (const AblationEntry& e : entries) {
    csv += format_real(e.weights.regression) + "," +
           format_real(e.weights.consistency) + "," +
           format_real(e.weights.divergence) + "," +
           format_real(e.weights.embedding) + "," +
           format_real(e.report.mae) + "," +
           (e.report.cc ? format_real(*e.report.cc) : "") + "," +
           format_real(e.report.angular_error_deg) + "," +
           std::to_string(e.result.best_epoch) + "\n";
  }
  spill(tracker.track(out / "ablation.csv"), csv);

  ordered_json sweep = ordered_json::array();
  for (const LossWeights& w : cfg.pipeline.sweep) {
    sweep.push_back({w.regression, w.consistency, w.divergence, w.embedding});
  }
  ordered_json resolved{{"command", "ablate"},
                        {"model", model_json(mc)},
                        {"train", train_json(cfg.train, cfg.pipeline)},
                        {"sweep", std::move(sweep)}};
  write_resolved_config(tracker, out, std::move(resolved));
  tracker.commit();
  std::cout << "ablation over " << entries.size() << " configurations\n";
  return 0;
}

// ------------------------------------------------------------------ main

// The config file must be applied before flag parsing so that flags
// win; scan for --config ahead of CLI11.
std::string pre_scan_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  AppConfig cfg;
  CommonArgs common;
  try {
    common.config_path = pre_scan_config(argc, argv);
    if (!common.config_path.empty()) load_config_file(common.config_path, cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  CLI::App app{"weakly supervised gaze label toolkit"};
  app.require_subcommand(1);

  std::string manifest_path, sets_path, checkpoint_path, trajectory_filter;
  std::vector<std::string> label_files;
  bool feature_files = false;
  bool use_slerp = false;
  int jobs = 1;
  std::string mode_override;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path,
                    "JSON config file; flags override its values");
    sub->add_option("--out", common.out_dir, "output directory")->required();
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth);
  synth->add_option("--n-identities", cfg.synth.n_identities);
  synth->add_option("--trajectories-per-identity",
                    cfg.synth.trajectories_per_identity);
  synth->add_option("--frames-per-trajectory",
                    cfg.synth.frames_per_trajectory);
  synth->add_option("--feature-dim", cfg.synth.feature_dim);
  synth->add_option("--appearance-dim", cfg.synth.appearance_dim);
  synth->add_option("--noise-sigma", cfg.synth.noise_sigma);
  synth->add_option("--min-arc-deg", cfg.synth.min_arc_deg);
  synth->add_option("--max-arc-deg", cfg.synth.max_arc_deg);
  synth->add_option("--seed", cfg.synth.seed);
  synth->add_option("--mixing-seed", cfg.synth.mixing_seed);
  synth->add_flag("--feature-files", feature_files,
                  "store features as raw files instead of inline");

  CLI::App* mine = app.add_subcommand("mine", "mine three-frame sets");
  add_common(mine);
  mine->add_option("--manifest", manifest_path)->required();
  mine->add_option("--strategy", cfg.pipeline.mine_strategy,
                   "grid | ordered | sorted-points | wild");
  mine->add_option("--jobs", jobs, "identities mined in parallel");
  mine->add_option("--cols", cfg.grid.cols);
  mine->add_option("--rows", cfg.grid.rows);
  mine->add_flag("--horizontal,!--no-horizontal", cfg.grid.horizontal);
  mine->add_flag("--vertical,!--no-vertical", cfg.grid.vertical);
  mine->add_flag("--diagonal,!--no-diagonal", cfg.grid.diagonal);
  mine->add_flag("--anti-diagonal,!--no-anti-diagonal",
                 cfg.grid.anti_diagonal);
  mine->add_flag("--bidirectional,!--no-bidirectional",
                 cfg.grid.bidirectional);
  mine->add_option("--smooth-window", cfg.wild.smooth_window);
  mine->add_option("--sign-threshold-deg", cfg.wild.sign_threshold_deg);
  mine->add_option("--min-len", cfg.wild.min_len);
  mine->add_option("--max-head-yaw-deg", cfg.wild.max_head_yaw_deg);

  auto add_model_train_flags = [&](CLI::App* sub) {
    sub->add_option("--feature-dim", cfg.model.feature_dim,
                    "0 infers the width from the data");
    sub->add_option("--latent-dim", cfg.model.latent_dim);
    sub->add_option("--encoder-hidden", cfg.model.encoder_hidden);
    sub->add_option("--head-dim1", cfg.model.head_dim1);
    sub->add_option("--head-dim2", cfg.model.head_dim2);
    sub->add_option("--mode", mode_override, "two-labels | one-label");
    sub->add_flag("--motion-abs,!--no-motion-abs", cfg.model.motion_abs);
    sub->add_option("--model-seed", cfg.model.seed);
    sub->add_option("--lr0", cfg.train.lr0);
    sub->add_option("--decay", cfg.train.decay);
    sub->add_flag("--multiplicative-decay,!--no-multiplicative-decay",
                  cfg.train.multiplicative_decay);
    sub->add_option("--batch-size", cfg.train.batch_size);
    sub->add_option("--max-epochs", cfg.train.max_epochs);
    sub->add_option("--patience", cfg.train.patience);
    sub->add_option("--train-seed", cfg.train.seed);
    sub->add_option("--val-fraction", cfg.pipeline.val_fraction);
    sub->add_option("--split-seed", cfg.pipeline.split_seed);
  };

  CLI::App* train_cmd = app.add_subcommand("train", "train a model on sets");
  add_common(train_cmd);
  train_cmd->add_option("--manifest", manifest_path)->required();
  train_cmd->add_option("--sets", sets_path)->required();
  add_model_train_flags(train_cmd);

  CLI::App* label = app.add_subcommand(
      "label", "write labels from a checkpoint or geodesic interpolation");
  add_common(label);
  label->add_option("--manifest", manifest_path)->required();
  label->add_option("--sets", sets_path);
  label->add_option("--checkpoint", checkpoint_path);
  label->add_flag("--slerp", use_slerp,
                  "geodesic labels from terminal frames, no model");
  label->add_option("--trajectory", trajectory_filter,
                    "restrict --slerp to one trajectory id");

  CLI::App* eval_cmd = app.add_subcommand("eval", "score predictions");
  add_common(eval_cmd);
  eval_cmd->add_option("--manifest", manifest_path,
                       "ground-truth manifest")->required();
  eval_cmd->add_option("--sets", sets_path);
  eval_cmd->add_option("--checkpoint", checkpoint_path);
  eval_cmd->add_option("--labels", label_files,
                       "labels file(s) to score; repeatable");

  CLI::App* ablate = app.add_subcommand("ablate", "loss-weight sweep");
  add_common(ablate);
  ablate->add_option("--manifest", manifest_path)->required();
  ablate->add_option("--sets", sets_path)->required();
  add_model_train_flags(ablate);

  CLI11_PARSE(app, argc, argv);

  try {
    if (!mode_override.empty()) cfg.model.mode = parse_mode(mode_override);
    if (synth->parsed()) return cmd_synth(cfg, common, feature_files);
    if (mine->parsed()) return cmd_mine(cfg, common, manifest_path, jobs);
    if (train_cmd->parsed())
      return cmd_train(cfg, common, manifest_path, sets_path);
    if (label->parsed())
      return cmd_label(cfg, common, manifest_path, sets_path, checkpoint_path,
                       use_slerp, trajectory_filter);
    if (eval_cmd->parsed())
      return cmd_eval(cfg, common, manifest_path, sets_path, checkpoint_path,
                      label_files);
    if (ablate->parsed()) return cmd_ablate(cfg, common, manifest_path,
                                            sets_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no command\n";
  return 1;
}
