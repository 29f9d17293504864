#include "gazelabel/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "gazelabel/rng.hpp"

namespace gazelabel {

namespace fs = std::filesystem;

namespace {

// Stream tags for deriving independent generator substreams.
enum : std::uint64_t {
  kTagMixing = 1,
  kTagAppearanceMap = 2,
  kTagAppearance = 3,
  kTagPath = 4,
  kTagNoise = 5,
};

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_real(const std::string& s, const std::string& context) {
  char* end = nullptr;
  const std::string t = trim(s);
  double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size()) {
    throw ParseError(context + ": bad real '" + s + "'");
  }
  return v;
}

std::vector<double> parse_reals(const std::string& s,
                                const std::string& context) {
  std::vector<double> out;
  for (const auto& piece : split(s, ',')) out.push_back(parse_real(piece, context));
  return out;
}

// Labels are stored as unit vectors; rounding from text formatting is
// repaired silently, anything further off is a data error.
GazeVector checked_label(const Vec3& v, const std::string& context) {
  const double n = v.norm();
  if (std::abs(n - 1.0) > 1e-3) {
    throw BadLabel(context + ": label norm " + std::to_string(n) +
                   " is not unit");
  }
  return v / n;
}

VecX read_f32_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feature file " + path.string());
  in.seekg(0, std::ios::end);
  const std::streamoff bytes = in.tellg();
  in.seekg(0);
  if (bytes < 0 || bytes % 4 != 0) {
    throw IoError("feature file " + path.string() + " has odd size");
  }
  const std::size_t n = static_cast<std::size_t>(bytes) / 4;
  std::vector<float> buf(n);
  in.read(reinterpret_cast<char*>(buf.data()), bytes);
  if (!in) throw IoError("short read on " + path.string());
  VecX out(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) out[static_cast<Eigen::Index>(i)] = buf[i];
  return out;
}

void write_f32_file(const fs::path& path, const VecX& v) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write feature file " + path.string());
  std::vector<float> buf(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    buf[static_cast<std::size_t>(i)] = static_cast<float>(v[i]);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * 4));
  if (!out) throw IoError("short write on " + path.string());
}

void check_id_field(const std::string& id, const std::string& what) {
  if (id.empty()) throw InvalidConfig(what + " must not be empty");
  if (id.find('|') != std::string::npos ||
      id.find('\n') != std::string::npos) {
    throw InvalidConfig(what + " '" + id + "' contains a reserved character");
  }
}

std::string join_reals(const double* v, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ',';
    out += format_real(v[i]);
  }
  return out;
}

Vec3 random_unit(Rng& rng) {
  while (true) {
    Vec3 v(rng.normal(), rng.normal(), rng.normal());
    if (v.norm() > 1e-6) return v / v.norm();
  }
}

}  // namespace

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void validate_set_structure(const ThreeFrameSet& set) {
  const FrameRecord* f[3] = {&set.start, &set.unlabelled, &set.end};
  for (int i = 1; i < 3; ++i) {
    if (f[i]->identity_id != f[0]->identity_id) {
      throw ManifestConflict("set mixes identities " + f[0]->identity_id +
                             " and " + f[i]->identity_id);
    }
    if (f[i]->trajectory_id != f[0]->trajectory_id) {
      throw ManifestConflict("set mixes trajectories " + f[0]->trajectory_id +
                             " and " + f[i]->trajectory_id);
    }
  }
  if (!(set.start.order_index < set.unlabelled.order_index &&
        set.unlabelled.order_index < set.end.order_index)) {
    throw ManifestConflict("set order is not strictly increasing in " +
                           set.start.trajectory_id);
  }
}

DatasetSplit split_identity_disjoint(const std::vector<ThreeFrameSet>& sets,
                                     double train_fraction,
                                     std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidConfig("train_fraction must lie in (0, 1)");
  }
  if (sets.empty()) throw EmptyDataset("no sets to split");
  std::vector<std::string> identities;
  for (const auto& s : sets) identities.push_back(s.start.identity_id);
  std::sort(identities.begin(), identities.end());
  identities.erase(std::unique(identities.begin(), identities.end()),
                   identities.end());
  const std::size_t n = identities.size();
  if (n < 2) throw CannotSplit("need at least two identities, have " +
                               std::to_string(n));

  Rng rng(seed);
  rng.shuffle(identities);

  // Nearest achievable identity fraction, both sides nonempty.
  std::size_t best_k = 1;
  double best_err = std::abs(1.0 / static_cast<double>(n) - train_fraction);
  for (std::size_t k = 2; k < n; ++k) {
    double err =
        std::abs(static_cast<double>(k) / static_cast<double>(n) - train_fraction);
    if (err < best_err) {
      best_err = err;
      best_k = k;
    }
  }

  std::vector<std::string> train_ids(identities.begin(),
                                     identities.begin() + best_k);
  std::sort(train_ids.begin(), train_ids.end());
  DatasetSplit out;
  for (const auto& s : sets) {
    bool in_train = std::binary_search(train_ids.begin(), train_ids.end(),
                                       s.start.identity_id);
    (in_train ? out.train : out.test).push_back(s);
  }
  return out;
}

void validate(const SynthConfig& cfg) {
  if (cfg.n_identities < 1) throw InvalidConfig("n_identities must be >= 1");
  if (cfg.trajectories_per_identity < 1) {
    throw InvalidConfig("trajectories_per_identity must be >= 1");
  }
  if (cfg.frames_per_trajectory < 3) {
    throw InvalidConfig("frames_per_trajectory must be >= 3; mining needs a "
                        "frame between the two labelled ends");
  }
  if (cfg.feature_dim < 1) throw InvalidConfig("feature_dim must be >= 1");
  if (cfg.appearance_dim < 0) throw InvalidConfig("appearance_dim must be >= 0");
  if (cfg.noise_sigma < 0.0) throw InvalidConfig("noise_sigma must be >= 0");
  if (!(cfg.min_arc_deg > 0.0 && cfg.min_arc_deg <= cfg.max_arc_deg &&
        cfg.max_arc_deg < 180.0)) {
    throw InvalidConfig("arc range must satisfy 0 < min <= max < 180");
  }
}

std::vector<Trajectory> synth_generate(const SynthConfig& cfg) {
  validate(cfg);
  const int F = cfg.feature_dim;
  const int adim = cfg.appearance_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(3 + adim));

  Rng master(cfg.seed);

  Rng mix_rng = Rng(cfg.mixing_seed).fork(kTagMixing);
  MatX gaze_map(F, 3);
  for (int r = 0; r < F; ++r)
    for (int c = 0; c < 3; ++c) gaze_map(r, c) = mix_rng.normal() * scale;

  Rng app_map_rng = master.fork(kTagAppearanceMap);
  MatX appearance_map(F, adim);
  for (int r = 0; r < F; ++r)
    for (int c = 0; c < adim; ++c)
      appearance_map(r, c) = app_map_rng.normal() * scale;

  const double cos_hi = std::cos(cfg.min_arc_deg / 180.0 * std::numbers::pi);
  const double cos_lo = std::cos(cfg.max_arc_deg / 180.0 * std::numbers::pi);

  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(cfg.n_identities) *
              static_cast<std::size_t>(cfg.trajectories_per_identity));

  for (int i = 0; i < cfg.n_identities; ++i) {
    char idbuf[32];
    std::snprintf(idbuf, sizeof idbuf, "id%03d", i);
    const std::string identity = idbuf;

    Rng app_rng = master.fork(kTagAppearance, static_cast<std::uint64_t>(i));
    VecX appearance(adim);
    for (int k = 0; k < adim; ++k) appearance[k] = app_rng.normal();

    for (int j = 0; j < cfg.trajectories_per_identity; ++j) {
      // Path depends on the ordinal only: identities share gaze paths,
      // differing in appearance and noise.
      Rng path_rng = master.fork(kTagPath, static_cast<std::uint64_t>(j));
      Vec3 p = random_unit(path_rng);
      Vec3 q;
      do {
        q = random_unit(path_rng);
      } while (!(p.dot(q) >= cos_lo && p.dot(q) <= cos_hi));

      Rng noise_rng = master.fork(kTagNoise, static_cast<std::uint64_t>(i),
                                  static_cast<std::uint64_t>(j));

      Trajectory traj;
      char tbuf[48];
      std::snprintf(tbuf, sizeof tbuf, "%s_t%02d", identity.c_str(), j);
      traj.trajectory_id = tbuf;
      traj.identity_id = identity;

      const int n = cfg.frames_per_trajectory;
      for (int k = 0; k < n; ++k) {
        FrameRecord fr;
        char fbuf[64];
        std::snprintf(fbuf, sizeof fbuf, "%s_f%02d", traj.trajectory_id.c_str(),
                      k);
        fr.frame_id = fbuf;
        fr.identity_id = identity;
        fr.trajectory_id = traj.trajectory_id;
        fr.order_index = k;
        const double t = static_cast<double>(k) / static_cast<double>(n - 1);
        const GazeVector g = slerp(p, q, t);
        fr.label = g;
        VecX x = gaze_map * g;
        if (adim > 0) x += appearance_map * appearance;
        if (cfg.noise_sigma > 0.0) {
          for (int d = 0; d < F; ++d) x[d] += noise_rng.normal(0.0, cfg.noise_sigma);
        }
        fr.features = x;
        traj.frames.push_back(std::move(fr));
      }
      out.push_back(std::move(traj));
    }
  }
  return out;
}

std::vector<Trajectory> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();

  std::vector<Trajectory> trajectories;
  std::map<std::string, std::size_t> traj_index;
  std::map<std::pair<std::string, std::int64_t>, bool> order_seen;
  std::map<std::string, bool> frame_seen;
  Eigen::Index feature_dim = -1;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::string where = path.filename().string() + ":" + std::to_string(lineno);

    auto fields = split(t, '|');
    if (fields.size() != 9) {
      throw ParseError(where + ": expected 9 fields, got " +
                       std::to_string(fields.size()));
    }

    FrameRecord fr;
    fr.frame_id = trim(fields[0]);
    fr.identity_id = trim(fields[1]);
    fr.trajectory_id = trim(fields[2]);
    if (fr.frame_id.empty() || fr.identity_id.empty() ||
        fr.trajectory_id.empty()) {
      throw ParseError(where + ": empty id field");
    }
    {
      char* end = nullptr;
      const std::string o = trim(fields[3]);
      fr.order_index = std::strtoll(o.c_str(), &end, 10);
      if (o.empty() || end != o.c_str() + o.size()) {
        throw ParseError(where + ": bad order_index '" + fields[3] + "'");
      }
    }

    if (!trim(fields[4]).empty()) {
      auto v = parse_reals(fields[4], where + " label");
      if (v.size() != 3) throw ParseError(where + ": label needs 3 reals");
      fr.label = checked_label(Vec3(v[0], v[1], v[2]), where);
    }
    if (!trim(fields[5]).empty()) {
      auto v = parse_reals(fields[5], where + " landmarks");
      if (v.size() != 6) throw ParseError(where + ": landmarks need 6 reals");
      fr.landmarks = Landmarks{Vec2(v[0], v[1]), Vec2(v[2], v[3]), Vec2(v[4], v[5])};
    }
    if (!trim(fields[6]).empty()) {
      auto v = split(trim(fields[6]), ',');
      if (v.size() != 2) throw ParseError(where + ": cell needs col,row");
      fr.cell = GridCell{static_cast<int>(parse_real(v[0], where + " cell")),
                         static_cast<int>(parse_real(v[1], where + " cell"))};
    }
    if (!trim(fields[7]).empty()) {
      auto v = parse_reals(fields[7], where + " target");
      if (v.size() != 2) throw ParseError(where + ": target needs 2 reals");
      fr.target = Vec2(v[0], v[1]);
    }

    const std::string feat = trim(fields[8]);
    if (feat.empty()) throw ParseError(where + ": missing features");
    if (feat[0] == '@') {
      fr.features = read_f32_file(base / feat.substr(1));
    } else {
      auto v = parse_reals(feat, where + " features");
      fr.features = Eigen::Map<const VecX>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    if (feature_dim < 0) feature_dim = fr.features.size();
    if (fr.features.size() != feature_dim) {
      throw DimensionMismatch(where + ": feature dim " +
                              std::to_string(fr.features.size()) +
                              " differs from " + std::to_string(feature_dim));
    }

    if (frame_seen.count(fr.frame_id)) {
      throw ManifestConflict(where + ": duplicate frame_id " + fr.frame_id);
    }
    frame_seen[fr.frame_id] = true;
    auto key = std::make_pair(fr.trajectory_id, fr.order_index);
    if (order_seen.count(key)) {
      throw ManifestConflict(where + ": duplicate order_index " +
                             std::to_string(fr.order_index) + " in trajectory " +
                             fr.trajectory_id);
    }
    order_seen[key] = true;

    auto it = traj_index.find(fr.trajectory_id);
    if (it == traj_index.end()) {
      traj_index[fr.trajectory_id] = trajectories.size();
      trajectories.push_back(Trajectory{fr.trajectory_id, fr.identity_id, {}});
      it = traj_index.find(fr.trajectory_id);
    }
    Trajectory& traj = trajectories[it->second];
    if (traj.identity_id != fr.identity_id) {
      throw ManifestConflict(where + ": trajectory " + fr.trajectory_id +
                             " spans identities " + traj.identity_id + " and " +
                             fr.identity_id);
    }
    traj.frames.push_back(std::move(fr));
  }

  for (auto& traj : trajectories) {
    std::sort(traj.frames.begin(), traj.frames.end(),
              [](const FrameRecord& a, const FrameRecord& b) {
                return a.order_index < b.order_index;
              });
    if (traj.frames.size() < 2) {
      throw ManifestConflict("trajectory " + traj.trajectory_id +
                             " has fewer than 2 frames");
    }
  }
  if (trajectories.empty()) throw EmptyDataset("manifest " + path.string() + " holds no frames");
  return trajectories;
}

void write_manifest(const fs::path& path,
                    const std::vector<Trajectory>& trajectories,
                    FeatureStorage storage) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  const fs::path base = path.parent_path();
  if (storage == FeatureStorage::Files) {
    fs::create_directories(base / "features");
  }

  out << "# frame_id|identity|trajectory|order_index|label|landmarks|cell|"
         "target|features\n";
  for (const auto& traj : trajectories) {
    for (const auto& fr : traj.frames) {
      check_id_field(fr.frame_id, "frame_id");
      check_id_field(fr.identity_id, "identity_id");
      check_id_field(fr.trajectory_id, "trajectory_id");
      out << fr.frame_id << '|' << fr.identity_id << '|' << fr.trajectory_id
          << '|' << fr.order_index << '|';
      if (fr.label) out << join_reals(fr.label->data(), 3);
      out << '|';
      if (fr.landmarks) {
        double v[6] = {fr.landmarks->pupil_left.x(), fr.landmarks->pupil_left.y(),
                       fr.landmarks->pupil_right.x(), fr.landmarks->pupil_right.y(),
                       fr.landmarks->nose_tip.x(), fr.landmarks->nose_tip.y()};
        out << join_reals(v, 6);
      }
      out << '|';
      if (fr.cell) out << fr.cell->col << ',' << fr.cell->row;
      out << '|';
      if (fr.target) out << join_reals(fr.target->data(), 2);
      out << '|';
      if (storage == FeatureStorage::Files) {
        const std::string rel = "features/" + fr.frame_id + ".f32";
        write_f32_file(base / rel, fr.features);
        out << '@' << rel;
      } else {
        out << join_reals(fr.features.data(),
                          static_cast<std::size_t>(fr.features.size()));
      }
      out << '\n';
    }
  }
  if (!out) throw IoError("short write on " + path.string());
}

void write_labels(const fs::path& path, const std::vector<LabelRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write labels " + path.string());
  out << "frame_id,gx,gy,gz,source\n";
  for (const auto& r : records) {
    if (std::abs(r.label.norm() - 1.0) > 1e-6) {
      throw BadLabel("label for " + r.frame_id + " is not unit norm");
    }
    out << r.frame_id << ',' << format_real(r.label.x()) << ','
        << format_real(r.label.y()) << ',' << format_real(r.label.z()) << ','
        << r.source << '\n';
  }
  if (!out) throw IoError("short write on " + path.string());
}

std::vector<LabelRecord> read_labels(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open labels " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "frame_id,gx,gy,gz,source") {
    throw ParseError("labels file " + path.string() + " has a bad header");
  }
  std::vector<LabelRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split(trim(line), ',');
    if (fields.size() != 5) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": expected 5 fields");
    }
    const std::string where = path.filename().string() + ":" + std::to_string(lineno);
    Vec3 v(parse_real(fields[1], where), parse_real(fields[2], where),
           parse_real(fields[3], where));
    out.push_back(LabelRecord{trim(fields[0]), checked_label(v, where),
                              trim(fields[4])});
  }
  return out;
}

}  // namespace gazelabel
