#include "gazelabel/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "gazelabel/errors.hpp"
#include "gazelabel/metrics.hpp"
#include "gazelabel/rng.hpp"

namespace gazelabel {
namespace {

constexpr std::uint64_t kTagShuffle = 11;

}  // namespace

void validate(const TrainConfig& cfg) {
  if (!(cfg.lr0 > 0.0)) throw InvalidConfig("lr0 must be positive");
  if (!(cfg.decay >= 0.0)) throw InvalidConfig("decay must be non-negative");
  if (cfg.multiplicative_decay && cfg.decay >= 1.0) {
    throw InvalidConfig("multiplicative decay must stay below 1");
  }
  if (cfg.batch_size < 1) throw InvalidConfig("batch_size must be at least 1");
  if (cfg.max_epochs < 0) throw InvalidConfig("max_epochs must be non-negative");
  if (cfg.patience < 1) throw InvalidConfig("patience must be at least 1");
}

double learning_rate(const TrainConfig& cfg, int epoch) {
  if (epoch < 0) throw InvalidConfig("epoch index must be non-negative");
  if (cfg.multiplicative_decay) {
    return cfg.lr0 * std::pow(1.0 - cfg.decay, epoch);
  }
  return cfg.lr0 / (1.0 + cfg.decay * static_cast<double>(epoch));
}

TrainResult train(Model model, const std::vector<ThreeFrameSet>& train_sets,
                  const std::vector<ThreeFrameSet>& val_sets,
                  const TrainConfig& cfg) {
  validate(cfg);
  TrainResult result;
  if (cfg.max_epochs == 0) {
    result.model = std::move(model);
    return result;
  }
  if (train_sets.empty()) throw EmptyDataset("no training sets");
  if (val_sets.empty()) throw EmptyDataset("no validation sets");

  const std::size_t n = train_sets.size();
  const Rng base(cfg.seed);
  ModelParams best_params = model.params;
  int since_best = 0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = learning_rate(cfg, epoch);
    Rng shuffle_rng = base.fork(kTagShuffle, static_cast<std::uint64_t>(epoch));
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order);

    LossBreakdown epoch_sum;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      ModelGradients accum = zero_like(model.params);
      for (std::size_t i = begin; i < end; ++i) {
        GradientResult g =
            gradients(model, train_sets[order[i]], cfg.weights, cfg.options);
        if (!std::isfinite(g.loss.total)) {
          throw NonFiniteLoss("epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(begin / cfg.batch_size) +
                              ": loss is not finite");
        }
        epoch_sum.regression += g.loss.regression;
        epoch_sum.consistency += g.loss.consistency;
        epoch_sum.divergence += g.loss.divergence;
        epoch_sum.embedding += g.loss.embedding;
        epoch_sum.total += g.loss.total;
        axpy_params(accum, g.grads, 1.0);
      }
      axpy_params(model.params, accum,
                  -lr / static_cast<double>(end - begin));
    }

    const double val_mae = evaluate(model, val_sets).mae;
    if (!std::isfinite(val_mae)) {
      throw NonFiniteLoss("epoch " + std::to_string(epoch) +
                          ": validation error is not finite");
    }

    TrainHistoryRow row;
    row.epoch = epoch;
    const double inv = 1.0 / static_cast<double>(n);
    row.regression = epoch_sum.regression * inv;
    row.consistency = epoch_sum.consistency * inv;
    row.divergence = epoch_sum.divergence * inv;
    row.embedding = epoch_sum.embedding * inv;
    row.total = epoch_sum.total * inv;
    row.val_mae = val_mae;
    row.lr = lr;
    result.history.push_back(row);

    if (result.best_epoch < 0 || val_mae < result.best_val_mae) {
      result.best_epoch = epoch;
      result.best_val_mae = val_mae;
      best_params = model.params;
      since_best = 0;
    } else {
      ++since_best;
      if (since_best >= cfg.patience) {
        result.stopped_early = true;
        break;
      }
    }
  }

  model.params = std::move(best_params);
  result.model = std::move(model);
  return result;
}

void write_history(const std::string& path,
                   const std::vector<TrainHistoryRow>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "epoch,reg,consistency,divergence,embedding,total,val_mae,lr\n";
  for (const TrainHistoryRow& row : history) {
    out << row.epoch << ',' << format_real(row.regression) << ','
        << format_real(row.consistency) << ',' << format_real(row.divergence)
        << ',' << format_real(row.embedding) << ',' << format_real(row.total)
        << ',' << format_real(row.val_mae) << ',' << format_real(row.lr)
        << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<LabelRecord> label_unlabelled(
    const Model& model, const std::vector<ThreeFrameSet>& sets) {
  std::vector<LabelRecord> records;
  std::set<std::string> seen;
  const std::string source =
      model.config.mode == Mode::TwoLabels ? "model-2l" : "model-1l";
  for (const ThreeFrameSet& set : sets) {
    if (!seen.insert(set.unlabelled.frame_id).second) continue;
    records.push_back(
        {set.unlabelled.frame_id, predict_label(model, set), source});
  }
  return records;
}

std::pair<std::vector<ThreeFrameSet>, std::vector<ThreeFrameSet>>
make_validation_split(const std::vector<ThreeFrameSet>& sets,
                      double val_fraction, std::uint64_t seed) {
  DatasetSplit split = split_identity_disjoint(sets, 1.0 - val_fraction, seed);
  return {std::move(split.train), std::move(split.test)};
}

}  // namespace gazelabel
