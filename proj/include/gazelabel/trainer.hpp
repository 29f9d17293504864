#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gazelabel/losses.hpp"

namespace gazelabel {

struct TrainConfig {
  double lr0 = 0.001;
  double decay = 1e-6;
  // Inverse-time decay lr0 / (1 + decay * epoch) by default; geometric
  // lr0 * (1 - decay)^epoch when set.
  bool multiplicative_decay = false;
  int batch_size = 32;
  int max_epochs = 1000;
  int patience = 50;  // epochs without validation improvement before stopping
  std::uint64_t seed = 0;
  LossWeights weights;
  LossOptions options;
};

void validate(const TrainConfig& cfg);

// Learning rate for a zero-based epoch index.
double learning_rate(const TrainConfig& cfg, int epoch);

struct TrainHistoryRow {
  int epoch = 0;  // zero-based
  double regression = 0.0;
  double consistency = 0.0;
  double divergence = 0.0;
  double embedding = 0.0;
  double total = 0.0;
  double val_mae = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  Model model;  // parameters of the best validation epoch
  std::vector<TrainHistoryRow> history;
  int best_epoch = -1;
  double best_val_mae = 0.0;
  bool stopped_early = false;
};

// Mini-batch SGD with mean-of-batch gradients, per-epoch reshuffling,
// early stopping on validation MAE, and best-epoch restoration.
// max_epochs == 0 returns the model unchanged with empty history.
TrainResult train(Model model, const std::vector<ThreeFrameSet>& train_sets,
                  const std::vector<ThreeFrameSet>& val_sets,
                  const TrainConfig& cfg);

// CSV with header epoch,reg,consistency,divergence,embedding,total,val_mae,lr.
void write_history(const std::string& path,
                   const std::vector<TrainHistoryRow>& history);

// Predicted labels for the middle frames, one record per distinct
// middle frame (first occurrence wins when sets share one).
std::vector<LabelRecord> label_unlabelled(
    const Model& model, const std::vector<ThreeFrameSet>& sets);

// Identity-disjoint (train, validation) partition of a set list.
std::pair<std::vector<ThreeFrameSet>, std::vector<ThreeFrameSet>>
make_validation_split(const std::vector<ThreeFrameSet>& sets,
                      double val_fraction, std::uint64_t seed);

}  // namespace gazelabel
