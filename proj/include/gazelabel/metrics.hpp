#pragma once

#include <optional>
#include <vector>

#include "gazelabel/trainer.hpp"

namespace gazelabel {

struct EvalReport {
  int n = 0;
  double mae = 0.0;
  // Absent when correlation is undefined (too few values or zero
  // variance on either side).
  std::optional<double> cc;
  double angular_error_deg = 0.0;
};

// Mean over samples of the mean absolute componentwise deviation,
// on the vectors as given.
double mae_metric(const std::vector<Vec3>& preds,
                  const std::vector<Vec3>& targets);

// Pearson correlation over all flattened components. Throws
// UndefinedCorrelation when fewer than two samples or zero variance.
double cc_metric(const std::vector<Vec3>& preds,
                 const std::vector<Vec3>& targets);

// Mean angle between prediction and target, in degrees.
double angular_metric(const std::vector<Vec3>& preds,
                      const std::vector<Vec3>& targets);

EvalReport report_from_pairs(const std::vector<Vec3>& preds,
                             const std::vector<Vec3>& targets);

// Middle-frame accuracy of a model over sets whose middle frames carry
// ground-truth labels.
EvalReport evaluate(const Model& model, const std::vector<ThreeFrameSet>& sets);

// Affine feature-space bridge x -> map * x + offset applied to every
// frame before evaluation, for scoring a model on a dataset with a
// different feature layout.
struct FeatureAdapter {
  MatX map;
  VecX offset;
};

EvalReport cross_dataset_eval(const Model& model,
                              const std::vector<ThreeFrameSet>& sets,
                              const std::optional<FeatureAdapter>& adapter = {});

struct AblationEntry {
  LossWeights weights;
  TrainResult result;
  EvalReport report;  // on the validation sets
};

// Trains one model per weight configuration from identical seed and
// data, so entries differ only in the loss weighting.
std::vector<AblationEntry> ablation_run(
    const std::vector<ThreeFrameSet>& train_sets,
    const std::vector<ThreeFrameSet>& val_sets, const ModelConfig& model_cfg,
    const TrainConfig& base_cfg, const std::vector<LossWeights>& sweep);

}  // namespace gazelabel
