#include "gazelabel/metrics.hpp"

#include <cmath>

#include "gazelabel/errors.hpp"
#include "gazelabel/geometry.hpp"

namespace gazelabel {
namespace {

void check_pairs(const std::vector<Vec3>& preds,
                 const std::vector<Vec3>& targets) {
  if (preds.size() != targets.size()) {
    throw DimensionMismatch("prediction and target counts differ");
  }
  if (preds.empty()) throw EmptyInput("no prediction/target pairs");
}

}  // namespace

double mae_metric(const std::vector<Vec3>& preds,
                  const std::vector<Vec3>& targets) {
  check_pairs(preds, targets);
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    sum += (preds[i] - targets[i]).cwiseAbs().sum() / 3.0;
  }
  return sum / static_cast<double>(preds.size());
}

double cc_metric(const std::vector<Vec3>& preds,
                 const std::vector<Vec3>& targets) {
  check_pairs(preds, targets);
  if (preds.size() < 2) {
    throw UndefinedCorrelation("need at least two samples");
  }
  const std::size_t m = 3 * preds.size();
  VecX x(m), y(m);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    x.segment<3>(3 * i) = preds[i];
    y.segment<3>(3 * i) = targets[i];
  }
  const VecX xc = x.array() - x.mean();
  const VecX yc = y.array() - y.mean();
  const double sx = xc.squaredNorm();
  const double sy = yc.squaredNorm();
  if (sx <= 0.0 || sy <= 0.0) {
    throw UndefinedCorrelation("zero variance on one side");
  }
  return xc.dot(yc) / std::sqrt(sx * sy);
}

double angular_metric(const std::vector<Vec3>& preds,
                      const std::vector<Vec3>& targets) {
  check_pairs(preds, targets);
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    sum += angular_error_deg(preds[i], targets[i]);
  }
  return sum / static_cast<double>(preds.size());
}

EvalReport report_from_pairs(const std::vector<Vec3>& preds,
                             const std::vector<Vec3>& targets) {
  EvalReport report;
  report.n = static_cast<int>(preds.size());
  report.mae = mae_metric(preds, targets);
  try {
    report.cc = cc_metric(preds, targets);
  } catch (const UndefinedCorrelation&) {
    report.cc.reset();
  }
  report.angular_error_deg = angular_metric(preds, targets);
  return report;
}

EvalReport evaluate(const Model& model,
                    const std::vector<ThreeFrameSet>& sets) {
  if (sets.empty()) throw EmptyDataset("no sets to evaluate");
  std::vector<Vec3> preds, targets;
  preds.reserve(sets.size());
  targets.reserve(sets.size());
  for (const ThreeFrameSet& set : sets) {
    if (!set.unlabelled.label) {
      throw MissingLabel("frame '" + set.unlabelled.frame_id +
                         "' has no ground-truth label to score against");
    }
    preds.push_back(predict_label(model, set));
    targets.push_back(normalize(*set.unlabelled.label));
  }
  return report_from_pairs(preds, targets);
}

EvalReport cross_dataset_eval(const Model& model,
                              const std::vector<ThreeFrameSet>& sets,
                              const std::optional<FeatureAdapter>& adapter) {
  if (!adapter) return evaluate(model, sets);
  if (sets.empty()) throw EmptyDataset("no sets to evaluate");
  const MatX& map = adapter->map;
  const VecX& offset = adapter->offset;
  if (map.rows() != model.config.feature_dim || offset.size() != map.rows()) {
    throw DimensionMismatch("feature adapter output shape does not match the model");
  }
  std::vector<ThreeFrameSet> adapted = sets;
  for (ThreeFrameSet& set : adapted) {
    for (FrameRecord* frame : {&set.start, &set.unlabelled, &set.end}) {
      if (frame->features.size() != map.cols()) {
        throw DimensionMismatch("feature adapter input shape does not match frame '" +
                                frame->frame_id + "'");
      }
      frame->features = (map * frame->features + offset).eval();
    }
  }
  return evaluate(model, adapted);
}

std::vector<AblationEntry> ablation_run(
    const std::vector<ThreeFrameSet>& train_sets,
    const std::vector<ThreeFrameSet>& val_sets, const ModelConfig& model_cfg,
    const TrainConfig& base_cfg, const std::vector<LossWeights>& sweep) {
  if (sweep.empty()) throw EmptyInput("ablation sweep is empty");
  std::vector<AblationEntry> entries;
  entries.reserve(sweep.size());
  for (const LossWeights& weights : sweep) {
    TrainConfig cfg = base_cfg;
    cfg.weights = weights;
    AblationEntry entry;
    entry.weights = weights;
    entry.result = train(init_model(model_cfg), train_sets, val_sets, cfg);
    entry.report = evaluate(entry.result.model, val_sets);
    entries.push_back(std::move(entry));
  }
  return entries;
}

}  // namespace gazelabel
