#pragma once

#include "gazelabel/model.hpp"

namespace gazelabel {

// Multipliers for the weighted total. Terms a mode does not use are
// simply ignored.
struct LossWeights {
  double regression = 1.0;
  double consistency = 1.0;
  double divergence = 1.0;
  double embedding = 1.0;
};

struct LossOptions {
  // Divergence reference: predicted start by default, the ground-truth
  // start label when set.
  bool kl_true_start = false;
  // Embedding penalty is squared distance by default, plain distance
  // when set.
  bool embedding_root = false;
};

// Mean squared componentwise deviation between two 3-vectors.
double mse(const Eigen::Ref<const Vec3>& a, const Eigen::Ref<const Vec3>& b);

// Supervised term on whichever terminal labels the mode provides.
// Throws MissingLabel when a required label is absent.
double regression_loss(Mode mode, const ForwardOutput& out,
                       const ThreeFrameSet& set);

// |cos(pred pair) - cos(latent pair)| for (start, mid), plus the
// (mid, end) pair in two-label mode.
double consistency_loss(Mode mode, const ForwardOutput& out);

// Numerically stable softmax.
VecX softmax(const Eigen::Ref<const VecX>& v);

// KL(p || q) for strictly positive distributions of equal dimension.
double kl_divergence(const Eigen::Ref<const VecX>& p,
                     const Eigen::Ref<const VecX>& q);

// KL between softmax-mapped prediction vectors: reference against the
// middle prediction.
double divergence_loss(const Eigen::Ref<const Vec3>& reference,
                       const Eigen::Ref<const Vec3>& pred_mid);

// Distance between the end latent and its reconstruction from the
// middle of the head stack.
double embedding_loss(const VecX& latent_end, const VecX& recon,
                      bool root = false);

struct LossBreakdown {
  double regression = 0.0;
  double consistency = 0.0;
  double divergence = 0.0;
  double embedding = 0.0;
  double total = 0.0;  // weighted sum of the terms the mode uses
};

// Raw per-term values plus the weighted total. Two-label mode uses
// regression and consistency; one-label mode adds divergence and
// embedding.
LossBreakdown total_loss(const Model& model, const ForwardOutput& out,
                         const ThreeFrameSet& set, const LossWeights& w,
                         const LossOptions& opts = {});

struct GradientResult {
  LossBreakdown loss;
  ModelGradients grads;
};

// Analytic gradient of the weighted total for one set; shares a single
// forward pass with the returned loss values.
GradientResult gradients(const Model& model, const ThreeFrameSet& set,
                         const LossWeights& w, const LossOptions& opts = {});

}  // namespace gazelabel
