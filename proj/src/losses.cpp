#include "gazelabel/losses.hpp"

#include <cmath>

#include "gazelabel/errors.hpp"
#include "gazelabel/geometry.hpp"

namespace gazelabel {
namespace {

const GazeVector& require_label(const FrameRecord& frame) {
  if (!frame.label) {
    throw MissingLabel("frame '" + frame.frame_id + "' has no label");
  }
  return *frame.label;
}

// d cos(a, b) / d a = (b_hat - cos * a_hat) / |a|. Symmetric in the
// other argument.
Vec3 cosine_grad_wrt_first(const Vec3& a, const Vec3& b, double cos_ab) {
  const double na = a.norm();
  const double nb = b.norm();
  return (b / nb - cos_ab * (a / na)) / na;
}

VecX cosine_grad_wrt_first(const VecX& a, const VecX& b, double cos_ab) {
  const double na = a.norm();
  const double nb = b.norm();
  return ((b / nb) - cos_ab * (a / na)) / na;
}

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

struct ConsistencyPair {
  double value = 0.0;  // |cos(pred) - cos(latent)|
  double outer = 0.0;  // sign(cos(pred) - cos(latent))
  double cos_pred = 0.0;
  double cos_latent = 0.0;
};

ConsistencyPair consistency_pair(const Vec3& pa, const Vec3& pb,
                                 const VecX& za, const VecX& zb) {
  ConsistencyPair pair;
  pair.cos_pred = cosine_similarity(pa, pb);
  pair.cos_latent = cosine_similarity(za, zb);
  const double diff = pair.cos_pred - pair.cos_latent;
  pair.value = std::abs(diff);
  pair.outer = sign_of(diff);
  return pair;
}

LossBreakdown breakdown_from(const Model& model, const ForwardOutput& out,
                             const ThreeFrameSet& set, const LossWeights& w,
                             const LossOptions& opts) {
  const Mode mode = model.config.mode;
  LossBreakdown b;
  b.regression = regression_loss(mode, out, set);
  b.consistency = consistency_loss(mode, out);
  b.total = w.regression * b.regression + w.consistency * b.consistency;
  if (mode == Mode::OneLabel) {
    const Vec3 reference =
        opts.kl_true_start ? require_label(set.start) : out.pred_start;
    b.divergence = divergence_loss(reference, out.pred_mid);
    b.embedding = embedding_loss(out.latent_end, *out.latent_end_recon,
                                 opts.embedding_root);
    b.total += w.divergence * b.divergence + w.embedding * b.embedding;
  }
  return b;
}

}  // namespace

double mse(const Eigen::Ref<const Vec3>& a, const Eigen::Ref<const Vec3>& b) {
  return (a - b).squaredNorm() / 3.0;
}

double regression_loss(Mode mode, const ForwardOutput& out,
                       const ThreeFrameSet& set) {
  double loss = mse(out.pred_start, require_label(set.start));
  if (mode == Mode::TwoLabels) {
    loss += mse(out.pred_end, require_label(set.end));
  }
  return loss;
}

double consistency_loss(Mode mode, const ForwardOutput& out) {
  double loss = consistency_pair(out.pred_start, out.pred_mid,
                                 out.latent_start, out.latent_mid)
                    .value;
  if (mode == Mode::TwoLabels) {
    loss += consistency_pair(out.pred_mid, out.pred_end, out.latent_mid,
                             out.latent_end)
                .value;
  }
  return loss;
}

VecX softmax(const Eigen::Ref<const VecX>& v) {
  if (v.size() == 0) throw EmptyInput("softmax of empty vector");
  const VecX shifted = v.array() - v.maxCoeff();
  VecX e = shifted.array().exp();
  return e / e.sum();
}

double kl_divergence(const Eigen::Ref<const VecX>& p,
                     const Eigen::Ref<const VecX>& q) {
  if (p.size() != q.size()) {
    throw DimensionMismatch("kl_divergence: distribution sizes differ");
  }
  if (p.size() == 0) throw EmptyInput("kl_divergence of empty distributions");
  if (p.minCoeff() <= 0.0 || q.minCoeff() <= 0.0) {
    throw InvalidConfig("kl_divergence requires strictly positive entries");
  }
  return (p.array() * (p.array().log() - q.array().log())).sum();
}

double divergence_loss(const Eigen::Ref<const Vec3>& reference,
                       const Eigen::Ref<const Vec3>& pred_mid) {
  const VecX p = softmax(reference);
  const VecX q = softmax(pred_mid);
  return kl_divergence(p, q);
}

double embedding_loss(const VecX& latent_end, const VecX& recon, bool root) {
  if (latent_end.size() != recon.size()) {
    throw DimensionMismatch("embedding_loss: latent sizes differ");
  }
  const double sq = (latent_end - recon).squaredNorm();
  return root ? std::sqrt(sq) : sq;
}

LossBreakdown total_loss(const Model& model, const ForwardOutput& out,
                         const ThreeFrameSet& set, const LossWeights& w,
                         const LossOptions& opts) {
  if (model.config.mode == Mode::OneLabel && !out.latent_end_recon) {
    throw InvalidConfig("forward output lacks the end-latent reconstruction");
  }
  return breakdown_from(model, out, set, w, opts);
}

GradientResult gradients(const Model& model, const ThreeFrameSet& set,
                         const LossWeights& w, const LossOptions& opts) {
  const Mode mode = model.config.mode;
  const ForwardCache cache = forward_cached(model, set);
  const ForwardOutput out = to_output(model, cache);

  GradientResult result;
  result.loss = breakdown_from(model, out, set, w, opts);
  result.grads = zero_like(model.params);
  ModelGradients& g = result.grads;

  const int d = static_cast<int>(cache.start.latent.size());
  const FrameCache* frames[3] = {&cache.start, &cache.mid, &cache.end};

  // Adjoints on the three head outputs and on the three latents; the
  // latter collect loss-level terms first and head/motion terms later.
  Vec3 gy[3] = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  VecX gz[3] = {VecX::Zero(d), VecX::Zero(d), VecX::Zero(d)};

  // Regression.
  gy[0] += w.regression * (2.0 / 3.0) *
           (out.pred_start - require_label(set.start));
  if (mode == Mode::TwoLabels) {
    gy[2] += w.regression * (2.0 / 3.0) *
             (out.pred_end - require_label(set.end));
  }

  // Consistency: the absolute difference routes sign-scaled cosine
  // gradients to predictions (+) and latents (-).
  {
    const ConsistencyPair su = consistency_pair(
        out.pred_start, out.pred_mid, out.latent_start, out.latent_mid);
    const double c = w.consistency * su.outer;
    if (c != 0.0) {
      gy[0] += c * cosine_grad_wrt_first(out.pred_start, out.pred_mid,
                                         su.cos_pred);
      gy[1] += c * cosine_grad_wrt_first(out.pred_mid, out.pred_start,
                                         su.cos_pred);
      gz[0] -= c * cosine_grad_wrt_first(out.latent_start, out.latent_mid,
                                         su.cos_latent);
      gz[1] -= c * cosine_grad_wrt_first(out.latent_mid, out.latent_start,
                                         su.cos_latent);
    }
    if (mode == Mode::TwoLabels) {
      const ConsistencyPair ue = consistency_pair(
          out.pred_mid, out.pred_end, out.latent_mid, out.latent_end);
      const double c2 = w.consistency * ue.outer;
      if (c2 != 0.0) {
        gy[1] += c2 * cosine_grad_wrt_first(out.pred_mid, out.pred_end,
                                            ue.cos_pred);
        gy[2] += c2 * cosine_grad_wrt_first(out.pred_end, out.pred_mid,
                                            ue.cos_pred);
        gz[1] -= c2 * cosine_grad_wrt_first(out.latent_mid, out.latent_end,
                                            ue.cos_latent);
        gz[2] -= c2 * cosine_grad_wrt_first(out.latent_end, out.latent_mid,
                                            ue.cos_latent);
      }
    }
  }

  // Divergence and embedding only exist in one-label mode.
  VecX g_recon;
  if (mode == Mode::OneLabel) {
    const Vec3 reference =
        opts.kl_true_start ? require_label(set.start) : out.pred_start;
    const VecX p = softmax(reference);
    const VecX q = softmax(out.pred_mid);
    // d KL / d (mid logits) = q - p.
    gy[1] += w.divergence * (q - p);
    if (!opts.kl_true_start) {
      // d KL / d (reference logits) = p .* s - p (p . s), s = ln p - ln q.
      const VecX s = (p.array().log() - q.array().log()).matrix();
      const double ps = p.dot(s);
      gy[0] += w.divergence *
               ((p.array() * s.array()).matrix() - ps * p).eval();
    }

    const VecX diff = out.latent_end - *out.latent_end_recon;
    if (opts.embedding_root) {
      const double dist = diff.norm();
      if (dist > 0.0) {
        g_recon = -(w.embedding / dist) * diff;
        gz[2] += (w.embedding / dist) * diff;
      } else {
        g_recon = VecX::Zero(d);
      }
    } else {
      g_recon = -2.0 * w.embedding * diff;
      gz[2] += 2.0 * w.embedding * diff;
    }
  }

  // Decoder: recon = W h2_end + b.
  VecX extra_h2_end;
  if (mode == Mode::OneLabel) {
    g.decoder.weight += g_recon * cache.end.head2_act.transpose();
    g.decoder.bias += g_recon;
    extra_h2_end = model.params.decoder.weight.transpose() * g_recon;
  }

  // Head backprop for each frame; collects the split adjoints on the
  // head input: latent part and the two motion parts.
  VecX g_msu = VecX::Zero(d);
  VecX g_mue = VecX::Zero(d);
  for (int k = 0; k < 3; ++k) {
    const FrameCache& f = *frames[k];
    VecX gh2 = model.params.head_out.weight.transpose() * gy[k];
    if (k == 2 && extra_h2_end.size() > 0) gh2 += extra_h2_end;
    g.head_out.weight += gy[k] * f.head2_act.transpose();
    g.head_out.bias += gy[k];

    const VecX a2 =
        (gh2.array() * (1.0 - f.head2_act.array().square())).matrix();
    g.head2.weight += a2 * f.head1_act.transpose();
    g.head2.bias += a2;

    const VecX gh1 = model.params.head2.weight.transpose() * a2;
    const VecX a1 =
        (gh1.array() * (1.0 - f.head1_act.array().square())).matrix();
    g.head1.weight += a1 * f.head_in.transpose();
    g.head1.bias += a1;

    const VecX gin = model.params.head1.weight.transpose() * a1;
    gz[k] += gin.head(d);
    g_msu += gin.segment(d, d);
    g_mue += gin.tail(d);
  }

  // Motion features: m_su = z_s - z_mid, m_ue = z_mid - z_e, optionally
  // passed through |.| (whose derivative is the elementwise sign of the
  // raw difference, zero at ties).
  if (model.config.motion_abs) {
    g_msu = (g_msu.array() * cache.motion_su_raw.array().unaryExpr(
                                 [](double x) { return sign_of(x); }))
                .matrix();
    g_mue = (g_mue.array() * cache.motion_ue_raw.array().unaryExpr(
                                 [](double x) { return sign_of(x); }))
                .matrix();
  }
  gz[0] += g_msu;
  gz[1] -= g_msu;
  gz[1] += g_mue;
  gz[2] -= g_mue;

  // Encoder backprop per frame with the fully accumulated latent
  // adjoints.
  for (int k = 0; k < 3; ++k) {
    const FrameCache& f = *frames[k];
    const VecX e2 =
        (gz[k].array() * (1.0 - f.latent.array().square())).matrix();
    g.enc2.weight += e2 * f.enc1_act.transpose();
    g.enc2.bias += e2;

    const VecX gt1 = model.params.enc2.weight.transpose() * e2;
    const VecX e1 =
        (gt1.array() * (1.0 - f.enc1_act.array().square())).matrix();
    g.enc1.weight += e1 * f.input.transpose();
    g.enc1.bias += e1;
  }

  return result;
}

}  // namespace gazelabel
