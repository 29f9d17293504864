#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "gazelabel/datamodel.hpp"

namespace gazelabel {

struct ModelConfig {
  int feature_dim = 0;
  int latent_dim = 2048;
  // 0 means "use latent_dim" for the encoder's middle layer.
  int encoder_hidden = 0;
  int head_dim1 = 512;
  int head_dim2 = 1024;
  Mode mode = Mode::TwoLabels;
  // Motion features are signed latent differences by default; this
  // switches them to elementwise magnitudes.
  bool motion_abs = false;
  std::uint64_t seed = 0;
};

int resolved_encoder_hidden(const ModelConfig& cfg);
void validate(const ModelConfig& cfg);

// y = weight * x + bias
struct LinearLayer {
  MatX weight;
  VecX bias;
};

// Declared parameter order; checkpoints and flat indexing follow it.
// The decoder only exists in one-label mode (empty otherwise).
struct ModelParams {
  LinearLayer enc1;      // feature_dim -> encoder_hidden, tanh
  LinearLayer enc2;      // encoder_hidden -> latent_dim, tanh
  LinearLayer head1;     // 3*latent_dim -> head_dim1, tanh
  LinearLayer head2;     // head_dim1 -> head_dim2, tanh
  LinearLayer head_out;  // head_dim2 -> 3, linear
  LinearLayer decoder;   // head_dim2 -> latent_dim, linear
};

using ModelGradients = ModelParams;

struct Model {
  ModelConfig config;
  ModelParams params;
};

// Fresh model with every weight and bias uniform in
// [-1/sqrt(fan_in), 1/sqrt(fan_in)], deterministic per seed.
Model init_model(const ModelConfig& cfg);

// Two tanh layers map a feature vector into the latent space.
VecX encode(const Model& model, const Eigen::Ref<const VecX>& features);

struct MotionFeatures {
  VecX start_to_mid;  // z_start - z_mid
  VecX mid_to_end;    // z_mid - z_end
};

MotionFeatures motion_features(const VecX& latent_start, const VecX& latent_mid,
                               const VecX& latent_end, bool absolute = false);

struct ForwardOutput {
  Vec3 pred_start;
  Vec3 pred_mid;
  Vec3 pred_end;
  VecX latent_start;
  VecX latent_mid;
  VecX latent_end;
  // One-label mode only: the end frame's second head activation and its
  // decoded latent reconstruction.
  std::optional<VecX> penultimate_end;
  std::optional<VecX> latent_end_recon;
};

// Every frame runs through the same encoder and the same head; the
// head input is concat(latent_k, start_to_mid, mid_to_end).
ForwardOutput forward(const Model& model, const ThreeFrameSet& set);

// Normalized middle-frame prediction.
GazeVector predict_label(const Model& model, const ThreeFrameSet& set);

// Full activation record for one forward pass; the loss gradients are
// backpropagated from this.
struct FrameCache {
  VecX input;
  VecX enc1_act;   // tanh of first encoder layer
  VecX latent;     // tanh of second encoder layer
  VecX head_in;
  VecX head1_act;  // tanh
  VecX head2_act;  // tanh
  Vec3 output;
};

struct ForwardCache {
  FrameCache start, mid, end;
  VecX motion_su_raw, motion_ue_raw;  // signed differences
  VecX motion_su, motion_ue;          // after optional abs
  VecX recon;                         // decoder output, one-label mode
};

ForwardCache forward_cached(const Model& model, const ThreeFrameSet& set);
ForwardOutput to_output(const Model& model, const ForwardCache& cache);

// --- parameter plumbing ----------------------------------------------

std::size_t param_count(const ModelParams& p);
double get_param(const ModelParams& p, std::size_t index);
void set_param(ModelParams& p, std::size_t index, double value);
// dst += alpha * g, layer by layer.
void axpy_params(ModelParams& dst, const ModelParams& g, double alpha);
ModelParams zero_like(const ModelParams& p);

// Binary checkpoint: 8-byte magic, version, dimensions, mode and seed,
// then the parameters as little-endian doubles in declared order.
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace gazelabel
