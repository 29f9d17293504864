#include "gazelabel/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "gazelabel/rng.hpp"

namespace gazelabel {

namespace {

constexpr char kMagic[8] = {'G', 'Z', 'L', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

std::vector<const LinearLayer*> layer_list(const ModelParams& p) {
  return {&p.enc1, &p.enc2, &p.head1, &p.head2, &p.head_out, &p.decoder};
}

std::vector<LinearLayer*> layer_list(ModelParams& p) {
  return {&p.enc1, &p.enc2, &p.head1, &p.head2, &p.head_out, &p.decoder};
}

LinearLayer init_layer(int out_dim, int in_dim, Rng rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  LinearLayer l;
  l.weight.resize(out_dim, in_dim);
  for (int r = 0; r < out_dim; ++r)
    for (int c = 0; c < in_dim; ++c) l.weight(r, c) = rng.uniform(-bound, bound);
  l.bias.resize(out_dim);
  for (int r = 0; r < out_dim; ++r) l.bias[r] = rng.uniform(-bound, bound);
  return l;
}

void check_features(const Model& model, const FrameRecord& f) {
  if (f.features.size() != model.config.feature_dim) {
    throw DimensionMismatch("frame " + f.frame_id + " has " +
                            std::to_string(f.features.size()) +
                            " features, model expects " +
                            std::to_string(model.config.feature_dim));
  }
}

FrameCache run_frame(const Model& m, const VecX& x) {
  FrameCache c;
  c.input = x;
  c.enc1_act = (m.params.enc1.weight * x + m.params.enc1.bias).array().tanh();
  c.latent =
      (m.params.enc2.weight * c.enc1_act + m.params.enc2.bias).array().tanh();
  return c;
}

void run_head(const Model& m, FrameCache& c, const VecX& motion_su,
              const VecX& motion_ue) {
  const Eigen::Index d = c.latent.size();
  c.head_in.resize(3 * d);
  c.head_in << c.latent, motion_su, motion_ue;
  c.head1_act =
      (m.params.head1.weight * c.head_in + m.params.head1.bias).array().tanh();
  c.head2_act =
      (m.params.head2.weight * c.head1_act + m.params.head2.bias).array().tanh();
  c.output = m.params.head_out.weight * c.head2_act + m.params.head_out.bias;
}

template <typename Fn>
void write_raw(std::ofstream& out, const Fn& fail, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!out) fail();
}

template <typename Fn>
void read_raw(std::ifstream& in, const Fn& fail, void* p, std::size_t n) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!in) fail();
}

}  // namespace

int resolved_encoder_hidden(const ModelConfig& cfg) {
  return cfg.encoder_hidden > 0 ? cfg.encoder_hidden : cfg.latent_dim;
}

void validate(const ModelConfig& cfg) {
  if (cfg.feature_dim < 1) throw InvalidConfig("feature_dim must be >= 1");
  if (cfg.latent_dim < 1) throw InvalidConfig("latent_dim must be >= 1");
  if (cfg.encoder_hidden < 0) throw InvalidConfig("encoder_hidden must be >= 0");
  if (cfg.head_dim1 < 1 || cfg.head_dim2 < 1) {
    throw InvalidConfig("head dims must be >= 1");
  }
}

Model init_model(const ModelConfig& cfg) {
  validate(cfg);
  const int eh = resolved_encoder_hidden(cfg);
  Model m;
  m.config = cfg;
  Rng rng(cfg.seed);
  m.params.enc1 = init_layer(eh, cfg.feature_dim, rng.fork(1));
  m.params.enc2 = init_layer(cfg.latent_dim, eh, rng.fork(2));
  m.params.head1 = init_layer(cfg.head_dim1, 3 * cfg.latent_dim, rng.fork(3));
  m.params.head2 = init_layer(cfg.head_dim2, cfg.head_dim1, rng.fork(4));
  m.params.head_out = init_layer(3, cfg.head_dim2, rng.fork(5));
  if (cfg.mode == Mode::OneLabel) {
    m.params.decoder = init_layer(cfg.latent_dim, cfg.head_dim2, rng.fork(6));
  }
  return m;
}

VecX encode(const Model& model, const Eigen::Ref<const VecX>& features) {
  if (features.size() != model.config.feature_dim) {
    throw DimensionMismatch("encode: got " + std::to_string(features.size()) +
                            " features, model expects " +
                            std::to_string(model.config.feature_dim));
  }
  return run_frame(model, features).latent;
}

MotionFeatures motion_features(const VecX& latent_start, const VecX& latent_mid,
                               const VecX& latent_end, bool absolute) {
  if (latent_start.size() != latent_mid.size() ||
      latent_mid.size() != latent_end.size()) {
    throw DimensionMismatch("motion_features: latent sizes differ");
  }
  MotionFeatures m;
  m.start_to_mid = latent_start - latent_mid;
  m.mid_to_end = latent_mid - latent_end;
  if (absolute) {
    m.start_to_mid = m.start_to_mid.cwiseAbs();
    m.mid_to_end = m.mid_to_end.cwiseAbs();
  }
  return m;
}

ForwardCache forward_cached(const Model& model, const ThreeFrameSet& set) {
  check_features(model, set.start);
  check_features(model, set.unlabelled);
  check_features(model, set.end);

  ForwardCache c;
  c.start = run_frame(model, set.start.features);
  c.mid = run_frame(model, set.unlabelled.features);
  c.end = run_frame(model, set.end.features);

  c.motion_su_raw = c.start.latent - c.mid.latent;
  c.motion_ue_raw = c.mid.latent - c.end.latent;
  if (model.config.motion_abs) {
    c.motion_su = c.motion_su_raw.cwiseAbs();
    c.motion_ue = c.motion_ue_raw.cwiseAbs();
  } else {
    c.motion_su = c.motion_su_raw;
    c.motion_ue = c.motion_ue_raw;
  }

  run_head(model, c.start, c.motion_su, c.motion_ue);
  run_head(model, c.mid, c.motion_su, c.motion_ue);
  run_head(model, c.end, c.motion_su, c.motion_ue);

  if (model.config.mode == Mode::OneLabel) {
    c.recon = model.params.decoder.weight * c.end.head2_act +
              model.params.decoder.bias;
  }
  return c;
}

ForwardOutput to_output(const Model& model, const ForwardCache& c) {
  ForwardOutput o;
  o.pred_start = c.start.output;
  o.pred_mid = c.mid.output;
  o.pred_end = c.end.output;
  o.latent_start = c.start.latent;
  o.latent_mid = c.mid.latent;
  o.latent_end = c.end.latent;
  if (model.config.mode == Mode::OneLabel) {
    o.penultimate_end = c.end.head2_act;
    o.latent_end_recon = c.recon;
  }
  return o;
}

ForwardOutput forward(const Model& model, const ThreeFrameSet& set) {
  return to_output(model, forward_cached(model, set));
}

GazeVector predict_label(const Model& model, const ThreeFrameSet& set) {
  return normalize(forward_cached(model, set).mid.output);
}

std::size_t param_count(const ModelParams& p) {
  std::size_t n = 0;
  for (const LinearLayer* l : layer_list(p)) {
    n += static_cast<std::size_t>(l->weight.size() + l->bias.size());
  }
  return n;
}

double get_param(const ModelParams& p, std::size_t index) {
  for (const LinearLayer* l : layer_list(p)) {
    const std::size_t w = static_cast<std::size_t>(l->weight.size());
    if (index < w) return l->weight.data()[index];
    index -= w;
    const std::size_t b = static_cast<std::size_t>(l->bias.size());
    if (index < b) return l->bias.data()[index];
    index -= b;
  }
  throw DimensionMismatch("parameter index out of range");
}

void set_param(ModelParams& p, std::size_t index, double value) {
  for (LinearLayer* l : layer_list(p)) {
    const std::size_t w = static_cast<std::size_t>(l->weight.size());
    if (index < w) {
      l->weight.data()[index] = value;
      return;
    }
    index -= w;
    const std::size_t b = static_cast<std::size_t>(l->bias.size());
    if (index < b) {
      l->bias.data()[index] = value;
      return;
    }
    index -= b;
  }
  throw DimensionMismatch("parameter index out of range");
}

void axpy_params(ModelParams& dst, const ModelParams& g, double alpha) {
  auto d = layer_list(dst);
  auto s = layer_list(const_cast<ModelParams&>(g));
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i]->weight.size() != s[i]->weight.size()) {
      throw DimensionMismatch("parameter update shape mismatch");
    }
    d[i]->weight += alpha * s[i]->weight;
    d[i]->bias += alpha * s[i]->bias;
  }
}

ModelParams zero_like(const ModelParams& p) {
  ModelParams z;
  auto d = layer_list(z);
  auto s = layer_list(const_cast<ModelParams&>(p));
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i]->weight = MatX::Zero(s[i]->weight.rows(), s[i]->weight.cols());
    d[i]->bias = VecX::Zero(s[i]->bias.size());
  }
  return z;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  auto fail = [&] { throw IoError("short write on " + path.string()); };

  write_raw(out, fail, kMagic, sizeof kMagic);
  const std::uint32_t header[6] = {
      kVersion,
      static_cast<std::uint32_t>(model.config.feature_dim),
      static_cast<std::uint32_t>(model.config.latent_dim),
      static_cast<std::uint32_t>(resolved_encoder_hidden(model.config)),
      static_cast<std::uint32_t>(model.config.head_dim1),
      static_cast<std::uint32_t>(model.config.head_dim2)};
  write_raw(out, fail, header, sizeof header);
  const std::uint8_t mode = model.config.mode == Mode::OneLabel ? 1 : 0;
  const std::uint8_t motion_abs = model.config.motion_abs ? 1 : 0;
  const std::uint8_t pad[2] = {0, 0};
  write_raw(out, fail, &mode, 1);
  write_raw(out, fail, &motion_abs, 1);
  write_raw(out, fail, pad, 2);
  const std::uint64_t seed = model.config.seed;
  write_raw(out, fail, &seed, 8);

  for (const LinearLayer* l : layer_list(model.params)) {
    write_raw(out, fail, l->weight.data(),
              static_cast<std::size_t>(l->weight.size()) * sizeof(double));
    write_raw(out, fail, l->bias.data(),
              static_cast<std::size_t>(l->bias.size()) * sizeof(double));
  }
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  auto fail = [&] { throw IoError("truncated checkpoint " + path.string()); };

  char magic[8];
  read_raw(in, fail, magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw IoError(path.string() + " is not a checkpoint file");
  }
  std::uint32_t header[6];
  read_raw(in, fail, header, sizeof header);
  if (header[0] != kVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(header[0]));
  }
  std::uint8_t mode, motion_abs, pad[2];
  read_raw(in, fail, &mode, 1);
  read_raw(in, fail, &motion_abs, 1);
  read_raw(in, fail, pad, 2);
  std::uint64_t seed;
  read_raw(in, fail, &seed, 8);

  ModelConfig cfg;
  cfg.feature_dim = static_cast<int>(header[1]);
  cfg.latent_dim = static_cast<int>(header[2]);
  cfg.encoder_hidden = static_cast<int>(header[3]);
  cfg.head_dim1 = static_cast<int>(header[4]);
  cfg.head_dim2 = static_cast<int>(header[5]);
  cfg.mode = mode ? Mode::OneLabel : Mode::TwoLabels;
  cfg.motion_abs = motion_abs != 0;
  cfg.seed = seed;

  Model m = init_model(cfg);
  for (LinearLayer* l : layer_list(m.params)) {
    read_raw(in, fail, l->weight.data(),
             static_cast<std::size_t>(l->weight.size()) * sizeof(double));
    read_raw(in, fail, l->bias.data(),
             static_cast<std::size_t>(l->bias.size()) * sizeof(double));
  }
  // Reject trailing garbage so truncation and corruption both surface.
  char extra;
  in.read(&extra, 1);
  if (!in.eof()) throw IoError(path.string() + " has trailing bytes");
  return m;
}

}  // namespace gazelabel
