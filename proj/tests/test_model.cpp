#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gazelabel/errors.hpp"
#include "gazelabel/model.hpp"
#include "gazelabel/rng.hpp"
#include "test_support.hpp"

using namespace gazelabel;
using namespace testsupport;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_config(Mode mode = Mode::TwoLabels, bool abs_motion = false) {
  ModelConfig cfg;
  cfg.feature_dim = 4;
  cfg.latent_dim = 3;
  cfg.encoder_hidden = 5;
  cfg.head_dim1 = 6;
  cfg.head_dim2 = 4;
  cfg.mode = mode;
  cfg.motion_abs = abs_motion;
  cfg.seed = 42;
  return cfg;
}

VecX random_vec(Rng& rng, int n) {
  VecX v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

// Scalar re-implementation of one affine+tanh layer.
VecX loop_layer(const LinearLayer& l, const VecX& x, bool squash) {
  VecX out(l.bias.size());
  for (int i = 0; i < out.size(); ++i) {
    double acc = l.bias[i];
    for (int j = 0; j < x.size(); ++j) acc += l.weight(i, j) * x[j];
    out[i] = squash ? std::tanh(acc) : acc;
  }
  return out;
}

VecX loop_encode(const Model& m, const VecX& x) {
  return loop_layer(m.params.enc2, loop_layer(m.params.enc1, x, true), true);
}

double max_abs(const LinearLayer& l) {
  return std::max(l.weight.cwiseAbs().maxCoeff(), l.bias.cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("initialization is seeded, bounded and layer-shaped") {
  const ModelConfig cfg = tiny_config(Mode::OneLabel);
  const Model a = init_model(cfg);
  const Model b = init_model(cfg);
  ModelConfig other = cfg;
  other.seed = 43;
  const Model c = init_model(other);

  CHECK(a.params.enc1.weight == b.params.enc1.weight);
  CHECK(a.params.head_out.bias == b.params.head_out.bias);
  CHECK(a.params.decoder.weight == b.params.decoder.weight);
  CHECK(a.params.enc1.weight != c.params.enc1.weight);

  // Shapes.
  CHECK(a.params.enc1.weight.rows() == 5);
  CHECK(a.params.enc1.weight.cols() == 4);
  CHECK(a.params.enc2.weight.rows() == 3);
  CHECK(a.params.head1.weight.cols() == 9);  // 3 * latent_dim
  CHECK(a.params.head_out.weight.rows() == 3);
  CHECK(a.params.decoder.weight.rows() == 3);
  CHECK(a.params.decoder.weight.cols() == 4);

  // Uniform bounds 1/sqrt(fan_in) per layer.
  CHECK(max_abs(a.params.enc1) <= 1.0 / std::sqrt(4.0));
  CHECK(max_abs(a.params.enc2) <= 1.0 / std::sqrt(5.0));
  CHECK(max_abs(a.params.head1) <= 1.0 / std::sqrt(9.0));
  CHECK(max_abs(a.params.head2) <= 1.0 / std::sqrt(6.0));
  CHECK(max_abs(a.params.head_out) <= 1.0 / std::sqrt(4.0));

  // Two-label mode has no decoder.
  const Model two = init_model(tiny_config());
  CHECK(two.params.decoder.weight.size() == 0);

  // encoder_hidden 0 resolves to latent_dim.
  ModelConfig def = cfg;
  def.encoder_hidden = 0;
  CHECK(resolved_encoder_hidden(def) == def.latent_dim);
  CHECK(init_model(def).params.enc1.weight.rows() == def.latent_dim);
}

TEST_CASE("parameter count matches the closed form") {
  const Model two = init_model(tiny_config());
  // enc1 5*4+5, enc2 3*5+3, head1 6*9+6, head2 4*6+4, out 3*4+3
  CHECK(param_count(two.params) == 25 + 18 + 60 + 28 + 15);
  const Model one = init_model(tiny_config(Mode::OneLabel));
  CHECK(param_count(one.params) == 25 + 18 + 60 + 28 + 15 + (3 * 4 + 3));
}

TEST_CASE("flat parameter access walks every coefficient") {
  Model m = init_model(tiny_config(Mode::OneLabel));
  const std::size_t n = param_count(m.params);
  // Write distinct values through the flat view, read them all back.
  for (std::size_t i = 0; i < n; ++i) set_param(m.params, i, double(i) + 0.5);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(get_param(m.params, i) == double(i) + 0.5);
  }
  CHECK_THROWS_AS(get_param(m.params, n), DimensionMismatch);

  ModelGradients g = zero_like(m.params);
  CHECK(param_count(g) == n);
  for (std::size_t i = 0; i < n; ++i) CHECK(get_param(g, i) == 0.0);
  axpy_params(g, m.params, 2.0);
  CHECK(get_param(g, 3) == 7.0);  // 2 * 3.5
}

TEST_CASE("forward pass agrees with a scalar-loop reference") {
  for (Mode mode : {Mode::TwoLabels, Mode::OneLabel}) {
    for (bool abs_motion : {false, true}) {
      const Model m = init_model(tiny_config(mode, abs_motion));
      Rng rng(7);
      for (int trial = 0; trial < 20; ++trial) {
        const VecX xs = random_vec(rng, 4);
        const VecX xm = random_vec(rng, 4);
        const VecX xe = random_vec(rng, 4);
        const ThreeFrameSet set = make_set("t", xs, xm, xe);
        const ForwardOutput out = forward(m, set);

        const VecX zs = loop_encode(m, xs);
        const VecX zm = loop_encode(m, xm);
        const VecX ze = loop_encode(m, xe);
        CHECK((out.latent_start - zs).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((out.latent_mid - zm).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((out.latent_end - ze).cwiseAbs().maxCoeff() < 1e-14);

        VecX msu = zs - zm, mue = zm - ze;
        if (abs_motion) {
          msu = msu.cwiseAbs();
          mue = mue.cwiseAbs();
        }
        auto head = [&](const VecX& z) {
          VecX in(9);
          in << z, msu, mue;
          const VecX h1 = loop_layer(m.params.head1, in, true);
          const VecX h2 = loop_layer(m.params.head2, h1, true);
          return std::pair<VecX, Vec3>(
              h2, Vec3(loop_layer(m.params.head_out, h2, false)));
        };
        CHECK((out.pred_start - head(zs).second).cwiseAbs().maxCoeff() < 1e-13);
        CHECK((out.pred_mid - head(zm).second).cwiseAbs().maxCoeff() < 1e-13);
        CHECK((out.pred_end - head(ze).second).cwiseAbs().maxCoeff() < 1e-13);

        if (mode == Mode::OneLabel) {
          REQUIRE(out.latent_end_recon.has_value());
          const VecX recon =
              loop_layer(m.params.decoder, head(ze).first, false);
          CHECK((*out.latent_end_recon - recon).cwiseAbs().maxCoeff() < 1e-13);
          CHECK((*out.penultimate_end - head(ze).first).cwiseAbs().maxCoeff() <
                1e-14);
        } else {
          CHECK_FALSE(out.latent_end_recon.has_value());
        }
      }
    }
  }
}

TEST_CASE("identical frames collapse the motion features") {
  const Model m = init_model(tiny_config(Mode::TwoLabels, true));
  Rng rng(3);
  const VecX x = random_vec(rng, 4);
  const ForwardOutput out = forward(m, make_set("same", x, x, x));
  CHECK(out.pred_start == out.pred_mid);
  CHECK(out.pred_mid == out.pred_end);

  MotionFeatures mf = motion_features(out.latent_start, out.latent_mid,
                                      out.latent_end);
  CHECK(mf.start_to_mid.cwiseAbs().maxCoeff() == 0.0);
  CHECK(mf.mid_to_end.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("motion features subtract in order and switch to magnitudes") {
  VecX zs(2), zm(2), ze(2);
  zs << 1.0, -2.0;
  zm << 0.5, 1.0;
  ze << 2.0, 0.0;
  const MotionFeatures signedm = motion_features(zs, zm, ze, false);
  CHECK(signedm.start_to_mid == (zs - zm));
  CHECK(signedm.mid_to_end == (zm - ze));
  const MotionFeatures absm = motion_features(zs, zm, ze, true);
  CHECK(absm.start_to_mid == (zs - zm).cwiseAbs().eval());
  CHECK(absm.mid_to_end == (zm - ze).cwiseAbs().eval());
}

TEST_CASE("a linear gaze mapping installs to sub-millinorm accuracy") {
  SynthConfig cfg;
  cfg.n_identities = 4;
  cfg.trajectories_per_identity = 3;
  cfg.noise_sigma = 0.0;
  const auto sets = sets_from_trajectories(synth_generate(cfg));
  const LinearFit fit = fit_linear_oracle(sets);

  ModelConfig mc;
  mc.feature_dim = cfg.feature_dim;
  mc.latent_dim = 8;
  mc.encoder_hidden = 8;
  mc.head_dim1 = 8;
  mc.head_dim2 = 8;
  Model m = init_model(mc);
  install_linear_oracle(m, fit);

  double worst = 0.0;
  for (const ThreeFrameSet& s : sets) {
    const ForwardOutput out = forward(m, s);
    worst = std::max(worst,
                     (out.pred_mid - *s.unlabelled.label).cwiseAbs().maxCoeff());
    const GazeVector g = predict_label(m, s);
    CHECK(g.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("feature width mismatches are reported with the frame") {
  const Model m = init_model(tiny_config());
  Rng rng(5);
  ThreeFrameSet set = make_set("bad", random_vec(rng, 4), random_vec(rng, 5),
                               random_vec(rng, 4));
  CHECK_THROWS_WITH_AS(forward(m, set),
                       doctest::Contains("bad_m"), DimensionMismatch);
  CHECK_THROWS_AS(encode(m, random_vec(rng, 3)), DimensionMismatch);
}

TEST_CASE("model config validation") {
  ModelConfig cfg = tiny_config();
  CHECK_NOTHROW(validate(cfg));
  cfg.feature_dim = 0;
  CHECK_THROWS_AS(validate(cfg), InvalidConfig);
  cfg = tiny_config();
  cfg.latent_dim = 0;
  CHECK_THROWS_AS(validate(cfg), InvalidConfig);
  cfg = tiny_config();
  cfg.head_dim2 = -1;
  CHECK_THROWS_AS(validate(cfg), InvalidConfig);
  cfg = tiny_config();
  cfg.encoder_hidden = -2;
  CHECK_THROWS_AS(validate(cfg), InvalidConfig);
}

TEST_CASE("checkpoints round trip bitwise") {
  const fs::path dir = scratch_dir("ckpt");
  for (Mode mode : {Mode::TwoLabels, Mode::OneLabel}) {
    const Model m = init_model(tiny_config(mode, mode == Mode::OneLabel));
    const fs::path p = dir / (mode == Mode::TwoLabels ? "two.ckpt" : "one.ckpt");
    save_checkpoint(p, m);
    const Model back = load_checkpoint(p);
    CHECK(back.config.feature_dim == m.config.feature_dim);
    CHECK(back.config.latent_dim == m.config.latent_dim);
    CHECK(back.config.head_dim1 == m.config.head_dim1);
    CHECK(back.config.head_dim2 == m.config.head_dim2);
    CHECK(back.config.mode == m.config.mode);
    CHECK(back.config.motion_abs == m.config.motion_abs);
    CHECK(back.config.seed == m.config.seed);
    const std::size_t n = param_count(m.params);
    REQUIRE(param_count(back.params) == n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(get_param(back.params, i) == get_param(m.params, i));
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("checkpoint loader rejects damage") {
  const fs::path dir = scratch_dir("ckpt_bad");
  const Model m = init_model(tiny_config());
  const fs::path p = dir / "m.ckpt";
  save_checkpoint(p, m);

  auto mutate = [&](const fs::path& dst, auto fn) {
    std::ifstream in(p, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    fn(bytes);
    std::ofstream out(dst, std::ios::binary);
    out << bytes;
  };

  mutate(dir / "magic.ckpt", [](std::string& b) { b[0] = 'X'; });
  CHECK_THROWS_AS(load_checkpoint(dir / "magic.ckpt"), IoError);
  mutate(dir / "short.ckpt", [](std::string& b) { b.resize(b.size() - 9); });
  CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), IoError);
  mutate(dir / "long.ckpt", [](std::string& b) { b += '\0'; });
  CHECK_THROWS_AS(load_checkpoint(dir / "long.ckpt"), IoError);
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.ckpt"), IoError);
  fs::remove_all(dir);
}
