// Metric definitions on raw vector lists, report assembly, model
// evaluation against a closed-form oracle, cross-dataset scoring with
// feature adapters, and the loss-weight ablation harness.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "gazelabel/errors.hpp"
#include "gazelabel/metrics.hpp"
#include "gazelabel/mining.hpp"
#include "gazelabel/model.hpp"
#include "gazelabel/rng.hpp"
#include "gazelabel/trainer.hpp"
#include "test_support.hpp"

using namespace gazelabel;
using testsupport::sets_from_trajectories;

namespace {

std::vector<ThreeFrameSet> synth_sets(const SynthConfig& sc) {
  std::vector<ThreeFrameSet> sets;
  for (const Trajectory& t : synth_generate(sc)) {
    auto mined = mine_ordered_sets(t);
    sets.insert(sets.end(), mined.begin(), mined.end());
  }
  return sets;
}

ModelConfig small_model_config(int feature_dim, int width,
                               std::uint64_t seed) {
  ModelConfig mc;
  mc.feature_dim = feature_dim;
  mc.latent_dim = width;
  mc.encoder_hidden = width;
  mc.head_dim1 = width;
  mc.head_dim2 = width;
  mc.seed = seed;
  return mc;
}

Vec3 random_unit(Rng& rng) {
  Vec3 v(rng.normal(), rng.normal(), rng.normal());
  return v.normalized();
}

}  // namespace

TEST_CASE("mae over raw vectors") {
  std::vector<Vec3> a = {Vec3(0.1, -0.2, 0.94), Vec3(0, 1, 0)};
  CHECK(mae_metric(a, a) == 0.0);

  // The metric works on the vectors as given; no normalization sneaks in.
  CHECK(mae_metric({Vec3::Zero()}, {Vec3::Ones()}) == 1.0);

  std::vector<Vec3> preds = {Vec3(0.2, 0.2, 0.2), Vec3(0.4, 0.4, 0.4)};
  std::vector<Vec3> zeros = {Vec3::Zero(), Vec3::Zero()};
  CHECK(mae_metric(preds, zeros) == doctest::Approx(0.3).epsilon(1e-15));

  CHECK_THROWS_AS(mae_metric({}, {}), EmptyInput);
  CHECK_THROWS_AS(mae_metric(a, {Vec3::Zero()}), DimensionMismatch);
}

TEST_CASE("pearson correlation on flattened components") {
  std::vector<Vec3> gts = {Vec3(0.1, 0.5, -0.3), Vec3(-0.2, 0.8, 0.4),
                           Vec3(0.9, -0.1, 0.2)};
  CHECK(cc_metric(gts, gts) == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<Vec3> neg;
  for (const Vec3& g : gts) neg.push_back(-g);
  CHECK(cc_metric(neg, gts) == doctest::Approx(-1.0).epsilon(1e-12));

  // Positive affine maps leave the correlation at exactly 1.
  std::vector<Vec3> affine;
  for (const Vec3& g : gts) affine.push_back(2.5 * g + Vec3::Ones() * 0.7);
  CHECK(cc_metric(affine, gts) == doctest::Approx(1.0).epsilon(1e-12));

  // A single sample never has enough values for a correlation.
  CHECK_THROWS_AS(cc_metric({Vec3(1, 2, 3)}, {Vec3(4, 5, 6)}),
                  UndefinedCorrelation);
  // Zero variance on one side is just as undefined.
  std::vector<Vec3> flat = {Vec3::Ones(), Vec3::Ones()};
  std::vector<Vec3> varied = {gts[0], gts[1]};
  CHECK_THROWS_AS(cc_metric(flat, varied), UndefinedCorrelation);
}

TEST_CASE("angular metric in degrees") {
  // Self-angle is zero up to the acos rounding of the normalization.
  std::vector<Vec3> x = {Vec3(1, 0, 0), Vec3(0, 0.5, 0.5)};
  CHECK(angular_metric(x, x) < 1e-6);

  std::vector<Vec3> ortho = {Vec3(0, 1, 0), Vec3(1, 0, 0)};
  std::vector<Vec3> other = {Vec3(0, 0, 1), Vec3(0, 1, 0)};
  CHECK(angular_metric(ortho, other) == doctest::Approx(90.0));

  // One aligned pair plus one orthogonal pair averages to 45.
  std::vector<Vec3> p = {Vec3(1, 0, 0), Vec3(1, 0, 0)};
  std::vector<Vec3> q = {Vec3(1, 0, 0), Vec3(0, 1, 0)};
  CHECK(angular_metric(p, q) == doctest::Approx(45.0));

  // Magnitudes do not matter.
  CHECK(angular_metric({Vec3(0.2, 0.3, -0.1)}, {Vec3(2, 3, -1)}) ==
        doctest::Approx(0.0).epsilon(1e-9));

  CHECK_THROWS_AS(angular_metric({}, {}), EmptyInput);
}

TEST_CASE("report bounds and permutation invariance") {
  Rng rng(17);
  std::vector<Vec3> preds, targets;
  for (int i = 0; i < 50; ++i) {
    preds.push_back(random_unit(rng));
    targets.push_back(random_unit(rng));
  }
  EvalReport rep = report_from_pairs(preds, targets);
  CHECK(rep.n == 50);
  CHECK(rep.mae >= 0.0);
  REQUIRE(rep.cc.has_value());
  CHECK(*rep.cc >= -1.0);
  CHECK(*rep.cc <= 1.0);
  CHECK(rep.angular_error_deg >= 0.0);
  CHECK(rep.angular_error_deg <= 180.0);

  std::vector<Vec3> rp(preds.rbegin(), preds.rend());
  std::vector<Vec3> rt(targets.rbegin(), targets.rend());
  EvalReport rev = report_from_pairs(rp, rt);
  CHECK(rev.mae == doctest::Approx(rep.mae).epsilon(1e-13));
  CHECK(*rev.cc == doctest::Approx(*rep.cc).epsilon(1e-13));
  CHECK(rev.angular_error_deg ==
        doctest::Approx(rep.angular_error_deg).epsilon(1e-13));

  // A single pair has no correlation but still reports the other two.
  EvalReport single = report_from_pairs({preds[0]}, {targets[0]});
  CHECK(single.n == 1);
  CHECK_FALSE(single.cc.has_value());
  CHECK(std::isfinite(single.mae));
  CHECK(std::isfinite(single.angular_error_deg));
}

TEST_CASE("oracle model evaluates almost perfectly on noiseless data") {
  SynthConfig sc;
  sc.n_identities = 6;
  sc.trajectories_per_identity = 2;
  sc.noise_sigma = 0.0;
  sc.seed = 5;
  auto sets = sets_from_trajectories(synth_generate(sc));

  Model model = init_model(small_model_config(sc.feature_dim, 16, 2));
  testsupport::install_linear_oracle(model,
                                     testsupport::fit_linear_oracle(sets));

  EvalReport rep = evaluate(model, sets);
  CHECK(rep.n == static_cast<int>(sets.size()));
  CHECK(rep.mae < 0.01);
  REQUIRE(rep.cc.has_value());
  CHECK(*rep.cc > 0.99);
  CHECK(rep.angular_error_deg < 1.0);

  CHECK_THROWS_AS(evaluate(model, {}), EmptyDataset);

  auto unlabelled = sets;
  unlabelled[0].unlabelled.label.reset();
  CHECK_THROWS_AS(evaluate(model, unlabelled), MissingLabel);

  EvalReport one = evaluate(model, {sets[0]});
  CHECK(one.n == 1);
  CHECK_FALSE(one.cc.has_value());
}

TEST_CASE("random model scores near the uninformed baseline") {
  SynthConfig sc;
  sc.n_identities = 6;
  sc.trajectories_per_identity = 3;
  sc.seed = 9;
  auto sets = sets_from_trajectories(synth_generate(sc));

  std::vector<Vec3> labels;
  for (const auto& s : sets) labels.push_back(s.unlabelled.label->normalized());

  // An untrained network predicts an essentially arbitrary direction, so
  // its expected angular error is that of a uniformly random direction
  // against the label cloud; estimate that null by Monte-Carlo.
  Rng rng(123);
  double null_sum = 0.0;
  const int draws = 2000;
  for (int d = 0; d < draws; ++d) {
    const Vec3 dir = random_unit(rng);
    for (const Vec3& l : labels) null_sum += angular_error_deg(dir, l);
  }
  const double null_mean =
      null_sum / (static_cast<double>(draws) * labels.size());

  // Average the model side over seeds: each init contributes one
  // roughly-arbitrary direction.
  double model_sum = 0.0;
  const int seeds = 12;
  for (int s = 0; s < seeds; ++s) {
    Model model = init_model(small_model_config(sc.feature_dim, 16, 70 + s));
    model_sum += evaluate(model, sets).angular_error_deg;
  }
  const double model_mean = model_sum / seeds;

  CHECK(model_mean > null_mean - 20.0);
  CHECK(model_mean < null_mean + 20.0);
}

TEST_CASE("cross-dataset scoring") {
  SynthConfig d1;
  d1.n_identities = 6;
  d1.trajectories_per_identity = 2;
  d1.noise_sigma = 0.0;
  d1.seed = 3;
  d1.mixing_seed = 1;
  auto sets1 = sets_from_trajectories(synth_generate(d1));

  Model model = init_model(small_model_config(d1.feature_dim, 16, 4));
  testsupport::install_linear_oracle(model,
                                     testsupport::fit_linear_oracle(sets1));
  const EvalReport home = evaluate(model, sets1);

  SUBCASE("no adapter equals evaluate") {
    EvalReport rep = cross_dataset_eval(model, sets1);
    CHECK(rep.mae == home.mae);
    CHECK(rep.angular_error_deg == home.angular_error_deg);
    CHECK(*rep.cc == *home.cc);
  }

  SUBCASE("shared gaze mixing, different identities: degraded but finite") {
    SynthConfig d2 = d1;
    d2.seed = 8;  // new identities, appearance and noise draws
    auto sets2 = sets_from_trajectories(synth_generate(d2));
    EvalReport rep = cross_dataset_eval(model, sets2);
    CHECK(std::isfinite(rep.mae));
    CHECK(rep.mae > home.mae);
    CHECK(rep.angular_error_deg < 90.0);  // still far better than chance
  }

  SUBCASE("mismatched feature width needs an adapter") {
    SynthConfig narrow = d1;
    narrow.feature_dim = 16;
    narrow.appearance_dim = 2;
    auto sets2 = sets_from_trajectories(synth_generate(narrow));
    CHECK_THROWS_AS(cross_dataset_eval(model, sets2), DimensionMismatch);
  }

  SUBCASE("an exact affine adapter recovers the home score") {
    // D2 stores features in a rotated, shifted frame; the adapter maps
    // them back: map * y + offset = x.
    const int f = d1.feature_dim;
    Rng rng(11);
    MatX gauss(f, f);
    for (int r = 0; r < f; ++r)
      for (int c = 0; c < f; ++c) gauss(r, c) = rng.normal();
    const MatX q = Eigen::HouseholderQR<MatX>(gauss).householderQ();
    VecX offset(f);
    for (int i = 0; i < f; ++i) offset[i] = 0.1 * rng.normal();

    auto sets2 = sets1;
    for (auto& s : sets2) {
      for (FrameRecord* fr : {&s.start, &s.unlabelled, &s.end}) {
        fr->features = (q.transpose() * (fr->features - offset)).eval();
      }
    }
    FeatureAdapter adapter{q, offset};
    EvalReport rep = cross_dataset_eval(model, sets2, adapter);
    // Absolute tolerances: both scores sit near zero where acos makes
    // relative comparison meaningless.
    CHECK(std::abs(rep.mae - home.mae) < 1e-9);
    CHECK(std::abs(rep.angular_error_deg - home.angular_error_deg) < 1e-6);

    FeatureAdapter bad{q, VecX::Zero(f - 1)};
    CHECK_THROWS_AS(cross_dataset_eval(model, sets2, bad),
                    DimensionMismatch);
  }
}

TEST_CASE("ablation harness is deterministic per configuration") {
  SynthConfig sc;
  sc.n_identities = 4;
  sc.trajectories_per_identity = 2;
  sc.noise_sigma = 0.05;
  sc.seed = 5;
  auto sets = synth_sets(sc);
  auto [tr, va] = make_validation_split(sets, 0.25, 3);

  ModelConfig mc = small_model_config(sc.feature_dim, 8, 6);
  TrainConfig cfg;
  cfg.lr0 = 0.01;
  cfg.batch_size = 8;
  cfg.max_epochs = 5;
  cfg.patience = 5;
  cfg.seed = 2;

  CHECK_THROWS_AS(ablation_run(tr, va, mc, cfg, {}), EmptyInput);

  LossWeights w;
  auto entries = ablation_run(tr, va, mc, cfg, {w, w});
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].report.mae == entries[1].report.mae);
  CHECK(entries[0].report.angular_error_deg ==
        entries[1].report.angular_error_deg);
  CHECK(entries[0].result.best_epoch == entries[1].result.best_epoch);
  CHECK(entries[0].result.best_val_mae == entries[1].result.best_val_mae);
}

TEST_CASE("consistency term lifts a weak single-label baseline") {
  // Regime where supervision of the start frame alone generalizes
  // poorly to held-out identities; tying predicted angles to latent
  // angles then pays off, and the run mirrors the published direction.
  SynthConfig sc;
  sc.n_identities = 12;
  sc.trajectories_per_identity = 3;
  sc.noise_sigma = 0.3;
  sc.appearance_dim = 0;
  sc.feature_dim = 16;
  sc.seed = 2;
  auto sets = synth_sets(sc);
  auto [tr, va] = make_validation_split(sets, 0.25, 7);

  ModelConfig mc = small_model_config(sc.feature_dim, 32, 22);
  mc.mode = Mode::OneLabel;
  TrainConfig cfg;
  cfg.lr0 = 0.02;
  cfg.batch_size = 8;
  cfg.max_epochs = 300;
  cfg.patience = 50;
  cfg.seed = 14;

  auto entries = ablation_run(
      tr, va, mc, cfg, {LossWeights{1, 0, 0, 0}, LossWeights{1, 1, 0, 0}});
  REQUIRE(entries.size() == 2);
  CHECK(entries[1].report.mae < entries[0].report.mae);
  CHECK(entries[0].report.mae < 0.6);
  CHECK(entries[1].report.mae < 0.6);
}

TEST_CASE("regularizer strength sweep bottoms out at one") {
  SynthConfig sc;
  sc.n_identities = 12;
  sc.trajectories_per_identity = 3;
  sc.noise_sigma = 0.15;
  sc.seed = 1;
  auto sets = synth_sets(sc);
  auto [tr, va] = make_validation_split(sets, 0.25, 7);

  ModelConfig mc = small_model_config(sc.feature_dim, 32, 11);
  TrainConfig cfg;
  cfg.lr0 = 0.02;
  cfg.batch_size = 8;
  cfg.max_epochs = 400;
  cfg.patience = 60;
  cfg.seed = 7;

  auto entries = ablation_run(tr, va, mc, cfg,
                              {LossWeights{1, 0.1, 0.1, 0.1},
                               LossWeights{1, 1, 1, 1},
                               LossWeights{1, 10, 10, 10}});
  REQUIRE(entries.size() == 3);
  CHECK(entries[1].report.mae < entries[0].report.mae);
  CHECK(entries[1].report.mae < entries[2].report.mae);
}
