#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include <Eigen/Geometry>

#include "gazelabel/errors.hpp"
#include "gazelabel/geometry.hpp"
#include "gazelabel/rng.hpp"

using namespace gazelabel;

namespace {

constexpr double kPi = 3.14159265358979323846;

Vec3 random_unit(Rng& rng) {
  Vec3 v;
  do {
    v << rng.normal(), rng.normal(), rng.normal();
  } while (v.norm() < 1e-6);
  return v.normalized();
}

// Independent reference: rotate a toward b by the fraction t of the full
// angle, around their common normal.
Vec3 rotation_slerp(const Vec3& a, const Vec3& b, double t) {
  const Vec3 an = a.normalized(), bn = b.normalized();
  Vec3 axis = an.cross(bn);
  const double angle = std::acos(std::clamp(an.dot(bn), -1.0, 1.0));
  if (axis.norm() < 1e-15) return an;
  axis.normalize();
  return Eigen::AngleAxisd(t * angle, axis) * an;
}

}  // namespace

TEST_CASE("normalize rescales and rejects degenerate input") {
  Vec3 v(3.0, 0.0, 4.0);
  const Vec3 u = normalize(v);
  CHECK(u.x() == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(u.z() == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(u.norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(normalize(Vec3::Zero()), DegenerateVector);
  CHECK_THROWS_AS(normalize(Vec3(1e-300, 0, 0)), DegenerateVector);
}

TEST_CASE("cosine similarity on hand-checked pairs") {
  CHECK(cosine_similarity(Vec3(1, 0, 0), Vec3(0, 1, 0)) ==
        doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cosine_similarity(Vec3(2, 0, 0), Vec3(5, 0, 0)) ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_similarity(Vec3(1, 1, 0), Vec3(-1, -1, 0)) ==
        doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(cosine_similarity(Vec3(1, 0, 0), Vec3(1, 1, 0)) ==
        doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  // Also defined for general dimension.
  VecX a(4), b(4);
  a << 1, 2, 3, 4;
  b << 4, 3, 2, 1;
  CHECK(cosine_similarity(a, b) == doctest::Approx(20.0 / 30.0).epsilon(1e-12));
  CHECK_THROWS_AS(cosine_similarity(a, Vec3(1, 0, 0)), DimensionMismatch);
  CHECK_THROWS_AS(cosine_similarity(Vec3::Zero(), Vec3(1, 0, 0)),
                  DegenerateVector);
}

TEST_CASE("cosine similarity is scale invariant") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const Vec3 a = random_unit(rng) * rng.uniform(0.1, 10.0);
    const Vec3 b = random_unit(rng) * rng.uniform(0.1, 10.0);
    const double c = cosine_similarity(a, b);
    CHECK(c >= -1.0 - 1e-12);
    CHECK(c <= 1.0 + 1e-12);
    CHECK(cosine_similarity((13.7 * a).eval(), (0.02 * b).eval()) ==
          doctest::Approx(c).epsilon(1e-10));
    CHECK(cosine_similarity(b, a) == doctest::Approx(c).epsilon(1e-14));
  }
}

TEST_CASE("angular error on exact angles") {
  CHECK(angular_error_deg(Vec3(0, 0, -1), Vec3(0, 0, -1)) ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK(angular_error_deg(Vec3(1, 0, 0), Vec3(0, 1, 0)) ==
        doctest::Approx(90.0).epsilon(1e-12));
  CHECK(angular_error_deg(Vec3(1, 0, 0), Vec3(-1, 0, 0)) ==
        doctest::Approx(180.0).epsilon(1e-12));
  // 60 degrees: unit vectors with dot 1/2.
  CHECK(angular_error_deg(Vec3(1, 0, 0), Vec3(0.5, std::sqrt(0.75), 0)) ==
        doctest::Approx(60.0).epsilon(1e-12));
  // Magnitudes must not matter.
  CHECK(angular_error_deg(Vec3(3, 0, 0), Vec3(0, 0.001, 0)) ==
        doctest::Approx(90.0).epsilon(1e-12));
}

TEST_CASE("yaw/pitch convention and inverse") {
  // Zero angles look straight down the camera axis.
  const Vec3 ahead = yaw_pitch_to_vector(0.0, 0.0);
  CHECK(ahead.isApprox(Vec3(0, 0, -1), 1e-15));
  // Positive yaw swings toward +x, positive pitch toward +y.
  const Vec3 right = yaw_pitch_to_vector(kPi / 2, 0.0);
  CHECK(right.isApprox(Vec3(1, 0, 0), 1e-12));
  const Vec3 up45 = yaw_pitch_to_vector(0.0, kPi / 4);
  CHECK(up45.y() == doctest::Approx(std::sin(kPi / 4)).epsilon(1e-15));
  CHECK(up45.z() == doctest::Approx(-std::cos(kPi / 4)).epsilon(1e-15));

  CHECK_THROWS_AS(yaw_pitch_to_vector(0.0, kPi / 2), GimbalBoundary);
  CHECK_THROWS_AS(yaw_pitch_to_vector(0.0, -kPi / 2), GimbalBoundary);
  CHECK_THROWS_AS(vector_to_yaw_pitch(Vec3(0, 1, 0)), GimbalBoundary);

  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const double yaw = rng.uniform(-kPi + 1e-6, kPi - 1e-6);
    const double pitch = rng.uniform(-kPi / 2 + 1e-4, kPi / 2 - 1e-4);
    const Vec3 g = yaw_pitch_to_vector(yaw, pitch);
    CHECK(g.norm() == doctest::Approx(1.0).epsilon(1e-14));
    const YawPitch yp = vector_to_yaw_pitch(g);
    CHECK(yp.yaw_rad == doctest::Approx(yaw).epsilon(1e-9));
    CHECK(yp.pitch_rad == doctest::Approx(pitch).epsilon(1e-9));
  }
}

TEST_CASE("slerp endpoints are exact and midpoint bisects") {
  const Vec3 a(1, 0, 0), b(0, 0, -1);
  CHECK(slerp(a, b, 0.0).isApprox(a, 1e-15));
  CHECK(slerp(a, b, 1.0).isApprox(b, 1e-15));
  const Vec3 mid = slerp(a, b, 0.5);
  CHECK(mid.isApprox(Vec3(std::sqrt(0.5), 0, -std::sqrt(0.5)), 1e-12));
  // Equal angles to both ends.
  CHECK(angular_error_deg(mid, a) == doctest::Approx(45.0).epsilon(1e-10));
  CHECK(angular_error_deg(mid, b) == doctest::Approx(45.0).epsilon(1e-10));
}

TEST_CASE("slerp against the rotation oracle") {
  Rng rng(23);
  for (int i = 0; i < 300; ++i) {
    const Vec3 a = random_unit(rng);
    Vec3 b = random_unit(rng);
    if (a.dot(b) < -0.999) b = -b;  // stay off the ambiguous pole
    const double t = rng.uniform();
    const Vec3 got = slerp(a, b, t);
    const Vec3 want = rotation_slerp(a, b, t);
    CHECK(got.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((got - want).norm() < 1e-10);
    // Arc fractions: angle(a, slerp) = t * angle(a, b).
    CHECK(angular_error_deg(a, got) ==
          doctest::Approx(t * angular_error_deg(a, b)).epsilon(1e-7));
  }
}

TEST_CASE("slerp handles nearly parallel inputs smoothly") {
  const Vec3 a = Vec3(0.3, -0.2, -0.9).normalized();
  // A few nanoradians apart: the closed form would divide by ~0.
  const Vec3 b =
      (a + 1e-9 * Vec3(0.0, 1.0, 0.0)).normalized();
  for (double t : {0.0, 0.25, 0.5, 1.0}) {
    const Vec3 g = slerp(a, b, t);
    CHECK(g.norm() == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(angular_error_deg(a, g) < 1e-6);
  }
  // Unnormalized inputs are accepted.
  CHECK(slerp((5.0 * a).eval(), (0.5 * b).eval(), 0.5).norm() ==
        doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("slerp refuses antipodal endpoints") {
  const Vec3 a(0, 0, -1);
  CHECK_THROWS_AS(slerp(a, (-a).eval(), 0.5), AmbiguousGeodesic);
  // Slightly off-antipodal still resolves.
  const Vec3 nearly = (-a + Vec3(1e-3, 0, 0)).normalized();
  // The 1/sin(omega) factor amplifies rounding here; only demand what
  // the conditioning allows.
  CHECK(slerp(a, nearly, 0.5).norm() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(slerp(Vec3::Zero(), a, 0.5), DegenerateVector);
}
