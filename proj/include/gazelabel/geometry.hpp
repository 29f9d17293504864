#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "gazelabel/errors.hpp"

namespace gazelabel {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// Unit 3-vector in camera coordinates; +x right, +y up, -z toward the
// scene, so straight-ahead gaze is (0, 0, -1).
using GazeVector = Vec3;

// Unit-normalizes v. Throws DegenerateVector when the norm is too small
// to define a direction.
GazeVector normalize(const Eigen::Ref<const Vec3>& v);

// Cosine of the angle between two vectors of any shared dimension,
// computed on the normalized inputs. Accepts arbitrary Eigen
// expressions. Throws DimensionMismatch or DegenerateVector.
template <typename DerivedA, typename DerivedB>
double cosine_similarity(const Eigen::MatrixBase<DerivedA>& a,
                         const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("cosine_similarity: sizes " +
                            std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na < 1e-300 || nb < 1e-300) {
    throw DegenerateVector("cosine_similarity: zero-norm input");
  }
  return (a / na).dot(b / nb);
}

// Unsigned angle between two directions, in degrees within [0, 180].
// Inputs need not be unit length.
double angular_error_deg(const Eigen::Ref<const Vec3>& a,
                         const Eigen::Ref<const Vec3>& b);

// Spherical linear interpolation between unit vectors p and q at
// parameter t in [0, 1]. Near-identical endpoints fall back to
// normalized linear interpolation; antipodal endpoints have no unique
// geodesic and throw AmbiguousGeodesic.
GazeVector slerp(const Eigen::Ref<const Vec3>& p,
                 const Eigen::Ref<const Vec3>& q, double t);

// Gaze angles to direction: yaw rotates toward +x, pitch toward +y,
// (0, 0) maps to (0, 0, -1). Pitch magnitudes at or beyond pi/2 are
// rejected with GimbalBoundary because yaw becomes unrecoverable there.
GazeVector yaw_pitch_to_vector(double yaw_rad, double pitch_rad);

struct YawPitch {
  double yaw_rad = 0.0;
  double pitch_rad = 0.0;
};

// Inverse of yaw_pitch_to_vector for unit vectors away from the poles.
YawPitch vector_to_yaw_pitch(const Eigen::Ref<const Vec3>& g);

}  // namespace gazelabel
