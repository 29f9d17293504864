#include "gazelabel/geometry.hpp"

#include <algorithm>
#include <numbers>

namespace gazelabel {

namespace {

constexpr double kPi = std::numbers::pi;

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

}  // namespace

GazeVector normalize(const Eigen::Ref<const Vec3>& v) {
  const double n = v.norm();
  if (n < 1e-12) {
    throw DegenerateVector("normalize: norm " + std::to_string(n) +
                           " too small");
  }
  return v / n;
}

double angular_error_deg(const Eigen::Ref<const Vec3>& a,
                         const Eigen::Ref<const Vec3>& b) {
  const double c = cosine_similarity(a, b);
  return std::acos(clamp_unit(c)) / kPi * 180.0;
}

GazeVector slerp(const Eigen::Ref<const Vec3>& p_raw,
                 const Eigen::Ref<const Vec3>& q_raw, double t) {
  const Vec3 p = normalize(p_raw);
  const Vec3 q = normalize(q_raw);
  const double cos_omega = clamp_unit(p.dot(q));
  if (cos_omega <= -1.0 + 1e-9) {
    throw AmbiguousGeodesic("slerp: endpoints are antipodal");
  }
  // Endpoints must come back bitwise-identical, not merely close: the
  // sin-weighted blend re-rounds every component.
  if (t == 0.0) return p;
  if (t == 1.0) return q;
  const double omega = std::acos(cos_omega);
  if (omega < 1e-8) {
    // Endpoints nearly coincide; the great-circle formula would divide
    // by sin(omega) ~ 0, and the chord is indistinguishable anyway.
    return normalize(((1.0 - t) * p + t * q).eval());
  }
  const double s = std::sin(omega);
  return (std::sin((1.0 - t) * omega) * p + std::sin(t * omega) * q) / s;
}

GazeVector yaw_pitch_to_vector(double yaw_rad, double pitch_rad) {
  if (std::abs(pitch_rad) >= kPi / 2.0) {
    throw GimbalBoundary("yaw_pitch_to_vector: |pitch| >= pi/2");
  }
  const double cp = std::cos(pitch_rad);
  return GazeVector(cp * std::sin(yaw_rad), std::sin(pitch_rad),
                    -cp * std::cos(yaw_rad));
}

YawPitch vector_to_yaw_pitch(const Eigen::Ref<const Vec3>& g) {
  const Vec3 u = normalize(g);
  const double pitch = std::asin(clamp_unit(u.y()));
  if (std::abs(pitch) >= kPi / 2.0 - 1e-12) {
    throw GimbalBoundary("vector_to_yaw_pitch: direction at a pole");
  }
  return {std::atan2(u.x(), -u.z()), pitch};
}

}  // namespace gazelabel
