#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/Geometry>

// Quaternions are Hamilton, scalar-first, and map body to world (passive).

namespace mesekf {

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) {
    a += two_pi;
  } else if (a > std::numbers::pi) {
    a -= two_pi;
  }
  return a;
}

inline Eigen::Matrix3d rot_x(double a) {
  const double c = std::cos(a);
  const double s = std::sin(a);
  Eigen::Matrix3d r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

inline Eigen::Matrix3d rot_y(double a) {
  const double c = std::cos(a);
  const double s = std::sin(a);
  Eigen::Matrix3d r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

inline Eigen::Matrix3d rot_z(double a) {
  const double c = std::cos(a);
  const double s = std::sin(a);
  Eigen::Matrix3d r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

/// Unit quaternion with non-negative scalar part.
inline Eigen::Quaterniond canonical(Eigen::Quaterniond q) {
  q.normalize();
  if (q.w() < 0.0) {
    q.coeffs() = -q.coeffs();
  }
  return q;
}

inline Eigen::Quaterniond quat_from_rotation(const Eigen::Matrix3d& r) {
  return canonical(Eigen::Quaterniond(r));
}

/// Exact exponential map of a rotation vector.
inline Eigen::Quaterniond quat_exp(const Eigen::Vector3d& phi) {
  const double angle = phi.norm();
  if (angle < 1e-12) {
    return canonical(Eigen::Quaterniond(1.0, 0.5 * phi.x(), 0.5 * phi.y(), 0.5 * phi.z()));
  }
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, phi / angle));
}

/// Small-angle vector 2*vec(q) of the sign-canonicalised quaternion.
inline Eigen::Vector3d small_angle(const Eigen::Quaterniond& q) {
  return 2.0 * canonical(q).vec();
}

/// Rotation error from `predicted` to `measured`, expressed in the predicted frame.
inline Eigen::Vector3d rotation_residual(const Eigen::Quaterniond& predicted,
                                         const Eigen::Quaterniond& measured) {
  return small_angle(predicted.conjugate() * measured);
}

/// Z-Y-X Tait-Bryan angles to quaternion: R = Rz(yaw) Ry(pitch) Rx(roll).
inline Eigen::Quaterniond quat_from_tait_bryan(double roll, double pitch, double yaw) {
  return canonical(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
                   Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
                   Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()));
}

}  // namespace mesekf
