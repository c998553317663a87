#pragma once

// Planar (x, y, theta) error-state EKF written directly from the unicycle model.
// Used as the reference for the flat-surface reduction of the manifold filter.

#include <cmath>

#include <Eigen/Core>
#include <Eigen/LU>

namespace mesekf::test {

struct PlanarState {
  Eigen::Vector3d x = Eigen::Vector3d::Zero();  // x, y, theta
  Eigen::Matrix3d p = Eigen::Matrix3d::Identity();
};

inline double planar_wrap(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a <= 0.0) a += 2.0 * M_PI;
  return a - M_PI;
}

inline Eigen::Matrix2d planar_rot(double th) {
  Eigen::Matrix2d r;
  r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  return r;
}

inline Eigen::Matrix2d planar_rot_dot(double th) {
  Eigen::Matrix2d r;
  r << -std::sin(th), -std::cos(th), std::cos(th), -std::sin(th);
  return r;
}

/// Euler step with measured inputs; noise enters subtracted from the inputs.
inline PlanarState planar_propagate(const PlanarState& s, const Eigen::Vector2d& v, double w,
                                    const Eigen::Matrix2d& qv, double qw, double dt) {
  const double th = s.x.z();
  PlanarState out;
  out.x.head<2>() = s.x.head<2>() + planar_rot(th) * v * dt;
  out.x.z() = planar_wrap(th + w * dt);
  Eigen::Matrix3d f = Eigen::Matrix3d::Identity();
  f.block<2, 1>(0, 2) = planar_rot_dot(th) * v * dt;
  Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
  g.topLeftCorner<2, 2>() = -planar_rot(th) * dt;
  g(2, 2) = -dt;
  Eigen::Matrix3d q = Eigen::Matrix3d::Zero();
  q.topLeftCorner<2, 2>() = qv;
  q(2, 2) = qw;
  out.p = f * s.p * f.transpose() + g * q * g.transpose();
  out.p = 0.5 * (out.p + out.p.transpose());
  return out;
}

template <int K>
PlanarState planar_update(const PlanarState& s, const Eigen::Matrix<double, K, 1>& y,
                          const Eigen::Matrix<double, K, 3>& h,
                          const Eigen::Matrix<double, K, K>& r) {
  const Eigen::Matrix<double, K, K> sm = h * s.p * h.transpose() + r;
  const Eigen::Matrix<double, 3, K> k = s.p * h.transpose() * sm.inverse();
  PlanarState out;
  out.x = s.x + k * y;
  out.x.z() = planar_wrap(out.x.z());
  const Eigen::Matrix3d a = Eigen::Matrix3d::Identity() - k * h;
  out.p = a * s.p * a.transpose() + k * r * k.transpose();
  out.p = 0.5 * (out.p + out.p.transpose());
  return out;
}

/// Position and yaw of a sensor at lever arm (lx, ly, lz): rows x, y, yaw.
/// The yaw residual is 2 sin(d/2), the z-part of the quaternion small-angle vector.
inline PlanarState planar_pose_update(const PlanarState& s, const Eigen::Vector3d& lever,
                                      const Eigen::Vector2d& meas_xy, double meas_yaw,
                                      double var_pos, double var_yaw) {
  const double th = s.x.z();
  Eigen::Vector3d y;
  y.head<2>() = meas_xy - (s.x.head<2>() + planar_rot(th) * lever.head<2>());
  y.z() = 2.0 * std::sin(planar_wrap(meas_yaw - th) / 2.0);
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
  h.block<2, 1>(0, 2) = planar_rot_dot(th) * lever.head<2>();
  const Eigen::Matrix3d r = Eigen::Vector3d(var_pos, var_pos, var_yaw).asDiagonal();
  return planar_update<3>(s, y, h, r);
}

inline PlanarState planar_range_update(const PlanarState& s, const Eigen::Vector3d& lever,
                                       const Eigen::Vector3d& anchor, double range, double var) {
  const double th = s.x.z();
  Eigen::Vector3d sensor;
  sensor.head<2>() = s.x.head<2>() + planar_rot(th) * lever.head<2>();
  sensor.z() = lever.z();
  const Eigen::Vector3d d = sensor - anchor;
  const double pred = d.norm();
  const Eigen::Vector3d u = d / pred;
  Eigen::Matrix<double, 1, 3> h;
  h(0) = u.x();
  h(1) = u.y();
  h(2) = u.head<2>().dot(planar_rot_dot(th) * lever.head<2>());
  return planar_update<1>(s, Eigen::Matrix<double, 1, 1>(range - pred), h,
                          Eigen::Matrix<double, 1, 1>(var));
}

}  // namespace mesekf::test

#include <algorithm>
#include <random>

#include "mesekf/sensor_models.hpp"

namespace mesekf::test {

/// Runs the manifold filter on S = 0 and the planar filter side by side on identical
/// inputs and returns the largest per-step state difference.
inline double planar_reduction_max_error(std::uint64_t seed, int steps) {
  const BSplineSurface flat = BSplineSurface::flat(-100.0, 100.0, -100.0, 100.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  const double dt = 0.05;
  RobotExtrinsics ext;
  ext.lever_arm = {0.2, 0.1, 0.3};
  const std::vector<Eigen::Vector3d> anchors = {{-10.0, 5.0, 2.0}, {15.0, -3.0, 1.0}};

  FilterState m;
  m.position = {0.5, -0.3};
  m.heading = 0.4;
  m.covariance = Eigen::Vector3d(0.01, 0.01, 0.0025).asDiagonal();
  PlanarState p;
  p.x = {m.position.u, m.position.v, m.heading};
  p.p = m.covariance;

  double truth_heading = 0.4;
  Eigen::Vector2d truth_xy(0.5, -0.3);
  double worst = 0.0;
  for (int k = 0; k < steps; ++k) {
    OdometryInput odom;
    const Eigen::Vector2d v_true(1.0, 0.0);
    const double w_true = 0.3 * std::sin(0.01 * k);
    odom.velocity = v_true + 0.02 * Eigen::Vector2d(n01(rng), n01(rng));
    odom.yaw_rate = w_true + 0.01 * n01(rng);
    odom.velocity_cov = Eigen::Matrix2d::Identity() * 4e-4;
    odom.yaw_rate_var = 1e-4;
    truth_xy += planar_rot(truth_heading) * v_true * dt;
    truth_heading += w_true * dt;

    m = propagate(flat, m, odom, dt);
    p = planar_propagate(p, odom.velocity, odom.yaw_rate, odom.velocity_cov, odom.yaw_rate_var,
                         dt);

    if (k % 4 == 0) {
      PoseMeasurement meas;
      const Eigen::Vector2d xy =
          truth_xy + planar_rot(truth_heading) * ext.lever_arm.head<2>() +
          0.03 * Eigen::Vector2d(n01(rng), n01(rng));
      meas.position = {xy.x(), xy.y(), ext.lever_arm.z() + 0.03 * n01(rng)};
      const double yaw = truth_heading + 0.01 * n01(rng);
      meas.orientation = canonical(
          Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ())));
      Vector6d d;
      d << 9e-4, 9e-4, 9e-4, 1e-4, 1e-4, 1e-4;
      meas.covariance = d.asDiagonal();
      m = pose_update(m, flat, ext, meas);
      p = planar_pose_update(p, ext.lever_arm, xy, yaw, 9e-4, 1e-4);
    }
    if (k % 2 == 1) {
      const Eigen::Vector3d& a = anchors[static_cast<std::size_t>(k / 2) % anchors.size()];
      Eigen::Vector3d sensor;
      sensor.head<2>() = truth_xy + planar_rot(truth_heading) * ext.lever_arm.head<2>();
      sensor.z() = ext.lever_arm.z();
      RangeMeasurement meas;
      meas.anchor = a;
      meas.distance = (sensor - a).norm() + 0.05 * n01(rng);
      meas.variance = 0.0025;
      m = range_update(m, flat, ext, meas);
      p = planar_range_update(p, ext.lever_arm, a, meas.distance, meas.variance);
    }
    worst = std::max({worst, std::abs(m.position.u - p.x.x()), std::abs(m.position.v - p.x.y()),
                      std::abs(planar_wrap(m.heading - p.x.z()))});
  }
  return worst;
}

}  // namespace mesekf::test
