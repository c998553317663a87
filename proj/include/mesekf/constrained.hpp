#pragma once

#include <cmath>
#include <string>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "mesekf/errors.hpp"
#include "mesekf/estimator.hpp"
#include "mesekf/manifold.hpp"
#include "mesekf/numdiff.hpp"
#include "mesekf/rotation.hpp"
#include "mesekf/sensor_models.hpp"

// Classical 3D error-state filter held on the surface by pseudo-measurements of
// elevation, roll and pitch. Error state is (dp in W, dtheta in the body frame),
// with the true attitude q * exp(dtheta).

namespace mesekf {

struct FullPoseState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  Matrix6d covariance = Matrix6d::Identity();
};

struct PseudoMeasurementConfig {
  double sigma_z = 0.01;
  double sigma_rp = 0.01;
  double rate = 20.0;

  void validate() const {
    if (!(sigma_z > 0.0)) throw ConfigError("pseudo.sigma_z", "must be positive");
    if (!(sigma_rp > 0.0)) throw ConfigError("pseudo.sigma_rp", "must be positive");
    if (!(rate > 0.0)) throw ConfigError("pseudo.rate", "must be positive");
  }
};

inline Matrix6d symmetrize(const Matrix6d& p) { return 0.5 * (p + p.transpose()); }

/// Planar odometry lifted to 3D: body velocity (v_x, v_y, 0), body rate (0, 0, omega).
inline FullPoseState propagate_3d(const FullPoseState& state, const OdometryInput& odom,
                                  double dt) {
  if (!(dt > 0.0)) {
    throw Error("propagate_3d: dt must be positive");
  }
  const Eigen::Matrix3d r = state.orientation.toRotationMatrix();
  const Eigen::Vector3d v(odom.velocity.x(), odom.velocity.y(), 0.0);
  const Eigen::Vector3d dtheta(0.0, 0.0, odom.yaw_rate * dt);

  FullPoseState out;
  out.position = state.position + r * v * dt;
  out.orientation = canonical(state.orientation * quat_exp(dtheta));

  Matrix6d f = Matrix6d::Identity();
  f.topRightCorner<3, 3>() = -r * skew(v) * dt;
  f.bottomRightCorner<3, 3>() = rot_z(dtheta.z()).transpose();
  Eigen::Matrix<double, 6, 3> g = Eigen::Matrix<double, 6, 3>::Zero();
  g.topLeftCorner<3, 2>() = -r.leftCols<2>() * dt;
  g(5, 2) = -dt;
  Eigen::Matrix3d q = Eigen::Matrix3d::Zero();
  q.topLeftCorner<2, 2>() = odom.velocity_cov;
  q(2, 2) = odom.yaw_rate_var;
  out.covariance =
      symmetrize(Matrix6d(f * state.covariance * f.transpose() + g * q * g.transpose()));
  return out;
}

/// Error-state correction for the 6-DoF filter, with the attitude reset Jacobian.
template <int K>
FullPoseState correct_3d(const FullPoseState& state, const Eigen::Matrix<double, K, 1>& innovation,
                         const Eigen::Matrix<double, K, 6>& h,
                         const Eigen::Matrix<double, K, K>& r) {
  using MatK = Eigen::Matrix<double, K, K>;
  const Matrix6d& p = state.covariance;
  MatK s = h * p * h.transpose() + r;
  s = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<MatK> eig(s, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!s.allFinite() || !(lo > 0.0) || hi / lo > kMaxInnovationCondition) {
    throw SingularUpdateError("correct_3d: innovation covariance is singular (condition " +
                              std::to_string(hi / lo) + ")");
  }
  const Eigen::Matrix<double, 6, K> k = p * h.transpose() * s.inverse();
  const Vector6d dx = k * innovation;
  const Matrix6d ikh = Matrix6d::Identity() - k * h;

  FullPoseState out;
  out.position = state.position + dx.head<3>();
  out.orientation = canonical(state.orientation * quat_exp(dx.tail<3>()));
  Matrix6d cov = ikh * p * ikh.transpose() + k * r * k.transpose();
  Matrix6d reset = Matrix6d::Identity();
  reset.bottomRightCorner<3, 3>() -= skew(0.5 * dx.tail<3>());
  out.covariance = symmetrize(Matrix6d(reset * cov * reset.transpose()));
  return out;
}

/// Residual that rotates the body z-axis onto `normal`, in body coordinates. Its
/// z component is zero, so heading is untouched.
inline Eigen::Vector2d tilt_residual(const Eigen::Quaterniond& orientation,
                                     const Eigen::Vector3d& normal) {
  const Eigen::Matrix3d r = orientation.toRotationMatrix();
  const Eigen::Vector3d b = r.col(2);
  const Eigen::Vector3d axis = b.cross(normal);
  const double s = axis.norm();
  if (s < 1e-15) {
    return Eigen::Vector2d::Zero();
  }
  const double angle = std::atan2(s, b.dot(normal));
  return (r.transpose() * (axis / s * angle)).head<2>();
}

/// Joint elevation and roll/pitch pseudo-measurement from the surface geometry.
inline FullPoseState pseudo_update(const FullPoseState& state, const BSplineSurface& surface,
                                   const PseudoMeasurementConfig& config) {
  const double x = state.position.x();
  const double y = state.position.y();
  const SurfacePartials d = surface.evaluate(x, y, 1);
  const Eigen::Vector3d normal = tangent_frame_from_slopes(d.z_u, d.z_v).normal();

  Eigen::Vector3d innovation;
  innovation(0) = d.z - state.position.z();
  innovation.tail<2>() = tilt_residual(state.orientation, normal);
  Eigen::Matrix<double, 3, 6> h = Eigen::Matrix<double, 3, 6>::Zero();
  h.row(0) << -d.z_u, -d.z_v, 1.0, 0.0, 0.0, 0.0;
  h(1, 3) = 1.0;
  h(2, 4) = 1.0;
  const Eigen::Vector3d sig(config.sigma_z, config.sigma_rp, config.sigma_rp);
  const Eigen::Matrix3d r = sig.cwiseAbs2().asDiagonal();
  return correct_3d<3>(state, innovation, h, r);
}

inline FullPoseState pose_update_3d(const FullPoseState& state, const RobotExtrinsics& ext,
                                    const PoseMeasurement& meas) {
  const Eigen::Matrix3d r = state.orientation.toRotationMatrix();
  const Eigen::Vector3d sensor = state.position + r * ext.lever_arm;
  const Eigen::Quaterniond q_sensor = canonical(state.orientation * ext.rotation);
  Vector6d innovation;
  innovation.head<3>() = meas.position - sensor;
  innovation.tail<3>() = rotation_residual(q_sensor, meas.orientation);
  Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
  h.topLeftCorner<3, 3>().setIdentity();
  h.topRightCorner<3, 3>() = -r * skew(ext.lever_arm);
  h.bottomRightCorner<3, 3>() = ext.rotation.toRotationMatrix().transpose();
  return correct_3d<6>(state, innovation, h, meas.covariance);
}

inline FullPoseState range_update_3d(const FullPoseState& state, const RobotExtrinsics& ext,
                                     const RangeMeasurement& meas) {
  const Eigen::Matrix3d r = state.orientation.toRotationMatrix();
  const Eigen::Vector3d d = state.position + r * ext.lever_arm - meas.anchor;
  const double predicted = d.norm();
  if (predicted < kMinRange) {
    throw DegenerateGeometryError("range_update_3d: anchor coincides with the sensor");
  }
  const Eigen::Vector3d u = d / predicted;
  Eigen::Matrix<double, 1, 6> h;
  h.head<3>() = u.transpose();
  h.tail<3>() = -u.transpose() * r * skew(ext.lever_arm);
  return correct_3d<1>(state, Eigen::Matrix<double, 1, 1>(meas.distance - predicted), h,
                       Eigen::Matrix<double, 1, 1>(meas.variance));
}

/// Chart position and tangent-plane heading of a full 3D pose, with the covariance
/// mapped into that space. Used to compare against the manifold filters.
struct ChartEstimate {
  ChartPoint position;
  double heading = 0.0;
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
};

inline double tangent_heading(const BSplineSurface& surface, const Eigen::Vector3d& position,
                              const Eigen::Quaterniond& orientation) {
  const ChartPoint t = world_to_chart(position);
  const Eigen::Matrix3d frame = tangent_frame(surface, t).rotation;
  const Eigen::Vector3d x_body = frame.transpose() * (orientation * Eigen::Vector3d::UnitX());
  return std::atan2(x_body.y(), x_body.x());
}

inline ChartEstimate to_chart_estimate(const BSplineSurface& surface, const FullPoseState& state) {
  auto map = [&](const FullPoseState& s) {
    return Eigen::Vector3d(s.position.x(), s.position.y(),
                           tangent_heading(surface, s.position, s.orientation));
  };
  auto perturb = [](const FullPoseState& s, int i, double h) {
    FullPoseState out = s;
    if (i < 3) {
      out.position[i] += h;
    } else {
      Eigen::Vector3d dtheta = Eigen::Vector3d::Zero();
      dtheta[i - 3] = h;
      out.orientation = s.orientation * quat_exp(dtheta);
    }
    return out;
  };
  auto diff = [](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    return Eigen::Vector3d(a.x() - b.x(), a.y() - b.y(), wrap_angle(a.z() - b.z()));
  };
  const Eigen::Vector3d m = map(state);
  const Eigen::Matrix<double, 3, 6> j = central_jacobian<3, 6>(state, map, perturb, diff);
  ChartEstimate out;
  out.position = {m.x(), m.y()};
  out.heading = m.z();
  out.covariance = j * state.covariance * j.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  return out;
}

}  // namespace mesekf
