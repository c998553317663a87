#pragma once

#include <cmath>
#include <string>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "mesekf/errors.hpp"
#include "mesekf/manifold.hpp"
#include "mesekf/numdiff.hpp"
#include "mesekf/rotation.hpp"

namespace mesekf {

/// Nominal state on U x SO(2) with the covariance of the error state
/// (dt_u, dt_v, dtheta).
struct FilterState {
  ChartPoint position;
  double heading = 0.0;
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Identity();
};

/// Odometry sample in the robot frame. The noise entries are per-sample
/// covariances of the measured velocities.
struct OdometryInput {
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
  double yaw_rate = 0.0;
  Eigen::Matrix2d velocity_cov = Eigen::Matrix2d::Zero();
  double yaw_rate_var = 0.0;
};

/// Pose of an on-board sensor in the robot frame.
struct RobotExtrinsics {
  Eigen::Vector3d lever_arm = Eigen::Vector3d::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
};

/// Robot orientation R_WR: tangent frame followed by the heading about the local z-axis.
inline Eigen::Matrix3d robot_rotation(const BSplineSurface& surface, const ChartPoint& t,
                                      double heading) {
  return tangent_frame(surface, t).rotation * rot_z(heading);
}

inline Eigen::Matrix3d robot_rotation(const BSplineSurface& surface, const FilterState& state) {
  return robot_rotation(surface, state.position, state.heading);
}

namespace estimator_detail {

struct Pose2 {
  Eigen::Vector2d t;
  double heading;
};

/// One explicit-Euler step of the chart displacement model with measured
/// inputs reduced by the noise sample `n` = (n_v, n_omega).
inline Pose2 step(const BSplineSurface& surface, const Pose2& x, const OdometryInput& odom,
                  const Eigen::Vector3d& n, double dt) {
  const Eigen::Vector3d v(odom.velocity.x() - n.x(), odom.velocity.y() - n.y(), 0.0);
  const Eigen::Matrix3d r_wr = robot_rotation(surface, ChartPoint::from(x.t), x.heading);
  const Eigen::Vector2d dt_chart = chart_jacobian() * r_wr * v * dt;
  return {x.t + dt_chart, wrap_angle(x.heading + (odom.yaw_rate - n.z()) * dt)};
}

inline Eigen::Vector3d pose_diff(const Pose2& a, const Pose2& b) {
  return {a.t.x() - b.t.x(), a.t.y() - b.t.y(), wrap_angle(a.heading - b.heading)};
}

}  // namespace estimator_detail

/// Error-state transition F and noise input G for one propagation step.
struct ErrorJacobians {
  Eigen::Matrix3d F;
  Eigen::Matrix3d G;
};

/// F and G by central differences of the displacement model around the
/// pre-step state. The heading rows are exact: F row (0, 0, 1), G row (0, 0, -dt).
inline ErrorJacobians error_jacobians(const BSplineSurface& surface, const FilterState& state,
                                      const OdometryInput& odom, double dt) {
  using namespace estimator_detail;
  const Pose2 x0{state.position.vec(), state.heading};
  const Eigen::Vector3d no_noise = Eigen::Vector3d::Zero();

  auto perturb_state = [](const Pose2& x, int i, double h) {
    Pose2 out = x;
    if (i < 2) {
      out.t[i] += h;
    } else {
      out.heading += h;
    }
    return out;
  };
  auto perturb_noise = [](const Eigen::Vector3d& n, int i, double h) {
    Eigen::Vector3d out = n;
    out[i] += h;
    return out;
  };

  ErrorJacobians j;
  j.F = central_jacobian<3, 3>(
      x0, [&](const Pose2& x) { return step(surface, x, odom, no_noise, dt); }, perturb_state,
      pose_diff);
  j.G = central_jacobian<3, 3>(
      no_noise, [&](const Eigen::Vector3d& n) { return step(surface, x0, odom, n, dt); },
      perturb_noise, pose_diff);
  j.F.row(2) << 0.0, 0.0, 1.0;
  j.G.row(2) << 0.0, 0.0, -dt;
  j.G.col(2).head<2>().setZero();
  return j;
}

inline Eigen::Matrix3d symmetrize(const Eigen::Matrix3d& p) { return 0.5 * (p + p.transpose()); }

/// Propagates the nominal state with the measured odometry and the covariance
/// with P <- F P F^T + G Q G^T, Q = blkdiag(velocity_cov, yaw_rate_var).
inline FilterState propagate(const BSplineSurface& surface, const FilterState& state,
                             const OdometryInput& odom, double dt) {
  if (!(dt > 0.0)) {
    throw Error("propagate: dt must be positive");
  }
  using namespace estimator_detail;
  const Pose2 next =
      step(surface, {state.position.vec(), state.heading}, odom, Eigen::Vector3d::Zero(), dt);
  if (!surface.contains(next.t.x(), next.t.y())) {
    throw OutOfChartError(next.t.x(), next.t.y());
  }
  const ErrorJacobians j = error_jacobians(surface, state, odom, dt);
  Eigen::Matrix3d q = Eigen::Matrix3d::Zero();
  q.topLeftCorner<2, 2>() = odom.velocity_cov;
  q(2, 2) = odom.yaw_rate_var;

  FilterState out;
  out.position = ChartPoint::from(next.t);
  out.heading = next.heading;
  out.covariance = symmetrize(
      Eigen::Matrix3d(j.F * state.covariance * j.F.transpose() + j.G * q * j.G.transpose()));
  return out;
}

inline constexpr double kMaxInnovationCondition = 1e12;

/// Generic error-state correction: gain, injection into the nominal state, Joseph-form
/// covariance update and reset (identity reset Jacobian). The state is unchanged
/// when the innovation covariance is singular or ill-conditioned.
template <int K>
FilterState correct(const FilterState& state, const Eigen::Matrix<double, K, 1>& innovation,
                    const Eigen::Matrix<double, K, 3>& h, const Eigen::Matrix<double, K, K>& r) {
  using MatK = Eigen::Matrix<double, K, K>;
  const Eigen::Matrix3d& p = state.covariance;
  MatK s = h * p * h.transpose() + r;
  s = 0.5 * (s + s.transpose());
  if (!s.allFinite() || !innovation.allFinite()) {
    throw SingularUpdateError("correct: non-finite innovation or covariance");
  }
  Eigen::SelfAdjointEigenSolver<MatK> eig(s, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxInnovationCondition) {
    throw SingularUpdateError("correct: innovation covariance is singular (condition " +
                              std::to_string(hi / lo) + ")");
  }
  const Eigen::Matrix<double, 3, K> k = p * h.transpose() * s.inverse();
  const Eigen::Vector3d dx = k * innovation;
  const Eigen::Matrix3d ikh = Eigen::Matrix3d::Identity() - k * h;

  FilterState out;
  out.position = {state.position.u + dx.x(), state.position.v + dx.y()};
  out.heading = wrap_angle(state.heading + dx.z());
  out.covariance = symmetrize(Eigen::Matrix3d(ikh * p * ikh.transpose() + k * r * k.transpose()));
  return out;
}

/// Dynamic-size overload for callers that assemble measurements at run time.
inline FilterState correct(const FilterState& state, const Eigen::VectorXd& innovation,
                           const Eigen::MatrixXd& h, const Eigen::MatrixXd& r) {
  const Eigen::Index k = innovation.size();
  if (h.rows() != k || h.cols() != 3 || r.rows() != k || r.cols() != k) {
    throw Error("correct: dimension mismatch");
  }
  return correct<Eigen::Dynamic>(state, innovation, Eigen::Matrix<double, Eigen::Dynamic, 3>(h),
                                 r);
}

}  // namespace mesekf
