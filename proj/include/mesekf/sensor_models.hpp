#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "mesekf/errors.hpp"
#include "mesekf/estimator.hpp"
#include "mesekf/manifold.hpp"
#include "mesekf/numdiff.hpp"
#include "mesekf/rotation.hpp"

namespace mesekf {

using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Loosely-coupled global pose of the on-board sensor.
struct PoseMeasurement {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  /// Ordered (position, small-angle rotation in the sensor frame).
  Matrix6d covariance = Matrix6d::Identity();
};

/// Distance between the on-board sensor and a static anchor.
struct RangeMeasurement {
  Eigen::Vector3d anchor = Eigen::Vector3d::Zero();
  double distance = 0.0;
  double variance = 1.0;
};

struct PosePrediction {
  Eigen::Vector3d position;
  Eigen::Quaterniond orientation;
};

inline constexpr double kMinRange = 1e-6;

/// Sensor pose implied by a chart position and heading.
inline PosePrediction predict_pose(const BSplineSurface& surface, const ChartPoint& t,
                                   double heading, const RobotExtrinsics& ext) {
  const Eigen::Matrix3d frame = tangent_frame(surface, t).rotation;
  const Eigen::Matrix3d r_wr = frame * rot_z(heading);
  const Eigen::Quaterniond q_frame = quat_from_rotation(frame);
  const Eigen::Quaterniond q_heading(Eigen::AngleAxisd(heading, Eigen::Vector3d::UnitZ()));
  return {chart_to_world(surface, t) + r_wr * ext.lever_arm,
          canonical(q_frame * q_heading * ext.rotation)};
}

inline PosePrediction predict_pose(const BSplineSurface& surface, const FilterState& state,
                                   const RobotExtrinsics& ext) {
  return predict_pose(surface, state.position, state.heading, ext);
}

inline double predict_range(const BSplineSurface& surface, const ChartPoint& t, double heading,
                            const RobotExtrinsics& ext, const Eigen::Vector3d& anchor) {
  const Eigen::Vector3d sensor =
      chart_to_world(surface, t) + robot_rotation(surface, t, heading) * ext.lever_arm;
  return (sensor - anchor).norm();
}

inline double predict_range(const BSplineSurface& surface, const FilterState& state,
                            const RobotExtrinsics& ext, const Eigen::Vector3d& anchor) {
  return predict_range(surface, state.position, state.heading, ext, anchor);
}

namespace sensor_detail {

inline FilterState perturbed(const FilterState& s, int i, double h) {
  FilterState out = s;
  if (i == 0) {
    out.position.u += h;
  } else if (i == 1) {
    out.position.v += h;
  } else {
    out.heading += h;
  }
  return out;
}

inline auto difference = [](const auto& a, const auto& b) { return (a - b).eval(); };

}  // namespace sensor_detail

/// Linearised pose model at `state`: innovation and H (6x3).
struct PoseLinearization {
  Vector6d innovation;
  Eigen::Matrix<double, 6, 3> H;
};

inline PoseLinearization linearize_pose(const FilterState& state, const BSplineSurface& surface,
                                        const RobotExtrinsics& ext, const PoseMeasurement& meas) {
  const PosePrediction pred = predict_pose(surface, state, ext);
  PoseLinearization lin;
  lin.innovation.head<3>() = meas.position - pred.position;
  lin.innovation.tail<3>() = rotation_residual(pred.orientation, meas.orientation);
  auto model = [&](const FilterState& s) {
    const PosePrediction p = predict_pose(surface, s, ext);
    Vector6d out;
    out.head<3>() = p.position;
    out.tail<3>() = rotation_residual(pred.orientation, p.orientation);
    return out;
  };
  lin.H = central_jacobian<6, 3>(state, model, sensor_detail::perturbed, sensor_detail::difference);
  return lin;
}

/// Pose correction with the 3D model.
inline FilterState pose_update(const FilterState& state, const BSplineSurface& surface,
                               const RobotExtrinsics& ext, const PoseMeasurement& meas) {
  const PoseLinearization lin = linearize_pose(state, surface, ext, meas);
  return correct<6>(state, lin.innovation, lin.H, meas.covariance);
}

/// Position-only variant using the first three rows of the pose model.
inline FilterState position_update(const FilterState& state, const BSplineSurface& surface,
                                   const RobotExtrinsics& ext, const Eigen::Vector3d& position,
                                   const Eigen::Matrix3d& covariance) {
  const PosePrediction pred = predict_pose(surface, state, ext);
  const Eigen::Vector3d innovation = position - pred.position;
  const Eigen::Matrix3d h = central_jacobian<3, 3>(
      state, [&](const FilterState& s) { return predict_pose(surface, s, ext).position; },
      sensor_detail::perturbed, sensor_detail::difference);
  return correct<3>(state, innovation, h, covariance);
}

/// Orientation-only variant using the rotation rows of the pose model.
inline FilterState orientation_update(const FilterState& state, const BSplineSurface& surface,
                                      const RobotExtrinsics& ext,
                                      const Eigen::Quaterniond& orientation,
                                      const Eigen::Matrix3d& covariance) {
  const Eigen::Quaterniond predicted = predict_pose(surface, state, ext).orientation;
  const Eigen::Vector3d innovation = rotation_residual(predicted, orientation);
  const Eigen::Matrix3d h = central_jacobian<3, 3>(
      state,
      [&](const FilterState& s) {
        return rotation_residual(predicted, predict_pose(surface, s, ext).orientation);
      },
      sensor_detail::perturbed, sensor_detail::difference);
  return correct<3>(state, innovation, h, covariance);
}

struct RangeLinearization {
  double innovation;
  Eigen::Matrix<double, 1, 3> H;
};

inline RangeLinearization linearize_range(const FilterState& state,
                                          const BSplineSurface& surface,
                                          const RobotExtrinsics& ext,
                                          const RangeMeasurement& meas) {
  const double predicted = predict_range(surface, state, ext, meas.anchor);
  if (predicted < kMinRange) {
    throw DegenerateGeometryError("range_update: anchor coincides with the sensor");
  }
  RangeLinearization lin;
  lin.innovation = meas.distance - predicted;
  lin.H = central_jacobian<1, 3>(
      state,
      [&](const FilterState& s) {
        return Eigen::Matrix<double, 1, 1>(predict_range(surface, s, ext, meas.anchor));
      },
      sensor_detail::perturbed, sensor_detail::difference);
  return lin;
}

/// Tightly-coupled range correction with the 3D model.
inline FilterState range_update(const FilterState& state, const BSplineSurface& surface,
                                const RobotExtrinsics& ext, const RangeMeasurement& meas) {
  if (!(meas.variance > 0.0) || meas.distance < 0.0) {
    throw Error("range_update: invalid range measurement");
  }
  const RangeLinearization lin = linearize_range(state, surface, ext, meas);
  return correct<1>(state, Eigen::Matrix<double, 1, 1>(lin.innovation), lin.H,
                    Eigen::Matrix<double, 1, 1>(meas.variance));
}

}  // namespace mesekf
