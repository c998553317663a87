#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "mesekf/errors.hpp"
#include "mesekf/estimator.hpp"
#include "mesekf/manifold.hpp"
#include "mesekf/numdiff.hpp"
#include "mesekf/sensor_models.hpp"

namespace mesekf {

/// Position measurement expressed on the chart.
struct ProjectedPosition {
  ChartPoint z;
  Eigen::Matrix2d covariance;
};

/// Range measurement expressed on the chart against an equivalent anchor.
struct ProjectedRange {
  double distance = 0.0;
  double variance = 0.0;
  ChartPoint anchor;
  /// Shell samples that produced `distance`.
  std::size_t num_samples = 0;
};

/// Parameters of the deterministic sigma-region grid used for range projection.
struct SamplingConfig {
  double mahalanobis_radius = 3.0;
  int resolution = 21;
  /// Half-thickness of the range shell; defaults to one range sigma.
  std::optional<double> shell_tolerance;

  void validate() const {
    if (!(mahalanobis_radius > 0.0)) {
      throw ConfigError("sampling.mahalanobis_radius", "must be positive");
    }
    if (resolution < 3 || resolution % 2 == 0) {
      throw ConfigError("sampling.resolution", "must be odd and at least 3");
    }
    if (shell_tolerance && !(*shell_tolerance > 0.0)) {
      throw ConfigError("sampling.shell_tolerance", "must be positive");
    }
  }
};

/// d(R_WR r_RS)/d(dx) at the current estimate, by central differences.
inline Eigen::Matrix3d lever_arm_jacobian(const BSplineSurface& surface, const FilterState& state,
                                          const RobotExtrinsics& ext) {
  if (ext.lever_arm.isZero(0.0)) {
    return Eigen::Matrix3d::Zero();
  }
  return central_jacobian<3, 3>(
      state, [&](const FilterState& s) { return (robot_rotation(surface, s) * ext.lever_arm).eval(); },
      sensor_detail::perturbed, sensor_detail::difference);
}

/// Robot-centre position implied by a sensor position, projected onto the surface.
inline WorldPoint associate_to_surface(const BSplineSurface& surface, const Eigen::Vector3d& sensor,
                                       const RobotExtrinsics& ext, const FilterState& state) {
  const Eigen::Vector3d centre = sensor - robot_rotation(surface, state) * ext.lever_arm;
  return closest_point(surface, centre);
}

/// Semi-axes of the ellipse cut from {y : y^T P^-1 y = 1} by the plane spanned by
/// the frame's tangent columns, ordered by increasing eigenvalue of T^T P^-1 T
/// (longest axis first).
inline std::pair<Eigen::Vector3d, Eigen::Vector3d> ellipsoid_tangent_intersection(
    const Eigen::Matrix3d& cov, const TangentFrame& frame) {
  Eigen::LLT<Eigen::Matrix3d> llt(cov);
  if (llt.info() != Eigen::Success || !cov.allFinite()) {
    throw DegenerateCovarianceError("ellipsoid covariance is not positive definite");
  }
  const Eigen::Matrix<double, 3, 2> t = frame.tangent_basis();
  Eigen::Matrix2d a = t.transpose() * llt.solve(t);
  a = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(a);
  const Eigen::Vector2d lambda = eig.eigenvalues();
  if (!(lambda.minCoeff() > 0.0)) {
    throw DegenerateCovarianceError("tangent slice of the covariance is degenerate");
  }
  const Eigen::Matrix2d u = eig.eigenvectors();
  return {t * u.col(0) / std::sqrt(lambda(0)), t * u.col(1) / std::sqrt(lambda(1))};
}

/// Projects a sensor position measurement with covariance `cov` onto the chart.
inline ProjectedPosition project_position(const BSplineSurface& surface,
                                          const Eigen::Vector3d& sensor_position,
                                          const Eigen::Matrix3d& cov, const RobotExtrinsics& ext,
                                          const FilterState& state) {
  const WorldPoint on_surface = associate_to_surface(surface, sensor_position, ext, state);
  const Eigen::Matrix3d j = lever_arm_jacobian(surface, state, ext);
  const Eigen::Matrix3d cov_m = cov + j * state.covariance * j.transpose();
  const ChartPoint z = world_to_chart(on_surface);
  const auto [r1, r2] = ellipsoid_tangent_intersection(cov_m, tangent_frame(surface, z));
  Eigen::Matrix<double, 3, 2> diam;
  diam << r1, r2;
  const Eigen::Matrix2d m = chart_jacobian(on_surface) * diam;
  Eigen::Matrix2d p = m * m.transpose();
  return {z, 0.5 * (p + p.transpose())};
}

inline FilterState projected_position_update(const FilterState& state,
                                             const BSplineSurface& /*surface*/,
                                             const ProjectedPosition& proj) {
  Eigen::LLT<Eigen::Matrix2d> llt(proj.covariance);
  if (llt.info() != Eigen::Success) {
    throw DegenerateCovarianceError("projected position covariance is not positive definite");
  }
  Eigen::Matrix<double, 2, 3> h = Eigen::Matrix<double, 2, 3>::Zero();
  h.leftCols<2>().setIdentity();
  const Eigen::Vector2d innovation = proj.z.vec() - state.position.vec();
  return correct<2>(state, innovation, h, proj.covariance);
}

/// Deterministic grid over the Mahalanobis disk of the position covariance,
/// restricted to the chart domain.
inline std::vector<ChartPoint> sample_sigma_region(const BSplineSurface& surface,
                                                   const FilterState& state,
                                                   const SamplingConfig& config) {
  config.validate();
  const Eigen::Matrix2d p = state.covariance.topLeftCorner<2, 2>();
  Eigen::LLT<Eigen::Matrix2d> llt(p);
  if (llt.info() != Eigen::Success) {
    throw DegenerateSamplingError("position covariance is not positive definite");
  }
  const Eigen::Matrix2d l = llt.matrixL();
  const int n = config.resolution;
  const double radius = config.mahalanobis_radius;
  const double spacing = 2.0 * radius / (n - 1);
  const Eigen::Vector2d centre = state.position.vec();
  std::vector<ChartPoint> samples;
  samples.reserve(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      // Integer offsets keep the centre sample exact.
      const Eigen::Vector2d g((i - n / 2) * spacing, (k - n / 2) * spacing);
      if (g.norm() > radius * (1.0 + 1e-12)) {
        continue;
      }
      const Eigen::Vector2d t = centre + l * g;
      if (surface.contains(t.x(), t.y())) {
        samples.push_back(ChartPoint::from(t));
      }
    }
  }
  if (samples.empty()) {
    throw DegenerateSamplingError("no sample of the sigma region lies in the chart domain");
  }
  return samples;
}

/// Anchor shifted so that the range sphere constrains the robot centre.
inline Eigen::Vector3d shifted_anchor(const BSplineSurface& surface, const FilterState& state,
                                      const RobotExtrinsics& ext, const Eigen::Vector3d& anchor) {
  return anchor - robot_rotation(surface, state) * ext.lever_arm;
}

inline constexpr double kMinProjectedVariance = 1e-12;

/// Radial range variance carried onto the chart.
inline double project_range_variance(const BSplineSurface& surface, const RangeMeasurement& meas,
                                     const RobotExtrinsics& ext, const FilterState& state) {
  const Eigen::Vector3d a = shifted_anchor(surface, state, ext, meas.anchor);
  const WorldPoint p = chart_to_world(surface, state.position);
  const Eigen::Vector3d d = p - a;
  if (d.norm() < kMinRange) {
    throw DegenerateGeometryError("range projection: shifted anchor coincides with the robot");
  }
  const Eigen::Vector3d n_as = d.normalized();
  const Eigen::Matrix3d j = lever_arm_jacobian(surface, state, ext);
  const Eigen::Vector3d p_d =
      n_as * meas.variance + (j * state.covariance * j.transpose()) * n_as;
  const Eigen::Vector3d normal = tangent_frame(surface, state.position).normal();
  const Eigen::Vector3d p_dt = p_d - normal * normal.dot(p_d);
  return std::max((chart_jacobian(p) * p_dt).norm(), kMinProjectedVariance);
}

/// Projects a range measurement onto the chart by intersecting the shifted range
/// shell with the sampled sigma region around the estimate.
inline ProjectedRange project_range(const BSplineSurface& surface, const RangeMeasurement& meas,
                                    const RobotExtrinsics& ext, const FilterState& state,
                                    const SamplingConfig& config) {
  if (!(meas.variance > 0.0) || meas.distance < 0.0) {
    throw Error("project_range: invalid range measurement");
  }
  const double tolerance = config.shell_tolerance.value_or(std::sqrt(meas.variance));
  const Eigen::Vector3d a = shifted_anchor(surface, state, ext, meas.anchor);
  const std::vector<ChartPoint> samples = sample_sigma_region(surface, state, config);

  std::vector<ChartPoint> hits;
  hits.reserve(samples.size());
  for (const ChartPoint& t : samples) {
    const double d = (chart_to_world(surface, t) - a).norm();
    if (std::abs(d - meas.distance) <= tolerance) {
      hits.push_back(t);
    }
  }
  if (hits.empty()) {
    throw NoIntersectionError("range shell does not intersect the sampled region");
  }
  const ChartPoint anchor_chart = world_to_chart(closest_point(surface, a));
  double sum = 0.0;
  for (const ChartPoint& t : hits) {
    sum += (anchor_chart.vec() - t.vec()).norm();
  }
  ProjectedRange out;
  out.distance = sum / static_cast<double>(hits.size());
  out.variance = project_range_variance(surface, meas, ext, state);
  out.anchor = anchor_chart;
  out.num_samples = hits.size();
  return out;
}

inline FilterState projected_range_update(const FilterState& state,
                                          const BSplineSurface& /*surface*/,
                                          const ProjectedRange& proj) {
  if (!(proj.variance > 0.0)) {
    throw Error("projected_range_update: variance must be positive");
  }
  const Eigen::Vector2d d = proj.anchor.vec() - state.position.vec();
  const double predicted = d.norm();
  if (predicted < kMinRange) {
    throw DegenerateGeometryError("projected range: estimate coincides with the anchor");
  }
  Eigen::Matrix<double, 1, 3> h = Eigen::Matrix<double, 1, 3>::Zero();
  h.head<2>() = -d.transpose() / predicted;
  return correct<1>(state, Eigen::Matrix<double, 1, 1>(proj.distance - predicted), h,
                    Eigen::Matrix<double, 1, 1>(proj.variance));
}

}  // namespace mesekf
