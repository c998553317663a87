#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "mesekf/chart_projection.hpp"
#include "mesekf/constrained.hpp"
#include "mesekf/errors.hpp"
#include "mesekf/estimator.hpp"
#include "mesekf/sensor_models.hpp"

namespace mesekf::sim {

enum class FilterKind {
  kManifold,     // M-ESEKF: chart state, 3D measurement models
  kProjected,    // MP-ESEKF: chart state, chart-projected corrections
  kConstrained,  // C-ESEKF: 3D pose with surface pseudo-measurements
};

inline std::string to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::kManifold: return "m-esekf";
    case FilterKind::kProjected: return "mp-esekf";
    case FilterKind::kConstrained: return "c-esekf";
  }
  return "unknown";
}

inline FilterKind parse_filter_kind(std::string_view name) {
  if (name == "m-esekf" || name == "M-ESEKF") return FilterKind::kManifold;
  if (name == "mp-esekf" || name == "MP-ESEKF") return FilterKind::kProjected;
  if (name == "c-esekf" || name == "C-ESEKF") return FilterKind::kConstrained;
  throw ConfigError("filter", "unknown filter kind '" + std::string(name) + "'");
}

struct FilterConfig {
  RobotExtrinsics extrinsics;
  SamplingConfig sampling;
  PseudoMeasurementConfig pseudo;
};

/// Correction wall times in microseconds, keyed by correction type.
using TimingLog = std::map<std::string, std::vector<double>>;

/// Common event interface used by the trial loop.
class LocalizationFilter {
 public:
  virtual ~LocalizationFilter() = default;

  virtual void propagate(const OdometryInput& odom, double dt) = 0;
  virtual void correct_pose(const PoseMeasurement& meas) = 0;
  virtual void correct_range(const RangeMeasurement& meas) = 0;
  /// Estimate in the shared evaluation space (chart position, tangent heading).
  virtual ChartEstimate estimate() const = 0;

  const TimingLog& timings() const { return timings_; }
  std::size_t skipped_updates() const { return skipped_; }
  std::size_t fallbacks() const { return fallbacks_; }

 protected:
  template <typename Fn>
  void timed(const std::string& name, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    timings_[name].push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
  }

  /// Runs an update, skipping it on singular or degenerate geometry.
  template <typename Fn>
  void guarded(const std::string& name, Fn&& fn) {
    try {
      timed(name, fn);
    } catch (const SingularUpdateError&) {
      ++skipped_;
    } catch (const DegenerateGeometryError&) {
      ++skipped_;
    }
  }

  std::size_t fallbacks_ = 0;

 private:
  TimingLog timings_;
  std::size_t skipped_ = 0;
};

class ManifoldFilter : public LocalizationFilter {
 public:
  ManifoldFilter(const BSplineSurface& surface, FilterConfig config, FilterState initial)
      : surface_(surface), config_(std::move(config)), state_(std::move(initial)) {}

  void propagate(const OdometryInput& odom, double dt) override {
    state_ = mesekf::propagate(surface_, state_, odom, dt);
  }

  void correct_pose(const PoseMeasurement& meas) override {
    guarded("pose_3d", [&] { state_ = pose_update(state_, surface_, config_.extrinsics, meas); });
  }

  void correct_range(const RangeMeasurement& meas) override {
    guarded("range_3d",
            [&] { state_ = range_update(state_, surface_, config_.extrinsics, meas); });
  }

  ChartEstimate estimate() const override {
    return {state_.position, state_.heading, state_.covariance};
  }

  const FilterState& state() const { return state_; }

 protected:
  const BSplineSurface& surface_;
  FilterConfig config_;
  FilterState state_;
};

/// Position and range corrections processed on the chart. The orientation part
/// of a pose measurement keeps the 3D rotation model.
class ProjectedFilter : public ManifoldFilter {
 public:
  using ManifoldFilter::ManifoldFilter;

  void correct_pose(const PoseMeasurement& meas) override {
    guarded("projected_position", [&] {
      const ProjectedPosition proj =
          project_position(surface_, meas.position, meas.covariance.topLeftCorner<3, 3>(),
                           config_.extrinsics, state_);
      state_ = projected_position_update(state_, surface_, proj);
    });
    guarded("orientation_3d", [&] {
      state_ = orientation_update(state_, surface_, config_.extrinsics, meas.orientation,
                                  meas.covariance.bottomRightCorner<3, 3>());
    });
  }

  void correct_range(const RangeMeasurement& meas) override {
    bool fallback = false;
    guarded("projected_range", [&] {
      try {
        const ProjectedRange proj =
            project_range(surface_, meas, config_.extrinsics, state_, config_.sampling);
        state_ = projected_range_update(state_, surface_, proj);
      } catch (const NoIntersectionError&) {
        fallback = true;
      }
    });
    if (fallback) {
      ++fallbacks_;
      ManifoldFilter::correct_range(meas);
    }
  }
};

class ConstrainedFilter : public LocalizationFilter {
 public:
  ConstrainedFilter(const BSplineSurface& surface, FilterConfig config, FullPoseState initial,
                    double odometry_rate)
      : surface_(surface), config_(std::move(config)), state_(std::move(initial)) {
    config_.pseudo.validate();
    const double ratio = odometry_rate / config_.pseudo.rate;
    stride_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratio)));
  }

  void propagate(const OdometryInput& odom, double dt) override {
    state_ = propagate_3d(state_, odom, dt);
    if (++steps_ % stride_ == 0) {
      guarded("pseudo", [&] { state_ = pseudo_update(state_, surface_, config_.pseudo); });
    }
  }

  void correct_pose(const PoseMeasurement& meas) override {
    guarded("pose_3d", [&] { state_ = pose_update_3d(state_, config_.extrinsics, meas); });
  }

  void correct_range(const RangeMeasurement& meas) override {
    guarded("range_3d", [&] { state_ = range_update_3d(state_, config_.extrinsics, meas); });
  }

  ChartEstimate estimate() const override { return to_chart_estimate(surface_, state_); }

  const FullPoseState& state() const { return state_; }

 private:
  const BSplineSurface& surface_;
  FilterConfig config_;
  FullPoseState state_;
  std::size_t stride_ = 1;
  std::size_t steps_ = 0;
};

/// Lifts a chart estimate to the 3D pose filter: elevation follows the surface,
/// roll and pitch follow the tangent frame.
inline FullPoseState lift_to_3d(const BSplineSurface& surface, const ChartPoint& t, double heading,
                                const Eigen::Matrix3d& chart_cov, double elevation_std,
                                double tilt_std) {
  FullPoseState s;
  s.position = chart_to_world(surface, t);
  s.orientation = quat_from_rotation(robot_rotation(surface, t, heading));
  const Eigen::Vector2d g = surface.gradient(t.u, t.v);
  Eigen::Matrix<double, 6, 3> j = Eigen::Matrix<double, 6, 3>::Zero();
  j.topLeftCorner<2, 2>().setIdentity();
  j.block<1, 2>(2, 0) = g.transpose();
  j(5, 2) = 1.0;
  s.covariance = j * chart_cov * j.transpose();
  s.covariance(3, 3) += tilt_std * tilt_std;
  s.covariance(4, 4) += tilt_std * tilt_std;
  s.covariance(2, 2) += elevation_std * elevation_std;
  return s;
}

inline std::unique_ptr<LocalizationFilter> make_filter(FilterKind kind,
                                                       const BSplineSurface& surface,
                                                       const FilterConfig& config,
                                                       const FilterState& initial,
                                                       double odometry_rate) {
  switch (kind) {
    case FilterKind::kManifold:
      return std::make_unique<ManifoldFilter>(surface, config, initial);
    case FilterKind::kProjected:
      return std::make_unique<ProjectedFilter>(surface, config, initial);
    case FilterKind::kConstrained:
      return std::make_unique<ConstrainedFilter>(
          surface, config,
          lift_to_3d(surface, initial.position, initial.heading, initial.covariance,
                     config.pseudo.sigma_z, config.pseudo.sigma_rp),
          odometry_rate);
  }
  throw Error("make_filter: unknown kind");
}

}  // namespace mesekf::sim
