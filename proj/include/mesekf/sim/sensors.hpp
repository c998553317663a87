#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "mesekf/errors.hpp"
#include "mesekf/estimator.hpp"
#include "mesekf/sensor_models.hpp"
#include "mesekf/sim/random.hpp"
#include "mesekf/sim/trajectory.hpp"

namespace mesekf::sim {

/// Simulated sensor configuration. Defaults are the reference rates and noise levels.
struct SensorSuite {
  double odometry_rate = 20.0;
  double odometry_linear_std = 0.02;
  double odometry_angular_std = 0.01;
  double pose_rate = 5.0;
  double pose_position_std = 0.03;
  double pose_orientation_std = 0.01;
  double range_rate = 10.0;
  double range_std = 0.05;
  std::vector<Eigen::Vector3d> anchors;
  RobotExtrinsics extrinsics;

  void validate() const {
    auto positive = [](double x, const char* name) {
      if (!(x > 0.0)) throw ConfigError(std::string("sensors.") + name, "must be positive");
    };
    positive(odometry_rate, "odometry_rate");
    positive(pose_rate, "pose_rate");
    positive(range_rate, "range_rate");
    auto non_negative = [](double x, const char* name) {
      if (!(x >= 0.0)) throw ConfigError(std::string("sensors.") + name, "must be non-negative");
    };
    non_negative(odometry_linear_std, "odometry_linear_std");
    non_negative(odometry_angular_std, "odometry_angular_std");
    non_negative(pose_position_std, "pose_position_std");
    non_negative(pose_orientation_std, "pose_orientation_std");
    non_negative(range_std, "range_std");
    if (std::abs(extrinsics.rotation.norm() - 1.0) > 1e-9) {
      throw ConfigError("sensors.extrinsics.rotation", "quaternion must have unit norm");
    }
  }

  Matrix6d pose_covariance() const {
    Vector6d d;
    d << Eigen::Vector3d::Constant(pose_position_std * pose_position_std),
        Eigen::Vector3d::Constant(pose_orientation_std * pose_orientation_std);
    return d.asDiagonal();
  }
};

enum class Sensor { kOdometry, kPose, kRange };

/// Time span with the set of enabled correction sensors. Odometry is always on.
struct ScheduleSegment {
  double start = 0.0;
  double end = 0.0;
  bool pose = true;
  bool range = true;
};

struct SensorSchedule {
  std::vector<ScheduleSegment> segments;

  /// Pose only, then range only, then both, in equal thirds.
  static SensorSchedule three_phase(double duration) {
    const double third = duration / 3.0;
    return {{{0.0, third, true, false},
             {third, 2.0 * third, false, true},
             {2.0 * third, duration, true, true}}};
  }

  static SensorSchedule all_enabled(double duration) { return {{{0.0, duration, true, true}}}; }

  void validate(double duration) const {
    if (segments.empty()) {
      throw ConfigError("schedule", "at least one segment is required");
    }
    constexpr double kTol = 1e-9;
    if (std::abs(segments.front().start) > kTol) {
      throw ConfigError("schedule[0].start", "first segment must start at 0");
    }
    for (std::size_t i = 0; i < segments.size(); ++i) {
      const auto& s = segments[i];
      const std::string path = "schedule[" + std::to_string(i) + "]";
      if (!(s.end > s.start)) throw ConfigError(path, "segment end must follow its start");
      if (i > 0 && std::abs(s.start - segments[i - 1].end) > kTol) {
        throw ConfigError(path + ".start", "segments must be contiguous");
      }
    }
    if (std::abs(segments.back().end - duration) > 1e-6) {
      throw ConfigError("schedule", "segments must cover the trajectory duration");
    }
  }

  /// Index of the segment containing `time` (half-open, last segment closed).
  std::size_t segment_at(double time) const {
    for (std::size_t i = 0; i < segments.size(); ++i) {
      if (time < segments[i].end || i + 1 == segments.size()) return i;
    }
    return segments.size() - 1;
  }

  bool enabled(Sensor sensor, double time) const {
    if (sensor == Sensor::kOdometry) return true;
    const auto& s = segments[segment_at(time)];
    return sensor == Sensor::kPose ? s.pose : s.range;
  }
};

struct TimedPose {
  std::size_t step = 0;
  PoseMeasurement measurement;
};

struct TimedRange {
  std::size_t step = 0;
  std::size_t anchor_index = 0;
  RangeMeasurement measurement;
};

/// Per-sensor streams for one trial. odometry[k] drives step k -> k+1.
struct MeasurementStreams {
  std::vector<OdometryInput> odometry;
  std::vector<TimedPose> poses;
  std::vector<TimedRange> ranges;
};

/// Number of odometry steps between samples of a sensor at `rate`.
inline std::size_t sample_stride(double odometry_rate, double rate, const char* name) {
  const double ratio = odometry_rate / rate;
  const auto stride = static_cast<std::size_t>(std::llround(ratio));
  if (stride == 0 || std::abs(ratio - static_cast<double>(stride)) > 1e-9) {
    throw ConfigError(std::string("sensors.") + name,
                      "rate must divide the odometry rate by an integer factor");
  }
  return stride;
}

/// True sensor pose for a truth sample.
inline PosePrediction true_sensor_pose(const BSplineSurface& surface, const TruthSample& s,
                                       const RobotExtrinsics& ext) {
  return predict_pose(surface, s.position, s.heading, ext);
}

/// Draws all measurement streams of one trial. Noise is scaled by `noise_scale`
/// while reported covariances keep the nominal suite values.
inline MeasurementStreams synthesize_measurements(const BSplineSurface& surface,
                                                  const GroundTruth& truth,
                                                  const SensorSuite& suite,
                                                  const SensorSchedule& schedule,
                                                  std::uint64_t seed, std::uint64_t trial = 0,
                                                  double noise_scale = 1.0) {
  suite.validate();
  if (std::abs(truth.dt * suite.odometry_rate - 1.0) > 1e-9) {
    throw ConfigError("sensors.odometry_rate", "must equal 1 / trajectory.dt");
  }
  const std::size_t steps = truth.samples.size() - 1;
  schedule.validate(static_cast<double>(steps) * truth.dt);
  const CounterRng rng(seed, trial);
  MeasurementStreams out;

  const double sv = suite.odometry_linear_std;
  const double sw = suite.odometry_angular_std;
  out.odometry.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const TruthSample& s = truth.samples[k];
    OdometryInput odom;
    odom.velocity = s.velocity + noise_scale * sv *
                                     Eigen::Vector2d(rng.normal(StreamId::kOdometry, k, 0),
                                                     rng.normal(StreamId::kOdometry, k, 1));
    odom.yaw_rate = s.yaw_rate + noise_scale * sw * rng.normal(StreamId::kOdometry, k, 2);
    odom.velocity_cov = Eigen::Matrix2d::Identity() * sv * sv;
    odom.yaw_rate_var = sw * sw;
    out.odometry.push_back(odom);
  }

  const std::size_t pose_stride = sample_stride(suite.odometry_rate, suite.pose_rate, "pose_rate");
  const Matrix6d pose_cov = suite.pose_covariance();
  for (std::size_t k = 0; k <= steps; k += pose_stride) {
    const TruthSample& s = truth.samples[k];
    if (!schedule.enabled(Sensor::kPose, s.time)) continue;
    const PosePrediction p = true_sensor_pose(surface, s, suite.extrinsics);
    const double sp = noise_scale * suite.pose_position_std;
    const double so = noise_scale * suite.pose_orientation_std;
    TimedPose m;
    m.step = k;
    m.measurement.position =
        p.position + sp * Eigen::Vector3d(rng.normal(StreamId::kPose, k, 0),
                                          rng.normal(StreamId::kPose, k, 1),
                                          rng.normal(StreamId::kPose, k, 2));
    const Eigen::Quaterniond noise = quat_from_tait_bryan(so * rng.normal(StreamId::kPose, k, 3),
                                                          so * rng.normal(StreamId::kPose, k, 4),
                                                          so * rng.normal(StreamId::kPose, k, 5));
    m.measurement.orientation = canonical(p.orientation * noise);
    m.measurement.covariance = pose_cov;
    out.poses.push_back(m);
  }

  const std::size_t range_stride =
      sample_stride(suite.odometry_rate, suite.range_rate, "range_rate");
  const double range_var = suite.range_std * suite.range_std;
  for (std::size_t k = 0; k <= steps; k += range_stride) {
    const TruthSample& s = truth.samples[k];
    if (!schedule.enabled(Sensor::kRange, s.time)) continue;
    for (std::size_t a = 0; a < suite.anchors.size(); ++a) {
      TimedRange m;
      m.step = k;
      m.anchor_index = a;
      m.measurement.anchor = suite.anchors[a];
      const double d =
          predict_range(surface, s.position, s.heading, suite.extrinsics, suite.anchors[a]);
      m.measurement.distance = std::max(
          0.0, d + noise_scale * suite.range_std * rng.normal(StreamId::kRange, k, a));
      m.measurement.variance = range_var;
      out.ranges.push_back(m);
    }
  }
  return out;
}

}  // namespace mesekf::sim
