#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mesekf/errors.hpp"
#include "mesekf/manifold.hpp"
#include "mesekf/rotation.hpp"

namespace mesekf::sim {

enum class PathKind { kLine, kCircle, kWaypoints };

/// Chart-space path plus a speed profile.
struct TrajectorySpec {
  PathKind kind = PathKind::kWaypoints;

  // kLine: start and unit direction.
  ChartPoint start;
  double direction = 0.0;
  // kCircle: centre, radius, starting polar angle, counter-clockwise if ccw.
  ChartPoint centre;
  double radius = 1.0;
  double start_angle = 0.0;
  bool ccw = true;
  // kWaypoints: Catmull-Rom spline through the points; closed loops wrap around.
  std::vector<ChartPoint> waypoints;
  bool closed = true;

  double speed = 1.0;
  /// Trapezoidal profile: ramp from rest at this acceleration; <= 0 means constant speed.
  double acceleration = 0.0;
  double duration = 60.0;
  double dt = 0.05;

  std::size_t num_steps() const { return static_cast<std::size_t>(std::llround(duration / dt)); }

  void validate() const {
    if (!(dt > 0.0)) throw ConfigError("trajectory.dt", "must be positive");
    if (!(duration >= dt)) throw ConfigError("trajectory.duration", "must be at least one step");
    if (!(speed >= 0.0)) throw ConfigError("trajectory.speed", "must be non-negative");
    if (kind == PathKind::kCircle && !(radius > 0.0)) {
      throw ConfigError("trajectory.radius", "must be positive");
    }
    if (kind == PathKind::kWaypoints && waypoints.size() < (closed ? 3u : 2u)) {
      throw ConfigError("trajectory.waypoints", "not enough waypoints");
    }
  }
};

/// True state at one step together with the noise-free inputs that move it to the next.
struct TruthSample {
  double time = 0.0;
  ChartPoint position;
  double heading = 0.0;
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
  double yaw_rate = 0.0;
};

struct GroundTruth {
  double dt = 0.0;
  /// num_steps + 1 samples; the inputs of the last sample are unused.
  std::vector<TruthSample> samples;
};

namespace trajectory_detail {

/// Arc-length parameterised chart path.
class ChartPath {
 public:
  explicit ChartPath(const TrajectorySpec& spec) : spec_(spec) {
    if (spec.kind == PathKind::kWaypoints) {
      build_table();
    }
  }

  Eigen::Vector2d at(double s) const {
    switch (spec_.kind) {
      case PathKind::kLine:
        return spec_.start.vec() +
               s * Eigen::Vector2d(std::cos(spec_.direction), std::sin(spec_.direction));
      case PathKind::kCircle: {
        const double a = spec_.start_angle + (spec_.ccw ? 1.0 : -1.0) * s / spec_.radius;
        return spec_.centre.vec() + spec_.radius * Eigen::Vector2d(std::cos(a), std::sin(a));
      }
      case PathKind::kWaypoints:
        return along_table(s);
    }
    return Eigen::Vector2d::Zero();
  }

 private:
  Eigen::Vector2d spline(double x) const {
    const auto& w = spec_.waypoints;
    const int n = static_cast<int>(w.size());
    const int segments = spec_.closed ? n : n - 1;
    x = std::clamp(x, 0.0, static_cast<double>(segments));
    int i = std::min(static_cast<int>(x), segments - 1);
    const double f = x - i;
    auto point = [&](int k) {
      if (spec_.closed) {
        return w[static_cast<std::size_t>(((k % n) + n) % n)].vec();
      }
      return w[static_cast<std::size_t>(std::clamp(k, 0, n - 1))].vec();
    };
    const Eigen::Vector2d p0 = point(i - 1);
    const Eigen::Vector2d p1 = point(i);
    const Eigen::Vector2d p2 = point(i + 1);
    const Eigen::Vector2d p3 = point(i + 2);
    const double f2 = f * f;
    const double f3 = f2 * f;
    return 0.5 * ((2.0 * p1) + (-p0 + p2) * f + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * f2 +
                  (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * f3);
  }

  void build_table() {
    const int n = static_cast<int>(spec_.waypoints.size());
    const int segments = spec_.closed ? n : n - 1;
    constexpr int kPerSegment = 2000;
    const int total = segments * kPerSegment;
    params_.resize(static_cast<std::size_t>(total) + 1);
    lengths_.resize(static_cast<std::size_t>(total) + 1);
    Eigen::Vector2d prev = spline(0.0);
    lengths_[0] = 0.0;
    params_[0] = 0.0;
    for (int k = 1; k <= total; ++k) {
      const double x = static_cast<double>(k) / kPerSegment;
      const Eigen::Vector2d p = spline(x);
      params_[k] = x;
      lengths_[k] = lengths_[k - 1] + (p - prev).norm();
      prev = p;
    }
  }

  Eigen::Vector2d along_table(double s) const {
    const double length = lengths_.back();
    if (spec_.closed) {
      s = std::fmod(s, length);
      if (s < 0.0) s += length;
    } else if (s > length + 1e-9) {
      throw ConfigError("trajectory", "open path is shorter than the distance travelled");
    }
    const auto it = std::upper_bound(lengths_.begin(), lengths_.end(), s);
    const std::size_t hi = std::min<std::size_t>(
        static_cast<std::size_t>(it - lengths_.begin()), lengths_.size() - 1);
    const std::size_t lo = hi == 0 ? 0 : hi - 1;
    const double span = lengths_[hi] - lengths_[lo];
    const double f = span > 0.0 ? (s - lengths_[lo]) / span : 0.0;
    return spline(params_[lo] + f * (params_[hi] - params_[lo]));
  }

  TrajectorySpec spec_;
  std::vector<double> params_;
  std::vector<double> lengths_;
};

/// Distance travelled at time `t` under the trapezoidal profile ending at `t_end`.
inline double distance_at(const TrajectorySpec& spec, double t, double t_end) {
  if (spec.acceleration <= 0.0) {
    return spec.speed * t;
  }
  const double ramp = std::min(spec.speed / spec.acceleration, 0.5 * t_end);
  const double v_top = spec.acceleration * ramp;
  auto forward = [&](double x) {
    if (x <= ramp) return 0.5 * spec.acceleration * x * x;
    return 0.5 * spec.acceleration * ramp * ramp + v_top * (x - ramp);
  };
  if (t <= t_end - ramp) {
    return forward(t);
  }
  const double total = 2.0 * forward(ramp) + v_top * (t_end - 2.0 * ramp);
  const double rem = t_end - t;
  return total - 0.5 * spec.acceleration * rem * rem;
}

}  // namespace trajectory_detail

/// Samples the chart path every dt and recovers the body inputs by inverting the
/// discrete displacement model, so noise-free propagation reproduces the samples.
inline GroundTruth generate_ground_truth(const BSplineSurface& surface,
                                         const TrajectorySpec& spec) {
  spec.validate();
  const trajectory_detail::ChartPath path(spec);
  const std::size_t steps = spec.num_steps();
  // The speed profile ends one step past the horizon so every chord has positive length.
  const double t_end = static_cast<double>(steps + 1) * spec.dt;

  std::vector<Eigen::Vector2d> points(steps + 2);
  for (std::size_t k = 0; k < points.size(); ++k) {
    const double t = static_cast<double>(k) * spec.dt;
    points[k] = path.at(trajectory_detail::distance_at(spec, t, t_end));
    if (!surface.contains(points[k].x(), points[k].y())) {
      throw OutOfChartError(points[k].x(), points[k].y());
    }
  }

  GroundTruth truth;
  truth.dt = spec.dt;
  truth.samples.resize(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    const ChartPoint t = ChartPoint::from(points[k]);
    const Eigen::Vector2d chord = points[k + 1] - points[k];
    const Eigen::Vector2d slope = surface.gradient(t.u, t.v);
    const Eigen::Vector3d w = Eigen::Vector3d(chord.x(), chord.y(), slope.dot(chord)) / spec.dt;
    const Eigen::Vector3d local = tangent_frame(surface, t).rotation.transpose() * w;
    TruthSample& s = truth.samples[k];
    s.time = static_cast<double>(k) * spec.dt;
    s.position = t;
    s.heading = std::atan2(local.y(), local.x());
    s.velocity = {local.head<2>().norm(), 0.0};
  }
  for (std::size_t k = 0; k < steps; ++k) {
    truth.samples[k].yaw_rate =
        wrap_angle(truth.samples[k + 1].heading - truth.samples[k].heading) / spec.dt;
  }
  return truth;
}

}  // namespace mesekf::sim
