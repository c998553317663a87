#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "mesekf/io/json_fields.hpp"
#include "mesekf/io/surface_io.hpp"
#include "mesekf/sim/filters.hpp"
#include "mesekf/sim/sensors.hpp"
#include "mesekf/sim/trajectory.hpp"
#include "mesekf/sim/trial.hpp"

namespace mesekf::sim {

/// A fully parsed scenario file.
struct Scenario {
  std::shared_ptr<const BSplineSurface> surface;
  TrajectorySpec trajectory;
  SensorSuite sensors;
  SensorSchedule schedule;
  FilterConfig filter_config;
  InitialUncertainty initial;
  FilterKind filter = FilterKind::kManifold;
  std::size_t trials = 1;
  std::uint64_t seed = 1;
  double divergence_threshold = 10.0;
  /// Exclusion rate above which the CLI reports a runtime failure.
  double max_exclusion_rate = 0.1;
};

namespace scenario_detail {

inline ChartPoint chart_point(const io::Json& j, const std::string& path) {
  return ChartPoint::from(io::Fields::vector<2>(j, path));
}

inline TrajectorySpec parse_trajectory(const io::Fields& f) {
  TrajectorySpec t;
  const std::string kind = f.get<std::string>("kind", "waypoints");
  if (kind == "line") {
    t.kind = PathKind::kLine;
    t.start = ChartPoint::from(f.vec2("start"));
    t.direction = f.get<double>("direction", 0.0);
  } else if (kind == "circle") {
    t.kind = PathKind::kCircle;
    t.centre = ChartPoint::from(f.vec2("centre"));
    t.radius = f.get<double>("radius");
    t.start_angle = f.get<double>("start_angle", 0.0);
    t.ccw = f.get<bool>("ccw", true);
  } else if (kind == "waypoints") {
    t.kind = PathKind::kWaypoints;
    const io::Json& w = f.at("waypoints");
    if (!w.is_array()) throw ConfigError(f.path_of("waypoints"), "expected an array");
    for (std::size_t i = 0; i < w.size(); ++i) {
      t.waypoints.push_back(
          chart_point(w[i], f.path_of("waypoints") + "[" + std::to_string(i) + "]"));
    }
    t.closed = f.get<bool>("closed", true);
  } else {
    throw ConfigError(f.path_of("kind"), "expected 'line', 'circle' or 'waypoints'");
  }
  t.speed = f.get<double>("speed", t.speed);
  t.acceleration = f.get<double>("acceleration", t.acceleration);
  t.duration = f.get<double>("duration", t.duration);
  t.dt = f.get<double>("dt", t.dt);
  t.validate();
  return t;
}

inline RobotExtrinsics parse_extrinsics(const io::Fields& f) {
  RobotExtrinsics e;
  if (f.has("lever_arm")) e.lever_arm = f.vec3("lever_arm");
  if (f.has("rotation")) {
    const Eigen::Vector4d q = io::Fields::vector<4>(f.at("rotation"), f.path_of("rotation"));
    e.rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
    if (std::abs(e.rotation.norm() - 1.0) > 1e-9) {
      throw ConfigError(f.path_of("rotation"), "quaternion (w, x, y, z) must have unit norm");
    }
  }
  return e;
}

inline SensorSuite parse_sensors(const io::Fields& f) {
  SensorSuite s;
  s.odometry_rate = f.get<double>("odometry_rate", s.odometry_rate);
  s.odometry_linear_std = f.get<double>("odometry_linear_std", s.odometry_linear_std);
  s.odometry_angular_std = f.get<double>("odometry_angular_std", s.odometry_angular_std);
  s.pose_rate = f.get<double>("pose_rate", s.pose_rate);
  s.pose_position_std = f.get<double>("pose_position_std", s.pose_position_std);
  s.pose_orientation_std = f.get<double>("pose_orientation_std", s.pose_orientation_std);
  s.range_rate = f.get<double>("range_rate", s.range_rate);
  s.range_std = f.get<double>("range_std", s.range_std);
  if (f.has("anchors")) {
    const io::Json& a = f.at("anchors");
    if (!a.is_array()) throw ConfigError(f.path_of("anchors"), "expected an array");
    for (std::size_t i = 0; i < a.size(); ++i) {
      s.anchors.push_back(
          io::Fields::vector<3>(a[i], f.path_of("anchors") + "[" + std::to_string(i) + "]"));
    }
  }
  if (f.has("extrinsics")) s.extrinsics = parse_extrinsics(f.object("extrinsics"));
  s.validate();
  return s;
}

inline SensorSchedule parse_schedule(const io::Json& j, const std::string& path,
                                     double duration) {
  SensorSchedule s;
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "three_phase") {
      s = SensorSchedule::three_phase(duration);
    } else if (name == "all") {
      s = SensorSchedule::all_enabled(duration);
    } else if (name == "pose_only") {
      s.segments = {{0.0, duration, true, false}};
    } else if (name == "range_only") {
      s.segments = {{0.0, duration, false, true}};
    } else if (name == "odometry_only") {
      s.segments = {{0.0, duration, false, false}};
    } else {
      throw ConfigError(path, "unknown schedule '" + name + "'");
    }
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) {
      const io::Fields seg(j[i], path + "[" + std::to_string(i) + "]");
      ScheduleSegment g;
      g.start = seg.get<double>("start");
      g.end = seg.get<double>("end");
      g.pose = seg.get<bool>("pose");
      g.range = seg.get<bool>("range");
      s.segments.push_back(g);
    }
  } else {
    throw ConfigError(path, "expected a schedule name or an array of segments");
  }
  s.validate(duration);
  return s;
}

}  // namespace scenario_detail

/// Parses a scenario. Relative surface file paths resolve against `base_dir`.
inline Scenario scenario_from_json(const io::Json& root, const std::filesystem::path& base_dir) {
  using namespace scenario_detail;
  const io::Fields f(root, "");
  Scenario sc;

  const io::Json& surf = f.at("surface");
  if (surf.is_string()) {
    std::filesystem::path file = surf.get<std::string>();
    if (file.is_relative()) file = base_dir / file;
    sc.surface = std::make_shared<const BSplineSurface>(
        io::surface_from_json(io::read_json_file(file.string(), "surface"), "surface"));
  } else {
    sc.surface = std::make_shared<const BSplineSurface>(io::surface_from_json(surf, "surface"));
  }

  sc.trajectory = parse_trajectory(f.object("trajectory"));
  sc.sensors = f.has("sensors") ? parse_sensors(f.object("sensors")) : SensorSuite{};
  const double duration =
      static_cast<double>(sc.trajectory.num_steps()) * sc.trajectory.dt;
  sc.schedule = f.has("schedule") ? parse_schedule(f.at("schedule"), "schedule", duration)
                                  : SensorSchedule::three_phase(duration);
  if (std::abs(sc.sensors.odometry_rate * sc.trajectory.dt - 1.0) > 1e-9) {
    throw ConfigError("sensors.odometry_rate", "must equal 1 / trajectory.dt");
  }
  sample_stride(sc.sensors.odometry_rate, sc.sensors.pose_rate, "pose_rate");
  sample_stride(sc.sensors.odometry_rate, sc.sensors.range_rate, "range_rate");

  sc.filter_config.extrinsics = sc.sensors.extrinsics;
  if (f.has("sampling")) {
    const io::Fields s = f.object("sampling");
    auto& c = sc.filter_config.sampling;
    c.mahalanobis_radius = s.get<double>("mahalanobis_radius", c.mahalanobis_radius);
    c.resolution = s.get<int>("resolution", c.resolution);
    if (s.has("shell_tolerance")) c.shell_tolerance = s.get<double>("shell_tolerance");
  }
  sc.filter_config.sampling.validate();
  if (f.has("pseudo")) {
    const io::Fields s = f.object("pseudo");
    auto& c = sc.filter_config.pseudo;
    c.sigma_z = s.get<double>("sigma_z", c.sigma_z);
    c.sigma_rp = s.get<double>("sigma_rp", c.sigma_rp);
    c.rate = s.get<double>("rate", c.rate);
  }
  sc.filter_config.pseudo.validate();
  if (f.has("initial")) {
    const io::Fields s = f.object("initial");
    sc.initial.position_std = s.get<double>("position_std", sc.initial.position_std);
    sc.initial.heading_std = s.get<double>("heading_std", sc.initial.heading_std);
    if (!(sc.initial.position_std > 0.0)) throw ConfigError("initial.position_std", "must be positive");
    if (!(sc.initial.heading_std > 0.0)) throw ConfigError("initial.heading_std", "must be positive");
  }
  if (f.has("filter")) {
    try {
      sc.filter = parse_filter_kind(f.get<std::string>("filter"));
    } catch (const ConfigError&) {
      throw ConfigError("filter", "expected 'm-esekf', 'mp-esekf' or 'c-esekf'");
    }
  }
  sc.trials = f.get<std::size_t>("trials", sc.trials);
  if (sc.trials == 0) throw ConfigError("trials", "must be at least 1");
  sc.seed = f.get<std::uint64_t>("seed", sc.seed);
  if (f.has("divergence")) {
    const io::Fields s = f.object("divergence");
    sc.divergence_threshold = s.get<double>("threshold_m", sc.divergence_threshold);
    sc.max_exclusion_rate = s.get<double>("max_exclusion_rate", sc.max_exclusion_rate);
  }
  return sc;
}

inline Scenario load_scenario(const std::string& file) {
  const std::filesystem::path p(file);
  return scenario_from_json(io::read_json_file(file, "config"), p.parent_path());
}

/// Campaign for `scenario` with the given filter, trial count and seed.
inline Campaign make_campaign(const Scenario& sc, FilterKind kind, std::size_t trials,
                              std::uint64_t seed) {
  Campaign c;
  c.surface = sc.surface.get();
  c.truth = generate_ground_truth(*sc.surface, sc.trajectory);
  c.sensors = sc.sensors;
  c.schedule = sc.schedule;
  c.options.kind = kind;
  c.options.config = sc.filter_config;
  c.options.initial = sc.initial;
  c.options.divergence_threshold = sc.divergence_threshold;
  c.seed = seed;
  c.trials = trials;
  return c;
}

}  // namespace mesekf::sim
