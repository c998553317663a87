#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <gtest/gtest.h>

#include "mesekf/sim/sim.hpp"
#include "test_support.hpp"

namespace mesekf::sim {
namespace {

const BSplineSurface& flat() {
  static const BSplineSurface s = BSplineSurface::flat(-30.0, 30.0, -30.0, 30.0);
  return s;
}

TrajectorySpec circle(double radius, double duration) {
  TrajectorySpec t;
  t.kind = PathKind::kCircle;
  t.radius = radius;
  t.duration = duration;
  return t;
}

SensorSuite suite_with_anchors() {
  SensorSuite s;
  s.anchors = {{-10.0, 0.0, 2.0}, {10.0, 0.0, 2.0}};
  s.extrinsics.lever_arm = {0.1, 0.0, 0.3};
  return s;
}

// ---- ground truth ----

TEST(GroundTruth, StraightLineOnFlatGround) {
  TrajectorySpec t;
  t.kind = PathKind::kLine;
  t.duration = 2.0;
  const GroundTruth g = generate_ground_truth(flat(), t);
  ASSERT_EQ(g.samples.size(), 41u);
  for (std::size_t k = 0; k < g.samples.size(); ++k) {
    EXPECT_NEAR(g.samples[k].position.u, 0.05 * static_cast<double>(k), 1e-12);
    EXPECT_EQ(g.samples[k].position.v, 0.0);
    EXPECT_EQ(g.samples[k].heading, 0.0);
    EXPECT_NEAR(g.samples[k].velocity.x(), 1.0, 1e-12);
    EXPECT_EQ(g.samples[k].yaw_rate, 0.0);
  }
}

TEST(GroundTruth, CircleTurnsAtSpeedOverRadius) {
  const GroundTruth g = generate_ground_truth(flat(), circle(5.0, 10.0));
  for (std::size_t k = 0; k + 1 < g.samples.size(); ++k) {
    EXPECT_NEAR(g.samples[k].yaw_rate, 0.2, 1e-9);
    // Chord speed 2 r sin(s dt / 2r) / dt.
    EXPECT_NEAR(g.samples[k].velocity.x(), 2.0 * 5.0 * std::sin(0.05 / 10.0) / 0.05, 1e-12);
    EXPECT_EQ(g.samples[k].velocity.y(), 0.0);
  }
}

TEST(GroundTruth, ReintegratesOnCurvedSurfaces) {
  const BSplineSurface s = test::random_surface(3, 9, -15.0, 15.0, 1.5);
  TrajectorySpec t = circle(8.0, 60.0);
  t.acceleration = 0.5;
  const GroundTruth g = generate_ground_truth(s, t);
  FilterState st;
  st.position = g.samples[0].position;
  st.heading = g.samples[0].heading;
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < g.samples.size(); ++k) {
    OdometryInput o;
    o.velocity = g.samples[k].velocity;
    o.yaw_rate = g.samples[k].yaw_rate;
    st = propagate(s, st, o, g.dt);
    const TruthSample& n = g.samples[k + 1];
    worst = std::max({worst, (st.position.vec() - n.position.vec()).norm(),
                      std::abs(wrap_angle(st.heading - n.heading))});
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(GroundTruth, LeavingTheChartThrows) {
  TrajectorySpec t = circle(50.0, 5.0);
  EXPECT_THROW(generate_ground_truth(flat(), t), OutOfChartError);
}

// ---- sensors ----

TEST(Sensors, ZeroNoiseReproducesTruth) {
  const BSplineSurface s = test::random_surface(2, 9, -15.0, 15.0, 1.0);
  const GroundTruth g = generate_ground_truth(s, circle(6.0, 20.0));
  const SensorSuite suite = suite_with_anchors();
  const MeasurementStreams m =
      synthesize_measurements(s, g, suite, SensorSchedule::all_enabled(20.0), 1, 0, 0.0);
  ASSERT_EQ(m.odometry.size(), g.samples.size() - 1);
  for (std::size_t k = 0; k < m.odometry.size(); ++k) {
    EXPECT_EQ(m.odometry[k].velocity, g.samples[k].velocity);
    EXPECT_EQ(m.odometry[k].yaw_rate, g.samples[k].yaw_rate);
  }
  for (const TimedPose& p : m.poses) {
    const PosePrediction truth = true_sensor_pose(s, g.samples[p.step], suite.extrinsics);
    EXPECT_EQ(p.measurement.position, truth.position);
    EXPECT_LT(p.measurement.orientation.angularDistance(truth.orientation), 1e-12);
  }
  for (const TimedRange& r : m.ranges) {
    const TruthSample& t = g.samples[r.step];
    EXPECT_EQ(r.measurement.distance,
              predict_range(s, t.position, t.heading, suite.extrinsics, r.measurement.anchor));
  }
}

TEST(Sensors, DeterministicPerSeedAndTrial) {
  const GroundTruth g = generate_ground_truth(flat(), circle(6.0, 10.0));
  const SensorSuite suite = suite_with_anchors();
  const auto sched = SensorSchedule::all_enabled(10.0);
  const auto a = synthesize_measurements(flat(), g, suite, sched, 7, 3);
  const auto b = synthesize_measurements(flat(), g, suite, sched, 7, 3);
  const auto c = synthesize_measurements(flat(), g, suite, sched, 7, 4);
  ASSERT_EQ(a.ranges.size(), b.ranges.size());
  for (std::size_t i = 0; i < a.ranges.size(); ++i) {
    EXPECT_EQ(a.ranges[i].measurement.distance, b.ranges[i].measurement.distance);
  }
  EXPECT_EQ(a.odometry[5].velocity, b.odometry[5].velocity);
  EXPECT_NE(a.odometry[5].velocity, c.odometry[5].velocity);
  EXPECT_NE(a.ranges[5].measurement.distance, c.ranges[5].measurement.distance);
}

TEST(Sensors, RangeNoiseHasTheConfiguredMoments) {
  const GroundTruth g = generate_ground_truth(flat(), circle(6.0, 50.0));
  const SensorSuite suite = suite_with_anchors();
  const auto sched = SensorSchedule::all_enabled(50.0);
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    const auto m = synthesize_measurements(flat(), g, suite, sched, 11, trial);
    for (const TimedRange& r : m.ranges) {
      const TruthSample& t = g.samples[r.step];
      const double e = r.measurement.distance -
                       predict_range(flat(), t.position, t.heading, suite.extrinsics,
                                     r.measurement.anchor);
      sum += e;
      sq += e * e;
      ++n;
    }
  }
  ASSERT_GE(n, 100000u);
  const double mean = sum / static_cast<double>(n);
  const double sd = std::sqrt(sq / static_cast<double>(n) - mean * mean);
  EXPECT_LT(std::abs(mean), 4.0 * 0.05 / std::sqrt(static_cast<double>(n)));
  EXPECT_NEAR(sd, 0.05, 0.05 * 0.02);
}

TEST(Sensors, ThreePhaseScheduleGatesCorrections) {
  const GroundTruth g = generate_ground_truth(flat(), circle(6.0, 90.0));
  const SensorSuite suite = suite_with_anchors();
  const auto m =
      synthesize_measurements(flat(), g, suite, SensorSchedule::three_phase(90.0), 1, 0);
  // Steps 0..599 pose only, 600..1199 range only, 1200..1800 both.
  std::size_t early_pose = 0, late_pose = 0;
  for (const TimedPose& p : m.poses) {
    EXPECT_EQ(p.step % 4, 0u);
    EXPECT_TRUE(p.step < 600 || p.step >= 1200);
    (p.step < 600 ? early_pose : late_pose)++;
  }
  EXPECT_EQ(early_pose, 150u);
  EXPECT_EQ(late_pose, 151u);
  std::size_t mid_range = 0;
  for (const TimedRange& r : m.ranges) {
    EXPECT_EQ(r.step % 2, 0u);
    EXPECT_GE(r.step, 600u);
    if (r.step < 1200) ++mid_range;
  }
  EXPECT_EQ(mid_range, 600u);
  EXPECT_EQ(m.ranges.size(), 600u + 602u);
}

TEST(Sensors, RatesMustDivideTheOdometryRate) {
  SensorSuite s;
  s.pose_rate = 3.0;
  EXPECT_THROW(sample_stride(s.odometry_rate, s.pose_rate, "pose_rate"), ConfigError);
  EXPECT_EQ(sample_stride(20.0, 5.0, "pose_rate"), 4u);
}

// ---- trials ----

TEST(Trial, NoiseFreeManifoldFilterTracksExactly) {
  const BSplineSurface s = test::random_surface(5, 9, -15.0, 15.0, 1.0);
  const GroundTruth g = generate_ground_truth(s, circle(6.0, 30.0));
  const SensorSuite suite = suite_with_anchors();
  const auto streams =
      synthesize_measurements(s, g, suite, SensorSchedule::three_phase(30.0), 1, 0, 0.0);
  TrialOptions opts;
  opts.config.extrinsics = suite.extrinsics;
  const FilterState init = initial_state(g.samples[0], opts.initial, 1, 0, 0.0);
  const TrialResult r = run_trial(s, g, streams, init, opts);
  ASSERT_FALSE(r.record.diverged);
  ASSERT_EQ(r.record.steps.size(), g.samples.size());
  const StepRecord& last = r.record.steps.back();
  EXPECT_LT(std::hypot(last.e_u, last.e_v), 1e-6);
  EXPECT_LT(std::abs(last.e_heading), 1e-6);
}

TEST(Trial, OdometryOnlyUncertaintyGrows) {
  // The shear in F can trade position-heading correlation for a slightly smaller
  // trace, so check the determinant, which F preserves on flat ground.
  const GroundTruth g = generate_ground_truth(flat(), circle(6.0, 20.0));
  SensorSchedule sched;
  sched.segments = {{0.0, 20.0, false, false}};
  const auto streams = synthesize_measurements(flat(), g, suite_with_anchors(), sched, 1, 0);
  for (FilterKind kind : {FilterKind::kManifold, FilterKind::kProjected}) {
    TrialOptions opts;
    opts.kind = kind;
    const TrialResult r =
        run_trial(flat(), g, streams, initial_state(g.samples[0], opts.initial, 1, 0), opts);
    ASSERT_EQ(r.covariances.size(), g.samples.size());
    for (std::size_t k = 1; k < r.covariances.size(); ++k) {
      EXPECT_GE(r.covariances[k].determinant(), r.covariances[k - 1].determinant());
    }
    EXPECT_GT(r.covariances.back().trace(), 2.0 * r.covariances.front().trace());
  }
}

TEST(Trial, OdometryOnlyAddsNoInformation) {
  // P_{k+1} - F P_k F^T is the injected process noise and must be PSD.
  const BSplineSurface s = test::random_surface(5, 9, -15.0, 15.0, 1.0);
  const GroundTruth g = generate_ground_truth(s, circle(6.0, 20.0));
  SensorSchedule sched;
  sched.segments = {{0.0, 20.0, false, false}};
  const auto streams = synthesize_measurements(s, g, suite_with_anchors(), sched, 1, 0);
  FilterState st = initial_state(g.samples[0], {}, 1, 0);
  for (std::size_t k = 0; k < streams.odometry.size(); ++k) {
    const ErrorJacobians j = error_jacobians(s, st, streams.odometry[k], g.dt);
    const FilterState next = propagate(s, st, streams.odometry[k], g.dt);
    const Eigen::Matrix3d added = next.covariance - j.F * st.covariance * j.F.transpose();
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(added).eigenvalues().minCoeff(),
              -1e-12);
    st = next;
  }
}

TEST(Trial, ResultsAreDeterministic) {
  const GroundTruth g = generate_ground_truth(flat(), circle(6.0, 10.0));
  Campaign c;
  c.surface = &flat();
  c.truth = g;
  c.sensors = suite_with_anchors();
  c.schedule = SensorSchedule::three_phase(10.0);
  c.options.config.extrinsics = c.sensors.extrinsics;
  c.trials = 4;
  c.threads = 1;
  const auto a = records(run_campaign(c));
  c.threads = 3;
  const auto b = records(run_campaign(c));
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].steps.size(), b[i].steps.size());
    for (std::size_t k = 0; k < a[i].steps.size(); ++k) {
      EXPECT_EQ(a[i].steps[k].e_u, b[i].steps[k].e_u);
      EXPECT_EQ(a[i].steps[k].nees, b[i].steps[k].nees);
    }
  }
}

TEST(Trial, DivergenceIsFlagged) {
  const GroundTruth g = generate_ground_truth(flat(), circle(6.0, 5.0));
  const auto streams = synthesize_measurements(flat(), g, suite_with_anchors(),
                                               SensorSchedule::all_enabled(5.0), 1, 0);
  TrialOptions opts;
  opts.divergence_threshold = 1e-9;
  const TrialResult r =
      run_trial(flat(), g, streams, initial_state(g.samples[0], opts.initial, 1, 0), opts);
  EXPECT_TRUE(r.record.diverged);
}

TEST(Evaluate, NormalisedErrors) {
  TruthSample t;
  t.position = {1.0, 2.0};
  t.heading = 0.1;
  ChartEstimate e;
  e.position = {0.0, 2.0};
  e.heading = -0.1;
  e.covariance = Eigen::Vector3d(4.0, 1.0, 0.01).asDiagonal();
  const StepRecord r = evaluate(t, e);
  EXPECT_DOUBLE_EQ(r.e_u, 1.0);
  EXPECT_NEAR(r.e_heading, 0.2, 1e-15);
  EXPECT_NEAR(r.nees_position, 0.25, 1e-15);
  EXPECT_NEAR(r.nees_heading, 4.0, 1e-12);
  EXPECT_NEAR(r.nees, 4.25, 1e-12);
  e.covariance(2, 2) = 0.0;
  EXPECT_THROW(evaluate(t, e), DegenerateCovarianceError);
}

// ---- metrics ----

TrialRecord one_step(double eu, double ev, double eh, double nees) {
  TrialRecord t;
  StepRecord r;
  r.e_u = eu;
  r.e_v = ev;
  r.e_heading = eh;
  r.nees = nees;
  r.nees_position = 2.0 * nees / 3.0;
  r.nees_heading = nees / 3.0;
  t.steps.push_back(r);
  return t;
}

TEST(Metrics, HandComputedExamples) {
  const CampaignMetrics a = compute_metrics({one_step(3.0, 4.0, 0.0, 3.0), one_step(0, 0, 0, 3.0)});
  ASSERT_EQ(a.steps.size(), 1u);
  EXPECT_DOUBLE_EQ(a.steps[0].rmse_position, std::sqrt(12.5));
  EXPECT_DOUBLE_EQ(a.steps[0].anees, 1.0);
  EXPECT_DOUBLE_EQ(a.steps[0].anees_position, 1.0);
  EXPECT_DOUBLE_EQ(a.steps[0].anees_heading, 1.0);

  std::vector<TrialRecord> five = {one_step(0.1, 0.0, 0.01, 2.0), one_step(0.0, -0.2, 0.02, 4.0),
                                   one_step(0.3, 0.1, -0.01, 1.0), one_step(0.0, 0.0, 0.0, 0.5),
                                   one_step(9.0, 9.0, 1.0, 99.0)};
  five[4].diverged = true;
  five[4].steps.clear();
  const CampaignMetrics b = compute_metrics(five);
  EXPECT_EQ(b.num_valid, 4u);
  EXPECT_DOUBLE_EQ(b.exclusion_rate, 0.2);
  EXPECT_NEAR(b.steps[0].rmse_position, std::sqrt((0.01 + 0.04 + 0.09 + 0.01) / 4.0), 1e-15);
  EXPECT_NEAR(b.steps[0].rmse_heading, std::sqrt((1e-4 + 4e-4 + 1e-4) / 4.0), 1e-15);
  EXPECT_NEAR(b.steps[0].anees, 7.5 / 12.0, 1e-15);
}

TEST(Metrics, UnequalTrialLengthsAreRejected) {
  std::vector<TrialRecord> t = {one_step(0, 0, 0, 1), one_step(0, 0, 0, 1)};
  t[1].steps.push_back(t[1].steps[0]);
  EXPECT_THROW(compute_metrics(t), Error);
}

TEST(Metrics, NormalQuantileMatchesBoost) {
  const boost::math::normal_distribution<double> n;
  for (double p : {1e-10, 1e-6, 0.001, 0.005, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.975, 0.995, 0.999999}) {
    const double ref = boost::math::quantile(n, p);
    EXPECT_NEAR(normal_quantile(p), ref, 1e-11 * std::max(1.0, std::abs(ref))) << p;
  }
}

TEST(Metrics, ChiSquareBoundsMatchBoost) {
  for (double dof : {100.0, 150.0, 200.0, 300.0, 1000.0, 3000.0}) {
    const boost::math::chi_squared_distribution<double> chi(dof);
    for (double p : {0.005, 0.995}) {
      const double ref = boost::math::quantile(chi, p);
      EXPECT_LT(std::abs(chi_square_quantile(p, dof) - ref) / ref, 1e-3) << dof << " " << p;
    }
  }
  // N = 100 trials, m = 3.
  const boost::math::chi_squared_distribution<double> chi(300.0);
  const double exact_lo = boost::math::quantile(chi, 0.005) / 300.0;
  const double exact_hi = boost::math::quantile(chi, 0.995) / 300.0;
  EXPECT_NEAR(exact_lo, 0.80221, 5e-6);
  EXPECT_NEAR(exact_hi, 1.22281, 5e-6);
  const auto [lo, hi] = anees_bounds(300.0);
  EXPECT_LT(std::abs(lo - exact_lo) / exact_lo, 1e-3);
  EXPECT_LT(std::abs(hi - exact_hi) / exact_hi, 1e-3);
}

TEST(Metrics, WindowHelpers) {
  CampaignMetrics m;
  m.steps.resize(4);
  const double anees[] = {0.5, 1.0, 1.1, 2.0};
  for (std::size_t k = 0; k < 4; ++k) {
    m.steps[k].anees = anees[k];
    m.steps[k].anees_lo = 0.8;
    m.steps[k].anees_hi = 1.2;
  }
  EXPECT_DOUBLE_EQ(fraction_within_bounds(m), 0.5);
  EXPECT_DOUBLE_EQ(fraction_within_bounds(m, 1, 3), 1.0);
  EXPECT_DOUBLE_EQ(mean_anees(m, 0, 2), 0.75);
}

TEST(Report, MeanAndNearestRankP99) {
  std::vector<double> xs(100);
  std::iota(xs.begin(), xs.end(), 1.0);
  const auto [mean, p99] = mean_p99(xs);
  EXPECT_DOUBLE_EQ(mean, 50.5);
  EXPECT_DOUBLE_EQ(p99, 99.0);
  EXPECT_DOUBLE_EQ(mean_p99({7.0}).second, 7.0);
}

// ---- scenario parsing ----

io::Json minimal_scenario() {
  io::Json j;
  j["surface"] = io::surface_to_json(BSplineSurface::flat(-20.0, 20.0, -20.0, 20.0));
  j["trajectory"] = {{"kind", "circle"}, {"centre", {0.0, 0.0}}, {"radius", 5.0}, {"duration", 6.0}};
  j["sensors"] = {{"anchors", {{-5.0, 0.0, 2.0}, {5.0, 0.0, 2.0}}}};
  return j;
}

std::string config_error_path(const io::Json& j) {
  try {
    scenario_from_json(j, ".");
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<no error>";
}

TEST(Scenario, ParsesAMinimalConfig) {
  const Scenario sc = scenario_from_json(minimal_scenario(), ".");
  EXPECT_EQ(sc.trajectory.kind, PathKind::kCircle);
  EXPECT_EQ(sc.sensors.anchors.size(), 2u);
  EXPECT_EQ(sc.schedule.segments.size(), 3u);
  EXPECT_EQ(sc.filter, FilterKind::kManifold);
}

TEST(Scenario, ErrorsNameTheOffendingField) {
  io::Json j = minimal_scenario();
  j.erase("trajectory");
  EXPECT_EQ(config_error_path(j), "trajectory");

  j = minimal_scenario();
  j["sensors"]["pose_rate"] = "fast";
  EXPECT_EQ(config_error_path(j), "sensors.pose_rate");

  j = minimal_scenario();
  j["sensors"]["anchors"][1] = {1.0, 2.0};
  EXPECT_EQ(config_error_path(j), "sensors.anchors[1]");

  j = minimal_scenario();
  j["schedule"] = io::Json::array({{{"start", 0.0}, {"end", 2.0}, {"pose", true}, {"range", false}},
                                   {{"start", 3.0}, {"end", 6.0}, {"pose", true}, {"range", true}}});
  EXPECT_EQ(config_error_path(j), "schedule[1].start");

  j = minimal_scenario();
  j["sensors"]["extrinsics"] = {{"rotation", {1.0, 1.0, 0.0, 0.0}}};
  EXPECT_EQ(config_error_path(j), "sensors.extrinsics.rotation");

  j = minimal_scenario();
  j["surface"]["knots_u"][0] = "a";
  EXPECT_EQ(config_error_path(j), "surface.knots_u[0]");

  j = minimal_scenario();
  j["filter"] = "ukf";
  EXPECT_EQ(config_error_path(j), "filter");

  j = minimal_scenario();
  j["sensors"]["pose_rate"] = 3.0;
  EXPECT_EQ(config_error_path(j), "sensors.pose_rate");
}

// ---- report round trip ----

TEST(Report, CampaignOutputsRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "mesekf_test_report";
  std::filesystem::remove_all(dir);
  const Scenario sc = scenario_from_json(minimal_scenario(), ".");
  Campaign c = make_campaign(sc, FilterKind::kManifold, 3, 5);
  c.threads = 1;
  const auto results = run_campaign(c);
  RunInfo info{"m-esekf", 5, c.truth.dt, 3, {}};
  const io::Json summary = write_campaign(dir, info, results);

  const auto [info2, recs] = read_trials(dir);
  EXPECT_EQ(info2.seed, 5u);
  const auto orig = records(results);
  for (std::size_t i = 0; i < orig.size(); ++i) {
    ASSERT_EQ(recs[i].steps.size(), orig[i].steps.size());
    for (std::size_t k = 0; k < orig[i].steps.size(); ++k) {
      EXPECT_EQ(recs[i].steps[k].e_v, orig[i].steps[k].e_v);
      EXPECT_EQ(recs[i].steps[k].nees_heading, orig[i].steps[k].nees_heading);
    }
  }
  EXPECT_EQ(summarize(info2, recs), summary);

  std::ifstream steps(dir / "steps.csv");
  std::string line;
  std::getline(steps, line);
  EXPECT_EQ(line, kStepsHeader);
  std::size_t rows = 0;
  while (std::getline(steps, line)) ++rows;
  EXPECT_EQ(rows, c.truth.samples.size());
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace mesekf::sim
