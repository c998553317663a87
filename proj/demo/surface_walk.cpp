// Drives the three filters along a short loop on a bumpy surface and prints
// the final chart-space errors.

#include <cmath>
#include <cstdio>

#include "mesekf/sim/sim.hpp"

int main() {
  using namespace mesekf;
  using namespace mesekf::sim;

  const int n = 8;
  auto knots = clamped_uniform_knots(3, n, 0.0, 20.0);
  const auto g = greville_abscissae(knots, 3);
  Eigen::MatrixXd ctrl(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      ctrl(i, j) = 0.8 * std::sin(0.3 * g[i]) * std::cos(0.25 * g[j]);
    }
  }
  const BSplineSurface surface(3, 3, knots, knots, ctrl);

  TrajectorySpec path;
  path.kind = PathKind::kCircle;
  path.centre = {10.0, 10.0};
  path.radius = 5.0;
  path.speed = 1.0;
  path.duration = 30.0;
  path.dt = 0.05;
  const GroundTruth truth = generate_ground_truth(surface, path);

  SensorSuite sensors;
  sensors.anchors = {{4.0, 10.0, 2.0}, {16.0, 10.0, 2.0}};
  const SensorSchedule schedule = SensorSchedule::three_phase(path.duration);
  const MeasurementStreams streams =
      synthesize_measurements(surface, truth, sensors, schedule, /*seed=*/7);

  for (FilterKind kind : {FilterKind::kManifold, FilterKind::kProjected, FilterKind::kConstrained}) {
    TrialOptions opt;
    opt.kind = kind;
    const FilterState init = initial_state(truth.samples.front(), opt.initial, 7, 0);
    const TrialResult r = run_trial(surface, truth, streams, init, opt);
    if (r.record.diverged) {
      std::printf("%-9s diverged\n", to_string(kind).c_str());
      continue;
    }
    const StepRecord& last = r.record.steps.back();
    std::printf("%-9s final position error %.4f m, heading error %.5f rad, NEES %.2f\n",
                to_string(kind).c_str(), std::hypot(last.e_u, last.e_v),
                std::abs(last.e_heading), last.nees);
  }
  return 0;
}
