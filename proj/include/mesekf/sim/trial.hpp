#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "mesekf/errors.hpp"
#include "mesekf/estimator.hpp"
#include "mesekf/rotation.hpp"
#include "mesekf/sim/filters.hpp"
#include "mesekf/sim/metrics.hpp"
#include "mesekf/sim/random.hpp"
#include "mesekf/sim/sensors.hpp"
#include "mesekf/sim/trajectory.hpp"

namespace mesekf::sim {

/// Initial estimate uncertainty. The initial estimate is drawn from this distribution
/// around the true initial state.
struct InitialUncertainty {
  double position_std = 0.1;
  double heading_std = 0.05;

  Eigen::Matrix3d covariance() const {
    return Eigen::Vector3d(position_std * position_std, position_std * position_std,
                           heading_std * heading_std)
        .asDiagonal();
  }
};

struct TrialOptions {
  FilterKind kind = FilterKind::kManifold;
  FilterConfig config;
  InitialUncertainty initial;
  /// Chart position error beyond which a trial counts as divergent.
  double divergence_threshold = 10.0;
  /// Scales the drawn initial offset; 0 starts at the truth.
  double noise_scale = 1.0;
};

struct TrialResult {
  TrialRecord record;
  std::vector<Eigen::Matrix3d> covariances;
  TimingLog timings;
  std::size_t skipped_updates = 0;
  std::size_t fallbacks = 0;
};

/// Initial filter state drawn around the true initial sample.
inline FilterState initial_state(const TruthSample& truth, const InitialUncertainty& init,
                                 std::uint64_t seed, std::uint64_t trial,
                                 double noise_scale = 1.0) {
  const CounterRng rng(seed, trial);
  FilterState s;
  s.position.u = truth.position.u + noise_scale * init.position_std * rng.normal(StreamId::kInitial, 0, 0);
  s.position.v = truth.position.v + noise_scale * init.position_std * rng.normal(StreamId::kInitial, 0, 1);
  s.heading = wrap_angle(truth.heading +
                         noise_scale * init.heading_std * rng.normal(StreamId::kInitial, 0, 2));
  s.covariance = init.covariance();
  return s;
}

/// Error of an estimate against truth with its normalised squared forms.
inline StepRecord evaluate(const TruthSample& truth, const ChartEstimate& est) {
  StepRecord r;
  const Eigen::Vector3d e(truth.position.u - est.position.u, truth.position.v - est.position.v,
                          wrap_angle(truth.heading - est.heading));
  r.e_u = e.x();
  r.e_v = e.y();
  r.e_heading = e.z();
  const Eigen::LDLT<Eigen::Matrix3d> full(est.covariance);
  const Eigen::LDLT<Eigen::Matrix2d> pos(est.covariance.topLeftCorner<2, 2>());
  if (full.info() != Eigen::Success || pos.info() != Eigen::Success ||
      !(est.covariance(2, 2) > 0.0)) {
    throw DegenerateCovarianceError("evaluate: covariance is not positive definite");
  }
  r.nees = e.dot(full.solve(e));
  r.nees_position = e.head<2>().dot(pos.solve(e.head<2>()));
  r.nees_heading = e.z() * e.z() / est.covariance(2, 2);
  return r;
}

/// Runs one filter over one trial. Odometry k moves step k to k+1; corrections
/// stamped at step k are applied after arriving there.
inline TrialResult run_trial(const BSplineSurface& surface, const GroundTruth& truth,
                             const MeasurementStreams& streams, const FilterState& initial,
                             const TrialOptions& options) {
  const std::size_t steps = truth.samples.size() - 1;
  auto filter = make_filter(options.kind, surface, options.config, initial, 1.0 / truth.dt);
  TrialResult out;
  out.record.steps.reserve(steps + 1);
  out.covariances.reserve(steps + 1);
  std::size_t next_pose = 0;
  std::size_t next_range = 0;
  try {
    for (std::size_t k = 0; k <= steps; ++k) {
      if (k > 0) {
        filter->propagate(streams.odometry[k - 1], truth.dt);
      }
      while (next_pose < streams.poses.size() && streams.poses[next_pose].step <= k) {
        if (streams.poses[next_pose].step == k) {
          filter->correct_pose(streams.poses[next_pose].measurement);
        }
        ++next_pose;
      }
      while (next_range < streams.ranges.size() && streams.ranges[next_range].step <= k) {
        if (streams.ranges[next_range].step == k) {
          filter->correct_range(streams.ranges[next_range].measurement);
        }
        ++next_range;
      }
      const ChartEstimate est = filter->estimate();
      const StepRecord r = evaluate(truth.samples[k], est);
      if (!(std::hypot(r.e_u, r.e_v) <= options.divergence_threshold)) {
        out.record.diverged = true;
        break;
      }
      out.record.steps.push_back(r);
      out.covariances.push_back(est.covariance);
    }
  } catch (const Error&) {
    out.record.diverged = true;
  }
  out.timings = filter->timings();
  out.skipped_updates = filter->skipped_updates();
  out.fallbacks = filter->fallbacks();
  return out;
}

/// Everything needed to run a Monte-Carlo campaign on one scenario.
struct Campaign {
  const BSplineSurface* surface = nullptr;
  GroundTruth truth;
  SensorSuite sensors;
  SensorSchedule schedule;
  TrialOptions options;
  std::uint64_t seed = 1;
  std::size_t trials = 1;
  double noise_scale = 1.0;
  unsigned threads = 0;
};

/// Runs `campaign.trials` independent trials. Trial i uses counter streams keyed by
/// (seed, i), so results do not depend on the thread count.
inline std::vector<TrialResult> run_campaign(const Campaign& campaign) {
  if (campaign.surface == nullptr) throw Error("run_campaign: no surface");
  std::vector<TrialResult> results(campaign.trials);
  auto run_one = [&](std::size_t i) {
    const MeasurementStreams streams =
        synthesize_measurements(*campaign.surface, campaign.truth, campaign.sensors,
                                campaign.schedule, campaign.seed, i, campaign.noise_scale);
    const FilterState init =
        initial_state(campaign.truth.samples.front(), campaign.options.initial, campaign.seed, i,
                      campaign.noise_scale);
    results[i] = run_trial(*campaign.surface, campaign.truth, streams, init, campaign.options);
  };
  unsigned threads = campaign.threads != 0 ? campaign.threads
                                           : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, campaign.trials));
  if (threads <= 1) {
    for (std::size_t i = 0; i < campaign.trials; ++i) run_one(i);
    return results;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < campaign.trials; i += threads) run_one(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

inline std::vector<TrialRecord> records(const std::vector<TrialResult>& results) {
  std::vector<TrialRecord> out;
  out.reserve(results.size());
  for (const auto& r : results) out.push_back(r.record);
  return out;
}

}  // namespace mesekf::sim
