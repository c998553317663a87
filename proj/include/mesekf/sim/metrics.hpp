#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <utility>
#include <vector>

#include "mesekf/errors.hpp"

namespace mesekf::sim {

/// Error and normalised errors of one trial at one step. The error is
/// (chart u, chart v, heading), truth minus estimate.
struct StepRecord {
  double e_u = 0.0;
  double e_v = 0.0;
  double e_heading = 0.0;
  double nees_position = 0.0;
  double nees_heading = 0.0;
  double nees = 0.0;
};

struct TrialRecord {
  bool diverged = false;
  std::vector<StepRecord> steps;
};

/// Standard normal quantile (Acklam's rational approximation with one Halley step).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error("normal_quantile: p must lie in (0, 1)");
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x = 0.0;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

/// Chi-square quantile by the Wilson-Hilferty cube approximation.
inline double chi_square_quantile(double p, double dof) {
  const double k = 2.0 / (9.0 * dof);
  const double c = 1.0 - k + normal_quantile(p) * std::sqrt(k);
  return dof * c * c * c;
}

/// Two-sided ANEES acceptance interval for `dof` = N*m degrees of freedom.
inline std::pair<double, double> anees_bounds(double dof, double confidence = 0.99) {
  const double tail = 0.5 * (1.0 - confidence);
  return {chi_square_quantile(tail, dof) / dof, chi_square_quantile(1.0 - tail, dof) / dof};
}

struct StepMetrics {
  double rmse_position = 0.0;
  double rmse_heading = 0.0;
  double anees = 0.0;
  double anees_position = 0.0;
  double anees_heading = 0.0;
  double anees_lo = 0.0;
  double anees_hi = 0.0;
};

struct CampaignMetrics {
  std::size_t num_trials = 0;
  std::size_t num_valid = 0;
  double exclusion_rate = 0.0;
  std::vector<StepMetrics> steps;
  // Position and heading bounds for the per-quantity variants.
  std::pair<double, double> bounds_position;
  std::pair<double, double> bounds_heading;
};

/// Per-step RMSE and ANEES over the non-divergent trials.
inline CampaignMetrics compute_metrics(const std::vector<TrialRecord>& trials) {
  CampaignMetrics out;
  out.num_trials = trials.size();
  std::size_t num_steps = 0;
  for (const auto& t : trials) {
    if (!t.diverged) {
      ++out.num_valid;
      num_steps = std::max(num_steps, t.steps.size());
    }
  }
  out.exclusion_rate =
      trials.empty() ? 0.0
                     : static_cast<double>(out.num_trials - out.num_valid) / out.num_trials;
  if (out.num_valid == 0) {
    return out;
  }
  const double n = static_cast<double>(out.num_valid);
  const auto bounds = anees_bounds(3.0 * n);
  out.bounds_position = anees_bounds(2.0 * n);
  out.bounds_heading = anees_bounds(n);
  out.steps.resize(num_steps);
  for (std::size_t k = 0; k < num_steps; ++k) {
    double sq_pos = 0.0;
    double sq_head = 0.0;
    double nees = 0.0;
    double nees_pos = 0.0;
    double nees_head = 0.0;
    for (const auto& t : trials) {
      if (t.diverged) continue;
      if (t.steps.size() != num_steps) {
        throw Error("compute_metrics: trials have different lengths");
      }
      const StepRecord& r = t.steps[k];
      sq_pos += r.e_u * r.e_u + r.e_v * r.e_v;
      sq_head += r.e_heading * r.e_heading;
      nees += r.nees;
      nees_pos += r.nees_position;
      nees_head += r.nees_heading;
    }
    StepMetrics& m = out.steps[k];
    m.rmse_position = std::sqrt(sq_pos / n);
    m.rmse_heading = std::sqrt(sq_head / n);
    m.anees = nees / (3.0 * n);
    m.anees_position = nees_pos / (2.0 * n);
    m.anees_heading = nees_head / n;
    m.anees_lo = bounds.first;
    m.anees_hi = bounds.second;
  }
  return out;
}

/// Fraction of steps in [first, last) whose combined ANEES lies inside its bounds.
inline double fraction_within_bounds(const CampaignMetrics& m, std::size_t first = 0,
                                     std::size_t last = static_cast<std::size_t>(-1)) {
  last = std::min(last, m.steps.size());
  if (first >= last) return 0.0;
  std::size_t inside = 0;
  for (std::size_t k = first; k < last; ++k) {
    const auto& s = m.steps[k];
    if (s.anees >= s.anees_lo && s.anees <= s.anees_hi) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(last - first);
}

inline double mean_anees(const CampaignMetrics& m, std::size_t first = 0,
                         std::size_t last = static_cast<std::size_t>(-1)) {
  last = std::min(last, m.steps.size());
  if (first >= last) return 0.0;
  double s = 0.0;
  for (std::size_t k = first; k < last; ++k) s += m.steps[k].anees;
  return s / static_cast<double>(last - first);
}

}  // namespace mesekf::sim
