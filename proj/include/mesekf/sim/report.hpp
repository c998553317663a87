#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mesekf/io/json_fields.hpp"
#include "mesekf/io/surface_io.hpp"
#include "mesekf/sim/metrics.hpp"
#include "mesekf/sim/trial.hpp"

namespace mesekf::sim {

inline constexpr const char* kStepsHeader =
    "step,time_s,rmse_pos_m,rmse_head_rad,anees,anees_lo,anees_hi";
inline constexpr const char* kTimingHeader = "trial,correction_type,mean_us,p99_us";
inline constexpr const char* kTrialsHeader =
    "trial,step,e_u,e_v,e_heading,nees_pos,nees_head,nees";

/// Campaign identity stored next to the raw trial records.
struct RunInfo {
  std::string filter;
  std::uint64_t seed = 0;
  double dt = 0.0;
  std::size_t trials = 0;
  std::vector<std::size_t> diverged;
};

namespace report_detail {

inline std::string fmt(const char* spec, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

inline std::ofstream open(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  return out;
}

}  // namespace report_detail

/// Mean and 99th percentile (nearest rank) of a sample.
inline std::pair<double, double> mean_p99(std::vector<double> xs) {
  if (xs.empty()) return {0.0, 0.0};
  double s = 0.0;
  for (double x : xs) s += x;
  std::sort(xs.begin(), xs.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(xs.size())));
  return {s / static_cast<double>(xs.size()), xs[std::max<std::size_t>(rank, 1) - 1]};
}

/// Summary of a campaign; a pure function of the run info and trial records.
inline io::Json summarize(const RunInfo& info, const std::vector<TrialRecord>& trials) {
  const CampaignMetrics m = compute_metrics(trials);
  io::Json j;
  j["filter"] = info.filter;
  j["seed"] = info.seed;
  j["dt_s"] = info.dt;
  j["trials"] = m.num_trials;
  j["valid_trials"] = m.num_valid;
  j["exclusion_rate"] = m.exclusion_rate;
  j["steps"] = m.steps.size();
  if (m.steps.empty()) {
    return j;
  }
  const StepMetrics& last = m.steps.back();
  j["final_rmse_pos_m"] = last.rmse_position;
  j["final_rmse_head_rad"] = last.rmse_heading;
  double a = 0.0, ap = 0.0, ah = 0.0, rp = 0.0, rh = 0.0;
  std::size_t outside = 0;
  for (const auto& s : m.steps) {
    a += s.anees;
    ap += s.anees_position;
    ah += s.anees_heading;
    rp = std::max(rp, s.rmse_position);
    rh = std::max(rh, s.rmse_heading);
    if (s.anees < s.anees_lo || s.anees > s.anees_hi) ++outside;
  }
  const double n = static_cast<double>(m.steps.size());
  j["mean_anees"] = a / n;
  j["mean_anees_pos"] = ap / n;
  j["mean_anees_head"] = ah / n;
  j["max_rmse_pos_m"] = rp;
  j["max_rmse_head_rad"] = rh;
  j["anees_lo"] = last.anees_lo;
  j["anees_hi"] = last.anees_hi;
  j["anees_pos_bounds"] = {m.bounds_position.first, m.bounds_position.second};
  j["anees_head_bounds"] = {m.bounds_heading.first, m.bounds_heading.second};
  j["bound_violation_fraction"] = static_cast<double>(outside) / n;
  return j;
}

inline void write_steps_csv(const std::filesystem::path& file, const CampaignMetrics& m,
                            double dt) {
  auto out = report_detail::open(file);
  out << kStepsHeader << '\n';
  for (std::size_t k = 0; k < m.steps.size(); ++k) {
    const auto& s = m.steps[k];
    out << k << ',' << report_detail::fmt("%.6f", static_cast<double>(k) * dt) << ','
        << report_detail::fmt("%.9g", s.rmse_position) << ','
        << report_detail::fmt("%.9g", s.rmse_heading) << ','
        << report_detail::fmt("%.9g", s.anees) << ','
        << report_detail::fmt("%.9g", s.anees_lo) << ','
        << report_detail::fmt("%.9g", s.anees_hi) << '\n';
  }
}

inline void write_timing_csv(const std::filesystem::path& file,
                             const std::vector<TrialResult>& results) {
  auto out = report_detail::open(file);
  out << kTimingHeader << '\n';
  for (std::size_t i = 0; i < results.size(); ++i) {
    for (const auto& [name, xs] : results[i].timings) {
      const auto [mean, p99] = mean_p99(xs);
      out << i << ',' << name << ',' << report_detail::fmt("%.3f", mean) << ','
          << report_detail::fmt("%.3f", p99) << '\n';
    }
  }
}

/// Raw records at full precision so the summary can be recomputed exactly.
inline void write_trials(const std::filesystem::path& dir, const RunInfo& info,
                         const std::vector<TrialRecord>& trials) {
  auto out = report_detail::open(dir / "trials.csv");
  out << kTrialsHeader << '\n';
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (trials[i].diverged) continue;
    for (std::size_t k = 0; k < trials[i].steps.size(); ++k) {
      const StepRecord& r = trials[i].steps[k];
      out << i << ',' << k;
      for (double x : {r.e_u, r.e_v, r.e_heading, r.nees_position, r.nees_heading, r.nees}) {
        out << ',' << report_detail::fmt("%.17g", x);
      }
      out << '\n';
    }
  }
  io::Json j;
  j["filter"] = info.filter;
  j["seed"] = info.seed;
  j["dt_s"] = info.dt;
  j["trials"] = info.trials;
  j["diverged_trials"] = info.diverged;
  auto meta = report_detail::open(dir / "run.json");
  meta << j.dump(2) << '\n';
}

inline std::pair<RunInfo, std::vector<TrialRecord>> read_trials(
    const std::filesystem::path& dir) {
  const io::Json j = io::read_json_file((dir / "run.json").string(), "run.json");
  const io::Fields f(j, "run.json");
  RunInfo info;
  info.filter = f.get<std::string>("filter");
  info.seed = f.get<std::uint64_t>("seed");
  info.dt = f.get<double>("dt_s");
  info.trials = f.get<std::size_t>("trials");
  std::vector<TrialRecord> trials(info.trials);
  for (const auto& d : f.at("diverged_trials")) {
    const auto i = d.get<std::size_t>();
    if (i >= info.trials) throw ConfigError("run.json.diverged_trials", "index out of range");
    info.diverged.push_back(i);
    trials[i].diverged = true;
  }
  std::ifstream in(dir / "trials.csv");
  if (!in) throw ConfigError("trials.csv", "cannot open '" + (dir / "trials.csv").string() + "'");
  std::string line;
  std::getline(in, line);
  if (line != kTrialsHeader) throw ConfigError("trials.csv", "unexpected header");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    const std::string where = "trials.csv:" + std::to_string(line_no);
    if (cells.size() != 8) throw ConfigError(where, "expected 8 columns");
    const auto i = static_cast<std::size_t>(std::stoull(cells[0]));
    const auto k = static_cast<std::size_t>(std::stoull(cells[1]));
    if (i >= info.trials || trials[i].steps.size() != k) {
      throw ConfigError(where, "rows out of order");
    }
    StepRecord r;
    double* fields[] = {&r.e_u, &r.e_v, &r.e_heading, &r.nees_position, &r.nees_heading, &r.nees};
    for (int c = 0; c < 6; ++c) *fields[c] = std::strtod(cells[2 + c].c_str(), nullptr);
    trials[i].steps.push_back(r);
  }
  return {info, trials};
}

/// Writes steps.csv, timing.csv, summary.json and the raw records into `dir`.
inline io::Json write_campaign(const std::filesystem::path& dir, const RunInfo& info,
                               const std::vector<TrialResult>& results) {
  std::filesystem::create_directories(dir);
  const std::vector<TrialRecord> recs = records(results);
  write_trials(dir, info, recs);
  // Summaries are always derived from the parsed records so `metrics` reproduces them.
  const auto [info2, recs2] = read_trials(dir);
  const CampaignMetrics m = compute_metrics(recs2);
  write_steps_csv(dir / "steps.csv", m, info2.dt);
  write_timing_csv(dir / "timing.csv", results);
  const io::Json summary = summarize(info2, recs2);
  auto out = report_detail::open(dir / "summary.json");
  out << summary.dump(2) << '\n';
  return summary;
}

}  // namespace mesekf::sim
