#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mesekf/io/surface_io.hpp"
#include "mesekf/manifold.hpp"
#include "mesekf/sim/report.hpp"
#include "mesekf/sim/scenario.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct SimulateArgs {
  std::string config;
  std::optional<std::string> filter;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = 0;
};

int run_simulate(const SimulateArgs& a) {
  using namespace mesekf::sim;
  const Scenario sc = load_scenario(a.config);
  const FilterKind kind = a.filter ? parse_filter_kind(*a.filter) : sc.filter;
  const std::size_t trials = a.trials.value_or(sc.trials);
  if (trials == 0) throw mesekf::ConfigError("trials", "must be at least 1");
  Campaign c = make_campaign(sc, kind, trials, a.seed.value_or(sc.seed));
  c.threads = a.threads;
  const auto results = run_campaign(c);

  RunInfo info;
  info.filter = to_string(kind);
  info.seed = c.seed;
  info.dt = c.truth.dt;
  info.trials = trials;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].record.diverged) info.diverged.push_back(i);
  }
  const auto summary = write_campaign(a.out, info, results);
  std::cout << summary.dump(2) << '\n';
  const double excluded = summary["exclusion_rate"].get<double>();
  if (excluded > sc.max_exclusion_rate) {
    std::cerr << "divergent trials: " << info.diverged.size() << " of " << trials
              << " exceed the allowed exclusion rate " << sc.max_exclusion_rate << '\n';
    return kExitRuntime;
  }
  return 0;
}

int run_metrics(const std::string& in, bool write) {
  using namespace mesekf::sim;
  const auto [info, recs] = read_trials(in);
  const auto summary = summarize(info, recs);
  const std::string text = summary.dump(2) + "\n";
  std::cout << text;
  if (write) {
    write_steps_csv(std::filesystem::path(in) / "steps.csv", compute_metrics(recs), info.dt);
    std::ofstream(std::filesystem::path(in) / "summary.json", std::ios::binary) << text;
  }
  return 0;
}

int run_surface_info(const std::string& config, int grid) {
  using namespace mesekf;
  const io::Json j = io::read_json_file(config);
  std::shared_ptr<const BSplineSurface> surface;
  if (j.is_object() && j.contains("control_points")) {
    surface = std::make_shared<const BSplineSurface>(io::surface_from_json(j));
  } else {
    surface = sim::scenario_from_json(j, std::filesystem::path(config).parent_path()).surface;
  }
  const BSplineSurface& s = *surface;
  double k_min = std::numeric_limits<double>::infinity();
  double k_max = -k_min;
  double z_min = k_min;
  double z_max = -k_min;
  double slope_max = 0.0;
  double ortho_err = 0.0;
  double normal_err = 0.0;
  double det_err = 0.0;
  for (int i = 0; i < grid; ++i) {
    for (int k = 0; k < grid; ++k) {
      const double u = s.u_min() + (s.u_max() - s.u_min()) * i / (grid - 1);
      const double v = s.v_min() + (s.v_max() - s.v_min()) * k / (grid - 1);
      const SurfacePartials d = s.evaluate(u, v, 2);
      const double w = 1.0 + d.z_u * d.z_u + d.z_v * d.z_v;
      const double gauss = (d.z_uu * d.z_vv - d.z_uv * d.z_uv) / (w * w);
      const double mean = ((1.0 + d.z_v * d.z_v) * d.z_uu - 2.0 * d.z_u * d.z_v * d.z_uv +
                           (1.0 + d.z_u * d.z_u) * d.z_vv) /
                          (2.0 * std::pow(w, 1.5));
      const double disc = std::sqrt(std::max(0.0, mean * mean - gauss));
      k_min = std::min(k_min, mean - disc);
      k_max = std::max(k_max, mean + disc);
      z_min = std::min(z_min, d.z);
      z_max = std::max(z_max, d.z);
      slope_max = std::max(slope_max, std::sqrt(w - 1.0));
      const Eigen::Matrix3d r = tangent_frame(s, {u, v}).rotation;
      ortho_err = std::max(
          ortho_err, (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff());
      det_err = std::max(det_err, std::abs(r.determinant() - 1.0));
      const Eigen::Vector3d n = Eigen::Vector3d(-d.z_u, -d.z_v, 1.0).normalized();
      normal_err = std::max(normal_err, (r.col(2) - n).norm());
    }
  }
  std::printf("domain: u [%g, %g], v [%g, %g]\n", s.u_min(), s.u_max(), s.v_min(), s.v_max());
  std::printf("degree: %d x %d, control points: %ld x %ld\n", s.degree_u(), s.degree_v(),
              static_cast<long>(s.control_points().rows()),
              static_cast<long>(s.control_points().cols()));
  std::printf("elevation range: [%.6g, %.6g] m\n", z_min, z_max);
  std::printf("max slope: %.6g\n", slope_max);
  std::printf("principal curvature range: [%.6g, %.6g] 1/m\n", k_min, k_max);
  std::printf("frame checks on a %dx%d grid: max |R^T R - I| = %.3e, max |det R - 1| = %.3e, "
              "max normal error = %.3e\n",
              grid, grid, ortho_err, det_err, normal_err);
  return (ortho_err < 1e-9 && normal_err < 1e-9) ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surface-bound localization filters: simulation and evaluation"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run a Monte-Carlo campaign");
  simulate->add_option("--config", sim.config, "Scenario JSON")->required();
  simulate->add_option("--filter", sim.filter, "m-esekf, mp-esekf or c-esekf");
  simulate->add_option("--trials", sim.trials, "Number of trials");
  simulate->add_option("--seed", sim.seed, "Random seed");
  simulate->add_option("--out", sim.out, "Output directory")->required();
  simulate->add_option("--threads", sim.threads, "Worker threads (0 = all cores)");

  std::string metrics_in;
  bool metrics_write = false;
  auto* metrics = app.add_subcommand("metrics", "Recompute aggregates from a simulate output");
  metrics->add_option("--in", metrics_in, "Directory written by simulate")->required();
  metrics->add_flag("--write", metrics_write, "Rewrite steps.csv and summary.json");

  std::string info_config;
  int info_grid = 101;
  auto* info = app.add_subcommand("surface-info", "Print surface domain and frame checks");
  info->add_option("--config", info_config, "Scenario or surface JSON")->required();
  info->add_option("--grid", info_grid, "Samples per axis")->check(CLI::Range(2, 10000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return e.get_exit_code() == 0 ? code : kExitUsage;
  }

  try {
    if (*simulate) return run_simulate(sim);
    if (*metrics) return run_metrics(metrics_in, metrics_write);
    if (*info) return run_surface_info(info_config, info_grid);
  } catch (const mesekf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
