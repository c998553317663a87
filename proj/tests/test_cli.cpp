#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

namespace {

namespace fs = std::filesystem;

const fs::path kScenarios = MESEKF_SCENARIO_DIR;

int run(const std::string& args, const fs::path& stdout_file = "/dev/null") {
  const std::string cmd = std::string(MESEKF_CLI) + " " + args + " > " + stdout_file.string() +
                          " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mesekf_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string simulate(const std::string& out, int threads = 1) {
    return "simulate --config " + (kScenarios / "flat.json").string() +
           " --trials 10 --seed 3 --threads " + std::to_string(threads) + " --out " +
           (dir_ / out).string();
  }

  fs::path dir_;
};

TEST_F(Cli, SimulateWritesStepsCsv) {
  ASSERT_EQ(run(simulate("a")), 0);
  std::ifstream in(dir_ / "a" / "steps.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "step,time_s,rmse_pos_m,rmse_head_rad,anees,anees_lo,anees_hi");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  // duration / dt steps plus the initial state.
  EXPECT_EQ(rows, 90u * 20u + 1u);
  EXPECT_TRUE(fs::exists(dir_ / "a" / "summary.json"));
  EXPECT_TRUE(fs::exists(dir_ / "a" / "timing.csv"));
}

TEST_F(Cli, EqualSeedsGiveIdenticalOutputs) {
  ASSERT_EQ(run(simulate("a")), 0);
  ASSERT_EQ(run(simulate("b", 2)), 0);
  EXPECT_EQ(slurp(dir_ / "a" / "steps.csv"), slurp(dir_ / "b" / "steps.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "summary.json"), slurp(dir_ / "b" / "summary.json"));
}

TEST_F(Cli, MetricsReproducesTheSummary) {
  ASSERT_EQ(run(simulate("a")), 0);
  const std::string steps = slurp(dir_ / "a" / "steps.csv");
  const std::string summary = slurp(dir_ / "a" / "summary.json");
  ASSERT_EQ(run("metrics --in " + (dir_ / "a").string(), dir_ / "m.json"), 0);
  EXPECT_EQ(slurp(dir_ / "m.json"), summary);
  ASSERT_EQ(run("metrics --write --in " + (dir_ / "a").string()), 0);
  EXPECT_EQ(slurp(dir_ / "a" / "steps.csv"), steps);
  EXPECT_EQ(slurp(dir_ / "a" / "summary.json"), summary);
}

TEST_F(Cli, SurfaceInfo) {
  ASSERT_EQ(run("surface-info --grid 41 --config " + (kScenarios / "curved.json").string(),
                dir_ / "info.txt"),
            0);
  const std::string text = slurp(dir_ / "info.txt");
  EXPECT_NE(text.find("domain"), std::string::npos);
  EXPECT_NE(text.find("curvature"), std::string::npos);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("simulate --trials 3"), 1);
  EXPECT_EQ(run("simulate --config " + (dir_ / "missing.json").string() + " --out " +
                (dir_ / "x").string()),
            2);

  nlohmann::json j = nlohmann::json::parse(slurp(kScenarios / "flat.json"));
  j["surface"] = (kScenarios / "surfaces" / "flat.json").string();
  j["sensors"]["range_std"] = "loud";
  std::ofstream(dir_ / "bad.json") << j.dump();
  EXPECT_EQ(run("simulate --config " + (dir_ / "bad.json").string() + " --out " +
                (dir_ / "x").string()),
            2);

  j = nlohmann::json::parse(slurp(kScenarios / "flat.json"));
  j["surface"] = (kScenarios / "surfaces" / "flat.json").string();
  j["trajectory"]["duration"] = 5.0;
  j["divergence"] = {{"threshold_m", 1e-9}, {"max_exclusion_rate", 0.1}};
  std::ofstream(dir_ / "diverge.json") << j.dump();
  EXPECT_EQ(run("simulate --trials 2 --config " + (dir_ / "diverge.json").string() + " --out " +
                (dir_ / "x").string()),
            3);
}

}  // namespace
