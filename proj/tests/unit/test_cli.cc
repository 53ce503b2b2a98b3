#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::string kDemo = LURENET_DATA_DIR "/demo_system.json";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           (std::string("lurenet_cli_") + info->name() + "_" +
            std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) const {
    const std::string cmd = std::string("\"") + LURENET_CLI + "\" " + args +
                            " > \"" + (dir_ / "stdout.txt").string() +
                            "\" 2> \"" + (dir_ / "stderr.txt").string() + "\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string out(const std::string& sub) const {
    return "--out-dir \"" + (dir_ / sub).string() + "\"";
  }

  std::string slurp(const fs::path& p) const {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

TEST_F(Cli, VersionAndHelpExitZero) {
  EXPECT_EQ(run("--version"), 0);
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("no-such-command"), 1);
}

TEST_F(Cli, SynthFeasibleAndInfeasible) {
  EXPECT_EQ(run(out("a") + " synth --system " + kDemo +
                " --d1 0.8 --p 0.6 --q 0.6"),
            0);
  const json s = json::parse(slurp(dir_ / "a" / "synth.json"));
  EXPECT_TRUE(s["feasible"].get<bool>());
  EXPECT_NEAR(s["p_c"].get<double>(), 0.4776200057050014, 1e-9);
  const json m = json::parse(slurp(dir_ / "a" / "synth.manifest.json"));
  EXPECT_EQ(m["command"], "synth");
  EXPECT_EQ(m["exit_code"], 0);
  EXPECT_EQ(m["outputs"][0]["path"], "synth.json");

  EXPECT_EQ(run(out("b") + " synth --system " + kDemo +
                " --d1 0.8 --p 0.3 --q 0.6"),
            2);
  EXPECT_TRUE(fs::exists(dir_ / "b" / "synth.json"));
}

TEST_F(Cli, MalformedInputExitsOne) {
  std::ofstream(dir_ / "bad.json") << "{\"A\": [[1, 2]";
  EXPECT_EQ(run(out("o") + " synth --system " + (dir_ / "bad.json").string() +
                " --d1 0.5"),
            1);
  EXPECT_NE(slurp(dir_ / "stderr.txt").find("error"), std::string::npos);
  EXPECT_EQ(run(out("o") + " synth --system /nonexistent.json --d1 0.5"), 1);
  EXPECT_EQ(run(out("o") + " synth --system " + kDemo + " --d1 0.8 --p 2"), 1);
}

TEST_F(Cli, ReplayReproducesOutputs) {
  ASSERT_EQ(run(out("a") + " synth --system " + kDemo +
                " --d1 0.8 --p 0.6 --q 0.6"),
            0);
  ASSERT_EQ(run(out("a") + " simulate --system " + kDemo + " --gains " +
                (dir_ / "a" / "synth.json").string() +
                " --p 0.6 --q 0.6 --T 100 --n 5 --seed 11 --noise 0.01"),
            0);
  ASSERT_EQ(run(out("b") + " replay " +
                (dir_ / "a" / "simulate.manifest.json").string()),
            0);
  EXPECT_EQ(slurp(dir_ / "a" / "trace.csv"), slurp(dir_ / "b" / "trace.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "summary.json"),
            slurp(dir_ / "b" / "summary.json"));
}

TEST_F(Cli, CalibrateLinearAndEmptyRange) {
  std::ofstream(dir_ / "lin.json") << R"({
    "A": [[0.5, 0.2], [0.0, 1.1]], "B": [[0], [1]], "C": [[1, 0]],
    "phi": {"channels": [{"breakpoints": [], "slopes": [0.5]}]}})";
  EXPECT_EQ(run(out("a") + " calibrate --system " +
                (dir_ / "lin.json").string() + " --points 20"),
            0);
  const std::string csv = slurp(dir_ / "a" / "calibration.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 21);

  std::ofstream(dir_ / "zero.json") << R"({
    "A": [[0.5]], "B": [[1]], "C": [[1]],
    "phi": {"channels": [{"breakpoints": [], "slopes": [0.0]}]}})";
  EXPECT_EQ(run(out("b") + " calibrate --system " +
                (dir_ / "zero.json").string()),
            1);
}

TEST_F(Cli, ConfigFileWithCommandLinePrecedence) {
  std::ofstream(dir_ / "run.toml") << "[synth]\nsystem = \"" << kDemo
                                   << "\"\nd1 = \"0.8\"\np = 0.3\nq = 0.6\n";
  const std::string cfg = " --config " + (dir_ / "run.toml").string();
  EXPECT_EQ(run(out("a") + cfg + " synth"), 2);
  EXPECT_EQ(run(out("b") + cfg + " synth --p 0.6"), 0);
  const json m = json::parse(slurp(dir_ / "b" / "synth.manifest.json"));
  EXPECT_EQ(m["options"]["p"], "0.6");
}

TEST_F(Cli, NetDemoInMemory) {
  ASSERT_EQ(run(out("a") + " synth --system " + kDemo +
                " --d1 0.8 --p 0.6 --q 0.6"),
            0);
  EXPECT_EQ(run(out("a") + " net-demo --transport memory --system " + kDemo +
                " --gains " + (dir_ / "a" / "synth.json").string() +
                " --T 50 --n 2"),
            0);
  const std::string csv = slurp(dir_ / "a" / "net_trace.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 51);
}

}  // namespace
