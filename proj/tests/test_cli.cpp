#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "commands.hpp"

using namespace byzcd;
using namespace byzcd::cli;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("byzcd_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return (path / name).string();
  }
  std::string read(const std::string& name) const {
    std::ifstream in(path / name);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
};

const char* small_config = R"([scenario]
K = 3
M = 1
[experiment]
gammas = 20, 40
tolerance = 0.1
search_replications = 400
replications = 1000
seed = 9
[rule:a]
kind = lth-alarm
L = 2
h = 2
[rule:s]
kind = low-sum-cusum
L = 2
h = 3
)";

Options opts(const TempDir& d, const std::string& config) {
  Options o;
  o.config = config;
  o.out = (d.path / "out").string();
  return o;
}

}  // namespace

TEST(Cli, CalibrateWritesOneRowPerRuleAndGamma) {
  TempDir d;
  std::ostringstream out, err;
  EXPECT_EQ(cmd_calibrate(opts(d, d.write("c.cfg", small_config)), out, err), 0) << err.str();
  const std::string csv = d.read("out/calibration.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_EQ(csv, out.str());
}

TEST(Cli, ValidationErrorExitsOne) {
  TempDir d;
  std::ostringstream out, err;
  const auto cfg = d.write("bad.cfg", "[scenario]\nK=5\nM=2\n[experiment]\ngammas=100\n[rule:v]\nkind=voting\nL=2\n");
  EXPECT_EQ(cmd_calibrate(opts(d, cfg), out, err), 1);
  EXPECT_NE(err.str().find("L ≤ M"), std::string::npos);
}

TEST(Cli, EmptyGammaListIsUsageError) {
  TempDir d;
  std::ostringstream out, err;
  const auto cfg = d.write("e.cfg", "[scenario]\nK=3\nM=1\n[rule:a]\nkind=lth-alarm\nL=2\n");
  EXPECT_EQ(cmd_calibrate(opts(d, cfg), out, err), 1);
  EXPECT_EQ(cmd_frontier(opts(d, cfg), out, err), 1);
  EXPECT_EQ(cmd_asymptote(opts(d, cfg), out, err), 1);
  EXPECT_EQ(cmd_calibrate(opts(d, ""), out, err), 1);
  EXPECT_EQ(cmd_calibrate(opts(d, (d.path / "missing.cfg").string()), out, err), 1);
}

TEST(Cli, FrontierIsByteIdenticalOnRerun) {
  TempDir d;
  const auto cfg = d.write("c.cfg", small_config);
  std::ostringstream out1, out2, err;
  Options o = opts(d, cfg);
  ASSERT_EQ(cmd_frontier(o, out1, err), 0) << err.str();
  const std::string plot = d.read("out/frontier_plot.dat");
  o.workers = 4;
  ASSERT_EQ(cmd_frontier(o, out2, err), 0) << err.str();
  EXPECT_EQ(out1.str(), out2.str());
  EXPECT_EQ(plot, d.read("out/frontier_plot.dat"));
  std::istringstream in(out1.str());
  const auto rows = read_frontier_csv(in);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) EXPECT_GT(r.delay_norm, 0.0);
  EXPECT_NE(plot.find("# rule a"), std::string::npos);
  EXPECT_NE(plot.find("# rule s"), std::string::npos);
}

TEST(Cli, SimulateWithTrace) {
  TempDir d;
  Options o = opts(d, d.write("c.cfg", small_config));
  o.trace = (d.path / "trace.csv").string();
  o.reps = 500;
  std::ostringstream out, err;
  ASSERT_EQ(cmd_simulate(o, out, err), 0) << err.str();
  EXPECT_NE(out.str().find("a,lth-alarm,2,2,false-alarm,mirror-max"), std::string::npos);
  const std::string trace = d.read("trace.csv");
  EXPECT_NE(trace.find("a,1,"), std::string::npos);
  EXPECT_NE(trace.find("s,1,"), std::string::npos);
}

TEST(Cli, AsymptoteTable) {
  TempDir d;
  std::ostringstream out, err;
  const auto cfg = d.write("a.cfg", "[scenario]\nK=6\nM=1\n[experiment]\ngammas=22026.465794806718\n"
                                    "[rule:low]\nkind=low-sum-cusum\nL=5\n[rule:c]\nkind=centralized-lth-alarm\nL=2\n");
  ASSERT_EQ(cmd_asymptote(opts(d, cfg), out, err), 0) << err.str();
  EXPECT_NE(out.str().find(",5,1,\n"), std::string::npos);  // low-sum: 5.0, normalized 1
  EXPECT_NE(out.str().find(",10,2,\n"), std::string::npos);
}

TEST(Cli, ValidateDetectsInjectedFault) {
  Options o;
  o.paths = 200;
  o.reps = 20000;
  std::ostringstream good, bad, err;
  EXPECT_EQ(cmd_validate(o, good, err), 0) << good.str() << err.str();
  o.fault = "no-clamp";
  EXPECT_EQ(cmd_validate(o, bad, err), 1);
  EXPECT_NE(bad.str().find("FAIL  decomposition"), std::string::npos);
  EXPECT_NE(good.str().find("PASS  lattice-oracle"), std::string::npos);
  o.fault = "bitflip";
  EXPECT_EQ(cmd_validate(o, bad, err), 1);
}
