#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "byzcd/config.hpp"
#include "byzcd/report.hpp"

using namespace byzcd;

namespace {

const char* base = R"([scenario]
K = 6
M = 1
affected = 0,1,2
model = gaussian
mu0 = 0
mu1 = 1
sigma = 1

[experiment]
gammas = 100, 1000
seed = 42
replications = 5000

[rule:tau2]
kind = lth-alarm
L = 2
h = 3.5

[rule:grp]
kind = centralized-lth-alarm
L = 2
partition = 0,1;2,3;4,5
)";

}  // namespace

TEST(Config, ParsesScenarioRulesAndExperiment) {
  const auto cfg = parse_config_text(base);
  EXPECT_EQ(cfg.scenario.K, 6);
  EXPECT_EQ(cfg.scenario.affected, (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(cfg.gammas, (std::vector<double>{100, 1000}));
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.replications, 5000u);
  ASSERT_EQ(cfg.rules.size(), 2u);
  EXPECT_EQ(cfg.rules[0].name, "tau2");
  EXPECT_EQ(cfg.rules[0].rule.h, 3.5);
  ASSERT_TRUE(cfg.rules[1].rule.partition);
  EXPECT_EQ((*cfg.rules[1].rule.partition)[1], (std::vector<int>{2, 3}));
}

TEST(Config, LatticeAndAllAffected) {
  const auto cfg = parse_config_text("[scenario]\nK=3\nM=1\nmodel=lattice\na=1\n");
  EXPECT_FALSE(cfg.scenario.model.is_gaussian());
  EXPECT_EQ(cfg.scenario.affected, (std::vector<int>{0, 1}));
  EXPECT_TRUE(cfg.gammas.empty());
}

TEST(Config, RejectsLNotAboveM) {
  try {
    parse_config_text("[scenario]\nK=5\nM=2\n[rule:v]\nkind=voting\nL=2\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("L ≤ M"), std::string::npos);
  }
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config_text("[scenario]\nK=6\nM=1\n[experiment]\ngammas=1000,100\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[scenario]\nK=6\nM=1\n[experiment]\ngammas=1\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[scenario]\nK=6\nM=1\n[experiment]\ngammas=10,x\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[scenario]\nK=6\nM=6\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[scenario]\nK=6\nM=1\naffected=5\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[scenario]\nK=6\nM=1\nmodel=cauchy\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[scenario]\nK=6\nM=1\nsigma=0\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[scenario]\nK=7\nM=1\n[rule:c]\nkind=centralized-lth-alarm\nL=2\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[scenario]\nK=6\nM=1\n[rule:t]\nkind=top-sum-cusum\nL=2\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[scenario]\nK=6\nM=1\n[rule:t]\nkind=majority\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[scenario]\nK=6\nM=1\n[experiment]\nadversary=greedy\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[scenario]\nK=6\nM=1\n[bogus]\nx=1\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[scenario\nK=6\n"), ConfigError);
}

TEST(Report, RealFormattingRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 12345.678901234567, 2.0})
    EXPECT_EQ(parse_real_field(format_real(v)), v);
}

TEST(Report, FrontierCsvRoundTrip) {
  FrontierRecord r{"lowsum5", "low-sum-cusum", 5, 6, 1, 5, 1000.0, std::log(1000.0), 10.875708661525287, 975.2912,
                   9.851101736394671, 6.56426, 0.006408097780244275, 1.9005479305188266, 0, 100000, 20240612};
  FrontierRecord s = r;
  s.rule = "tau2";
  s.kind = "lth-alarm";
  s.delay_mean = 1.0 / 7.0;
  std::stringstream io;
  write_frontier_csv(io, {r, s});
  const std::string text = io.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), frontier_csv_header);
  const auto back = read_frontier_csv(io);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], r);
  EXPECT_EQ(back[1], s);
  std::stringstream bad("rule,kind\n");
  EXPECT_THROW(read_frontier_csv(bad), std::invalid_argument);
}

TEST(Report, PlotDataBlocksPerRule) {
  std::vector<FrontierRow> rows(4);
  const char* names[] = {"a", "b", "a", "b"};
  for (int i = 0; i < 4; ++i) {
    rows[i].rule_name = names[i];
    rows[i].log_gamma = i < 2 ? 2.0 : 3.0;
    rows[i].delay.mean = 5.0 + i;
  }
  std::ostringstream os;
  write_plot_data(os, rows);
  const std::string t = os.str();
  EXPECT_NE(t.find("# rule a"), std::string::npos);
  EXPECT_NE(t.find("\n\n\n# rule b"), std::string::npos);
  EXPECT_NE(t.find("3 7 "), std::string::npos);
}
