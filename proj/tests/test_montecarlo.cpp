#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "byzcd/analytics.hpp"
#include "byzcd/montecarlo.hpp"

using namespace byzcd;

namespace {

const DensityPair unit_gaussian = DensityPair::gaussian(0, 1, 1);

RuleSpec rule(RuleKind kind, int L, double h, bool byz = true) {
  RuleSpec r;
  r.kind = kind;
  r.L = L;
  r.h = h;
  r.byzantine = byz;
  return r;
}

SimulationPlan fa_plan(ScenarioConfig sc, RuleSpec r, std::size_t reps, AdversaryStrategy adv = AdversaryStrategy::mirror_max()) {
  sc.change_time.reset();
  return {sc, r, adv, reps, 10000000, 123, Regime::false_alarm};
}

SimulationPlan dd_plan(ScenarioConfig sc, RuleSpec r, std::size_t reps, AdversaryStrategy adv = AdversaryStrategy::pin_zero()) {
  sc.change_time = 0;
  return {sc, r, adv, reps, 100000, 456, Regime::detection_delay};
}

std::vector<std::uint64_t> times(const SimulationPlan& p, unsigned workers = 1) {
  std::vector<std::uint64_t> out;
  for (const auto& o : simulate_stop_times(p, workers)) out.push_back(o.stop_time);
  return out;
}

}  // namespace

TEST(Summaries, CompensatedSumAndCi) {
  std::vector<double> xs{1e16, 1.0, -1e16, 1.0};
  EXPECT_EQ(compensated_sum(xs), 2.0);
  const auto e = summarize(std::vector<double>{1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(e.mean, 2.5);
  EXPECT_NEAR(e.standard_error, std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
  EXPECT_NEAR(e.ci95.hi - e.mean, 1.959963984540054 * e.standard_error, 1e-15);
  EXPECT_TRUE(e.reliable());
}

TEST(Run, ZeroThresholdStopsImmediately) {
  const auto sc = ScenarioConfig::all_affected(6, 1, unit_gaussian);
  for (RuleKind k : {RuleKind::lth_alarm, RuleKind::voting, RuleKind::low_sum_cusum}) {
    const auto e = run(fa_plan(sc, rule(k, 2, 0.0), 1000));
    EXPECT_EQ(e.mean, 1.0);
    EXPECT_EQ(e.standard_error, 0.0);
  }
  RuleSpec c = rule(RuleKind::centralized_lth_alarm, 2, 0.0);
  EXPECT_EQ(run(fa_plan(sc, c, 100)).mean, 1.0);
}

TEST(Run, LatticeArlMatchesMarkovChain) {
  const auto m = DensityPair::lattice();
  const auto sc = ScenarioConfig::all_affected(1, 0, m);
  const double e = std::exp(1.0);
  const double expected[] = {1 + e, (1 + m.p0()) / (m.p0() * m.p0())};
  for (int h = 1; h <= 2; ++h) {
    const auto est = run(fa_plan(sc, rule(RuleKind::subset_cusum, 1, h, false), 100000));
    EXPECT_NEAR(est.mean, expected[h - 1], 3 * est.standard_error) << "h=" << h;
    EXPECT_NEAR(markov_arl({h, m.p0()}), expected[h - 1], 1e-10);
  }
}

TEST(Run, LatticeDelayMatchesPostChangeChain) {
  const auto m = DensityPair::lattice();
  const auto sc = ScenarioConfig::all_affected(1, 0, m);
  for (int h = 1; h <= 4; ++h) {
    const auto est = run(dd_plan(sc, rule(RuleKind::subset_cusum, 1, h, false), 100000));
    EXPECT_NEAR(est.mean, markov_arl({h, m.p1()}), 3 * est.standard_error) << "h=" << h;
  }
}

TEST(Run, PlanConsistency) {
  const auto sc = ScenarioConfig::all_affected(3, 1, unit_gaussian, 5);
  SimulationPlan p{sc, rule(RuleKind::lth_alarm, 2, 1.0), AdversaryStrategy::mirror_max(), 10, 100, 1, Regime::false_alarm};
  EXPECT_THROW(run(p), std::invalid_argument);
  p.regime = Regime::detection_delay;
  EXPECT_THROW(run(p), std::invalid_argument);  // nu must be 0
  p.scenario.change_time = 0;
  EXPECT_NO_THROW(run(p));
  p.rule.L = 1;  // L <= M
  EXPECT_THROW(run(p), std::invalid_argument);
  p.rule.L = 2;
  p.replications = 0;
  EXPECT_THROW(run(p), std::invalid_argument);
}

TEST(Run, CensoringIsReported) {
  const auto sc = ScenarioConfig::all_affected(3, 0, unit_gaussian);
  auto p = fa_plan(sc, rule(RuleKind::lth_alarm, 1, 8.0, false), 200);
  p.horizon = 3;
  EXPECT_THROW(run(p), SimulationError);
  p.horizon = 3000;
  const auto e = summarize(simulate_stop_times(p));
  EXPECT_GT(e.censored, 0u);
  EXPECT_LT(e.censored, e.n);
  EXPECT_FALSE(e.reliable());
}

TEST(Run, BitIdenticalAcrossWorkerCounts) {
  const auto sc = ScenarioConfig::all_affected(5, 2, unit_gaussian);
  const auto p = fa_plan(sc, rule(RuleKind::low_sum_cusum, 3, 3.0), 3000);
  const auto a = run(p, 1), b = run(p, 3), c = run(p, 8);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.mean, c.mean);
  EXPECT_EQ(a.standard_error, c.standard_error);
  EXPECT_EQ(times(p, 1), times(p, 5));
}

// Explicit worst-case adversaries and the honest-equivalent rules stop at the
// same time on every path when the honest streams are shared.
TEST(Reduction, PathwiseEqualityOnMatchedSeeds) {
  const auto sc = ScenarioConfig::all_affected(6, 2, unit_gaussian);
  for (RuleKind k : {RuleKind::lth_alarm, RuleKind::voting, RuleKind::low_sum_cusum})
    for (int L = 3; L <= 4; ++L) {
      const auto r = rule(k, L, 3.0);
      auto fa = fa_plan(sc, r, 2000);
      auto fa_eq = fa;
      fa_eq.rule = honest_equivalent(r, WorstCase::false_alarm, sc.K, sc.M);
      EXPECT_EQ(times(fa), times(fa_eq)) << to_string(k) << " L=" << L;

      auto dd = dd_plan(sc, r, 2000);
      auto dd_eq = dd;
      dd_eq.rule = honest_equivalent(r, WorstCase::delay, sc.K, sc.M);
      EXPECT_EQ(times(dd), times(dd_eq)) << to_string(k) << " L=" << L;
    }
}

TEST(Reduction, CentralizedPathwise) {
  const auto sc = ScenarioConfig::all_affected(6, 1, unit_gaussian);
  RuleSpec c = rule(RuleKind::centralized_lth_alarm, 2, 4.0);
  auto fa = fa_plan(sc, c, 2000);
  auto eq = fa;
  eq.rule = honest_equivalent(c, WorstCase::false_alarm, 6, 1);
  EXPECT_EQ(times(fa), times(eq));
  auto dd = dd_plan(sc, c, 2000);
  auto dd_eq = dd;
  dd_eq.rule = honest_equivalent(c, WorstCase::delay, 6, 1);
  EXPECT_EQ(times(dd), times(dd_eq));
}

TEST(Reduction, MirrorMaxIsWorstAmongStrategies) {
  const auto sc = ScenarioConfig::all_affected(5, 2, unit_gaussian);
  const auto r = rule(RuleKind::lth_alarm, 3, 2.5);
  const auto worst = run(fa_plan(sc, r, 5000));
  const auto zero = run(fa_plan(sc, r, 5000, AdversaryStrategy::pin_zero()));
  const auto mimic = run(fa_plan(sc, r, 5000, AdversaryStrategy::honest_mimic()));
  EXPECT_LT(worst.ci95.hi, mimic.ci95.lo);
  EXPECT_LT(mimic.ci95.hi, zero.ci95.lo);
  EXPECT_EQ(zero.censored, 0u);
}

TEST(Dominance, LthAlarmBeforeVotingOnEveryPath) {
  const auto sc = ScenarioConfig::all_affected(6, 1, unit_gaussian);
  for (int L = 2; L <= 5; ++L) {
    const auto a = times(dd_plan(sc, rule(RuleKind::lth_alarm, L, 4.0), 3000));
    const auto b = times(dd_plan(sc, rule(RuleKind::voting, L, 4.0), 3000));
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_LE(a[i], b[i]) << "L=" << L << " rep " << i;
    const auto fa_a = times(fa_plan(sc, rule(RuleKind::lth_alarm, L, 2.0), 2000));
    const auto fa_b = times(fa_plan(sc, rule(RuleKind::voting, L, 2.0), 2000));
    for (std::size_t i = 0; i < fa_a.size(); ++i) ASSERT_LE(fa_a[i], fa_b[i]);
  }
}

TEST(Monotonicity, ArlAndDelayNondecreasingInThreshold) {
  const auto sc = ScenarioConfig::all_affected(6, 1, unit_gaussian);
  for (RuleKind k : {RuleKind::lth_alarm, RuleKind::voting, RuleKind::low_sum_cusum}) {
    double prev_arl = 0, prev_delay = 0;
    for (double h = 0.5; h <= 4.0; h += 0.5) {
      const double arl = run(fa_plan(sc, rule(k, 3, h), 2000)).mean;
      const double delay = run(dd_plan(sc, rule(k, 3, h), 2000)).mean;
      EXPECT_GE(arl, prev_arl) << to_string(k) << " h=" << h;
      EXPECT_GE(delay, prev_delay) << to_string(k) << " h=" << h;
      prev_arl = arl;
      prev_delay = delay;
    }
  }
}

TEST(Run, ScriptedAdversaryExhaustionPropagates) {
  const auto sc = ScenarioConfig::all_affected(3, 1, unit_gaussian);
  auto p = fa_plan(sc, rule(RuleKind::lth_alarm, 2, 50.0), 2, AdversaryStrategy::scripted({{0.0}, {0.0}}));
  EXPECT_THROW(run(p), std::out_of_range);
}

TEST(Run, HonestMimicPlan) {
  const auto sc = ScenarioConfig::all_affected(3, 1, DensityPair::lattice());
  const auto e = run(dd_plan(sc, rule(RuleKind::lth_alarm, 2, 3.0), 2000, AdversaryStrategy::honest_mimic()));
  EXPECT_TRUE(e.reliable());
  EXPECT_GT(e.mean, 3.0);
}

TEST(Calibration, LatticeSingleSensorFindsTwo) {
  const auto sc = ScenarioConfig::all_affected(1, 0, DensityPair::lattice());
  CalibrationOptions o;
  o.seed = 3;
  const double gamma = (1 + sc.model.p0()) / (sc.model.p0() * sc.model.p0());
  const auto res = calibrate_threshold(sc, rule(RuleKind::subset_cusum, 1, 1.0, false), AdversaryStrategy::mirror_max(), gamma, o);
  EXPECT_EQ(std::ceil(res.threshold), 2.0);  // any h in (1, 2] is the lattice threshold 2
  EXPECT_LE(std::abs(res.achieved.mean / gamma - 1), 0.05);
}

TEST(Calibration, GaussianLthAlarmWithinTolerance) {
  const auto sc = ScenarioConfig::all_affected(6, 1, unit_gaussian);
  CalibrationOptions o;
  o.seed = 11;
  const auto res = calibrate_threshold(sc, rule(RuleKind::lth_alarm, 2, 1.0), AdversaryStrategy::mirror_max(), 1000.0, o);
  EXPECT_GE(res.achieved.mean, 950.0);
  EXPECT_LE(res.achieved.mean, 1050.0);
  EXPECT_TRUE(res.achieved.reliable());
  EXPECT_FALSE(res.iterations.empty());
  EXPECT_TRUE(res.iterations.back().confirmation);
  EXPECT_FALSE(res.simulated_rule.byzantine);
  EXPECT_EQ(res.simulated_rule.L, 1);
}

TEST(Calibration, Errors) {
  const auto sc = ScenarioConfig::all_affected(3, 0, unit_gaussian);
  EXPECT_THROW(calibrate_threshold(sc, rule(RuleKind::lth_alarm, 1, 1.0), AdversaryStrategy::mirror_max(), 1.0), std::invalid_argument);
  CalibrationOptions o;
  o.max_evaluations = 1;
  o.search_replications = 200;
  EXPECT_THROW(calibrate_threshold(sc, rule(RuleKind::lth_alarm, 1, 1.0), AdversaryStrategy::mirror_max(), 5000.0, o),
               CalibrationError);
}

// For the voting rule the ARL grows like e^{(L-M)h}; check the empirical slope of log ARL.
TEST(Calibration, VotingGrowthRate) {
  const auto sc = ScenarioConfig::all_affected(5, 1, unit_gaussian);
  const auto r = rule(RuleKind::voting, 3, 0.0);  // L - M = 2
  auto arl = [&](double h) {
    auto p = fa_plan(sc, r, 20000);
    p.rule.h = h;
    return run(p).mean;
  };
  const double slope = std::log(arl(3.0) / arl(2.0));
  EXPECT_GT(slope, 1.5);
  EXPECT_LT(slope, 2.5);
  EXPECT_EQ(arl_growth_rate(r, 1, 5), 2.0);
  EXPECT_EQ(arl_growth_rate(rule(RuleKind::low_sum_cusum, 5, 1), 1, 6), 1.0);
}

TEST(Frontier, SmallGridIsDeterministic) {
  const auto sc = ScenarioConfig::all_affected(3, 1, unit_gaussian);
  std::vector<NamedRule> rules{{"a", rule(RuleKind::lth_alarm, 2, 1.0)}, {"v", rule(RuleKind::voting, 2, 1.0)},
                               {"s", rule(RuleKind::low_sum_cusum, 2, 1.0)}};
  FrontierOptions o;
  o.calibration.search_replications = 500;
  o.calibration.tolerance = 0.1;
  o.calibration.seed = 5;
  o.delay_replications = 2000;
  const auto a = frontier(sc, rules, {20.0, 60.0}, o);
  ASSERT_EQ(a.size(), 6u);
  for (const auto& row : a) {
    EXPECT_GT(row.delay_norm, 0.0);
    EXPECT_LE(std::abs(row.arl.mean / row.gamma - 1), 0.1);
  }
  EXPECT_EQ(a[0].threshold, a[1].threshold);  // lth-alarm and voting share the honest first alarm
  o.calibration.workers = 3;
  const auto b = frontier(sc, rules, {20.0, 60.0}, o);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].threshold, b[i].threshold);
    EXPECT_EQ(a[i].delay.mean, b[i].delay.mean);
  }
}
