#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "byzcd/analytics.hpp"
#include "byzcd/cusum.hpp"
#include "byzcd/montecarlo.hpp"
#include "byzcd/rng.hpp"
#include "byzcd/rules.hpp"

namespace byzcd {

enum class EngineFault { none, no_clamp };

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ValidationOptions {
  std::size_t paths = 2000;          // pathwise suites
  std::size_t replications = 100000;  // statistical suites
  std::uint64_t seed = 1;
  unsigned workers = 1;
  EngineFault fault = EngineFault::none;
};

namespace detail {

inline std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

template <class Recursion>
SuiteResult decomposition_suite(const ValidationOptions& o) {
  SuiteResult r{"decomposition", true, ""};
  const auto model = DensityPair::gaussian(0.0, 1.0, 1.0);
  const std::size_t units = 4, steps = 200;
  double worst = 0.0;
  std::size_t bad_paths = 0;
  std::vector<double> llrs(units);
  for (std::size_t p = 0; p < o.paths; ++p) {
    Rng rng = substream(o.seed, Stream::auxiliary, p);
    CusumSnapshot s(units);
    bool bad = false;
    const bool post = p % 2 == 1;
    for (std::size_t t = 0; t < steps; ++t) {
      for (auto& l : llrs) l = model.llr(post ? model.sample_post(rng) : model.sample_pre(rng));
      advance<Recursion>(s, llrs, 5.0);
      for (std::size_t k = 0; k < units; ++k) {
        const double err = std::abs(s.W[k] - (s.Z[k] - s.running_min[k]));
        const double tol = 1e-9 * std::max(1.0, std::abs(s.Z[k]) + std::abs(s.running_min[k]));
        worst = std::max(worst, err);
        if (err > tol || s.W[k] < 0.0 || s.W[k] < s.Z[k] - tol) bad = true;
      }
    }
    bad_paths += bad ? 1 : 0;
  }
  r.passed = bad_paths == 0;
  r.detail = std::to_string(o.paths) + " paths, " + std::to_string(bad_paths) + " violating, max |W-(Z-min Z)| = " + fmt(worst);
  return r;
}

template <class Recursion>
SuiteResult exponential_bound_suite(const ValidationOptions& o) {
  SuiteResult r{"exponential-bound", true, ""};
  const auto model = DensityPair::gaussian(0.0, 1.0, 1.0);
  std::ostringstream d;
  const std::size_t checkpoints[] = {10, 100};
  const double hs[] = {1.0, 2.0, 3.0};
  std::size_t count[2][3] = {};
  for (std::size_t i = 0; i < o.replications; ++i) {
    Rng rng = substream(o.seed, Stream::honest, i);
    CusumSnapshot s(1);
    for (std::size_t t = 1; t <= 100; ++t) {
      const double l = model.llr(model.sample_pre(rng));
      advance_prefix<Recursion>(s, std::span<const double>(&l, 1), 1e300);
      for (int c = 0; c < 2; ++c)
        if (t == checkpoints[c])
          for (int j = 0; j < 3; ++j) count[c][j] += s.W[0] >= hs[j] ? 1 : 0;
    }
  }
  const double n = static_cast<double>(o.replications);
  for (int c = 0; c < 2; ++c)
    for (int j = 0; j < 3; ++j) {
      const double p = count[c][j] / n;
      const double se = std::sqrt(std::max(p * (1 - p), 1.0 / n) / n);
      const bool ok = p <= std::exp(-hs[j]) + 3.0 * se;
      r.passed = r.passed && ok;
      d << "s=" << checkpoints[c] << " h=" << hs[j] << ": " << fmt(p) << (ok ? " <= " : " > ") << fmt(std::exp(-hs[j]))
        << "+3SE; ";
    }
  r.detail = d.str();
  return r;
}

template <class Recursion>
SuiteResult regeneration_suite(const ValidationOptions& o) {
  SuiteResult r{"regeneration", true, ""};
  const auto model = DensityPair::gaussian(0.0, 1.0, 1.0);
  const std::size_t units = 3, steps = 300;
  std::size_t checked = 0, mismatched = 0;
  std::vector<double> llrs(units);
  for (std::size_t p = 0; p < o.paths; ++p) {
    Rng rng = substream(o.seed, Stream::auxiliary, 100000 + p);
    std::vector<std::vector<double>> path(steps, std::vector<double>(units));
    for (auto& row : path)
      for (auto& l : row) l = model.llr(model.sample_pre(rng));
    const double h = 3.0;
    CusumSnapshot s(units);
    std::size_t restart = steps;
    for (std::size_t t = 0; t < steps; ++t) {
      advance<Recursion>(s, path[t], h);
      if (t >= 20 && std::all_of(s.W.begin(), s.W.end(), [](double w) { return w == 0.0; })) {
        restart = t + 1;
        break;
      }
    }
    if (restart == steps) continue;
    ++checked;
    // continue the running engine and a fresh one on the same future llrs
    CusumSnapshot cont = s;
    std::fill(cont.crossed_at.begin(), cont.crossed_at.end(), std::nullopt);
    cont.crossed_count = 0;
    CusumSnapshot fresh(units);
    bool same = true;
    for (std::size_t t = restart; t < steps; ++t) {
      advance<Recursion>(cont, path[t], h);
      advance<Recursion>(fresh, path[t], h);
      for (std::size_t k = 0; k < units; ++k) {
        same = same && cont.W[k] == fresh.W[k];
        const bool a = cont.crossed_at[k].has_value(), b = fresh.crossed_at[k].has_value();
        same = same && a == b && (!a || *cont.crossed_at[k] - restart == *fresh.crossed_at[k]);
      }
    }
    mismatched += same ? 0 : 1;
  }
  r.passed = mismatched == 0 && checked > 0;
  r.detail = std::to_string(checked) + " restarts at all-zero states, " + std::to_string(mismatched) + " mismatched";
  return r;
}

template <class Recursion>
SuiteResult adversary_reduction_suite(const ValidationOptions& o) {
  SuiteResult r{"adversary-reduction", true, ""};
  std::ostringstream d;
  const auto sc = ScenarioConfig::all_affected(5, 2, DensityPair::gaussian(0.0, 1.0, 1.0));
  struct Case {
    RuleKind kind;
    double h_fa, h_dd;
  };
  const Case cases[] = {{RuleKind::lth_alarm, 3.0, 6.0}, {RuleKind::voting, 3.0, 6.0}, {RuleKind::low_sum_cusum, 4.0, 8.0}};
  for (const auto& c : cases) {
    RuleSpec rule;
    rule.kind = c.kind;
    rule.L = 3;
    for (WorstCase mode : {WorstCase::false_alarm, WorstCase::delay}) {
      rule.h = mode == WorstCase::false_alarm ? c.h_fa : c.h_dd;
      SimulationPlan explicit_plan;
      explicit_plan.scenario = sc;
      explicit_plan.rule = rule;
      explicit_plan.replications = o.replications / 5;
      explicit_plan.seed = o.seed;
      if (mode == WorstCase::false_alarm) {
        explicit_plan.adversary = AdversaryStrategy::mirror_max();
        explicit_plan.regime = Regime::false_alarm;
        explicit_plan.horizon = 10000000;
      } else {
        explicit_plan.scenario.change_time = 0;
        explicit_plan.adversary = AdversaryStrategy::pin_zero();
        explicit_plan.regime = Regime::detection_delay;
        explicit_plan.horizon = 100000;
      }
      SimulationPlan equiv = explicit_plan;
      equiv.rule = honest_equivalent(rule, mode, sc.K, sc.M);
      equiv.adversary = AdversaryStrategy::pin_zero();
      equiv.seed = derive_seed(o.seed, Stream::auxiliary, 7);
      const auto a = summarize(simulate_stop_times<Recursion>(explicit_plan, o.workers));
      const auto b = summarize(simulate_stop_times<Recursion>(equiv, o.workers));
      const bool ok = cis_overlap(a, b) && a.reliable() && b.reliable();
      r.passed = r.passed && ok;
      d << to_string(c.kind) << (mode == WorstCase::false_alarm ? " ARL " : " delay ") << fmt(a.mean) << " vs " << fmt(b.mean)
        << (ok ? " ok" : " MISMATCH") << "; ";
    }
  }
  r.detail = d.str();
  return r;
}

template <class Recursion>
SuiteResult lattice_oracle_suite(const ValidationOptions& o) {
  SuiteResult r{"lattice-oracle", true, ""};
  std::ostringstream d;
  const auto model = DensityPair::lattice(1.0);
  for (int h = 1; h <= 4; ++h) {
    for (bool post : {false, true}) {
      SimulationPlan plan;
      plan.scenario = ScenarioConfig::all_affected(1, 0, model, post ? std::optional<std::uint64_t>(0) : std::nullopt);
      plan.rule.kind = RuleKind::subset_cusum;
      plan.rule.byzantine = false;
      plan.rule.h = h;
      plan.replications = o.replications;
      plan.horizon = 100000000;
      plan.seed = derive_seed(o.seed, Stream::auxiliary, 10 + h + (post ? 100 : 0));
      plan.regime = post ? Regime::detection_delay : Regime::false_alarm;
      const auto e = summarize(simulate_stop_times<Recursion>(plan, o.workers));
      const double exact = markov_arl({h, post ? model.p1() : model.p0()});
      const double z = (e.mean - exact) / e.standard_error;
      const bool ok = std::abs(z) <= 3.0 && e.reliable();
      r.passed = r.passed && ok;
      d << (post ? "delay" : "ARL") << " h=" << h << ": " << fmt(e.mean, 6) << " vs " << fmt(exact, 6) << " (" << fmt(z, 2)
        << " SE); ";
    }
  }
  r.detail = d.str();
  return r;
}

template <class Recursion>
SuiteResult dominance_suite(const ValidationOptions& o) {
  SuiteResult r{"dominance-sandwich", true, ""};
  const auto sc = ScenarioConfig::all_affected(6, 1, DensityPair::gaussian(0.0, 1.0, 1.0), 0);
  SimulationPlan base;
  base.scenario = sc;
  base.adversary = AdversaryStrategy::pin_zero();
  base.replications = o.paths;
  base.horizon = 100000;
  base.seed = o.seed;
  base.regime = Regime::detection_delay;
  std::size_t violations = 0;
  std::ostringstream d;
  for (int L = 2; L <= 5; ++L) {
    SimulationPlan a = base, b = base;
    a.rule.kind = RuleKind::lth_alarm;
    b.rule.kind = RuleKind::voting;
    a.rule.L = b.rule.L = L;
    a.rule.h = b.rule.h = 4.0;
    const auto ta = simulate_stop_times<Recursion>(a, o.workers);
    const auto tb = simulate_stop_times<Recursion>(b, o.workers);
    for (std::size_t i = 0; i < ta.size(); ++i) violations += ta[i].stop_time > tb[i].stop_time ? 1 : 0;
    const double ma = summarize(ta).mean, mb = summarize(tb).mean;
    if (ma > mb) ++violations;
    d << "L=" << L << ": " << fmt(ma) << " <= " << fmt(mb) << "; ";
  }
  r.passed = violations == 0;
  r.detail = d.str() + std::to_string(violations) + " violations";
  return r;
}

template <class Recursion>
SuiteResult determinism_suite(const ValidationOptions& o) {
  SuiteResult r{"determinism", true, ""};
  SimulationPlan p;
  p.scenario = ScenarioConfig::all_affected(5, 2, DensityPair::gaussian(0.0, 1.0, 1.0));
  p.rule.kind = RuleKind::low_sum_cusum;
  p.rule.L = 3;
  p.rule.h = 3.0;
  p.replications = o.paths;
  p.horizon = 1000000;
  p.seed = o.seed;
  const auto one = summarize(simulate_stop_times<Recursion>(p, 1));
  const auto many = summarize(simulate_stop_times<Recursion>(p, 4));
  const auto again = summarize(simulate_stop_times<Recursion>(p, 3));
  r.passed = one.mean == many.mean && one.standard_error == many.standard_error && one.mean == again.mean;
  r.detail = "means with 1/4/3 workers: " + fmt(one.mean, 17) + " / " + fmt(many.mean, 17) + " / " + fmt(again.mean, 17);
  return r;
}

template <class Recursion>
std::vector<SuiteResult> engine_suites(const ValidationOptions& o) {
  return {decomposition_suite<Recursion>(o), exponential_bound_suite<Recursion>(o), regeneration_suite<Recursion>(o)};
}

}  // namespace detail

/// Runs every invariant suite. An injected fault replaces the recursion in
/// the engine-level suites; the simulation suites always use the real engine
/// because an unclamped statistic under no change never stops.
inline std::vector<SuiteResult> run_validation(const ValidationOptions& o) {
  auto out = o.fault == EngineFault::no_clamp ? detail::engine_suites<NoClamp>(o) : detail::engine_suites<PositivePart>(o);
  out.push_back(detail::adversary_reduction_suite<PositivePart>(o));
  out.push_back(detail::lattice_oracle_suite<PositivePart>(o));
  out.push_back(detail::dominance_suite<PositivePart>(o));
  out.push_back(detail::determinism_suite<PositivePart>(o));
  return out;
}

}  // namespace byzcd
