#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "byzcd/adversary.hpp"
#include "byzcd/cusum.hpp"
#include "byzcd/model.hpp"
#include "byzcd/rng.hpp"
#include "byzcd/rules.hpp"

namespace byzcd {

enum class Regime { false_alarm, detection_delay };

/// One Monte Carlo experiment. The regime fixes the change time: no change
/// for false-alarm runs, change before the first sample (nu = 0, all
/// statistics at zero) for delay runs, which is the worst pre-change history.
struct SimulationPlan {
  ScenarioConfig scenario;
  RuleSpec rule;
  AdversaryStrategy adversary = AdversaryStrategy::mirror_max();
  std::size_t replications = 1000;
  std::uint64_t horizon = 0;
  std::uint64_t seed = 1;
  Regime regime = Regime::false_alarm;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct EstimateWithCI {
  double mean = 0.0;
  double standard_error = 0.0;
  Interval ci95;
  std::size_t n = 0;
  std::size_t censored = 0;

  /// Censored replications were cut at the horizon, so the mean is only a lower bound.
  bool reliable() const noexcept { return censored == 0; }
};

inline bool cis_overlap(const EstimateWithCI& a, const EstimateWithCI& b) noexcept {
  return a.ci95.lo <= b.ci95.hi && b.ci95.lo <= a.ci95.hi;
}

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double z95 = 1.959963984540054;

inline std::uint64_t default_arl_horizon(double gamma) {
  return static_cast<std::uint64_t>(std::ceil(100.0 * gamma));
}

inline std::uint64_t default_delay_horizon(double gamma, double kl) {
  return static_cast<std::uint64_t>(std::ceil(50.0 * std::log(gamma) / kl));
}

/// Neumaier-compensated sum; the result does not depend on how a caller
/// chunked the work as long as the input order is fixed.
inline double compensated_sum(std::span<const double> xs) noexcept {
  double sum = 0.0, c = 0.0;
  for (double x : xs) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) c += (sum - t) + x;
    else c += (x - t) + sum;
    sum = t;
  }
  return sum + c;
}

inline EstimateWithCI summarize(std::span<const double> samples, std::size_t censored = 0) {
  EstimateWithCI e;
  e.n = samples.size();
  e.censored = censored;
  if (samples.empty()) return e;
  e.mean = compensated_sum(samples) / static_cast<double>(e.n);
  if (e.n > 1) {
    std::vector<double> sq(samples.size());
    std::transform(samples.begin(), samples.end(), sq.begin(), [&](double x) { return (x - e.mean) * (x - e.mean); });
    const double var = compensated_sum(sq) / static_cast<double>(e.n - 1);
    e.standard_error = std::sqrt(var / static_cast<double>(e.n));
  }
  e.ci95 = {e.mean - z95 * e.standard_error, e.mean + z95 * e.standard_error};
  return e;
}

/// Runs fn(begin, end) over [0, n) split into contiguous chunks, one per worker.
template <class Fn>
void parallel_chunks(std::size_t n, unsigned workers, Fn&& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t b = std::min(n, w * chunk), e = std::min(n, b + chunk);
    pool.emplace_back([&, b, e] {
      try {
        fn(b, e);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Which sensors feed each tracked unit. Units [0, honest_units) contain only
/// honest sensors; the rest contain at least one corrupt sensor.
struct UnitLayout {
  std::vector<std::vector<int>> members;
  std::size_t honest_units = 0;
  bool identity = false;  // unit k is sensor k

  std::size_t units() const noexcept { return members.size(); }
  std::size_t corrupt_units() const noexcept { return members.size() - honest_units; }
};

inline UnitLayout unit_layout(const RuleSpec& rule, const ScenarioConfig& scenario) {
  UnitLayout lay;
  const int H = scenario.honest_count();
  switch (rule.kind) {
    case RuleKind::subset_cusum: {
      std::vector<int> g = rule.subset;
      if (g.empty())
        for (int k = 0; k < H; ++k) g.push_back(k);
      lay.members.push_back(std::move(g));
      lay.honest_units = 1;
      return lay;
    }
    case RuleKind::centralized_lth_alarm: {
      const GroupPartition part = rule.partition ? *rule.partition : GroupPartition::strided(scenario.K, scenario.M);
      std::vector<std::vector<int>> corrupt;
      for (const auto& g : part.groups()) {
        const bool has_corrupt = std::any_of(g.begin(), g.end(), [&](int k) { return scenario.is_corrupt(k); });
        (has_corrupt ? corrupt : lay.members).push_back(g);
      }
      lay.honest_units = lay.members.size();
      if (rule.byzantine)
        for (auto& g : corrupt) lay.members.push_back(std::move(g));
      return lay;
    }
    default: {
      const int n = rule.byzantine ? scenario.K : H;
      for (int k = 0; k < n; ++k) lay.members.push_back({k});
      lay.honest_units = static_cast<std::size_t>(H);
      lay.identity = true;
      return lay;
    }
  }
}

struct ReplicationOutcome {
  std::uint64_t stop_time = 0;
  bool censored = false;
};

/// Per-thread buffers reused across replications.
struct Workspace {
  CusumSnapshot state;
  std::vector<double> observations;
  std::vector<double> llrs;
  std::vector<double> increments;
  std::vector<double> targets;
  std::vector<double> scratch;
};

/// Called after every step of a traced replication.
using TraceFn = std::function<void(const CusumSnapshot&, double statistic)>;

/// Prepared, validated plan; simulates single replications.
class Simulator {
 public:
  explicit Simulator(SimulationPlan plan) : plan_(std::move(plan)) {
    auto& sc = plan_.scenario;
    sc.validate();
    if (plan_.regime == Regime::false_alarm) {
      if (sc.change_time) throw std::invalid_argument("false-alarm regime requires change_time = never");
    } else {
      if (!sc.change_time || *sc.change_time != 0)
        throw std::invalid_argument("detection-delay regime requires change_time = 0");
    }
    if (plan_.replications == 0) throw std::invalid_argument("replications must be positive");
    if (plan_.horizon == 0) throw std::invalid_argument("horizon must be positive");
    if (auto c = validate_rule(plan_.rule, sc); !c) throw std::invalid_argument("invalid rule: " + *c.violation);
    layout_ = unit_layout(plan_.rule, sc);
    affected_.assign(static_cast<std::size_t>(sc.honest_count()), 0);
    for (int k : sc.affected) affected_[static_cast<std::size_t>(k)] = 1;
    forced_ = layout_.corrupt_units() > 0 && plan_.adversary.statistic_level();
    mimic_ = layout_.corrupt_units() > 0 && !plan_.adversary.statistic_level();
  }

  const SimulationPlan& plan() const noexcept { return plan_; }
  const UnitLayout& layout() const noexcept { return layout_; }

  Workspace make_workspace() const {
    Workspace ws;
    ws.state = CusumSnapshot(layout_.units());
    ws.observations.assign(static_cast<std::size_t>(plan_.scenario.K), 0.0);
    ws.llrs.assign(static_cast<std::size_t>(plan_.scenario.K), 0.0);
    ws.increments.assign(layout_.units(), 0.0);
    ws.targets.assign(layout_.corrupt_units(), 0.0);
    return ws;
  }

  template <class Recursion = PositivePart>
  ReplicationOutcome run_one(std::uint64_t rep, Workspace& ws, const TraceFn& trace = {}) const {
    const ScenarioConfig& sc = plan_.scenario;
    const DensityPair& model = sc.model;
    const RuleSpec& rule = plan_.rule;
    const double h = rule.h;
    const std::size_t H = static_cast<std::size_t>(sc.honest_count());
    const std::size_t K = static_cast<std::size_t>(sc.K);
    const std::size_t driven = forced_ ? layout_.honest_units : layout_.units();
    const std::uint64_t nu = sc.change_time.value_or(std::numeric_limits<std::uint64_t>::max());

    Rng honest_rng = substream(plan_.seed, Stream::honest, rep);
    Rng adversary_rng = substream(plan_.seed, Stream::adversary, rep);
    ws.state.reset();

    for (std::uint64_t t = 1; t <= plan_.horizon; ++t) {
      const bool post = t > nu;
      for (std::size_t k = 0; k < H; ++k) {
        const double x = (post && affected_[k]) ? model.sample_post(honest_rng) : model.sample_pre(honest_rng);
        ws.observations[k] = x;
        ws.llrs[k] = model.llr(x);
      }
      if (mimic_)
        for (std::size_t k = H; k < K; ++k) {
          ws.observations[k] = model.sample_pre(adversary_rng);
          ws.llrs[k] = model.llr(ws.observations[k]);
        }

      if (layout_.identity) {
        advance_prefix<Recursion>(ws.state, std::span<const double>(ws.llrs.data(), driven), h);
      } else {
        for (std::size_t u = 0; u < driven; ++u) {
          double s = 0.0;
          for (int k : layout_.members[u]) s += ws.llrs[static_cast<std::size_t>(k)];
          ws.increments[u] = s;
        }
        advance_prefix<Recursion>(ws.state, std::span<const double>(ws.increments.data(), driven), h);
      }

      if (forced_) {
        const HonestView view{t, std::span<const double>(ws.state.W.data(), layout_.honest_units),
                              std::span<const double>(ws.observations.data(), H)};
        corrupt_values(plan_.adversary, view, ws.targets);
        force_suffix(ws.state, ws.targets, h);
      }

      if (trace) trace(ws.state, detection_statistic(rule, ws.state, ws.scratch));
      if (stops(rule, ws.state, ws.scratch)) return {t, false};
    }
    return {plan_.horizon, true};
  }

 private:
  SimulationPlan plan_;
  UnitLayout layout_;
  std::vector<char> affected_;
  bool forced_ = false;
  bool mimic_ = false;
};

/// Stop time of every replication, in replication order.
template <class Recursion = PositivePart>
std::vector<ReplicationOutcome> simulate_stop_times(const SimulationPlan& plan, unsigned workers = 1) {
  const Simulator sim(plan);
  std::vector<ReplicationOutcome> out(plan.replications);
  parallel_chunks(plan.replications, workers, [&](std::size_t b, std::size_t e) {
    Workspace ws = sim.make_workspace();
    for (std::size_t i = b; i < e; ++i) out[i] = sim.template run_one<Recursion>(i, ws);
  });
  return out;
}

inline EstimateWithCI summarize(const std::vector<ReplicationOutcome>& outcomes) {
  std::vector<double> xs;
  xs.reserve(outcomes.size());
  std::size_t censored = 0;
  for (const auto& o : outcomes) {
    xs.push_back(static_cast<double>(o.stop_time));
    censored += o.censored ? 1 : 0;
  }
  return summarize(xs, censored);
}

/// Mean stopping time over the plan's replications. Under mirror-max in the
/// false-alarm regime this estimates the worst-case ARL; under pin-zero in the
/// delay regime it estimates the worst-case detection delay.
inline EstimateWithCI run(const SimulationPlan& plan, unsigned workers = 1) {
  const auto outcomes = simulate_stop_times(plan, workers);
  EstimateWithCI e = summarize(outcomes);
  if (e.censored == e.n)
    throw SimulationError("horizon " + std::to_string(plan.horizon) + " exhausted in all " + std::to_string(e.n) +
                          " replications");
  return e;
}

// ---------------------------------------------------------------------------
// Threshold calibration

struct CalibrationOptions {
  double tolerance = 0.05;
  std::size_t search_replications = 2500;
  std::size_t max_evaluations = 40;  // search evaluations per stage
  int max_stages = 2;                // each retry quadruples the batch size
  double horizon_factor = 100.0;     // confirmation horizon = factor * gamma
  double search_horizon_factor = 10.0;
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

struct CalibrationStep {
  double h = 0.0;
  double arl = 0.0;
  std::size_t replications = 0;
  std::size_t censored = 0;
  bool confirmation = false;
};

struct CalibrationResult {
  double threshold = 0.0;
  EstimateWithCI achieved;
  double target = 0.0;
  std::vector<CalibrationStep> iterations;
  RuleSpec simulated_rule;  // the rule whose ARL was estimated (honest equivalent when applicable)
};

class CalibrationError : public std::runtime_error {
 public:
  CalibrationError(const std::string& what, std::vector<CalibrationStep> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<CalibrationStep>& history() const noexcept { return history_; }

 private:
  std::vector<CalibrationStep> history_;
};

/// Exponent c in ARL ~ Theta(1) e^{c h} for a rule simulated on `units` units.
inline double arl_growth_rate(const RuleSpec& rule, int M, std::size_t units) {
  const double n = static_cast<double>(units);
  switch (rule.kind) {
    case RuleKind::voting:
      return rule.byzantine ? static_cast<double>(rule.L - M) : static_cast<double>(rule.L);
    case RuleKind::low_sum_cusum:
      return rule.byzantine ? (n - M) / rule.L : n / rule.L;
    default:
      return 1.0;
  }
}

/// The rule actually simulated for a false-alarm calibration: the honest
/// equivalent when the adversary is the worst case, the rule itself otherwise.
inline RuleSpec false_alarm_rule(const RuleSpec& rule, const ScenarioConfig& scenario, const AdversaryStrategy& adversary) {
  if (!rule.byzantine) return rule;
  if (scenario.M == 0) {
    RuleSpec r = rule;
    r.byzantine = false;
    return r;
  }
  if (adversary.kind() == AdversaryKind::mirror_max) return honest_equivalent(rule, WorstCase::false_alarm, scenario.K, scenario.M);
  return rule;
}

/// Finds h whose estimated worst-case ARL is within gamma(1 +- tol).
///
/// Search: log-linear secant on (h, log ARL) with common random numbers, so
/// the estimated ARL is a nondecreasing step function of h. The first guess
/// uses ARL ~ e^{c h}. A confirmation batch four times the search size with a
/// fresh seed decides acceptance; on a miss the search restarts from there
/// with four times the batch.
inline CalibrationResult calibrate_threshold(const ScenarioConfig& scenario_in, const RuleSpec& rule_in,
                                             const AdversaryStrategy& adversary, double gamma,
                                             const CalibrationOptions& opt = {}) {
  if (!(gamma > 1.0) || !std::isfinite(gamma)) throw std::invalid_argument("target ARL gamma must exceed 1");
  if (!(opt.tolerance > 0.0)) throw std::invalid_argument("calibration tolerance must be positive");
  ScenarioConfig scenario = scenario_in;
  scenario.change_time.reset();
  if (auto c = validate_rule(rule_in, scenario); !c) throw std::invalid_argument("invalid rule: " + *c.violation);

  CalibrationResult result;
  result.target = gamma;
  RuleSpec sim_rule = false_alarm_rule(rule_in, scenario, adversary);
  result.simulated_rule = sim_rule;
  const double c_model = arl_growth_rate(rule_in, scenario.M, unit_layout(rule_in, scenario).units());
  const double log_gamma = std::log(gamma);
  const double search_eps = std::log1p(opt.tolerance / 4.0);

  auto estimate = [&](double h, std::size_t reps, std::uint64_t seed, std::uint64_t horizon, bool confirm) {
    SimulationPlan plan{scenario, sim_rule, adversary, reps, horizon, seed, Regime::false_alarm};
    plan.rule.h = h;
    const EstimateWithCI e = summarize(simulate_stop_times(plan, opt.workers));
    result.iterations.push_back({h, e.mean, e.n, e.censored, confirm});
    return e;
  };

  double h = std::max(log_gamma / c_model, 1e-3);
  std::size_t reps = opt.search_replications;
  const auto search_horizon = static_cast<std::uint64_t>(std::ceil(opt.search_horizon_factor * gamma));
  const auto confirm_horizon = static_cast<std::uint64_t>(std::ceil(opt.horizon_factor * gamma));

  for (int stage = 0; stage < opt.max_stages; ++stage) {
    const std::uint64_t search_seed = derive_seed(opt.seed, Stream::auxiliary, 2 * static_cast<std::uint64_t>(stage));
    const std::uint64_t confirm_seed = derive_seed(opt.seed, Stream::auxiliary, 2 * static_cast<std::uint64_t>(stage) + 1);

    // Secant search with bracketing; f(h) = log ARL_hat(h) - log gamma.
    std::optional<std::pair<double, double>> lo, hi;  // (h, f) with f < 0 / f > 0
    std::optional<std::pair<double, double>> prev;
    bool converged = false;
    for (std::size_t it = 0; it < opt.max_evaluations; ++it) {
      const EstimateWithCI e = estimate(h, reps, search_seed, search_horizon, false);
      const double f = std::log(std::max(e.mean, 1.0)) - log_gamma;
      if (std::abs(f) <= search_eps) {
        converged = true;
        break;
      }
      if (f < 0.0 && (!lo || h > lo->first)) lo = {h, f};
      if (f > 0.0 && (!hi || h < hi->first)) hi = {h, f};

      double next;
      if (lo && hi) {
        if (hi->first - lo->first <= 1e-9 * std::max(1.0, hi->first)) {
          converged = true;  // the step function jumps across gamma here
          h = std::abs(lo->second) < std::abs(hi->second) ? lo->first : hi->first;
          break;
        }
        next = lo->first - lo->second * (hi->first - lo->first) / (hi->second - lo->second);
        const double width = hi->first - lo->first;
        // keep the secant step well inside the bracket, else bisect
        if (!(next > lo->first + 0.05 * width && next < hi->first - 0.05 * width)) next = 0.5 * (lo->first + hi->first);
      } else {
        double slope = c_model;
        if (prev && prev->first != h) {
          const double s = (f - prev->second) / (h - prev->first);
          if (s > 0.1 * c_model && s < 10.0 * c_model) slope = s;
        }
        double delta = -f / slope;
        const double cap = std::max(1.0, 0.5 * h);
        delta = std::clamp(delta, -cap, cap);
        next = h + delta;
        if (next <= 0.0) next = 0.5 * h;
      }
      prev = {h, f};
      h = next;
    }
    if (!converged && !(lo && hi))
      throw CalibrationError("bracket not found within " + std::to_string(opt.max_evaluations) + " evaluations",
                             result.iterations);

    const EstimateWithCI confirm = estimate(h, 4 * reps, confirm_seed, confirm_horizon, true);
    if (confirm.reliable() && std::abs(confirm.mean / gamma - 1.0) <= opt.tolerance) {
      result.threshold = h;
      result.achieved = confirm;
      return result;
    }
    // Restart the next stage near the confirmed value.
    if (confirm.mean > 0.0) h = std::max(1e-3, h - (std::log(confirm.mean) - log_gamma) / c_model);
    reps *= 4;
  }
  throw CalibrationError("confirmation missed gamma(1 +- " + std::to_string(opt.tolerance) + ") after " +
                             std::to_string(opt.max_stages) + " stages",
                         result.iterations);
}

// ---------------------------------------------------------------------------
// Frontier: calibrate every rule on a gamma grid, then estimate its delay

struct NamedRule {
  std::string name;
  RuleSpec rule;
};

struct FrontierOptions {
  CalibrationOptions calibration;
  std::size_t delay_replications = 100000;
  AdversaryStrategy false_alarm_adversary = AdversaryStrategy::mirror_max();
  AdversaryStrategy delay_adversary = AdversaryStrategy::pin_zero();
  double delay_horizon_factor = 50.0;  // horizon = factor * log(gamma) / I
};

struct FrontierRow {
  std::string rule_name;
  RuleSpec rule;
  int K = 0, M = 0, B_size = 0;
  double gamma = 0.0, log_gamma = 0.0, threshold = 0.0;
  EstimateWithCI arl;
  EstimateWithCI delay;
  double delay_norm = 0.0;
  std::uint64_t seed = 0;
  std::vector<CalibrationStep> history;
};

/// Delay divided by the first-order scale log(gamma) / ((K - 2M) I).
inline double normalized_delay(double delay, int K, int M, double kl, double gamma) {
  return delay * (K - 2 * M) * kl / std::log(gamma);
}

namespace detail {

// Rules whose stopping times coincide pathwise share one calibration.
inline std::string calibration_key(const RuleSpec& r, std::size_t units) {
  RuleKind kind = r.kind;
  int L = r.L;
  if (!r.byzantine) {
    if ((kind == RuleKind::voting || kind == RuleKind::top_sum_cusum) && L == 1) kind = RuleKind::lth_alarm;
    if (kind == RuleKind::low_sum_cusum && L == 1) {
      kind = RuleKind::voting;
      L = static_cast<int>(units);
    }
  }
  std::string key = std::string(to_string(kind)) + "/" + std::to_string(L) + "/" + (r.byzantine ? "b" : "h");
  if (r.partition)
    for (const auto& g : r.partition->groups()) {
      key += "|";
      for (int k : g) key += std::to_string(k) + ",";
    }
  for (int k : r.subset) key += ";" + std::to_string(k);
  return key;
}

}  // namespace detail

/// Common random numbers: every rule in a gamma row uses the same calibration
/// and delay seeds, so honest paths are shared across rules.
inline std::vector<FrontierRow> frontier(const ScenarioConfig& scenario, const std::vector<NamedRule>& rules,
                                         const std::vector<double>& gammas, const FrontierOptions& opt) {
  for (const auto& r : rules)
    if (auto c = validate_rule(r.rule, scenario); !c) throw std::invalid_argument(r.name + ": " + *c.violation);
  std::vector<FrontierRow> rows;
  for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
    const double gamma = gammas[gi];
    CalibrationOptions copt = opt.calibration;
    copt.seed = derive_seed(opt.calibration.seed, Stream::auxiliary, 1000 + gi);
    const std::uint64_t delay_seed = derive_seed(opt.calibration.seed, Stream::auxiliary, 2000 + gi);
    std::map<std::string, CalibrationResult> cache;
    for (const auto& nr : rules) {
      const RuleSpec sim = false_alarm_rule(nr.rule, scenario, opt.false_alarm_adversary);
      const std::string key = detail::calibration_key(sim, unit_layout(sim, scenario).units());
      auto it = cache.find(key);
      if (it == cache.end())
        it = cache.emplace(key, calibrate_threshold(scenario, nr.rule, opt.false_alarm_adversary, gamma, copt)).first;
      const CalibrationResult& cal = it->second;

      SimulationPlan plan;
      plan.scenario = scenario;
      plan.scenario.change_time = 0;
      plan.rule = nr.rule;
      plan.rule.h = cal.threshold;
      plan.adversary = opt.delay_adversary;
      plan.replications = opt.delay_replications;
      plan.horizon = static_cast<std::uint64_t>(std::ceil(opt.delay_horizon_factor * std::log(gamma) / scenario.model.kl()));
      plan.seed = delay_seed;
      plan.regime = Regime::detection_delay;

      FrontierRow row;
      row.rule_name = nr.name;
      row.rule = plan.rule;
      row.K = scenario.K;
      row.M = scenario.M;
      row.B_size = scenario.affected_count();
      row.gamma = gamma;
      row.log_gamma = std::log(gamma);
      row.threshold = cal.threshold;
      row.arl = cal.achieved;
      row.delay = run(plan, opt.calibration.workers);
      row.delay_norm = normalized_delay(row.delay.mean, scenario.K, scenario.M, scenario.model.kl(), gamma);
      row.seed = opt.calibration.seed;
      row.history = cal.iterations;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace byzcd
