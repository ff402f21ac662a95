#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "byzcd/cusum.hpp"
#include "byzcd/model.hpp"

namespace byzcd {

enum class RuleKind {
  subset_cusum,           // CUSUM of the summed llrs of a subset
  lth_alarm,              // L units have ever crossed h
  voting,                 // L units are simultaneously >= h
  sum_cusum,              // sum of the per-sensor CUSUMs of a subset
  top_sum_cusum,          // sum of the L largest
  low_sum_cusum,          // sum of the L smallest
  centralized_lth_alarm,  // L-th alarm over group CUSUMs
};

inline std::string_view to_string(RuleKind kind) noexcept {
  switch (kind) {
    case RuleKind::subset_cusum: return "subset-cusum";
    case RuleKind::lth_alarm: return "lth-alarm";
    case RuleKind::voting: return "voting";
    case RuleKind::sum_cusum: return "sum-cusum";
    case RuleKind::top_sum_cusum: return "top-sum-cusum";
    case RuleKind::low_sum_cusum: return "low-sum-cusum";
    case RuleKind::centralized_lth_alarm: return "centralized-lth-alarm";
  }
  return "?";
}

inline RuleKind parse_rule_kind(std::string_view name) {
  for (RuleKind k : {RuleKind::subset_cusum, RuleKind::lth_alarm, RuleKind::voting, RuleKind::sum_cusum,
                     RuleKind::top_sum_cusum, RuleKind::low_sum_cusum, RuleKind::centralized_lth_alarm})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown rule kind '" + std::string(name) + "'");
}

inline bool uses_L(RuleKind kind) noexcept {
  return kind != RuleKind::subset_cusum && kind != RuleKind::sum_cusum;
}

/// Fusion-center stopping rule. With `byzantine` set the rule runs over all K
/// sensors (or all 2M+1 groups); otherwise it runs over the known honest set.
struct RuleSpec {
  RuleKind kind = RuleKind::lth_alarm;
  int L = 1;
  double h = 1.0;
  std::vector<int> subset;                  // subset-cusum / sum-cusum; empty means every honest sensor
  std::optional<GroupPartition> partition;  // centralized-lth-alarm; defaults to GroupPartition::strided
  bool byzantine = true;
};

struct StopDecision {
  bool stopped = false;
  std::optional<std::uint64_t> stop_time;
  double detection_statistic = 0.0;
};

/// Outcome of checking L (and the other structural constraints) against K, M.
struct LCheck {
  std::optional<std::string> violation;
  std::optional<std::string> warning;

  bool ok() const noexcept { return !violation.has_value(); }
  explicit operator bool() const noexcept { return ok(); }
};

/// Feasibility of L for a rule family. With byzantine = false the rule runs on
/// K - M known honest sensors and only 1 <= L <= K - M is required.
inline LCheck validate_L(RuleKind kind, int K, int M, int L, bool byzantine = true,
                         std::optional<int> affected_size = std::nullopt) {
  if (K <= 0 || M < 0 || M >= K) throw std::invalid_argument("validate_L needs K > 0 and 0 <= M < K");
  LCheck r;
  const int honest = K - M;
  if (!byzantine) {
    if (kind == RuleKind::centralized_lth_alarm) {
      // classical view of the centralized alarm: L over the M+1 honest groups
      if (L < 1) r.violation = "L < 1";
      else if (L > M + 1) r.violation = "L > M+1";
      else if (K % (2 * M + 1) != 0) r.violation = "K not divisible by 2M+1";
      return r;
    }
    if (uses_L(kind)) {
      if (L < 1) r.violation = "L < 1";
      else if (L > honest) r.violation = "L > K−M";
    }
    return r;
  }
  switch (kind) {
    case RuleKind::top_sum_cusum:
      r.violation = "top-sum-cusum is not Byzantine-safe: corrupt sensors alone can trigger an alarm";
      return r;
    case RuleKind::subset_cusum:
    case RuleKind::sum_cusum:
      if (M > 0) r.violation = std::string(to_string(kind)) + " is not Byzantine-safe: corrupt sensors alone can trigger an alarm";
      return r;
    case RuleKind::centralized_lth_alarm:
      if (L != M + 1) r.violation = "L ≠ M+1";
      else if (K % (2 * M + 1) != 0) r.violation = "K not divisible by 2M+1";
      return r;
    case RuleKind::lth_alarm:
    case RuleKind::voting:
      if (L <= M) r.violation = "L ≤ M";
      else if (L > honest) r.violation = "L > K−M";
      else if (affected_size && L > *affected_size)
        r.warning = "L > |B|: at least one alarm must come from an unaffected sensor";
      return r;
    case RuleKind::low_sum_cusum:
      if (L <= M) r.violation = "L ≤ M";
      else if (L > honest) r.violation = "L > K−M";
      else if (affected_size && L < K + 1 - *affected_size)
        r.warning = "L < K+1−|B|: the statistic can consist of unaffected sensors only";
      return r;
  }
  return r;
}

/// Full structural check of a rule against a scenario: L, threshold, subset
/// and partition.
inline LCheck validate_rule(const RuleSpec& rule, const ScenarioConfig& scenario) {
  if (!std::isfinite(rule.h) || rule.h < 0.0) return LCheck{"threshold must be finite and non-negative", {}};
  LCheck r = validate_L(rule.kind, scenario.K, scenario.M, rule.L, rule.byzantine, scenario.affected_count());
  if (!r) return r;
  if (rule.kind == RuleKind::subset_cusum || rule.kind == RuleKind::sum_cusum) {
    std::vector<int> s = rule.subset;
    std::sort(s.begin(), s.end());
    if (std::adjacent_find(s.begin(), s.end()) != s.end()) return LCheck{"subset has duplicates", {}};
    for (int k : s)
      if (k < 0 || k >= scenario.honest_count()) return LCheck{"subset member " + std::to_string(k) + " is not honest", {}};
    if (rule.kind == RuleKind::subset_cusum && s.empty() && scenario.honest_count() == 0)
      return LCheck{"subset-cusum needs a non-empty subset", {}};
  }
  if (rule.kind == RuleKind::centralized_lth_alarm && rule.partition) {
    if (rule.partition->K() != scenario.K) return LCheck{"partition K differs from scenario K", {}};
    if (rule.partition->size() != static_cast<std::size_t>(2 * scenario.M + 1))
      return LCheck{"partition must have 2M+1 groups", {}};
  }
  return r;
}

namespace detail {

// k-th smallest (0-based) of `values`, using `scratch` as working storage.
inline double kth_smallest(std::span<const double> values, std::size_t k, std::vector<double>& scratch) {
  scratch.assign(values.begin(), values.end());
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k), scratch.end());
  return scratch[k];
}

inline double sum_smallest(std::span<const double> values, std::size_t L, std::vector<double>& scratch) {
  scratch.assign(values.begin(), values.end());
  if (L < scratch.size())
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(L), scratch.end());
  double s = 0.0;
  for (std::size_t i = 0; i < L; ++i) s += scratch[i];
  return s;
}

inline double sum_largest(std::span<const double> values, std::size_t L, std::vector<double>& scratch) {
  scratch.assign(values.begin(), values.end());
  const std::size_t skip = scratch.size() - L;
  if (skip > 0) std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(skip), scratch.end());
  double s = 0.0;
  for (std::size_t i = skip; i < scratch.size(); ++i) s += scratch[i];
  return s;
}

inline std::size_t checked_L(const RuleSpec& rule, std::size_t units) {
  if (rule.L < 1 || static_cast<std::size_t>(rule.L) > units)
    throw std::invalid_argument("rule L=" + std::to_string(rule.L) + " does not fit " + std::to_string(units) + " units");
  return static_cast<std::size_t>(rule.L);
}

}  // namespace detail

/// The rule's scalar statistic on the snapshot; the rule stops at the first t
/// with statistic >= h. For the alarm rules it is the L-th largest running
/// maximum, which reaches h exactly when L units have crossed.
inline double detection_statistic(const RuleSpec& rule, const CusumSnapshot& state, std::vector<double>& scratch) {
  const std::size_t n = state.units();
  if (n == 0) throw std::invalid_argument("snapshot has no units");
  switch (rule.kind) {
    case RuleKind::subset_cusum:
      if (n != 1) throw std::invalid_argument("subset-cusum tracks exactly one unit");
      return state.W[0];
    case RuleKind::lth_alarm:
    case RuleKind::centralized_lth_alarm: {
      const std::size_t L = detail::checked_L(rule, n);
      return detail::kth_smallest(state.peak, n - L, scratch);
    }
    case RuleKind::voting: {
      const std::size_t L = detail::checked_L(rule, n);
      return detail::kth_smallest(state.W, n - L, scratch);
    }
    case RuleKind::sum_cusum: {
      if (rule.subset.empty()) {
        double s = 0.0;
        for (double w : state.W) s += w;
        return s;
      }
      double s = 0.0;
      for (int k : rule.subset) {
        if (k < 0 || static_cast<std::size_t>(k) >= n) throw std::invalid_argument("sum-cusum subset outside snapshot");
        s += state.W[static_cast<std::size_t>(k)];
      }
      return s;
    }
    case RuleKind::top_sum_cusum:
      return detail::sum_largest(state.W, detail::checked_L(rule, n), scratch);
    case RuleKind::low_sum_cusum:
      return detail::sum_smallest(state.W, detail::checked_L(rule, n), scratch);
  }
  return 0.0;
}

/// Stop check for the simulation loop; no allocation once `scratch` is warm.
inline bool stops(const RuleSpec& rule, const CusumSnapshot& state, std::vector<double>& scratch) {
  if (rule.kind == RuleKind::lth_alarm || rule.kind == RuleKind::centralized_lth_alarm)
    return state.crossed_count >= static_cast<std::size_t>(rule.L);
  return detection_statistic(rule, state, scratch) >= rule.h;
}

inline StopDecision evaluate(const RuleSpec& rule, const CusumSnapshot& state) {
  std::vector<double> scratch;
  StopDecision d;
  d.detection_statistic = detection_statistic(rule, state, scratch);
  if (rule.kind == RuleKind::lth_alarm || rule.kind == RuleKind::centralized_lth_alarm) {
    if (state.crossed_count >= static_cast<std::size_t>(rule.L)) {
      std::vector<std::uint64_t> times;
      for (const auto& c : state.crossed_at)
        if (c) times.push_back(*c);
      std::nth_element(times.begin(), times.begin() + (rule.L - 1), times.end());
      d.stopped = true;
      d.stop_time = times[static_cast<std::size_t>(rule.L - 1)];
    }
  } else if (d.detection_statistic >= rule.h) {
    d.stopped = true;
    d.stop_time = state.t;
  }
  return d;
}

enum class WorstCase { false_alarm, delay };

/// Honest-only rule whose behaviour matches the Byzantine rule under the
/// adversary that is worst for the given criterion: corrupt statistics pinned
/// to the honest maximum (false alarm) or to zero (delay).
inline RuleSpec honest_equivalent(const RuleSpec& rule, WorstCase mode, int K, int M) {
  if (!rule.byzantine) throw std::invalid_argument("honest_equivalent needs a Byzantine rule");
  if (auto c = validate_L(rule.kind, K, M, rule.L, true); !c) throw std::invalid_argument("rule is not valid: " + *c.violation);
  RuleSpec out = rule;
  out.byzantine = false;
  int L = rule.L;
  switch (rule.kind) {
    case RuleKind::lth_alarm:
    case RuleKind::voting:
    case RuleKind::centralized_lth_alarm:
      if (mode == WorstCase::false_alarm) L = rule.L - M;
      break;
    case RuleKind::low_sum_cusum:
      if (mode == WorstCase::delay) L = rule.L - M;
      break;
    default:
      if (M == 0) return out;  // classical rule, nothing to reduce
      throw std::invalid_argument(std::string(to_string(rule.kind)) + " has no honest equivalent");
  }
  if (L < 1) throw std::invalid_argument("reduced L is below 1");
  out.L = L;
  return out;
}

}  // namespace byzcd
