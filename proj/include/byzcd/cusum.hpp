#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace byzcd {

/// Per-unit CUSUM state at time t. A unit is a sensor, or a group of sensors
/// whose log-likelihood ratios are summed before the recursion.
///
/// Invariants: W[k] >= 0 and W[k] == Z[k] - running_min[k] (up to rounding);
/// crossed_at[k] is written once, the first time W[k] >= h.
struct CusumSnapshot {
  std::uint64_t t = 0;
  std::vector<double> W;
  std::vector<double> Z;
  std::vector<double> running_min;  // min over 0 <= s <= t of Z_s
  std::vector<double> peak;         // max over 0 <= s <= t of W_s
  std::vector<std::optional<std::uint64_t>> crossed_at;
  std::size_t crossed_count = 0;

  CusumSnapshot() = default;
  explicit CusumSnapshot(std::size_t units)
      : W(units, 0.0), Z(units, 0.0), running_min(units, 0.0), peak(units, 0.0), crossed_at(units) {}

  std::size_t units() const noexcept { return W.size(); }

  void reset() {
    t = 0;
    std::fill(W.begin(), W.end(), 0.0);
    std::fill(Z.begin(), Z.end(), 0.0);
    std::fill(running_min.begin(), running_min.end(), 0.0);
    std::fill(peak.begin(), peak.end(), 0.0);
    std::fill(crossed_at.begin(), crossed_at.end(), std::nullopt);
    crossed_count = 0;
  }
};

/// Page recursion W' = (W + l)^+.
struct PositivePart {
  static double apply(double v) noexcept { return v > 0.0 ? v : 0.0; }
};

/// Broken recursion without the clamp; used only to check that the
/// validation suites catch a faulty engine.
struct NoClamp {
  static double apply(double v) noexcept { return v; }
};

namespace detail {

inline void latch(CusumSnapshot& s, std::size_t k, double h) {
  if (s.W[k] >= h && !s.crossed_at[k]) {
    s.crossed_at[k] = s.t;
    ++s.crossed_count;
  }
}

template <class Recursion>
inline void update_unit(CusumSnapshot& s, std::size_t k, double llr, double h) {
  const double w = Recursion::apply(s.W[k] + llr);
  s.W[k] = w;
  s.Z[k] += llr;
  if (s.Z[k] < s.running_min[k]) s.running_min[k] = s.Z[k];
  if (w > s.peak[k]) s.peak[k] = w;
  latch(s, k, h);
}

}  // namespace detail

/// Advances the first llrs.size() units by one step (t -> t+1). Remaining
/// units, if any, must be filled by force_suffix() for the same step.
template <class Recursion = PositivePart>
void advance_prefix(CusumSnapshot& s, std::span<const double> llrs, double h) {
  if (llrs.size() > s.units()) throw std::invalid_argument("more llr values than tracked units");
  ++s.t;
  for (std::size_t k = 0; k < llrs.size(); ++k) detail::update_unit<Recursion>(s, k, llrs[k], h);
}

/// Sets the last targets.size() units to adversary-chosen values at the
/// current time. Z moves by the smallest increment that produces the target
/// through the recursion, so the decomposition W = Z - min Z still holds.
inline void force_suffix(CusumSnapshot& s, std::span<const double> targets, double h) {
  if (targets.size() > s.units()) throw std::invalid_argument("more forced values than tracked units");
  const std::size_t first = s.units() - targets.size();
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const std::size_t k = first + i;
    const double target = targets[i];
    if (target < 0.0) throw std::invalid_argument("forced CUSUM value must be non-negative");
    const double implied = target > 0.0 ? target - s.W[k] : -s.W[k];
    s.W[k] = target;
    s.Z[k] += implied;
    if (s.Z[k] < s.running_min[k]) s.running_min[k] = s.Z[k];
    if (target > s.peak[k]) s.peak[k] = target;
    detail::latch(s, k, h);
  }
}

/// In-place step of every unit.
template <class Recursion = PositivePart>
void advance(CusumSnapshot& s, std::span<const double> llrs, double h) {
  if (llrs.size() != s.units())
    throw std::invalid_argument("llr count " + std::to_string(llrs.size()) + " does not match unit count " +
                                std::to_string(s.units()));
  advance_prefix<Recursion>(s, llrs, h);
}

/// Value-semantics step: returns the snapshot at t+1.
template <class Recursion = PositivePart>
CusumSnapshot step(CusumSnapshot state, std::span<const double> llrs, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("threshold must be positive");
  advance<Recursion>(state, llrs, h);
  return state;
}

/// Partition of [K] into disjoint groups of equal size; the centralized alarm
/// runs one CUSUM per group on the summed log-likelihood ratios.
class GroupPartition {
 public:
  GroupPartition(int K, std::vector<std::vector<int>> groups) : K_(K), groups_(std::move(groups)) {
    if (K_ <= 0) throw std::invalid_argument("partition needs K > 0");
    if (groups_.empty()) throw std::invalid_argument("partition has no groups");
    std::vector<int> seen(static_cast<std::size_t>(K_), 0);
    for (const auto& g : groups_) {
      if (g.empty()) throw std::invalid_argument("partition has an empty group");
      if (g.size() != groups_.front().size()) throw std::invalid_argument("partition groups differ in size");
      for (int k : g) {
        if (k < 0 || k >= K_) throw std::invalid_argument("partition member " + std::to_string(k) + " outside [0,K)");
        if (seen[static_cast<std::size_t>(k)]++) throw std::invalid_argument("partition groups overlap at sensor " + std::to_string(k));
      }
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw std::invalid_argument("partition does not cover [0,K)");
  }

  /// 2M+1 groups of consecutive sensors.
  static GroupPartition contiguous(int K, int M) {
    const int n = check_divisible(K, M);
    std::vector<std::vector<int>> groups(static_cast<std::size_t>(n));
    const int size = K / n;
    for (int k = 0; k < K; ++k) groups[static_cast<std::size_t>(k / size)].push_back(k);
    return GroupPartition(K, std::move(groups));
  }

  /// 2M+1 groups with sensor k in group k mod (2M+1). With the corrupt sensors
  /// occupying the last M indices, each lands in a different group.
  static GroupPartition strided(int K, int M) {
    const int n = check_divisible(K, M);
    std::vector<std::vector<int>> groups(static_cast<std::size_t>(n));
    for (int k = 0; k < K; ++k) groups[static_cast<std::size_t>(k % n)].push_back(k);
    return GroupPartition(K, std::move(groups));
  }

  int K() const noexcept { return K_; }
  std::size_t size() const noexcept { return groups_.size(); }
  const std::vector<std::vector<int>>& groups() const noexcept { return groups_; }
  const std::vector<int>& operator[](std::size_t i) const { return groups_[i]; }

 private:
  static int check_divisible(int K, int M) {
    if (M < 0) throw std::invalid_argument("M must be non-negative");
    const int n = 2 * M + 1;
    if (K <= 0 || K % n != 0)
      throw std::invalid_argument("K=" + std::to_string(K) + " is not divisible by 2M+1=" + std::to_string(n));
    return n;
  }

  int K_;
  std::vector<std::vector<int>> groups_;
};

/// Per-group sums of per-sensor log-likelihood ratios.
inline std::vector<double> group_llrs(std::span<const double> llrs, const GroupPartition& partition) {
  if (llrs.size() != static_cast<std::size_t>(partition.K()))
    throw std::invalid_argument("llr count does not match the partition's K");
  std::vector<double> out;
  out.reserve(partition.size());
  for (const auto& g : partition.groups()) {
    double s = 0.0;
    for (int k : g) s += llrs[static_cast<std::size_t>(k)];
    out.push_back(s);
  }
  return out;
}

/// (value, unit) pairs in ascending value order; ties keep ascending unit index.
inline std::vector<std::pair<double, std::size_t>> ordered_values(const CusumSnapshot& state) {
  std::vector<std::pair<double, std::size_t>> out;
  out.reserve(state.units());
  for (std::size_t k = 0; k < state.units(); ++k) out.emplace_back(state.W[k], k);
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

}  // namespace byzcd
