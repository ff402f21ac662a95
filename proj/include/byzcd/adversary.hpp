#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "byzcd/model.hpp"

namespace byzcd {

enum class AdversaryKind { pin_zero, mirror_max, scripted, honest_mimic, callback };

inline std::string_view to_string(AdversaryKind kind) noexcept {
  switch (kind) {
    case AdversaryKind::pin_zero: return "pin-zero";
    case AdversaryKind::mirror_max: return "mirror-max";
    case AdversaryKind::scripted: return "scripted";
    case AdversaryKind::honest_mimic: return "honest-mimic";
    case AdversaryKind::callback: return "callback";
  }
  return "?";
}

/// What the adversary sees at time t: the honest CUSUM values after step t and
/// the honest observations of step t. Nothing later is reachable from here.
struct HonestView {
  std::uint64_t t = 0;
  std::span<const double> honest_statistics;
  std::span<const double> honest_observations;
};

using AdversaryCallback = std::function<void(const HonestView&, std::span<double>)>;

/// Immutable description of how corrupt statistics are produced.
class AdversaryStrategy {
 public:
  static AdversaryStrategy pin_zero() { return AdversaryStrategy(AdversaryKind::pin_zero); }
  static AdversaryStrategy mirror_max() { return AdversaryStrategy(AdversaryKind::mirror_max); }
  static AdversaryStrategy honest_mimic() { return AdversaryStrategy(AdversaryKind::honest_mimic); }

  /// Row t-1 holds the corrupt statistic values at time t.
  static AdversaryStrategy scripted(std::vector<std::vector<double>> rows) {
    for (const auto& row : rows)
      for (double v : row)
        if (!(v >= 0.0)) throw std::invalid_argument("scripted CUSUM values must be non-negative");
    AdversaryStrategy a(AdversaryKind::scripted);
    a.script_ = std::make_shared<const std::vector<std::vector<double>>>(std::move(rows));
    return a;
  }

  /// One row per time step, values separated by commas or whitespace; '#' starts a comment.
  static AdversaryStrategy scripted_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open adversary script '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream ls(line);
      std::vector<double> row;
      double v;
      while (ls >> v) row.push_back(v);
      if (!ls.eof()) throw std::runtime_error("malformed adversary script line: " + line);
      if (!row.empty()) rows.push_back(std::move(row));
    }
    return scripted(std::move(rows));
  }

  /// The callback must be a deterministic function of what it is shown.
  static AdversaryStrategy callback(AdversaryCallback fn) {
    if (!fn) throw std::invalid_argument("empty adversary callback");
    AdversaryStrategy a(AdversaryKind::callback);
    a.callback_ = std::make_shared<const AdversaryCallback>(std::move(fn));
    return a;
  }

  /// Parses `pin-zero | mirror-max | honest-mimic | scripted:<file>`.
  static AdversaryStrategy parse(std::string_view text) {
    if (text == "pin-zero") return pin_zero();
    if (text == "mirror-max") return mirror_max();
    if (text == "honest-mimic") return honest_mimic();
    if (text.starts_with("scripted:")) return scripted_from_file(std::string(text.substr(9)));
    throw std::invalid_argument("unknown adversary '" + std::string(text) + "'");
  }

  AdversaryKind kind() const noexcept { return kind_; }

  /// Statistic-level strategies set the corrupt CUSUM values directly;
  /// honest-mimic instead feeds genuine pre-change observations.
  bool statistic_level() const noexcept { return kind_ != AdversaryKind::honest_mimic; }

  const std::vector<std::vector<double>>& script() const { return *script_; }
  const AdversaryCallback& callback_fn() const { return *callback_; }

  std::string describe() const { return std::string(to_string(kind_)); }

 private:
  explicit AdversaryStrategy(AdversaryKind kind) : kind_(kind) {}

  AdversaryKind kind_;
  std::shared_ptr<const std::vector<std::vector<double>>> script_;
  std::shared_ptr<const AdversaryCallback> callback_;
};

/// Corrupt statistic values at view.t for a statistic-level strategy.
inline void corrupt_values(const AdversaryStrategy& strategy, const HonestView& view, std::span<double> out) {
  switch (strategy.kind()) {
    case AdversaryKind::pin_zero:
      std::fill(out.begin(), out.end(), 0.0);
      return;
    case AdversaryKind::mirror_max: {
      double m = 0.0;
      for (double w : view.honest_statistics) m = std::max(m, w);
      std::fill(out.begin(), out.end(), m);
      return;
    }
    case AdversaryKind::scripted: {
      const auto& rows = strategy.script();
      if (view.t == 0 || view.t > rows.size())
        throw std::out_of_range("scripted adversary sequence exhausted at t=" + std::to_string(view.t));
      const auto& row = rows[view.t - 1];
      if (row.size() < out.size())
        throw std::out_of_range("scripted adversary row " + std::to_string(view.t) + " has " +
                                std::to_string(row.size()) + " values, need " + std::to_string(out.size()));
      std::copy_n(row.begin(), out.size(), out.begin());
      return;
    }
    case AdversaryKind::callback:
      strategy.callback_fn()(view, out);
      for (double v : out)
        if (!(v >= 0.0)) throw std::domain_error("adversary callback produced a negative CUSUM value");
      return;
    case AdversaryKind::honest_mimic:
      throw std::logic_error("honest-mimic acts through observations; use mimic_step");
  }
}

inline std::vector<double> corrupt_values(const AdversaryStrategy& strategy, const HonestView& view, int M) {
  if (M < 1) throw std::invalid_argument("corrupt_values needs M >= 1");
  std::vector<double> out(static_cast<std::size_t>(M));
  corrupt_values(strategy, view, out);
  return out;
}

/// honest-mimic: advances genuine CUSUMs on i.i.d. pre-change observations.
template <class Rng>
void mimic_step(std::span<double> cusums, const DensityPair& model, Rng& rng) {
  for (double& w : cusums) w = std::max(0.0, w + model.llr(model.sample_pre(rng)));
}

/// Observation that drives a Gaussian-model CUSUM from current_W to target.
/// For target = 0 it returns the observation with llr = -current_W, the
/// smallest move that empties the statistic.
inline double corrupt_observation_gaussian(double target, double current_W, const DensityPair& model) {
  if (!model.is_gaussian()) throw std::invalid_argument("observation-level realization needs a gaussian-shift model");
  if (target < 0.0) throw std::invalid_argument("target CUSUM value must be non-negative");
  const double llr = target > 0.0 ? target - current_W : -current_W;
  return model.observation_for_llr(llr);
}

/// Whether the strategy's statistic values can always be produced by actual
/// observations. Lattice llrs move a CUSUM by exactly +-a per step, so
/// tracking another statistic (mirror-max) or following a script is not
/// reachable in general.
inline bool observation_level_feasible(const AdversaryStrategy& strategy, const DensityPair& model) noexcept {
  if (model.is_gaussian()) return true;
  return strategy.kind() == AdversaryKind::pin_zero || strategy.kind() == AdversaryKind::honest_mimic;
}

}  // namespace byzcd
