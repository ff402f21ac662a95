#pragma once

#include <charconv>
#include <fstream>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "byzcd/adversary.hpp"
#include "byzcd/model.hpp"
#include "byzcd/montecarlo.hpp"
#include "byzcd/rules.hpp"

namespace byzcd {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Experiment description read from an INI file:
///
///   [scenario]   K, M, affected (all | index list), model (gaussian | lattice), mu0, mu1, sigma, a
///   [experiment] gammas, tolerance, replications, search_replications, seed, output,
///                adversary, delay_adversary, regime, horizon
///   [rule:NAME]  kind, L, h, byzantine, subset, partition (groups joined by ';')
struct ExperimentConfig {
  ScenarioConfig scenario;
  std::vector<NamedRule> rules;
  std::vector<double> gammas;
  double tolerance = 0.05;
  std::size_t replications = 100000;
  std::size_t search_replications = 2500;
  std::uint64_t seed = 1;
  std::string output = "out";
  std::string adversary = "mirror-max";
  std::string delay_adversary = "pin-zero";
  Regime regime = Regime::false_alarm;
  std::uint64_t horizon = 0;  // simulate only; 0 picks the default policy
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& text, const char* seps = ",") {
  std::vector<std::string> parts;
  std::string trimmed = boost::algorithm::trim_copy(text);
  if (trimmed.empty()) return parts;
  boost::algorithm::split(parts, trimmed, boost::algorithm::is_any_of(seps));
  for (auto& p : parts) boost::algorithm::trim(p);
  return parts;
}

inline std::vector<int> parse_indices(const std::string& text, const std::string& what) {
  std::vector<int> out;
  for (const auto& p : split_list(text)) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), v);
    if (ec != std::errc{} || ptr != p.data() + p.size()) throw ConfigError(what + ": '" + p + "' is not an integer");
    out.push_back(v);
  }
  return out;
}

inline double parse_real(const std::string& p, const std::string& what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), v);
  if (ec != std::errc{} || ptr != p.data() + p.size()) throw ConfigError(what + ": '" + p + "' is not a number");
  return v;
}

template <class T>
T get_or(const boost::property_tree::ptree& sec, const std::string& key, T fallback, const std::string& where) {
  try {
    return sec.get<T>(key, fallback);
  } catch (const boost::property_tree::ptree_error&) {
    throw ConfigError(where + "." + key + " has an invalid value");
  }
}

inline bool parse_bool(const std::string& s, const std::string& what) {
  const std::string v = boost::algorithm::to_lower_copy(boost::algorithm::trim_copy(s));
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(what + ": '" + s + "' is not a boolean");
}

}  // namespace detail

inline Regime parse_regime(const std::string& s) {
  if (s == "false-alarm") return Regime::false_alarm;
  if (s == "delay" || s == "detection-delay") return Regime::detection_delay;
  throw ConfigError("unknown regime '" + s + "'");
}

inline ExperimentConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }

  ExperimentConfig cfg;
  const pt::ptree empty;
  const auto& sc = tree.get_child("scenario", empty);
  const auto& ex = tree.get_child("experiment", empty);

  ScenarioConfig& s = cfg.scenario;
  s.K = detail::get_or(sc, "K", 0, "scenario");
  s.M = detail::get_or(sc, "M", 0, "scenario");
  if (s.K <= 0) throw ConfigError("scenario.K must be a positive integer");
  if (s.M < 0 || s.M >= s.K) throw ConfigError("scenario.M must satisfy 0 <= M < K");

  const std::string model = detail::get_or<std::string>(sc, "model", "gaussian", "scenario");
  try {
    if (model == "gaussian")
      s.model = DensityPair::gaussian(detail::get_or(sc, "mu0", 0.0, "scenario"), detail::get_or(sc, "mu1", 1.0, "scenario"),
                                      detail::get_or(sc, "sigma", 1.0, "scenario"));
    else if (model == "lattice")
      s.model = DensityPair::lattice(detail::get_or(sc, "a", 1.0, "scenario"));
    else
      throw ConfigError("scenario.model must be gaussian or lattice");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("scenario model: ") + e.what());
  }

  const std::string affected = detail::get_or<std::string>(sc, "affected", "all", "scenario");
  if (boost::algorithm::trim_copy(affected) == "all") {
    for (int k = 0; k < s.K - s.M; ++k) s.affected.push_back(k);
  } else {
    s.affected = detail::parse_indices(affected, "scenario.affected");
  }
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }

  for (const auto& g : detail::split_list(detail::get_or<std::string>(ex, "gammas", "", "experiment")))
    cfg.gammas.push_back(detail::parse_real(g, "experiment.gammas"));
  for (std::size_t i = 0; i < cfg.gammas.size(); ++i) {
    if (!(cfg.gammas[i] > 1.0)) throw ConfigError("experiment.gammas: every target must exceed 1");
    if (i > 0 && !(cfg.gammas[i] > cfg.gammas[i - 1])) throw ConfigError("experiment.gammas must be strictly increasing");
  }
  cfg.tolerance = detail::get_or(ex, "tolerance", cfg.tolerance, "experiment");
  if (!(cfg.tolerance > 0.0 && cfg.tolerance < 1.0)) throw ConfigError("experiment.tolerance must be in (0,1)");
  const long long reps = detail::get_or(ex, "replications", static_cast<long long>(cfg.replications), "experiment");
  const long long sreps = detail::get_or(ex, "search_replications", static_cast<long long>(cfg.search_replications), "experiment");
  if (reps <= 0 || sreps <= 0) throw ConfigError("replication counts must be positive");
  cfg.replications = static_cast<std::size_t>(reps);
  cfg.search_replications = static_cast<std::size_t>(sreps);
  cfg.seed = detail::get_or<std::uint64_t>(ex, "seed", cfg.seed, "experiment");
  cfg.output = detail::get_or(ex, "output", cfg.output, "experiment");
  cfg.adversary = detail::get_or(ex, "adversary", cfg.adversary, "experiment");
  cfg.delay_adversary = detail::get_or(ex, "delay_adversary", cfg.delay_adversary, "experiment");
  cfg.regime = parse_regime(detail::get_or<std::string>(ex, "regime", "false-alarm", "experiment"));
  cfg.horizon = detail::get_or<std::uint64_t>(ex, "horizon", 0, "experiment");
  for (const auto& a : {cfg.adversary, cfg.delay_adversary}) {
    if (a.starts_with("scripted:")) continue;  // file checked when used
    try {
      AdversaryStrategy::parse(a);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("experiment: ") + e.what());
    }
  }

  for (const auto& [section, body] : tree) {
    if (!section.starts_with("rule:")) {
      if (section != "scenario" && section != "experiment") throw ConfigError("unknown section [" + section + "]");
      continue;
    }
    const std::string name = section.substr(5);
    if (name.empty()) throw ConfigError("rule section needs a name: [rule:NAME]");
    RuleSpec r;
    try {
      r.kind = parse_rule_kind(detail::get_or<std::string>(body, "kind", "", section));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(section + ": " + e.what());
    }
    r.L = detail::get_or(body, "L", 1, section);
    r.h = detail::get_or(body, "h", 1.0, section);
    r.byzantine = detail::parse_bool(detail::get_or<std::string>(body, "byzantine", "true", section), section + ".byzantine");
    r.subset = detail::parse_indices(detail::get_or<std::string>(body, "subset", "", section), section + ".subset");
    const std::string part = detail::get_or<std::string>(body, "partition", "", section);
    if (!boost::algorithm::trim_copy(part).empty()) {
      std::vector<std::vector<int>> groups;
      for (const auto& g : detail::split_list(part, ";")) groups.push_back(detail::parse_indices(g, section + ".partition"));
      try {
        r.partition = GroupPartition(s.K, std::move(groups));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(section + ".partition: " + e.what());
      }
    } else if (r.kind == RuleKind::centralized_lth_alarm && s.K % (2 * s.M + 1) != 0) {
      throw ConfigError(section + ": K not divisible by 2M+1");
    }
    if (auto c = validate_rule(r, s); !c) throw ConfigError(section + ": " + *c.violation);
    for (const auto& existing : cfg.rules)
      if (existing.name == name) throw ConfigError("duplicate rule name '" + name + "'");
    cfg.rules.push_back({name, r});
  }
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse_config(in);
}

}  // namespace byzcd
