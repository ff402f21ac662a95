#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "byzcd/byzcd.hpp"

namespace byzcd::cli {

enum ExitCode : int { ok = 0, usage = 1, runtime = 2 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> reps;
  unsigned workers = 1;
  std::string trace;        // simulate: per-step trace file
  std::string fault;        // validate: injected engine fault
  std::size_t paths = 2000;  // validate: pathwise suite size
};

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline ExperimentConfig load(const Options& o) {
  if (o.config.empty()) throw UsageError("--config is required");
  ExperimentConfig cfg = load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.output = *o.out;
  if (o.reps) {
    if (*o.reps == 0) throw UsageError("--reps must be positive");
    cfg.replications = *o.reps;
  }
  return cfg;
}

inline std::filesystem::path output_file(const ExperimentConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.output);
  return std::filesystem::path(cfg.output) / name;
}

inline void require_gammas(const ExperimentConfig& cfg) {
  if (cfg.gammas.empty()) throw UsageError("experiment.gammas is empty: at least one target ARL is required");
  if (cfg.rules.empty()) throw UsageError("config defines no [rule:NAME] sections");
}

inline CalibrationOptions calibration_options(const ExperimentConfig& cfg, const Options& o) {
  CalibrationOptions c;
  c.tolerance = cfg.tolerance;
  c.search_replications = cfg.search_replications;
  c.seed = cfg.seed;
  c.workers = o.workers;
  return c;
}

/// Runs fn and maps exceptions to exit codes: usage and config problems -> 1,
/// anything else -> 2.
template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return usage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return runtime;
  }
}

inline int cmd_calibrate(const Options& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = load(o);
    require_gammas(cfg);
    const AdversaryStrategy adversary = AdversaryStrategy::parse(cfg.adversary);
    std::ostringstream csv;
    csv << calibration_csv_header << '\n';
    bool failed = false;
    for (std::size_t gi = 0; gi < cfg.gammas.size(); ++gi) {
      const double gamma = cfg.gammas[gi];
      CalibrationOptions copt = calibration_options(cfg, o);
      copt.seed = derive_seed(cfg.seed, Stream::auxiliary, 1000 + gi);
      for (const auto& nr : cfg.rules) {
        csv << nr.name << ',' << to_string(nr.rule.kind) << ',' << nr.rule.L << ',' << cfg.scenario.K << ','
            << cfg.scenario.M << ',' << cfg.scenario.affected_count() << ',' << format_real(gamma) << ','
            << format_real(std::log(gamma)) << ',';
        try {
          const auto res = calibrate_threshold(cfg.scenario, nr.rule, adversary, gamma, copt);
          csv << format_real(res.threshold) << ',' << format_real(res.achieved.mean) << ','
              << format_real(res.achieved.standard_error) << ',' << res.achieved.censored << ',' << res.achieved.n << ','
              << res.iterations.size() << ',' << cfg.seed << ",ok,\n";
        } catch (const CalibrationError& e) {
          failed = true;
          csv << ",,,," << "," << e.history().size() << ',' << cfg.seed << ",failed," << e.what() << '\n';
          err << nr.name << " gamma=" << gamma << ": " << e.what() << '\n';
        }
      }
    }
    std::ofstream(output_file(cfg, "calibration.csv")) << csv.str();
    out << csv.str();
    return failed ? static_cast<int>(runtime) : static_cast<int>(ok);
  });
}

inline int cmd_frontier(const Options& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = load(o);
    require_gammas(cfg);
    FrontierOptions fopt;
    fopt.calibration = calibration_options(cfg, o);
    fopt.delay_replications = cfg.replications;
    fopt.false_alarm_adversary = AdversaryStrategy::parse(cfg.adversary);
    fopt.delay_adversary = AdversaryStrategy::parse(cfg.delay_adversary);
    const auto rows = frontier(cfg.scenario, cfg.rules, cfg.gammas, fopt);
    std::vector<FrontierRecord> records;
    for (const auto& r : rows) records.push_back(to_record(r));
    std::ostringstream csv;
    write_frontier_csv(csv, records);
    std::ofstream(output_file(cfg, "frontier.csv")) << csv.str();
    std::ofstream plot(output_file(cfg, "frontier_plot.dat"));
    write_plot_data(plot, rows);
    out << csv.str();
    return static_cast<int>(ok);
  });
}

inline int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = load(o);
    if (cfg.rules.empty()) throw UsageError("config defines no [rule:NAME] sections");
    const bool fa = cfg.regime == Regime::false_alarm;
    const AdversaryStrategy adversary = AdversaryStrategy::parse(fa ? cfg.adversary : cfg.delay_adversary);
    std::uint64_t horizon = cfg.horizon;
    if (horizon == 0) {
      if (!cfg.gammas.empty())
        horizon = fa ? default_arl_horizon(cfg.gammas.back()) : default_delay_horizon(cfg.gammas.back(), cfg.scenario.model.kl());
      else
        horizon = fa ? 10000000 : 100000;
    }
    std::ofstream trace;
    if (!o.trace.empty()) {
      trace.open(o.trace);
      if (!trace) throw std::runtime_error("cannot open trace file '" + o.trace + "'");
      trace << "rule,t,statistic,values\n";
    }
    std::ostringstream csv;
    csv << "rule,kind,L,h,regime,adversary,mean,se,ci_lo,ci_hi,n,censored,seed\n";
    for (const auto& nr : cfg.rules) {
      SimulationPlan plan;
      plan.scenario = cfg.scenario;
      plan.scenario.change_time = fa ? std::nullopt : std::optional<std::uint64_t>(0);
      plan.rule = nr.rule;
      plan.adversary = adversary;
      plan.replications = cfg.replications;
      plan.horizon = horizon;
      plan.seed = cfg.seed;
      plan.regime = cfg.regime;
      const EstimateWithCI e = run(plan, o.workers);
      if (!e.reliable()) err << nr.name << ": " << e.censored << " censored replications, mean is a lower bound\n";
      csv << nr.name << ',' << to_string(nr.rule.kind) << ',' << nr.rule.L << ',' << format_real(nr.rule.h) << ','
          << (fa ? "false-alarm" : "delay") << ',' << adversary.describe() << ',' << format_real(e.mean) << ','
          << format_real(e.standard_error) << ',' << format_real(e.ci95.lo) << ',' << format_real(e.ci95.hi) << ',' << e.n
          << ',' << e.censored << ',' << cfg.seed << '\n';
      if (trace.is_open()) {
        const Simulator sim(plan);
        Workspace ws = sim.make_workspace();
        sim.run_one(0, ws, [&](const CusumSnapshot& s, double stat) {
          trace << nr.name << ',' << s.t << ',' << format_real(stat) << ',';
          for (std::size_t k = 0; k < s.units(); ++k) trace << (k ? " " : "") << format_real(s.W[k]);
          trace << '\n';
        });
      }
    }
    std::ofstream(output_file(cfg, "simulate.csv")) << csv.str();
    out << csv.str();
    return static_cast<int>(ok);
  });
}

inline int cmd_asymptote(const Options& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = load(o);
    require_gammas(cfg);
    const auto& sc = cfg.scenario;
    std::ostringstream csv;
    csv << "rule,kind,L,K,M,B_size,I,gamma,log_gamma,first_order_delay,delay_norm,note\n";
    for (double gamma : cfg.gammas)
      for (const auto& nr : cfg.rules) {
        AsymptoticQuery q{nr.rule.kind, sc.K, sc.M, nr.rule.L, sc.affected_count(), sc.model.kl(), gamma};
        csv << nr.name << ',' << to_string(q.kind) << ',' << q.L << ',' << q.K << ',' << q.M << ',' << q.B_size << ','
            << format_real(q.I) << ',' << format_real(gamma) << ',' << format_real(std::log(gamma)) << ',';
        try {
          const double d = first_order_delay(q);
          csv << format_real(d) << ',' << format_real(normalized_delay(d, sc.K, sc.M, q.I, gamma)) << ",\n";
        } catch (const std::domain_error& e) {
          csv << ",," << e.what() << '\n';
        }
      }
    std::ofstream(output_file(cfg, "asymptote.csv")) << csv.str();
    out << csv.str();
    return static_cast<int>(ok);
  });
}

inline int cmd_validate(const Options& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ValidationOptions v;
    v.workers = o.workers;
    v.paths = o.paths;
    if (!o.config.empty()) {
      const ExperimentConfig cfg = load(o);
      v.seed = cfg.seed;
      v.replications = cfg.replications;
    } else {
      if (o.seed) v.seed = *o.seed;
      if (o.reps) v.replications = *o.reps;
    }
    if (o.fault == "no-clamp") v.fault = EngineFault::no_clamp;
    else if (!o.fault.empty()) throw UsageError("unknown fault '" + o.fault + "' (expected no-clamp)");
    bool all = true;
    for (const auto& s : run_validation(v)) {
      all = all && s.passed;
      out << (s.passed ? "PASS  " : "FAIL  ") << s.name << "  " << s.detail << '\n';
    }
    return all ? static_cast<int>(ok) : static_cast<int>(usage);
  });
}

}  // namespace byzcd::cli
