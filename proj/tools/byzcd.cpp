#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace byzcd::cli;
  CLI::App app{"Byzantine multisensor CUSUM change detection: calibration, delay frontiers, oracles"};
  app.require_subcommand(1);
  Options o;
  o.workers = std::max(1u, std::thread::hardware_concurrency());

  auto common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", o.config, "experiment config (INI)")->check(CLI::ExistingFile);
    if (config_required) c->required();
    sub->add_option("--seed", o.seed, "base seed (overrides the config)");
    sub->add_option("--out", o.out, "output directory (overrides the config)");
    sub->add_option("--reps", o.reps, "replications (overrides the config)");
    sub->add_option("--workers", o.workers, "worker threads; results do not depend on it")->check(CLI::PositiveNumber);
  };

  auto* calibrate = app.add_subcommand("calibrate", "calibrate thresholds h_gamma for every rule and target ARL");
  common(calibrate, true);
  auto* front = app.add_subcommand("frontier", "calibrate, then estimate worst-case delays; writes CSV and plot data");
  common(front, true);
  auto* simulate = app.add_subcommand("simulate", "estimate mean stopping times at the configured thresholds");
  common(simulate, true);
  simulate->add_option("--trace", o.trace, "write the per-step statistics of replication 0 to this file");
  auto* asymptote = app.add_subcommand("asymptote", "first-order delay formulas for every rule and target ARL");
  common(asymptote, true);
  auto* validate = app.add_subcommand("validate", "run the invariant suites and print a pass/fail table");
  common(validate, false);
  validate->add_option("--inject-fault", o.fault, "run the engine suites on a faulty recursion (no-clamp)");
  validate->add_option("--paths", o.paths, "paths per pathwise suite")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(usage);
  }

  if (*calibrate) return cmd_calibrate(o, std::cout, std::cerr);
  if (*front) return cmd_frontier(o, std::cout, std::cerr);
  if (*simulate) return cmd_simulate(o, std::cout, std::cerr);
  if (*asymptote) return cmd_asymptote(o, std::cout, std::cerr);
  return cmd_validate(o, std::cout, std::cerr);
}
