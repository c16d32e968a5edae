#include "gne/cli.hpp"
#include "gne/log.hpp"
#include "gne/parallel.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <set>

namespace {

void add_common(CLI::App* app, gne::CliOptions& o) {
  auto& ov = o.overrides;
  app->add_option("--mode", ov.mode, "full_info | static_zero_order | dynamic_zero_order");
  app->add_option("--step", ov.step, "Integration step h");
  app->add_option("--horizon", ov.horizon, "Horizon T");
  app->add_option("--amplitude", ov.amplitude, "Dither amplitude (all agents)");
  app->add_option("--k-omega", ov.k_omega, "Dither frequency factor");
  app->add_option("--epsilon", ov.epsilon, "Plant time-scale epsilon");
  app->add_option("--seed", ov.seed, "Seed for random initial conditions");
  app->add_flag("--trace-estimator", o.trace_estimator, "Add estimator columns to the trajectory");
  app->add_flag("--trace-messages", o.trace_messages, "Add agent message columns to the trajectory");
  app->add_flag("--wide", o.wide, "Wide trajectory CSV");
  app->add_option("--out-dir", o.out_dir, "Output directory")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  gne::set_warning_sink([seen = std::set<std::string>()](const std::string& msg) mutable {
    if (seen.insert(msg).second) std::cerr << "[warn] " << msg << '\n';
  });
  CLI::App app{"Extremum-seeking generalized Nash equilibrium simulator"};
  app.require_subcommand(1);
  gne::CliOptions o;
  std::string cmdline;
  for (int i = 0; i < argc; ++i) cmdline += (i ? " " : "") + std::string(argv[i]);
  o.command = cmdline;

  auto* run = app.add_subcommand("run", "Run one scenario");
  run->add_option("scenario", o.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  add_common(run, o);

  auto* sweep = app.add_subcommand("sweep", "Run a parameter grid");
  sweep->add_option("scenario", o.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  sweep->add_option("grid", o.grid, "Grid file")->required()->check(CLI::ExistingFile);
  sweep->add_flag("--cell-artifacts", o.cell_artifacts, "Write run artifacts for every cell");
  add_common(sweep, o);

  auto* verify = app.add_subcommand("verify", "Check the standing assumptions of a scenario");
  verify->add_option("scenario", o.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  add_common(verify, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : gne::kExitValidation;
  }
  gne::configure_threads();
  if (*run) return gne::cmd_run(o, std::cout, std::cerr);
  if (*sweep) return gne::cmd_sweep(o, std::cout, std::cerr);
  return gne::cmd_verify(o, std::cout, std::cerr);
}
