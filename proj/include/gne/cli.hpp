#pragma once

#include "gne/config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace gne {

struct CliOptions {
  std::string scenario;
  std::string grid;
  std::string out_dir = ".";
  Overrides overrides;
  bool trace_estimator = false;
  bool trace_messages = false;
  bool wide = false;
  bool cell_artifacts = false;  // sweep: per-cell run artifacts under cell_NNNN/
  std::string command;          // recorded in manifests
};

enum ExitCode { kExitOk = 0, kExitRuntime = 1, kExitValidation = 2 };

// One executed run and everything derived from it.
struct RunOutcome {
  RunResult run;
  RunMetrics metrics;
  std::vector<IntervalPower> power;  // wind farm only
  Json metrics_json;
};

RunOutcome execute_run(const Scenario& sc, const std::vector<OracleSolution>& oracle, bool with_aux);

// trajectory.csv, metrics.json, manifest.toml and, for the wind farm,
// power_summary.csv.
void write_run_artifacts(const std::string& dir, const RunOutcome& out, const Json& resolved,
                         const std::string& command, const CsvOptions& csv);

void write_power_csv(std::ostream& os, const std::vector<IntervalPower>& power);

enum class CheckLevel { Pass, Warn, Fail };
std::string to_string(CheckLevel level);

struct CheckResult {
  std::string name;
  CheckLevel level = CheckLevel::Pass;
  std::string detail;
};

// Assumption probes bundled for one scenario: monotonicity, step-size
// certificate, steady-state residual, excitation on a pilot run, the
// firm-nonexpansiveness probe and the preconditioner identity.
std::vector<CheckResult> verify_scenario(const Scenario& sc, const Json& resolved,
                                         const std::vector<OracleSolution>& oracle);

int cmd_run(const CliOptions& o, std::ostream& out, std::ostream& err);
int cmd_sweep(const CliOptions& o, std::ostream& out, std::ostream& err);
int cmd_verify(const CliOptions& o, std::ostream& out, std::ostream& err);

}  // namespace gne
