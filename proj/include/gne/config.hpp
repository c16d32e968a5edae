#pragma once

#include "gne/oracle.hpp"
#include "gne/scenario.hpp"
#include "gne/sweep.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gne {

using Json = nlohmann::json;

// Validation failure carrying every offending field.
class ConfigError : public ValidationError {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

Json parse_toml(const std::string& text, const std::string& source = "<string>");
Json load_toml_file(const std::string& path);
std::string to_toml(const Json& doc);

// Fills defaults, draws seeded quantities and checks every field. The result
// is self-contained (file paths absolute, random draws explicit) and a fixed
// point: resolve_config(resolve_config(x)) == resolve_config(x).
Json resolve_config(const Json& raw, const std::string& base_dir = ".");
Json load_config(const std::string& path);

struct Overrides {
  std::optional<std::string> mode;
  std::optional<double> step;
  std::optional<double> horizon;
  std::optional<double> amplitude;
  std::optional<double> k_omega;
  std::optional<double> epsilon;
  std::optional<std::uint64_t> seed;
  bool empty() const;
};

// Applies overrides to a resolved config and resolves again.
Json apply_overrides(const Json& resolved, const Overrides& o);
// Sets one named sweep axis (amplitude, k_omega, epsilon, step, horizon, K,
// gamma) on a resolved config.
Json apply_axis(const Json& resolved, const std::string& axis, double value);

Scenario build_scenario(const Json& resolved);

// Manifest = resolved config plus a provenance table ignored on reload.
std::string manifest_toml(const Json& resolved, const std::string& command);

SweepGrid load_grid(const std::string& path);

// 64-bit FNV-1a over the game-defining sections, hex encoded.
std::string game_hash(const Json& resolved);

// v-GNE per game phase, cached in a JSON sidecar keyed by game_hash.
std::vector<OracleSolution> oracle_for(const Scenario& sc, const Json& resolved,
                                       const std::string& cache_path = "");

struct IntervalPower {
  double t_begin = 0.0;
  double t_end = 0.0;
  double algorithm = 0.0;  // tail average of the farm power along the run
  double greedy = 0.0;     // a = a_max for all turbines
  double oracle = 0.0;
};

// Wind farm only: per wind interval, power of the run's tail, the greedy
// setting and the oracle v-GNE.
std::vector<IntervalPower> windfarm_power_summary(const RunResult& run, const Scenario& sc,
                                                  const std::vector<OracleSolution>& oracle,
                                                  double tail_fraction);

std::string code_version();

}  // namespace gne
