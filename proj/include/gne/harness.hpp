#pragma once

#include "gne/game.hpp"
#include "gne/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace gne {

enum class Mode { FullInfo, StaticZeroOrder, DynamicZeroOrder };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& name);

struct RunConfig {
  double h = 0.01;
  double T = 100.0;
  Index sample_stride = 10;
  std::uint64_t seed = 0;
  Mode mode = Mode::FullInfo;

  // Throws on h <= 0, T < h or stride < 1. In dynamic mode warns when
  // h > epsilon / 10.
  void validate(double epsilon = 0.0) const;
  long steps() const;
};

enum class RunStatus { Ok, NonFinite, LeftStateSet, Failed };
std::string to_string(RunStatus status);

struct Trajectory {
  std::vector<double> t;
  std::vector<Vec> states;
  std::vector<Vec> aux;
  RunStatus status = RunStatus::Ok;
  std::string message;
  // Time average of the state over [tail_begin, t_end], accumulated every
  // step with the trapezoid rule.
  Vec tail_mean;
  double tail_begin = 0.0;
  double t_end = 0.0;
  long steps_taken = 0;

  bool ok() const { return status == RunStatus::Ok; }
  const Vec& final_state() const { return states.back(); }
};

using RhsFn = std::function<void(double t, const Vec& s, Vec& ds)>;

struct StepHooks {
  std::function<void(Vec& s)> post_step;            // once per step
  std::function<bool(const Vec& s)> admissible;     // false -> LeftStateSet
  std::function<Vec(double t, const Vec& s)> aux;   // stored next to each sample
};

// Classic fixed-step RK4. Samples every cfg.sample_stride steps plus the final
// state. Aborts with the last finite sample on non-finite values and flags an
// inadmissible state; exceptions from the rhs end the run as Failed.
Trajectory integrate(const RhsFn& rhs, const Vec& s0, const RunConfig& cfg,
                     const StepHooks& hooks = {}, double tail_fraction = 0.1);

// Where u, lambda, the estimator blocks and the plant state live in the
// closed-loop state vector.
struct StateLayout {
  std::vector<Index> dims;
  Index m = 0;
  Index q = 0;
  std::vector<Index> est_offset;  // empty unless zero-order
  std::vector<Index> est_p;
  Index x_offset = 0;
  Index nx = 0;
  std::vector<std::string> x_names;
  Index total = 0;
  // Closed-loop aux samples: [y_1..y_N, du_1..du_m].
  bool has_aux = false;

  Index n_agents() const { return static_cast<Index>(dims.size()); }

  Index u_offset(Index agent) const;
  // theta_hat^1 of an agent inside s.
  Eigen::Map<const Vec> theta1(const Vec& s, Index agent) const;
  Eigen::Map<const Vec> c(const Vec& s, Index agent) const;
  Eigen::Map<const Mat> Sigma(const Vec& s, Index agent) const;
};

inline constexpr double kNotConverged = std::numeric_limits<double>::infinity();

struct RunMetrics {
  Vec u_tail_mean;
  Vec dist_per_agent;
  double dist_to_vgne = 0.0;  // collective
  double entry_time = kNotConverged;
  double max_violation = 0.0;  // max (A u - b)_+ over tail samples
  RunStatus status = RunStatus::Ok;
  std::string message;

  bool converged() const { return entry_time != kNotConverged; }
  // "ok", "did_not_converge" or the failure.
  std::string status_label() const;
};

// Tail-average distance to u_star (per agent and collective), first time the
// trajectory enters {u_star} + eps_ball B and stays for `hold` time units
// (collective norm), and the tail constraint violation.
RunMetrics run_metrics(const Trajectory& traj, const StateLayout& layout, const GameSpec& game,
                       const Vec& u_star, double eps_ball, double hold, double tail_fraction = 0.1);

// Sustained-entry time of a scalar distance series; kNotConverged if never.
double sustained_entry_time(const std::vector<double>& t, const std::vector<double>& dist,
                            double eps_ball, double hold);

struct CsvOptions {
  bool wide = false;
  bool trace_estimator = false;
  bool trace_messages = false;
  bool include_plant = true;
};

// Long form `t,agent,var,value` (agent 0 = coordinator) or wide form
// `t,u_1..,lambda_1..[,x..]`.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const StateLayout& layout,
                          const CsvOptions& opts);

}  // namespace gne
