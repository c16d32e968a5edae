#pragma once

#include "gne/controller.hpp"
#include "gne/estimator.hpp"
#include "gne/full_info.hpp"
#include "gne/game.hpp"
#include "gne/harness.hpp"
#include "gne/plant.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace gne {

// Game valid from t_begin on (the wind farm switches games with the wind).
struct GamePhase {
  double t_begin = 0.0;
  GameSpec game;
};

struct Scenario {
  std::string name;
  std::string kind;  // quadratic | connectivity | windfarm
  std::vector<GamePhase> phases;
  std::shared_ptr<const Plant> plant;  // required for dynamic_zero_order
  std::optional<QuadraticGame> quadratic;
  StepSizes steps;
  std::vector<EstimatorTuning> tuning;  // one per agent; zero-order modes only
  DitherSpec dither;
  Vec u0;
  Vec lambda0;
  Vec x0;  // empty -> pi(u0)
  RunConfig run;
  double eps_ball = 1.0;
  double tail_fraction = 0.1;

  const GameSpec& game() const { return phases.front().game; }
  size_t phase_at(double t) const;
  const GameSpec& game_at(double t) const { return phases[phase_at(t)].game; }
  // Length of the sustained-entry window: the slowest dither period, or one
  // time unit without dither.
  double hold_time() const;
  void validate() const;
};

// The composed closed loop for one mode: owns its scratch buffers, so one
// instance per thread.
class ClosedLoop {
 public:
  explicit ClosedLoop(const Scenario& sc);

  const StateLayout& layout() const { return layout_; }
  Vec initial_state() const;

  // Order inside one evaluation: dither, agent du, coordinator dlambda,
  // estimators, plant.
  void rhs(double t, const Vec& s, Vec& ds);
  void post_step(Vec& s) const;
  bool admissible(const Vec& s) const;
  // [y_1..y_N, du_1..du_m] at (t, s).
  Vec aux(double t, const Vec& s);

  // Replace theta_hat^1 by the true F(u) in the zero-order law (test hook).
  void use_oracle_gradient(bool on) { oracle_gradient_ = on; }

 private:
  void outputs(double t, const Vec& s, Eigen::Ref<Vec> y) const;

  const Scenario& sc_;
  Mode mode_;
  StateLayout layout_;
  bool oracle_gradient_ = false;
  Vec u_, lambda_, grad_, dither_, no_dither_, du_, dlambda_, y_, fx_, x_;
  std::vector<EstimatorWorkspace> ews_;
};

struct RunResult {
  Trajectory traj;
  StateLayout layout;
};

// Integrates the scenario in sc.run.mode.
RunResult run_scenario(const Scenario& sc, bool with_aux = false);

// Mean over tail samples of ||theta_hat^1 - F(u)|| / (1 + ||F(u)||) for the
// stacked estimates, with F the true pseudo-gradient.
double tail_gradient_error(const RunResult& run, const Scenario& sc, double tail_fraction);

}  // namespace gne
