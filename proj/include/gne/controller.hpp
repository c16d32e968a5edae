#pragma once

#include "gne/full_info.hpp"
#include "gne/game.hpp"

#include <vector>

namespace gne {

// Sinusoidal dither d_i(t) = (a_i / sqrt(m_i)) col(sin(k_w wbar_i^j t + phi_i^j)).
struct DitherSpec {
  Vec amplitudes;                     // a_i per agent
  std::vector<Vec> base_frequencies;  // wbar_i^j per agent and channel
  double frequency_factor = 1.0;      // k_w
  std::vector<Vec> phases;            // empty -> zero phases

  // Dimensions against the game; warns on repeated frequencies.
  void validate(const GameSpec& game) const;
  // 2 pi / (k_w min wbar), the slowest dither period.
  double slowest_period() const;
};

Vec dither(const DitherSpec& spec, Index agent, double t);
// All agents stacked like u.
void dither_all(const DitherSpec& spec, double t, Eigen::Ref<Vec> out);

// Agent -> coordinator message.
struct AgentMsg {
  Index agent = 0;
  Vec u;
  Vec u_dot;
};

// Coordinator -> agents broadcast.
struct CoordinatorMsg {
  Vec lambda;
};

// Agent-side controller. Holds only agent-local data: its own local set, step
// size, its columns of A and its dither channels. It never sees u_{-i}.
class AgentController {
 public:
  AgentController(Index agent, ConvexSet omega, double gamma, Mat A_columns, DitherSpec dither);

  Index agent() const { return agent_; }

  // du_i from own decision, own gradient estimate and the broadcast dual.
  Vec update(const Vec& u_i, const Vec& theta1_hat_i, const CoordinatorMsg& msg, double t) const;
  AgentMsg message(const Vec& u_i, const Vec& du_i) const { return {agent_, u_i, du_i}; }

 private:
  Index agent_;
  ConvexSet omega_;
  double gamma_;
  Mat A_cols_;
  DitherSpec dither_;
};

// Builds the per-agent controllers of a game.
std::vector<AgentController> make_agent_controllers(const GameSpec& game, const StepSizes& steps,
                                                    const DitherSpec& spec);

// Data-driven primal-dual law: like full_info_rhs with theta1_hat in place of
// F(u) and the dither added inside the projection.
PrimalDualRhs controller_rhs(const GameSpec& game, const StepSizes& steps, const DitherSpec& spec,
                             const PrimalDualState& state, const Vec& theta1_hat, double t);

// Coordinator dual derivative assembled from one message per agent.
Vec coordinator_step(const std::vector<AgentMsg>& msgs, const StepSizes& steps,
                     const GameSpec& game, const Vec& lambda);

}  // namespace gne
