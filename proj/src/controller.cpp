#include "gne/controller.hpp"

#include "gne/log.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gne {

void DitherSpec::validate(const GameSpec& game) const {
  const auto n = static_cast<size_t>(game.n_agents());
  if (static_cast<size_t>(amplitudes.size()) != n || base_frequencies.size() != n)
    throw ValidationError("dither: one amplitude and frequency list per agent required");
  if (!phases.empty() && phases.size() != n)
    throw ValidationError("dither: phases must be empty or one list per agent");
  std::vector<double> all;
  for (size_t i = 0; i < n; ++i) {
    if (!(amplitudes[static_cast<Index>(i)] >= 0.0))
      throw ValidationError("dither: amplitudes must be nonnegative");
    if (base_frequencies[i].size() != game.dims[i])
      throw ValidationError("dither: agent " + std::to_string(i + 1) +
                            " needs one frequency per decision channel");
    if (!phases.empty() && phases[i].size() != game.dims[i])
      throw ValidationError("dither: phase count mismatch for agent " + std::to_string(i + 1));
    for (Index j = 0; j < base_frequencies[i].size(); ++j) all.push_back(base_frequencies[i][j]);
  }
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end())
    log_warning("dither: repeated frequencies across channels");
  if (!(frequency_factor > 0.0)) throw ValidationError("dither: frequency factor must be positive");
}

double DitherSpec::slowest_period() const {
  double wmin = std::numeric_limits<double>::infinity();
  for (const auto& f : base_frequencies)
    if (f.size() > 0) wmin = std::min(wmin, f.minCoeff());
  return 2.0 * M_PI / (frequency_factor * wmin);
}

Vec dither(const DitherSpec& spec, Index agent, double t) {
  const auto i = static_cast<size_t>(agent);
  const Vec& w = spec.base_frequencies[i];
  Vec d(w.size());
  const double scale = spec.amplitudes[agent] / std::sqrt(static_cast<double>(w.size()));
  for (Index j = 0; j < w.size(); ++j) {
    const double ph = spec.phases.empty() ? 0.0 : spec.phases[i][j];
    d[j] = scale * std::sin(spec.frequency_factor * w[j] * t + ph);
  }
  return d;
}

void dither_all(const DitherSpec& spec, double t, Eigen::Ref<Vec> out) {
  Index off = 0;
  for (size_t i = 0; i < spec.base_frequencies.size(); ++i) {
    const Vec& w = spec.base_frequencies[i];
    const double scale =
        spec.amplitudes[static_cast<Index>(i)] / std::sqrt(static_cast<double>(w.size()));
    for (Index j = 0; j < w.size(); ++j) {
      const double ph = spec.phases.empty() ? 0.0 : spec.phases[i][j];
      out[off + j] = scale * std::sin(spec.frequency_factor * w[j] * t + ph);
    }
    off += w.size();
  }
}

AgentController::AgentController(Index agent, ConvexSet omega, double gamma, Mat A_columns,
                                 DitherSpec dither)
    : agent_(agent),
      omega_(std::move(omega)),
      gamma_(gamma),
      A_cols_(std::move(A_columns)),
      dither_(std::move(dither)) {}

Vec AgentController::update(const Vec& u_i, const Vec& theta1_hat_i, const CoordinatorMsg& msg,
                            double t) const {
  if (u_i.size() != omega_.dim() || theta1_hat_i.size() != omega_.dim())
    throw ValidationError("agent update: dimension mismatch");
  if (msg.lambda.size() != A_cols_.rows())
    throw ValidationError("agent update: dual dimension mismatch");
  if (!theta1_hat_i.allFinite())
    throw Error("non-finite gradient estimate for agent " + std::to_string(agent_ + 1));
  const Vec At_lambda = A_cols_.rows() > 0 ? Vec(A_cols_.transpose() * msg.lambda)
                                           : Vec(Vec::Zero(u_i.size()));
  const Vec d = dither(dither_, agent_, t);
  Vec du(u_i.size());
  agent_primal_rhs(omega_, gamma_, u_i, theta1_hat_i, At_lambda, d, du);
  return du;
}

std::vector<AgentController> make_agent_controllers(const GameSpec& game, const StepSizes& steps,
                                                    const DitherSpec& spec) {
  spec.validate(game);
  std::vector<AgentController> out;
  for (Index i = 0; i < game.n_agents(); ++i) {
    const Index mi = game.dims[static_cast<size_t>(i)];
    // Each agent keeps the full per-agent dither spec but only ever evaluates
    // its own channels.
    out.emplace_back(i, game.local_sets[static_cast<size_t>(i)], steps.gamma[i],
                     game.A.middleCols(game.offset(i), mi), spec);
  }
  return out;
}

PrimalDualRhs controller_rhs(const GameSpec& game, const StepSizes& steps, const DitherSpec& spec,
                             const PrimalDualState& state, const Vec& theta1_hat, double t) {
  if (theta1_hat.size() != game.m()) throw ValidationError("controller_rhs: theta1_hat dimension");
  if (!theta1_hat.allFinite()) throw Error("non-finite theta1_hat in controller_rhs");
  Vec d(game.m());
  dither_all(spec, t, d);
  PrimalDualRhs r;
  primal_dual_rhs(game, steps, state.u, state.lambda, theta1_hat, d, r.du, r.dlambda);
  return r;
}

Vec coordinator_step(const std::vector<AgentMsg>& msgs, const StepSizes& steps,
                     const GameSpec& game, const Vec& lambda) {
  const Index n = game.n_agents();
  Vec u(game.m());
  Vec du(game.m());
  std::vector<bool> seen(static_cast<size_t>(n), false);
  for (const auto& msg : msgs) {
    if (msg.agent < 0 || msg.agent >= n) throw ValidationError("coordinator: unknown agent id");
    const Index mi = game.dims[static_cast<size_t>(msg.agent)];
    if (msg.u.size() != mi || msg.u_dot.size() != mi)
      throw ValidationError("coordinator: message dimension mismatch");
    u.segment(game.offset(msg.agent), mi) = msg.u;
    du.segment(game.offset(msg.agent), mi) = msg.u_dot;
    seen[static_cast<size_t>(msg.agent)] = true;
  }
  for (Index i = 0; i < n; ++i)
    if (!seen[static_cast<size_t>(i)])
      throw Error("coordinator: missing message from agent " + std::to_string(i + 1));
  Vec dlambda(game.q());
  coordinator_dual_rhs(game.A, game.b, steps.gamma0, u, du, lambda, dlambda);
  return dlambda;
}

}  // namespace gne
