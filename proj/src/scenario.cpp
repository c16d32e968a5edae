#include "gne/scenario.hpp"

#include <cmath>

namespace gne {

size_t Scenario::phase_at(double t) const {
  size_t k = 0;
  while (k + 1 < phases.size() && t >= phases[k + 1].t_begin) ++k;
  return k;
}

double Scenario::hold_time() const {
  if (run.mode == Mode::FullInfo || dither.amplitudes.size() == 0 || dither.amplitudes.maxCoeff() == 0.0)
    return 1.0;
  return dither.slowest_period();
}

void Scenario::validate() const {
  if (phases.empty()) throw ValidationError("scenario: no game");
  const GameSpec& g = game();
  for (const auto& ph : phases) {
    ph.game.validate();
    if (ph.game.dims != g.dims || ph.game.q() != g.q())
      throw ValidationError("scenario: all game phases must share dimensions");
  }
  steps.validate(g.n_agents());
  if (u0.size() != g.m()) throw ValidationError("scenario: u0 has the wrong dimension");
  if (lambda0.size() != g.q()) throw ValidationError("scenario: lambda0 has the wrong dimension");
  if (run.mode != Mode::FullInfo) {
    if (static_cast<Index>(tuning.size()) != g.n_agents())
      throw ValidationError("scenario: one estimator tuning per agent required");
    for (Index i = 0; i < g.n_agents(); ++i) {
      tuning[static_cast<size_t>(i)].validate();
      if (tuning[static_cast<size_t>(i)].dim() != g.dims[static_cast<size_t>(i)] + 1)
        throw ValidationError("scenario: estimator dimension of agent " + std::to_string(i + 1));
    }
    dither.validate(g);
  }
  if (run.mode == Mode::DynamicZeroOrder) {
    if (!plant) throw ValidationError("scenario: dynamic_zero_order needs a plant");
    if (plant->n_agents() != g.n_agents())
      throw ValidationError("scenario: plant and game disagree on the number of agents");
    if (x0.size() != 0 && x0.size() != plant->state_dim())
      throw ValidationError("scenario: x0 has the wrong dimension");
  }
  run.validate(plant ? plant->epsilon() : 0.0);
  if (!(eps_ball > 0.0)) throw ValidationError("scenario: eps_ball must be positive");
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0))
    throw ValidationError("scenario: tail_fraction must lie in (0, 1]");
}

ClosedLoop::ClosedLoop(const Scenario& sc) : sc_(sc), mode_(sc.run.mode) {
  sc_.validate();
  const GameSpec& g = sc_.game();
  layout_.dims = g.dims;
  layout_.m = g.m();
  layout_.q = g.q();
  Index off = layout_.m + layout_.q;
  if (mode_ != Mode::FullInfo) {
    for (Index i = 0; i < g.n_agents(); ++i) {
      const Index p = sc_.tuning[static_cast<size_t>(i)].dim();
      layout_.est_offset.push_back(off);
      layout_.est_p.push_back(p);
      off += estimator_block_size(p);
      ews_.emplace_back(p);
    }
  }
  layout_.x_offset = off;
  if (mode_ == Mode::DynamicZeroOrder) {
    layout_.nx = sc_.plant->state_dim();
    layout_.x_names = sc_.plant->state_names();
    off += layout_.nx;
  }
  layout_.total = off;
  layout_.has_aux = true;

  const Index m = layout_.m, q = layout_.q;
  u_.resize(m);
  lambda_.resize(q);
  grad_.resize(m);
  dither_ = Vec::Zero(m);
  du_.resize(m);
  dlambda_.resize(q);
  y_.resize(g.n_agents());
  fx_.resize(layout_.nx);
  x_.resize(layout_.nx);
}

void ClosedLoop::outputs(double t, const Vec& s, Eigen::Ref<Vec> y) const {
  if (mode_ == Mode::DynamicZeroOrder) {
    sc_.plant->outputs(t, s.segment(layout_.x_offset, layout_.nx), y);
    return;
  }
  const GameSpec& g = sc_.game_at(t);
  const Vec u = s.head(layout_.m);
  for (Index i = 0; i < g.n_agents(); ++i) y[i] = evaluate_cost(g, i, u);
}

Vec ClosedLoop::initial_state() const {
  Vec s = Vec::Zero(layout_.total);
  s.head(layout_.m) = sc_.u0;
  s.segment(layout_.m, layout_.q) = sc_.lambda0;
  if (mode_ == Mode::DynamicZeroOrder)
    s.segment(layout_.x_offset, layout_.nx) =
        sc_.x0.size() ? sc_.x0 : sc_.plant->steady_state(sc_.u0);
  if (mode_ != Mode::FullInfo) {
    Vec y(layout_.n_agents());
    outputs(0.0, s, y);
    for (Index i = 0; i < layout_.n_agents(); ++i) {
      const auto a = static_cast<size_t>(i);
      pack_estimator(EstimatorState::initial(sc_.tuning[a], y[i]), s.data() + layout_.est_offset[a]);
    }
  }
  return s;
}

void ClosedLoop::rhs(double t, const Vec& s, Vec& ds) {
  const GameSpec& g = sc_.game_at(t);
  const Index m = layout_.m, q = layout_.q, n = layout_.n_agents();
  ds.resize(layout_.total);
  u_ = s.head(m);
  lambda_ = s.segment(m, q);

  if (mode_ == Mode::FullInfo || oracle_gradient_) {
    grad_ = pseudo_gradient(g, u_);
  } else {
    for (Index i = 0; i < n; ++i) grad_.segment(layout_.u_offset(i), layout_.dims[static_cast<size_t>(i)]) =
        layout_.theta1(s, i);
  }
  if (mode_ != Mode::FullInfo) dither_all(sc_.dither, t, dither_);
  primal_dual_rhs(g, sc_.steps, u_, lambda_, grad_, mode_ == Mode::FullInfo ? no_dither_ : dither_,
                  du_, dlambda_);
  ds.head(m) = du_;
  ds.segment(m, q) = dlambda_;
  if (mode_ == Mode::FullInfo) return;

  outputs(t, s, y_);
  for (Index i = 0; i < n; ++i) {
    const auto a = static_cast<size_t>(i);
    const Index off = layout_.est_offset[a];
    const double e = y_[i] - s[off];
    estimator_rhs_flat(s.data() + off, sc_.tuning[a],
                       du_.segment(layout_.u_offset(i), layout_.dims[a]), e, ds.data() + off,
                       ews_[a]);
  }
  if (mode_ == Mode::DynamicZeroOrder) {
    x_ = s.segment(layout_.x_offset, layout_.nx);
    sc_.plant->flow(t, x_, u_, fx_);
    ds.segment(layout_.x_offset, layout_.nx) = fx_ / sc_.plant->epsilon();
  }
}

void ClosedLoop::post_step(Vec& s) const {
  for (size_t a = 0; a < layout_.est_offset.size(); ++a)
    estimator_post_step(s.data() + layout_.est_offset[a], sc_.tuning[a]);
}

bool ClosedLoop::admissible(const Vec& s) const {
  if (mode_ != Mode::DynamicZeroOrder) return true;
  return sc_.plant->in_state_set(s.segment(layout_.x_offset, layout_.nx));
}

Vec ClosedLoop::aux(double t, const Vec& s) {
  const Index n = layout_.n_agents();
  Vec out(n + layout_.m);
  Vec ds(layout_.total);
  rhs(t, s, ds);
  if (mode_ == Mode::FullInfo) {
    const GameSpec& g = sc_.game_at(t);
    for (Index i = 0; i < n; ++i) out[i] = evaluate_cost(g, i, s.head(layout_.m));
  } else {
    outputs(t, s, out.head(n));
  }
  out.tail(layout_.m) = ds.head(layout_.m);
  return out;
}

RunResult run_scenario(const Scenario& sc, bool with_aux) {
  ClosedLoop loop(sc);
  StepHooks hooks;
  hooks.post_step = [&loop](Vec& s) { loop.post_step(s); };
  if (sc.run.mode == Mode::DynamicZeroOrder)
    hooks.admissible = [&loop](const Vec& s) { return loop.admissible(s); };
  if (with_aux) hooks.aux = [&loop](double t, const Vec& s) { return loop.aux(t, s); };
  RunResult r;
  r.layout = loop.layout();
  r.traj = integrate([&loop](double t, const Vec& s, Vec& ds) { loop.rhs(t, s, ds); },
                     loop.initial_state(), sc.run, hooks, sc.tail_fraction);
  return r;
}

double tail_gradient_error(const RunResult& run, const Scenario& sc, double tail_fraction) {
  const auto& L = run.layout;
  if (L.est_offset.empty()) throw ValidationError("tail_gradient_error: run has no estimators");
  const auto& tr = run.traj;
  const double t_begin = tr.t.back() * (1.0 - tail_fraction);
  double acc = 0.0;
  Index count = 0;
  Vec th(L.m);
  for (size_t k = 0; k < tr.t.size(); ++k) {
    if (tr.t[k] < t_begin) continue;
    const Vec& s = tr.states[k];
    const Vec F = pseudo_gradient(sc.game_at(tr.t[k]), s.head(L.m));
    for (Index i = 0; i < L.n_agents(); ++i)
      th.segment(L.u_offset(i), L.dims[static_cast<size_t>(i)]) = L.theta1(s, i);
    acc += (th - F).norm() / (1.0 + F.norm());
    ++count;
  }
  if (count == 0) throw Error("tail_gradient_error: no tail samples");
  return acc / static_cast<double>(count);
}

}  // namespace gne
