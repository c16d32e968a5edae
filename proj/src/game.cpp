#include "gne/game.hpp"

#include "gne/log.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace gne {

Index GameSpec::m() const { return std::accumulate(dims.begin(), dims.end(), Index{0}); }

Index GameSpec::offset(Index agent) const {
  Index off = 0;
  for (Index j = 0; j < agent; ++j) off += dims[static_cast<size_t>(j)];
  return off;
}

bool GameSpec::has_analytic_gradient() const {
  if (cost_grad.size() != dims.size()) return false;
  for (const auto& g : cost_grad)
    if (!g) return false;
  return true;
}

void GameSpec::validate() const {
  const size_t n = dims.size();
  if (n == 0) throw ValidationError("game: no agents");
  if (cost.size() != n) throw ValidationError("game: one cost evaluator per agent required");
  if (!cost_grad.empty() && cost_grad.size() != n)
    throw ValidationError("game: cost_grad must be empty or one per agent");
  if (local_sets.size() != n) throw ValidationError("game: one local set per agent required");
  for (size_t i = 0; i < n; ++i) {
    if (dims[i] <= 0) throw ValidationError("game: agent dimension must be positive");
    if (local_sets[i].dim() != dims[i])
      throw ValidationError("game: local set dimension of agent " + std::to_string(i + 1) +
                            " does not match m_i");
    if (!cost[i]) throw ValidationError("game: missing cost for agent " + std::to_string(i + 1));
  }
  if (A.cols() != m())
    throw ValidationError("game: coupling_A has " + std::to_string(A.cols()) +
                          " columns, expected sum m_i = " + std::to_string(m()));
  if (A.rows() != b.size())
    throw ValidationError("game: coupling_A rows must equal coupling_b entries");
}

double evaluate_cost(const GameSpec& game, Index agent, const Vec& u) {
  const double v = game.cost[static_cast<size_t>(agent)](u);
  if (!std::isfinite(v))
    throw Error("non-finite cost value for agent " + std::to_string(agent + 1));
  return v;
}

namespace {

void check_dim(const GameSpec& game, const Vec& u) {
  if (u.size() != game.m())
    throw ValidationError("decision vector has " + std::to_string(u.size()) +
                          " entries, game expects " + std::to_string(game.m()));
}

double fd_partial(const GameSpec& game, Index agent, Vec& x, Index k) {
  const double xk = x[k];
  const double h = kFdRelStep * std::max(1.0, std::abs(xk));
  x[k] = xk + h;
  const double fp = evaluate_cost(game, agent, x);
  x[k] = xk - h;
  const double fm = evaluate_cost(game, agent, x);
  x[k] = xk;
  return (fp - fm) / (2.0 * h);
}

}  // namespace

Vec finite_difference_pseudo_gradient(const GameSpec& game, const Vec& u) {
  check_dim(game, u);
  Vec F(u.size());
  Vec x = u;
  for (Index i = 0; i < game.n_agents(); ++i) {
    const Index off = game.offset(i);
    for (Index k = 0; k < game.dims[static_cast<size_t>(i)]; ++k)
      F[off + k] = fd_partial(game, i, x, off + k);
  }
  return F;
}

Vec pseudo_gradient(const GameSpec& game, const Vec& u) {
  check_dim(game, u);
  if (!game.has_analytic_gradient()) {
    Vec F = finite_difference_pseudo_gradient(game, u);
    if (!F.allFinite()) throw Error("non-finite pseudo-gradient");
    return F;
  }
  Vec F(u.size());
  for (Index i = 0; i < game.n_agents(); ++i) {
    const Vec g = game.cost_grad[static_cast<size_t>(i)](u);
    if (g.size() != game.dims[static_cast<size_t>(i)])
      throw ValidationError("cost_grad of agent " + std::to_string(i + 1) +
                            " returned wrong dimension");
    if (!g.allFinite())
      throw Error("non-finite gradient for agent " + std::to_string(i + 1));
    F.segment(game.offset(i), g.size()) = g;
  }
  return F;
}

Vec cost_gradient_full(const GameSpec& game, Index agent, const Vec& u) {
  check_dim(game, u);
  Vec g(u.size());
  Vec x = u;
  for (Index k = 0; k < u.size(); ++k) g[k] = fd_partial(game, agent, x, k);
  return g;
}

void project_omega_into(const GameSpec& game, const Vec& v, Vec& out) {
  out.resize(v.size());
  for (Index i = 0; i < game.n_agents(); ++i) {
    const Index off = game.offset(i);
    const Index mi = game.dims[static_cast<size_t>(i)];
    project_into(game.local_sets[static_cast<size_t>(i)], v.segment(off, mi),
                 out.segment(off, mi));
  }
}

Vec project_omega(const GameSpec& game, const Vec& v) {
  check_dim(game, v);
  Vec out;
  project_omega_into(game, v, out);
  return out;
}

bool in_omega(const GameSpec& game, const Vec& u, double tol) {
  for (Index i = 0; i < game.n_agents(); ++i) {
    const Index mi = game.dims[static_cast<size_t>(i)];
    if (!game.local_sets[static_cast<size_t>(i)].contains(u.segment(game.offset(i), mi), tol))
      return false;
  }
  return true;
}

double kkt_residual(const GameSpec& game, const Vec& u, const Vec& lambda) {
  check_dim(game, u);
  if (lambda.size() != game.q()) throw ValidationError("kkt_residual: lambda dimension mismatch");
  const Vec F = pseudo_gradient(game, u);
  Vec primal = u - F;
  if (game.q() > 0) primal -= game.A.transpose() * lambda;
  const double r1 = (u - project_omega(game, primal)).norm();
  if (game.q() == 0) return r1;
  const double r2 = (lambda - project_nonneg(lambda + game.A * u - game.b)).norm();
  return r1 + r2;
}

namespace {

struct PairTerms {
  double mono = std::numeric_limits<double>::infinity();
  double lip = 0.0;
  bool valid = false;
};

PairTerms pair_terms(const GameSpec& game, const Vec& u, const Vec& v) {
  const Vec du = u - v;
  const double n2 = du.squaredNorm();
  if (n2 <= 1e-24) return {};
  const Vec dF = pseudo_gradient(game, u) - pseudo_gradient(game, v);
  return {du.dot(dF) / n2, dF.norm() / std::sqrt(n2), true};
}

MonotonicityEstimate finish(double mu, double ell, Index used) {
  if (used == 0) throw Error("estimate_monotonicity: all sample pairs coincide");
  MonotonicityEstimate est{mu, ell, used, mu <= 0.0};
  if (est.assumption_violated)
    log_warning("pseudo-gradient not strongly monotone on samples (mu_hat = " +
                std::to_string(mu) + ")");
  return est;
}

}  // namespace

MonotonicityEstimate estimate_monotonicity_serial(const GameSpec& game, const SamplePairs& pairs) {
  double mu = std::numeric_limits<double>::infinity();
  double ell = 0.0;
  Index used = 0;
  for (const auto& [u, v] : pairs) {
    const PairTerms t = pair_terms(game, u, v);
    if (!t.valid) continue;
    mu = std::min(mu, t.mono);
    ell = std::max(ell, t.lip);
    ++used;
  }
  return finish(mu, ell, used);
}

MonotonicityEstimate estimate_monotonicity(const GameSpec& game, const SamplePairs& pairs) {
  double mu = std::numeric_limits<double>::infinity();
  double ell = 0.0;
  Index used = 0;
  const long n = static_cast<long>(pairs.size());
#pragma omp parallel for reduction(min : mu) reduction(max : ell) reduction(+ : used) schedule(static)
  for (long k = 0; k < n; ++k) {
    const PairTerms t = pair_terms(game, pairs[static_cast<size_t>(k)].first,
                                   pairs[static_cast<size_t>(k)].second);
    if (!t.valid) continue;
    mu = std::min(mu, t.mono);
    ell = std::max(ell, t.lip);
    ++used;
  }
  return finish(mu, ell, used);
}

Vec sample_point(const ConvexSet& set, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  return std::visit(
      [&](const auto& s) -> Vec {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Box>) {
          Vec x(s.lower.size());
          for (Index k = 0; k < x.size(); ++k)
            x[k] = s.lower[k] + unif(rng) * (s.upper[k] - s.lower[k]);
          return x;
        } else if constexpr (std::is_same_v<T, Ball>) {
          Vec dir(s.center.size());
          for (Index k = 0; k < dir.size(); ++k) dir[k] = gauss(rng);
          dir.normalize();
          const double r = s.radius * std::pow(unif(rng), 1.0 / static_cast<double>(dir.size()));
          return s.center + r * dir;
        } else {
          Vec x(s.C.cols());
          for (Index k = 0; k < x.size(); ++k) x[k] = 3.0 * gauss(rng);
          return project(set, x);
        }
      },
      set.shape());
}

Vec sample_omega(const GameSpec& game, std::mt19937_64& rng) {
  Vec u(game.m());
  for (Index i = 0; i < game.n_agents(); ++i)
    u.segment(game.offset(i), game.dims[static_cast<size_t>(i)]) =
        sample_point(game.local_sets[static_cast<size_t>(i)], rng);
  return u;
}

SamplePairs sample_pairs(const GameSpec& game, Index count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SamplePairs pairs;
  pairs.reserve(static_cast<size_t>(count));
  for (Index k = 0; k < count; ++k) {
    Vec u = sample_omega(game, rng);
    Vec v = sample_omega(game, rng);
    pairs.emplace_back(std::move(u), std::move(v));
  }
  return pairs;
}

void QuadraticGame::validate() const {
  const Index m = std::accumulate(dims.begin(), dims.end(), Index{0});
  if (dims.empty()) throw ValidationError("quadratic game: no agents");
  if (M.rows() != m || M.cols() != m) throw ValidationError("quadratic game: Q must be m x m");
  if (q.size() != m) throw ValidationError("quadratic game: linear term must have m entries");
  if (constant.size() != static_cast<Index>(dims.size()))
    throw ValidationError("quadratic game: one constant per agent");
  if (lower.size() != m || upper.size() != m)
    throw ValidationError("quadratic game: bounds must have m entries");
  if (A.cols() != m || A.rows() != b.size())
    throw ValidationError("quadratic game: coupling dimensions inconsistent");
  Index off = 0;
  for (Index mi : dims) {
    const Mat blk = M.block(off, off, mi, mi);
    if ((blk - blk.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw ValidationError("quadratic game: diagonal blocks of Q must be symmetric");
    off += mi;
  }
}

GameSpec QuadraticGame::to_game() const {
  validate();
  GameSpec g;
  g.dims = dims;
  g.A = A;
  g.b = b;
  Index off = 0;
  for (size_t i = 0; i < dims.size(); ++i) {
    const Index mi = dims[i];
    const Mat rows = M.middleRows(off, mi);
    const Mat own = M.block(off, off, mi, mi);
    const Vec qi = q.segment(off, mi);
    const double ki = constant[static_cast<Index>(i)];
    g.cost.push_back([rows, own, qi, ki, off, mi](const Vec& u) {
      const Vec ui = u.segment(off, mi);
      // u_i' (M_i. u) double-counts the own block; subtract half of it.
      return ui.dot(rows * u) - 0.5 * ui.dot(own * ui) + qi.dot(ui) + ki;
    });
    g.cost_grad.push_back([rows, qi](const Vec& u) -> Vec { return rows * u + qi; });
    g.local_sets.push_back(ConvexSet::box(lower.segment(off, mi), upper.segment(off, mi)));
    off += mi;
  }
  g.validate();
  return g;
}

}  // namespace gne
