#include "gne/oracle.hpp"

#include "gne/full_info.hpp"

#include <cmath>
#include <sstream>

namespace gne {

namespace {

long combinations(Index q, Index m) {
  double c = std::pow(2.0, static_cast<double>(q)) * std::pow(3.0, static_cast<double>(m));
  return c > 1e15 ? static_cast<long>(1e15) : static_cast<long>(c);
}

}  // namespace

OracleSolution solve_quadratic_kkt(const QuadraticGame& qg) {
  qg.validate();
  const Index m = qg.M.rows();
  const Index q = qg.b.size();
  const Mat sym = 0.5 * (qg.M + qg.M.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(sym, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues().minCoeff() > 0.0))
    throw Error("quadratic oracle: pseudo-gradient is not strongly monotone (min eigenvalue " +
                std::to_string(eig.eigenvalues().minCoeff()) + ")");
  const long total = combinations(q, m);
  if (total > kMaxActiveSetCombinations) {
    std::ostringstream os;
    os << "quadratic oracle: " << total << " active-set combinations exceed the limit of "
       << kMaxActiveSetCombinations << "; use the extragradient solver";
    throw Error(os.str());
  }

  // All constraints as G u <= h: coupling rows, then lower bounds, then upper.
  Mat G(q + 2 * m, m);
  Vec h(q + 2 * m);
  G.topRows(q) = qg.A;
  h.head(q) = qg.b;
  G.middleRows(q, m) = -Mat::Identity(m, m);
  h.segment(q, m) = -qg.lower;
  G.bottomRows(m) = Mat::Identity(m, m);
  h.tail(m) = qg.upper;

  const double scale = 1.0 + qg.M.cwiseAbs().maxCoeff() + qg.q.cwiseAbs().maxCoeff() +
                       h.cwiseAbs().maxCoeff();
  std::vector<Index> rows;
  for (long code = 0; code < total; ++code) {
    rows.clear();
    long c = code;
    for (Index r = 0; r < q; ++r, c /= 2)
      if (c % 2) rows.push_back(r);
    for (Index k = 0; k < m; ++k, c /= 3) {
      if (c % 3 == 1) rows.push_back(q + k);
      if (c % 3 == 2) rows.push_back(q + m + k);
    }
    const auto s = static_cast<Index>(rows.size());
    Mat K = Mat::Zero(m + s, m + s);
    Vec rhs(m + s);
    K.topLeftCorner(m, m) = qg.M;
    rhs.head(m) = -qg.q;
    for (Index j = 0; j < s; ++j) {
      K.block(0, m + j, m, 1) = G.row(rows[static_cast<size_t>(j)]).transpose();
      K.block(m + j, 0, 1, m) = G.row(rows[static_cast<size_t>(j)]);
      rhs[m + j] = h[rows[static_cast<size_t>(j)]];
    }
    const Vec sol = K.completeOrthogonalDecomposition().solve(rhs);
    if (!sol.allFinite() || (K * sol - rhs).norm() > 1e-9 * scale) continue;
    const Vec u = sol.head(m);
    const Vec nu = sol.tail(s);
    if ((G * u - h).maxCoeff() > 1e-9 * scale) continue;
    if (s > 0 && nu.minCoeff() < -1e-10 * scale) continue;

    OracleSolution out;
    out.u = u;
    out.lambda = Vec::Zero(q);
    for (Index j = 0; j < s; ++j)
      if (rows[static_cast<size_t>(j)] < q) out.lambda[rows[static_cast<size_t>(j)]] = std::max(0.0, nu[j]);
    out.active_set = rows;
    out.iterations = code + 1;
    out.method = "active_set";
    out.residual = kkt_residual(qg.to_game(), out.u, out.lambda);
    return out;
  }
  throw Error("quadratic oracle: no active set satisfies the KKT conditions");
}

OracleSolution solve_extragradient(const GameSpec& original, const ExtragradientOptions& opts,
                                   const Vec& u0, const Vec& lambda0) {
  original.validate();
  if (!(opts.tol > 0.0)) throw ValidationError("extragradient: tol must be positive");
  const Index m = original.m(), q = original.q();

  double ell_F = 0.0;
  if (opts.lipschitz_samples >= 2) {
    const auto pairs = sample_pairs(original, opts.lipschitz_samples, opts.seed);
    ell_F = estimate_monotonicity_serial(original, pairs).ell_hat;
  }
  // Costs with a large gradient scale are divided down so that primal and
  // dual iterates live on comparable scales; tol then applies to the scaled
  // residual.
  const double scale = ell_F > 1.0 ? 1.0 / ell_F : 1.0;
  GameSpec game = original;
  if (scale != 1.0) {
    ell_F = 1.0;
    for (auto& c : game.cost)
      c = [c, scale](const Vec& u) { return scale * c(u); };
    for (auto& g : game.cost_grad)
      if (g) g = [g, scale](const Vec& u) { return Vec(scale * g(u)); };
  }
  const double ell_pd = std::max(ell_F + spectral_norm(game.A), 1e-12);
  double alpha = 0.9 / ell_pd;

  Vec u = u0.size() ? project_omega(game, u0) : project_omega(game, Vec::Zero(m));
  Vec lam = lambda0.size() ? Vec(lambda0.cwiseMax(0.0)) : Vec(Vec::Zero(q));
  Vec ub(m), lb(q), arg(m);

  auto step = [&](const Vec& ue, const Vec& le, Vec& un, Vec& ln) {
    arg = u - alpha * pseudo_gradient(game, ue);
    if (q > 0) {
      arg -= alpha * (game.A.transpose() * le);
      ln = (lam + alpha * (game.A * ue - game.b)).cwiseMax(0.0);
    }
    project_omega_into(game, arg, un);
  };

  OracleSolution best;
  best.u = u;
  best.lambda = lam;
  best.residual = kkt_residual(game, u, lam);
  double last_check = best.residual;
  long it = 0;
  for (; it < opts.max_iters && best.residual > opts.tol; ++it) {
    step(u, lam, ub, lb);
    Vec un(m), ln(q);
    step(ub, lb, un, ln);
    u = un;
    lam = ln;
    if ((it + 1) % opts.check_every == 0) {
      const double r = kkt_residual(game, u, lam);
      if (!std::isfinite(r)) throw Error("extragradient: non-finite iterate");
      if (r < best.residual) {
        best.residual = r;
        best.u = u;
        best.lambda = lam;
      }
      if (r >= last_check) alpha *= 0.5;
      last_check = r;
    }
  }
  const double r = kkt_residual(game, u, lam);
  if (r < best.residual) {
    best.residual = r;
    best.u = u;
    best.lambda = lam;
  }
  best.iterations = it;
  best.method = "extragradient";
  if (best.residual > opts.tol) {
    std::ostringstream os;
    os << "extragradient: residual " << best.residual << " above tolerance " << opts.tol
       << " after " << it << " iterations";
    throw Error(os.str());
  }
  if (scale != 1.0) {
    best.lambda /= scale;
    best.residual = kkt_residual(original, best.u, best.lambda);
  }
  return best;
}

UniquenessReport uniqueness_probe(const GameSpec& game, Index starts, std::uint64_t seed,
                                  const ExtragradientOptions& opts) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  UniquenessReport rep;
  for (Index k = 0; k < starts; ++k) {
    const Vec u0 = sample_omega(game, rng);
    Vec l0(game.q());
    for (Index r = 0; r < l0.size(); ++r) l0[r] = unit(rng);
    rep.solutions.push_back(solve_extragradient(game, opts, u0, l0));
  }
  for (size_t a = 0; a < rep.solutions.size(); ++a)
    for (size_t b = a + 1; b < rep.solutions.size(); ++b)
      rep.max_spread = std::max(rep.max_spread, (rep.solutions[a].u - rep.solutions[b].u).norm());
  return rep;
}

OracleSolution solve_vgne(const GameSpec& game, const QuadraticGame* quadratic,
                          const ExtragradientOptions& opts) {
  if (quadratic && combinations(quadratic->b.size(), quadratic->M.rows()) <= kMaxActiveSetCombinations)
    return solve_quadratic_kkt(*quadratic);
  return solve_extragradient(game, opts);
}

}  // namespace gne
