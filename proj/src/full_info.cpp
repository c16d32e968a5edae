#include "gne/full_info.hpp"

#include "gne/log.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace gne {

Vec PrimalDualState::stacked() const {
  Vec w(u.size() + lambda.size());
  w << u, lambda;
  return w;
}

PrimalDualState PrimalDualState::split(const Vec& omega, Index m) {
  return {omega.head(m), omega.tail(omega.size() - m)};
}

StepSizes StepSizes::uniform(Index n_agents, double gamma, double gamma0) {
  return {Vec::Constant(n_agents, gamma), gamma0};
}

void StepSizes::validate(Index n_agents) const {
  if (gamma.size() != n_agents) throw ValidationError("step sizes: one gamma per agent required");
  if (!((gamma.array() > 0.0).all()) || !(gamma0 > 0.0))
    throw ValidationError("step sizes must be positive");
}

Vec StepSizes::expanded(const GameSpec& game) const {
  Vec g(game.m());
  for (Index i = 0; i < game.n_agents(); ++i)
    g.segment(game.offset(i), game.dims[static_cast<size_t>(i)]).setConstant(gamma[i]);
  return g;
}

void agent_primal_rhs(const ConvexSet& omega_i, double gamma_i, const Eigen::Ref<const Vec>& u_i,
                      const Eigen::Ref<const Vec>& grad_i, const Eigen::Ref<const Vec>& At_lambda_i,
                      const Eigen::Ref<const Vec>& dither_i, Eigen::Ref<Vec> du_i) {
  // du_i holds the projection argument first, then the projected point.
  du_i = u_i - gamma_i * (grad_i + At_lambda_i);
  if (dither_i.size() > 0) du_i += dither_i;
  if (omega_i.is_box()) {
    const Box& box = omega_i.as_box();
    du_i = du_i.cwiseMax(box.lower).cwiseMin(box.upper) - u_i;
  } else {
    const Vec arg = du_i;
    project_into(omega_i, arg, du_i);
    du_i -= u_i;
  }
}

void coordinator_dual_rhs(const Mat& A, const Vec& b, double gamma0, const Vec& u, const Vec& du,
                          const Vec& lambda, Eigen::Ref<Vec> dlambda) {
  if (b.size() == 0) return;
  dlambda.noalias() = A * (u + 2.0 * du);
  dlambda -= b;
  dlambda = (lambda + gamma0 * dlambda).cwiseMax(0.0) - lambda;
}

void primal_dual_rhs(const GameSpec& game, const StepSizes& steps, const Vec& u, const Vec& lambda,
                     const Vec& grad, const Vec& dither, Vec& du, Vec& dlambda) {
  const Index m = game.m();
  if (u.size() != m || lambda.size() != game.q() || grad.size() != m)
    throw ValidationError("primal-dual rhs: state dimensions do not match the game");
  if (!grad.allFinite()) throw Error("non-finite gradient signal in primal-dual rhs");
  du.resize(m);
  dlambda.resize(game.q());
  Vec At_lambda = game.q() > 0 ? Vec(game.A.transpose() * lambda) : Vec(Vec::Zero(m));
  const Vec none;
  for (Index i = 0; i < game.n_agents(); ++i) {
    const Index off = game.offset(i);
    const Index mi = game.dims[static_cast<size_t>(i)];
    agent_primal_rhs(game.local_sets[static_cast<size_t>(i)], steps.gamma[i], u.segment(off, mi),
                     grad.segment(off, mi), At_lambda.segment(off, mi),
                     dither.size() > 0 ? Eigen::Ref<const Vec>(dither.segment(off, mi))
                                       : Eigen::Ref<const Vec>(none),
                     du.segment(off, mi));
  }
  coordinator_dual_rhs(game.A, game.b, steps.gamma0, u, du, lambda, dlambda);
}

PrimalDualRhs full_info_rhs(const GameSpec& game, const StepSizes& steps,
                            const PrimalDualState& state) {
  const Vec F = pseudo_gradient(game, state.u);
  if (!F.allFinite()) throw Error("non-finite pseudo-gradient in full_info_rhs");
  PrimalDualRhs r;
  primal_dual_rhs(game, steps, state.u, state.lambda, F, Vec(), r.du, r.dlambda);
  return r;
}

double spectral_norm(const Mat& A) {
  if (A.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(A);
  return svd.singularValues()(0);
}

Preconditioner preconditioner_matrices(const GameSpec& game, const StepSizes& steps) {
  steps.validate(game.n_agents());
  const Index m = game.m();
  const Index q = game.q();
  const Vec g = steps.expanded(game);
  Preconditioner p;
  p.norm_A = spectral_norm(game.A);

  double max_inv = 1.0 / steps.gamma0;
  double min_inv = 1.0 / steps.gamma0;
  for (Index i = 0; i < steps.gamma.size(); ++i) {
    max_inv = std::max(max_inv, 1.0 / steps.gamma[i]);
    min_inv = std::min(min_inv, 1.0 / steps.gamma[i]);
  }
  const Mat Ginv = g.cwiseInverse().asDiagonal();
  p.Phi = Mat::Zero(m + q, m + q);
  p.Phi.topLeftCorner(m, m) = Ginv;
  p.Phi.topRightCorner(m, q) = -game.A.transpose();
  p.Phi.bottomLeftCorner(q, m) = -game.A;
  p.Phi.bottomRightCorner(q, q) = Mat::Identity(q, q) / steps.gamma0;

  p.Psi = Mat::Zero(m + q, m + q);
  p.Psi.topRightCorner(m, q) = game.A.transpose();
  p.Psi.bottomLeftCorner(q, m) = -game.A;

  p.Ahat = Mat::Zero(m + q, m + q);
  p.Ahat.bottomLeftCorner(q, m) = 2.0 * game.A;

  p.GammaBlockInv = Mat::Zero(m + q, m + q);
  p.GammaBlockInv.topLeftCorner(m, m) = Ginv;
  p.GammaBlockInv.bottomRightCorner(q, q) = Mat::Identity(q, q) / steps.gamma0;

  const double gap = ((p.GammaBlockInv - p.Ahat) - (p.Phi + p.Psi)).cwiseAbs().maxCoeff();
  if (gap > 1e-12) throw Error("preconditioner: matrix identity violated by " + std::to_string(gap));

  p.sigma_min = 1.0 / (max_inv + p.norm_A);
  p.sigma_max = min_inv > p.norm_A ? 1.0 / (min_inv - p.norm_A) : std::numeric_limits<double>::infinity();
  return p;
}

Preconditioner preconditioner(const GameSpec& game, const StepSizes& steps) {
  Preconditioner p = preconditioner_matrices(game, steps);
  double min_inv = 1.0 / steps.gamma0;
  for (Index i = 0; i < steps.gamma.size(); ++i) min_inv = std::min(min_inv, 1.0 / steps.gamma[i]);
  if (!(min_inv > p.norm_A)) {
    std::ostringstream os;
    os << "preconditioner: min gamma^-1 = " << min_inv << " (gamma = " << 1.0 / min_inv
       << ") does not exceed ||A|| = " << p.norm_A;
    throw Error(os.str());
  }
  return p;
}

CertificateReport step_size_certificate(const GameSpec& game, const StepSizes& steps, double mu,
                                        double ell) {
  CertificateReport rep;
  rep.mu = mu;
  rep.ell = ell;
  rep.beta = (mu > 0.0 && ell > 0.0) ? mu / (ell * ell) : 0.0;
  try {
    const Preconditioner p = preconditioner(game, steps);
    rep.sigma_min = p.sigma_min;
    rep.sigma_max = p.sigma_max;
    rep.pass = rep.beta * rep.sigma_min >= rep.sigma_max * rep.sigma_max && rep.beta > 0.0;
    if (!(mu > 0.0)) rep.note = "mu <= 0: strong monotonicity not available";
  } catch (const Error& e) {
    rep.pass = false;
    rep.note = e.what();
  }
  return rep;
}

CertificateReport step_size_certificate_empirical(const GameSpec& game, const StepSizes& steps,
                                                  Index sample_count, std::uint64_t seed) {
  const MonotonicityEstimate est =
      estimate_monotonicity(game, sample_pairs(game, sample_count, seed));
  CertificateReport rep = step_size_certificate(game, steps, est.mu_hat, est.ell_hat);
  rep.empirical = true;
  return rep;
}

double lemma1_probe(const GameSpec& game, const StepSizes& steps, const PrimalDualState& x,
                    const PrimalDualState& fixed_point, ProbeMetric metric) {
  const Preconditioner p = preconditioner_matrices(game, steps);
  const Index m = game.m();
  const PrimalDualRhs r = full_info_rhs(game, steps, x);
  Vec dw(r.du.size() + r.dlambda.size());
  dw << r.du, r.dlambda;
  const Vec w = x.stacked();
  const Vec ws = fixed_point.stacked();
  const Vec Tw = w + dw;
  // B(omega) - B(omega*): the constant b rows cancel.
  Vec dB = Vec::Zero(w.size());
  dB.head(m) = pseudo_gradient(game, x.u) - pseudo_gradient(game, fixed_point.u);
  const Vec e = Tw - ws;
  if (metric == ProbeMetric::Phi) return e.dot(p.Phi * (w - Tw)) - e.dot(dB);
  const Vec dBt = p.Phi.ldlt().solve(dB);
  return e.dot(w - Tw) - e.dot(dBt);
}

}  // namespace gne
