#pragma once

#include "gne/game.hpp"

#include <string>

namespace gne {

// omega = col(u, lambda).
struct PrimalDualState {
  Vec u;
  Vec lambda;

  Vec stacked() const;
  static PrimalDualState split(const Vec& omega, Index m);
};

struct StepSizes {
  Vec gamma;  // one per agent
  double gamma0 = 0.0;

  static StepSizes uniform(Index n_agents, double gamma, double gamma0);
  void validate(Index n_agents) const;
  // Diagonal of Gamma = diag(gamma_i I_{m_i}).
  Vec expanded(const GameSpec& game) const;
};

struct PrimalDualRhs {
  Vec du;
  Vec dlambda;
};

// Agent-side primal update
//   du_i = -u_i + proj_{Omega_i}(u_i - gamma_i (g_i + A_i' lambda) + d_i)
// Every argument is agent-local: own block, own gradient signal, the
// broadcast term A_i' lambda, and the agent's own dither.
void agent_primal_rhs(const ConvexSet& omega_i, double gamma_i, const Eigen::Ref<const Vec>& u_i,
                      const Eigen::Ref<const Vec>& grad_i, const Eigen::Ref<const Vec>& At_lambda_i,
                      const Eigen::Ref<const Vec>& dither_i, Eigen::Ref<Vec> du_i);

// Coordinator dual update
//   dlambda = -lambda + proj_{>=0}(lambda + gamma0 (A u - b + 2 A du))
// with du the already evaluated primal derivative.
void coordinator_dual_rhs(const Mat& A, const Vec& b, double gamma0, const Vec& u, const Vec& du,
                          const Vec& lambda, Eigen::Ref<Vec> dlambda);

// Shared primal-dual right-hand side: gradient signal `grad` (F(u) or its
// estimate) and additive dither (may be empty for none). du is computed first
// and substituted into the dual row.
void primal_dual_rhs(const GameSpec& game, const StepSizes& steps, const Vec& u, const Vec& lambda,
                     const Vec& grad, const Vec& dither, Vec& du, Vec& dlambda);

// Full-information projected primal-dual flow.
PrimalDualRhs full_info_rhs(const GameSpec& game, const StepSizes& steps,
                            const PrimalDualState& state);

struct Preconditioner {
  Mat Phi;
  Mat Psi;
  Mat Ahat;
  Mat GammaBlockInv;
  double norm_A = 0.0;
  double sigma_min = 0.0;  // lower bound on the spectrum of Phi^{-1}
  double sigma_max = 0.0;  // upper bound on the spectrum of Phi^{-1}
};

// Builds Phi, Psi, Ahat and the spectral bounds; checks
// Gamma_blk^{-1} - Ahat = Phi + Psi to 1e-12. Throws when
// min gamma^{-1} <= ||A||.
Preconditioner preconditioner(const GameSpec& game, const StepSizes& steps);

// Same matrices without the step-size precondition; sigma_max is infinite
// when min gamma^{-1} <= ||A||.
Preconditioner preconditioner_matrices(const GameSpec& game, const StepSizes& steps);

// Largest singular value.
double spectral_norm(const Mat& A);

struct CertificateReport {
  double beta = 0.0;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  double mu = 0.0;
  double ell = 0.0;
  bool pass = false;
  bool empirical = false;
  std::string note;
};

// beta * sigma_min >= sigma_max^2 with beta = mu / ell^2.
CertificateReport step_size_certificate(const GameSpec& game, const StepSizes& steps, double mu,
                                        double ell);

// Same, with (mu, ell) estimated from sampled pairs; labelled empirical.
CertificateReport step_size_certificate_empirical(const GameSpec& game, const StepSizes& steps,
                                                  Index sample_count, std::uint64_t seed);

enum class ProbeMetric { Euclidean, Phi };

// Slack of the firm-nonexpansiveness inequality for T(omega) = omega + rhs(omega):
//   <Tx - x*, x - Tx>_M - <Tx - x*, Btilde x - Btilde x*>_M
// with Btilde = Phi^{-1} B, B(omega) = col(F(u), b), and M = I or Phi.
double lemma1_probe(const GameSpec& game, const StepSizes& steps, const PrimalDualState& x,
                    const PrimalDualState& fixed_point, ProbeMetric metric = ProbeMetric::Phi);

}  // namespace gne
