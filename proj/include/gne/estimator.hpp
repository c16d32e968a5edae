#pragma once

#include "gne/game.hpp"
#include "gne/projection.hpp"

#include <vector>

namespace gne {

// Gains of one agent's parameter estimator.
struct EstimatorTuning {
  double K = 100.0;      // observer gain
  double rho = 100.0;    // forgetting rate of Sigma
  double sigma = 1e-6;   // regularisation
  Mat Sigma0;            // initial Sigma, symmetric positive definite
  ConvexSet Theta = ConvexSet::box(Vec::Constant(1, -1.0), Vec::Constant(1, 1.0));

  Index dim() const { return Sigma0.rows(); }
  void validate() const;
  // Theta = [-bound, bound]^(m_i + 1), Sigma0 = s0 I.
  static EstimatorTuning standard(Index m_i, double K, double rho, double sigma, double s0,
                                  double theta_bound);
};

// Estimator state of one agent; theta_hat = [theta^0; theta^1].
struct EstimatorState {
  double l_hat = 0.0;
  double eta_hat = 0.0;
  Vec theta_hat;
  Vec c;
  Mat Sigma;

  // Zero-information start: l_hat = first output, everything else zero,
  // Sigma = Sigma0.
  static EstimatorState initial(const EstimatorTuning& tune, double first_output);
};

struct EstimatorDerivatives {
  double dl_hat = 0.0;
  double deta_hat = 0.0;
  Vec dtheta_hat;
  Vec dc;
  Mat dSigma;
};

// Flat layout of one agent's estimator inside the closed-loop state vector:
// [l_hat, eta_hat, theta_hat (p), c (p), Sigma (p*p, column-major)].
inline constexpr Index estimator_block_size(Index p) { return 2 + 2 * p + p * p; }

// Scratch buffers for the allocation-free right-hand side.
struct EstimatorWorkspace {
  explicit EstimatorWorkspace(Index p = 1);
  Mat Sigma;
  Vec v;
  Vec regressor;
  Eigen::LLT<Mat> llt;
};

// Time derivative of the estimator given the agent's own input rate u_dot_i
// and its estimation error e_i (cost output minus l_hat). theta_hat's rate is
// evaluated first because l_hat's rate references it.
EstimatorDerivatives estimator_rhs(const EstimatorState& st, const EstimatorTuning& tune,
                                   const Vec& u_dot_i, double e_i);

void estimator_rhs_flat(const double* state, const EstimatorTuning& tune,
                        const Eigen::Ref<const Vec>& u_dot_i, double e_i, double* deriv,
                        EstimatorWorkspace& ws);

// Once per integrator step: clamp theta_hat into Theta, symmetrise Sigma.
void estimator_post_step(double* state, const EstimatorTuning& tune);

void pack_estimator(const EstimatorState& st, double* out);
EstimatorState unpack_estimator(const double* in, Index p);

// Empirical persistence-of-excitation level: minimum over sliding windows of
// length window_T of the smallest eigenvalue of the trapezoidal Gram integral
// of c. Samples are uniform with spacing dt.
double pe_metric(const std::vector<Vec>& c_samples, double dt, double window_T);
double pe_metric_serial(const std::vector<Vec>& c_samples, double dt, double window_T);

struct ThetaTruth {
  double theta0 = 0.0;
  Vec theta1;
};

// Oracle values of theta_i: theta0_i = grad_{u_-i} J_i' u_dot_-i,
// theta1_i = grad_{u_i} J_i. Test and trace use only.
std::vector<ThetaTruth> theta_truth(const GameSpec& game, const Vec& u, const Vec& u_dot);

}  // namespace gne
