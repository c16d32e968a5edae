#include "gne/estimator.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace gne {

void EstimatorTuning::validate() const {
  if (!(K > 0.0) || !(rho > 0.0) || !(sigma > 0.0))
    throw ValidationError("estimator: K, rho and sigma must be positive");
  if (Sigma0.rows() != Sigma0.cols() || Sigma0.rows() == 0)
    throw ValidationError("estimator: Sigma0 must be square");
  if ((Sigma0 - Sigma0.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw ValidationError("estimator: Sigma0 must be symmetric");
  if (Sigma0.llt().info() != Eigen::Success)
    throw ValidationError("estimator: Sigma0 must be positive definite");
  if (!Theta.is_box() || Theta.dim() != Sigma0.rows())
    throw ValidationError("estimator: Theta must be a box of dimension m_i + 1");
  if (!Theta.as_box().lower.allFinite() || !Theta.as_box().upper.allFinite())
    throw ValidationError("estimator: Theta must be bounded");
}

EstimatorTuning EstimatorTuning::standard(Index m_i, double K, double rho, double sigma,
                                          double s0, double theta_bound) {
  const Index p = m_i + 1;
  EstimatorTuning t;
  t.K = K;
  t.rho = rho;
  t.sigma = sigma;
  t.Sigma0 = s0 * Mat::Identity(p, p);
  t.Theta = ConvexSet::box(Vec::Constant(p, -theta_bound), Vec::Constant(p, theta_bound));
  t.validate();
  return t;
}

EstimatorState EstimatorState::initial(const EstimatorTuning& tune, double first_output) {
  const Index p = tune.dim();
  return {first_output, 0.0, Vec::Zero(p), Vec::Zero(p), tune.Sigma0};
}

EstimatorWorkspace::EstimatorWorkspace(Index p)
    : Sigma(p, p), v(p), regressor(p), llt(p) {}

void estimator_rhs_flat(const double* state, const EstimatorTuning& tune,
                        const Eigen::Ref<const Vec>& u_dot_i, double e_i, double* deriv,
                        EstimatorWorkspace& ws) {
  const Index p = tune.dim();
  const double eta_hat = state[1];
  Eigen::Map<const Vec> theta(state + 2, p);
  Eigen::Map<const Vec> c(state + 2 + p, p);
  Eigen::Map<const Mat> Sigma(state + 2 + 2 * p, p, p);

  double& dl = deriv[0];
  double& deta = deriv[1];
  Eigen::Map<Vec> dtheta(deriv + 2, p);
  Eigen::Map<Vec> dc(deriv + 2 + p, p);
  Eigen::Map<Mat> dSigma(deriv + 2 + 2 * p, p, p);

  ws.regressor[0] = 1.0;
  ws.regressor.tail(p - 1) = u_dot_i;

  // theta_hat rate: Pi_Theta(theta_hat, Sigma^{-1}(c (e - eta_hat) - sigma theta_hat)).
  ws.Sigma = 0.5 * (Sigma + Sigma.transpose());
  ws.llt.compute(ws.Sigma);
  if (ws.llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(ws.Sigma, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    std::ostringstream os;
    os << "estimator: Sigma not positive definite (eigenvalues in [" << lo << ", " << hi
       << "], condition estimate " << (lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity())
       << ")";
    throw Error(os.str());
  }
  ws.v = c * (e_i - eta_hat) - tune.sigma * theta;
  dtheta = ws.llt.solve(ws.v);
  tangent_cone_box_inplace(tune.Theta.as_box(), theta, dtheta);

  dl = ws.regressor.dot(theta) + tune.K * e_i + c.dot(dtheta);
  dc = -tune.K * c + ws.regressor;
  deta = -tune.K * eta_hat;
  dSigma.noalias() = c * c.transpose();
  dSigma -= tune.rho * Sigma;
  dSigma.diagonal().array() += tune.sigma;
}

void estimator_post_step(double* state, const EstimatorTuning& tune) {
  const Index p = tune.dim();
  Eigen::Map<Vec> theta(state + 2, p);
  const Box& box = tune.Theta.as_box();
  theta = theta.cwiseMax(box.lower).cwiseMin(box.upper);
  Eigen::Map<Mat> Sigma(state + 2 + 2 * p, p, p);
  for (Index r = 0; r < p; ++r)
    for (Index c = r + 1; c < p; ++c) {
      const double avg = 0.5 * (Sigma(r, c) + Sigma(c, r));
      Sigma(r, c) = avg;
      Sigma(c, r) = avg;
    }
}

void pack_estimator(const EstimatorState& st, double* out) {
  const Index p = st.theta_hat.size();
  out[0] = st.l_hat;
  out[1] = st.eta_hat;
  Eigen::Map<Vec>(out + 2, p) = st.theta_hat;
  Eigen::Map<Vec>(out + 2 + p, p) = st.c;
  Eigen::Map<Mat>(out + 2 + 2 * p, p, p) = st.Sigma;
}

EstimatorState unpack_estimator(const double* in, Index p) {
  EstimatorState st;
  st.l_hat = in[0];
  st.eta_hat = in[1];
  st.theta_hat = Eigen::Map<const Vec>(in + 2, p);
  st.c = Eigen::Map<const Vec>(in + 2 + p, p);
  st.Sigma = Eigen::Map<const Mat>(in + 2 + 2 * p, p, p);
  return st;
}

EstimatorDerivatives estimator_rhs(const EstimatorState& st, const EstimatorTuning& tune,
                                   const Vec& u_dot_i, double e_i) {
  const Index p = tune.dim();
  if (st.theta_hat.size() != p || st.c.size() != p || st.Sigma.rows() != p ||
      u_dot_i.size() != p - 1)
    throw ValidationError("estimator_rhs: dimension mismatch");
  Vec packed(estimator_block_size(p));
  Vec deriv(estimator_block_size(p));
  pack_estimator(st, packed.data());
  EstimatorWorkspace ws(p);
  estimator_rhs_flat(packed.data(), tune, u_dot_i, e_i, deriv.data(), ws);
  const EstimatorState d = unpack_estimator(deriv.data(), p);
  return {d.l_hat, d.eta_hat, d.theta_hat, d.c, d.Sigma};
}

namespace {

Index window_steps(const std::vector<Vec>& c, double dt, double window_T) {
  if (!(dt > 0.0) || !(window_T > 0.0)) throw ValidationError("pe_metric: dt and window must be positive");
  const Index w = static_cast<Index>(std::llround(window_T / dt));
  if (w < 1 || static_cast<Index>(c.size()) < w + 1)
    throw Error("pe_metric: window longer than trajectory");
  return w;
}

double min_eig(const Mat& G) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(G, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

}  // namespace

double pe_metric_serial(const std::vector<Vec>& c, double dt, double window_T) {
  const Index w = window_steps(c, dt, window_T);
  const Index p = c.front().size();
  const Index n = static_cast<Index>(c.size());
  double alpha = std::numeric_limits<double>::infinity();
  for (Index s = 0; s + w < n; ++s) {
    Mat G = Mat::Zero(p, p);
    for (Index k = s; k < s + w; ++k) {
      const auto& a = c[static_cast<size_t>(k)];
      const auto& b = c[static_cast<size_t>(k + 1)];
      G += 0.5 * dt * (a * a.transpose() + b * b.transpose());
    }
    alpha = std::min(alpha, min_eig(G));
  }
  return alpha;
}

double pe_metric(const std::vector<Vec>& c, double dt, double window_T) {
  const Index w = window_steps(c, dt, window_T);
  const Index p = c.front().size();
  const Index n = static_cast<Index>(c.size());
  // prefix[k] = integral from sample 0 to sample k.
  std::vector<Mat> prefix(static_cast<size_t>(n), Mat::Zero(p, p));
  for (Index k = 1; k < n; ++k) {
    const auto& a = c[static_cast<size_t>(k - 1)];
    const auto& b = c[static_cast<size_t>(k)];
    prefix[static_cast<size_t>(k)] =
        prefix[static_cast<size_t>(k - 1)] + 0.5 * dt * (a * a.transpose() + b * b.transpose());
  }
  double alpha = std::numeric_limits<double>::infinity();
  const long starts = static_cast<long>(n - w);
#pragma omp parallel for reduction(min : alpha) schedule(static)
  for (long s = 0; s < starts; ++s) {
    const Mat G = prefix[static_cast<size_t>(s + w)] - prefix[static_cast<size_t>(s)];
    alpha = std::min(alpha, min_eig(G));
  }
  return alpha;
}

std::vector<ThetaTruth> theta_truth(const GameSpec& game, const Vec& u, const Vec& u_dot) {
  if (u.size() != game.m() || u_dot.size() != game.m())
    throw ValidationError("theta_truth: dimension mismatch");
  const Vec F = pseudo_gradient(game, u);
  std::vector<ThetaTruth> out;
  for (Index i = 0; i < game.n_agents(); ++i) {
    const Index off = game.offset(i);
    const Index mi = game.dims[static_cast<size_t>(i)];
    Vec g = cost_gradient_full(game, i, u);
    g.segment(off, mi).setZero();
    out.push_back({g.dot(u_dot), F.segment(off, mi)});
  }
  return out;
}

}  // namespace gne
