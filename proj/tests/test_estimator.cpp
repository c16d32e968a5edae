#include "gne/config.hpp"
#include "gne/estimator.hpp"
#include "gne/harness.hpp"
#include "gne/scenario.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace gne;

namespace {

EstimatorTuning raw_tuning(Index p, double K, double rho, double sigma, double bound) {
  EstimatorTuning t;
  t.K = K;
  t.rho = rho;
  t.sigma = sigma;
  t.Sigma0 = Mat::Identity(p, p);
  t.Theta = ConvexSet::box(Vec::Constant(p, -bound), Vec::Constant(p, bound));
  return t;
}

EstimatorState state(double l, double eta, Vec theta, Vec c, Mat Sigma) {
  return {l, eta, std::move(theta), std::move(c), std::move(Sigma)};
}

}  // namespace

TEST_CASE("no excitation, no update") {
  const auto tune = raw_tuning(2, 100.0, 7.0, 0.0, 10.0);
  Mat S(2, 2);
  S << 2.0, 0.5, 0.5, 1.0;
  const auto d = estimator_rhs(state(0.3, 0.4, Vec::Constant(2, 0.2), Vec::Zero(2), S), tune,
                               Vec::Constant(1, 0.7), 0.4);
  CHECK(d.dtheta_hat.norm() == 0.0);
  CHECK((d.dSigma + 7.0 * S).norm() < 1e-15);
}

TEST_CASE("scalar agent with unit information matrix") {
  const auto tune = raw_tuning(2, 100.0, 1.0, 1e-6, 10.0);
  const auto d = estimator_rhs(state(0.0, 0.5, Vec::Zero(2), Vec::Ones(2), Mat::Identity(2, 2)), tune,
                               Vec::Zero(1), 1.5);
  CHECK((d.dtheta_hat - Vec::Ones(2)).norm() < 1e-15);
}

TEST_CASE("estimator derivatives match a direct transcription") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const Index m = 1 + k % 3, p = m + 1;
    const auto tune = raw_tuning(p, 50.0 + 10 * std::abs(n(rng)), 3.0, 1e-3, 2.0);
    Mat B(p, p);
    for (Index i = 0; i < p * p; ++i) B(i) = n(rng);
    const Mat Sigma = B * B.transpose() + 0.1 * Mat::Identity(p, p);
    Vec theta(p), c(p), ud(m);
    for (Index i = 0; i < p; ++i) {
      theta[i] = std::clamp(n(rng), -1.9, 1.9);
      c[i] = n(rng);
    }
    for (Index i = 0; i < m; ++i) ud[i] = n(rng);
    const double eta = n(rng), e = n(rng), l = n(rng);
    const auto d = estimator_rhs(state(l, eta, theta, c, Sigma), tune, ud, e);

    Vec reg(p);
    reg << 1.0, ud;
    const Vec dtheta = Sigma.inverse() * (c * (e - eta) - tune.sigma * theta);
    CHECK((d.dtheta_hat - dtheta).norm() < 1e-9 * (1.0 + dtheta.norm()));
    CHECK(d.dl_hat == doctest::Approx(reg.dot(theta) + tune.K * e + c.dot(dtheta)).epsilon(1e-9));
    CHECK((d.dc - (-tune.K * c + reg)).norm() < 1e-12);
    CHECK(d.deta_hat == doctest::Approx(-tune.K * eta));
    CHECK((d.dSigma - (c * c.transpose() - tune.rho * Sigma + tune.sigma * Mat::Identity(p, p))).norm() < 1e-12);
  }
}

TEST_CASE("theta rate respects active bounds of Theta") {
  const auto tune = raw_tuning(2, 100.0, 1.0, 1e-6, 1.0);
  Vec theta(2);
  theta << 1.0, -1.0;
  const auto d = estimator_rhs(state(0.0, 0.0, theta, Vec::Ones(2), Mat::Identity(2, 2)), tune, Vec::Zero(1), 1.0);
  CHECK(d.dtheta_hat[0] == 0.0);
  CHECK(d.dtheta_hat[1] > 0.0);
}

TEST_CASE("observer state decays at rate K") {
  const auto tune = raw_tuning(2, 20.0, 1.0, 1e-3, 10.0);
  EstimatorState st = EstimatorState::initial(tune, 0.0);
  st.eta_hat = 1.0;
  Vec s(estimator_block_size(2));
  pack_estimator(st, s.data());
  EstimatorWorkspace ws(2);
  RunConfig cfg;
  cfg.h = 1e-3;
  cfg.T = 1.0;
  cfg.sample_stride = 10;
  auto rhs = [&](double t, const Vec& x, Vec& dx) {
    dx.resize(x.size());
    estimator_rhs_flat(x.data(), tune, Vec::Constant(1, std::sin(3 * t)), 0.0, dx.data(), ws);
  };
  const Trajectory tr = integrate(rhs, s, cfg);
  REQUIRE(tr.ok());
  // One RK4 step on dx = -K x multiplies by a truncated exponential series.
  const double x = 20.0 * cfg.h;
  const double rk4 = 1.0 - x + x * x / 2.0 - x * x * x / 6.0 + x * x * x * x / 24.0;
  for (size_t k = 0; k < tr.t.size(); ++k) {
    const double expected = std::pow(rk4, std::round(tr.t[k] / cfg.h));
    CHECK(std::abs(tr.states[k][1] - expected) <= 1e-14);
    CHECK(std::abs(tr.states[k][1]) <= std::exp(-20.0 * tr.t[k]) * (1.0 + 1e-6));
  }
}

TEST_CASE("excitation metric") {
  std::vector<Vec> flat(1001, Vec::Constant(2, 0.7));
  CHECK(std::abs(pe_metric(flat, 0.01, 2.0)) < 1e-12);

  const double dt = 2 * M_PI / 4000;
  std::vector<Vec> rot;
  for (int k = 0; k <= 8000; ++k) {
    Vec c(2);
    c << std::sin(k * dt), std::cos(k * dt);
    rot.push_back(c);
  }
  CHECK(pe_metric(rot, dt, 2 * M_PI) == doctest::Approx(M_PI).epsilon(1e-9));
  CHECK(pe_metric(rot, dt, 2 * M_PI) == doctest::Approx(pe_metric_serial(rot, dt, 2 * M_PI)).epsilon(1e-9));
  CHECK_THROWS(pe_metric(rot, dt, 100.0));
}

TEST_CASE("parameter truth") {
  const GameSpec g = testing::shared_budget_game().to_game();
  Vec u(2);
  u << 0.3, -0.7;
  const auto still = theta_truth(g, u, Vec::Zero(2));
  for (const auto& t : still) CHECK(t.theta0 == 0.0);
  const Vec F = pseudo_gradient(g, u);
  for (Index i = 0; i < 2; ++i) CHECK(still[i].theta1[0] == F[i]);

  GameSpec bil;
  bil.dims = {1, 1};
  bil.cost = {[](const Vec& x) { return x[0] * x[1]; }, [](const Vec& x) { return x[1] * x[1]; }};
  bil.local_sets = {ConvexSet::box(Vec::Constant(1, -5.0), Vec::Constant(1, 5.0)),
                    ConvexSet::box(Vec::Constant(1, -5.0), Vec::Constant(1, 5.0))};
  bil.A = Mat::Zero(0, 2);
  bil.b = Vec::Zero(0);
  Vec ud(2);
  ud << 0.0, 3.0;
  const auto t = theta_truth(bil, u, ud);
  CHECK(t[0].theta0 == doctest::Approx(3.0 * u[0]).epsilon(1e-8));
}

TEST_CASE("connectivity dither is persistently exciting for every agent") {
  Json j = load_config(testing::source_path("scenarios/connectivity.toml"));
  j["run"]["horizon"] = 60.0;
  j["run"]["sample_stride"] = 1;
  const Scenario sc = build_scenario(resolve_config(j));
  const RunResult r = run_scenario(sc);
  REQUIRE(r.traj.ok());
  const double window = sc.dither.slowest_period();
  for (Index i = 0; i < 4; ++i) {
    std::vector<Vec> c;
    for (size_t k = 0; k < r.traj.t.size(); ++k)
      if (r.traj.t[k] >= 5.0) c.push_back(r.layout.c(r.traj.states[k], i));
    CHECK(pe_metric(c, sc.run.h, window) > 0.0);
  }
}

TEST_CASE("information matrix stays symmetric positive definite and estimates stay in Theta") {
  Json j = load_config(testing::source_path("scenarios/quadratic_dither.toml"));
  j["run"]["horizon"] = 3.0;
  const Scenario sc = build_scenario(resolve_config(j));
  const RunResult r = run_scenario(sc);
  REQUIRE(r.traj.ok());
  for (const Vec& s : r.traj.states)
    for (Index i = 0; i < 2; ++i) {
      const Mat S = r.layout.Sigma(s, i);
      CHECK((S - S.transpose()).cwiseAbs().maxCoeff() < 1e-10);
      CHECK(S.llt().info() == Eigen::Success);
      const Index p = r.layout.est_p[i];
      const Vec th = Eigen::Map<const Vec>(s.data() + r.layout.est_offset[i] + 2, p);
      CHECK(sc.tuning[i].Theta.contains(th, 0.0));
    }
}
