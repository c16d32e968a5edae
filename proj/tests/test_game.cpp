#include "gne/config.hpp"
#include "gne/game.hpp"
#include "gne/plant.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace gne;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

GameSpec squares_game(bool analytic) {
  GameSpec g;
  g.dims = {1, 1};
  for (Index i = 0; i < 2; ++i) {
    g.cost.push_back([i](const Vec& u) { return u[i] * u[i]; });
    if (analytic) g.cost_grad.push_back([i](const Vec& u) { return Vec::Constant(1, 2.0 * u[i]); });
    g.local_sets.push_back(ConvexSet::box(Vec::Constant(1, -3.0), Vec::Constant(1, 3.0)));
  }
  g.A = Mat::Zero(0, 2);
  g.b = Vec::Zero(0);
  return g;
}

// Central differences of a scalar function, step 1e-6.
Vec numeric_gradient(const std::function<double(const Vec&)>& f, const Vec& x) {
  Vec g(x.size());
  for (Index k = 0; k < x.size(); ++k) {
    Vec a = x, b = x;
    a[k] += 1e-6;
    b[k] -= 1e-6;
    g[k] = (f(a) - f(b)) / 2e-6;
  }
  return g;
}

}  // namespace

TEST_CASE("pseudo-gradient examples") {
  const GameSpec g = testing::shared_budget_game().to_game();
  CHECK((pseudo_gradient(g, v2(0, 0)) - v2(-2, -2)).norm() < 1e-12);
  CHECK((finite_difference_pseudo_gradient(g, v2(0, 0)) - v2(-2, -2)).norm() < 1e-8);

  GameSpec flat = squares_game(false);
  for (auto& c : flat.cost) c = [](const Vec&) { return 4.0; };
  CHECK(pseudo_gradient(flat, v2(1.3, -0.4)).norm() == 0.0);

  CHECK_THROWS_AS(pseudo_gradient(g, Vec::Zero(3)), ValidationError);
  GameSpec broken = squares_game(false);
  broken.cost[1] = [](const Vec&) { return std::nan(""); };
  try {
    pseudo_gradient(broken, v2(0, 0));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("agent 2") != std::string::npos);
  }
}

TEST_CASE("wind farm gradient at the greedy point") {
  const Json j = load_config(testing::source_path("scenarios/windfarm.toml"));
  const Scenario sc = build_scenario(j);
  const auto& plant = dynamic_cast<const WindFarmPlant&>(*sc.plant);
  const auto& p = plant.params();
  const Vec a = Vec::Constant(p.n_agents(), 1.0 / 3.0);
  for (const auto& iv : p.intervals) {
    const Vec analytic = farm_power_gradient(p, iv.wake, a);
    const Vec numeric = numeric_gradient([&](const Vec& x) { return farm_power(p, iv.wake, x); }, a);
    CHECK((analytic - numeric).norm() <= 1e-6 * std::max(1.0, numeric.norm()));
  }
}

TEST_CASE("analytic gradients agree with finite differences on every bundled game") {
  for (const char* f : {"scenarios/quadratic2.toml", "scenarios/quadratic_dither.toml",
                        "scenarios/connectivity.toml", "scenarios/windfarm.toml"}) {
    const Scenario sc = build_scenario(load_config(testing::source_path(f)));
    for (const auto& ph : sc.phases) {
      std::mt19937_64 rng(2);
      for (int k = 0; k < 100; ++k) {
        const Vec u = sample_omega(ph.game, rng);
        const Vec Fa = pseudo_gradient(ph.game, u);
        const Vec Ff = finite_difference_pseudo_gradient(ph.game, u);
        CHECK((Fa - Ff).norm() <= std::max(1e-6, 1e-4 * Fa.norm()));
      }
    }
  }
}

TEST_CASE("monotonicity estimates") {
  const auto pairs = sample_pairs(squares_game(true), 50, 4);
  const auto est = estimate_monotonicity(squares_game(true), pairs);
  CHECK(est.mu_hat == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(est.ell_hat == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_FALSE(est.assumption_violated);

  GameSpec constant = squares_game(true);
  for (Index i = 0; i < 2; ++i) constant.cost_grad[i] = [](const Vec&) { return Vec::Constant(1, 1.0); };
  const auto flat = estimate_monotonicity(constant, pairs);
  CHECK(flat.mu_hat == doctest::Approx(0.0));
  CHECK(flat.assumption_violated);

  const Scenario sc = build_scenario(load_config(testing::source_path("scenarios/connectivity.toml")));
  const auto conn = estimate_monotonicity(sc.game(), sample_pairs(sc.game(), 100, 9));
  CHECK(conn.mu_hat > 0.0);

  const SamplePairs same{{v2(1, 1), v2(1, 1)}, {v2(0, 2), v2(0, 2)}};
  CHECK_THROWS(estimate_monotonicity(squares_game(true), same));
}

TEST_CASE("parallel and serial monotonicity estimates agree") {
  const Scenario sc = build_scenario(load_config(testing::source_path("scenarios/connectivity.toml")));
  const auto pairs = sample_pairs(sc.game(), 300, 1);
  const auto a = estimate_monotonicity(sc.game(), pairs);
  const auto b = estimate_monotonicity_serial(sc.game(), pairs);
  CHECK(a.mu_hat == b.mu_hat);
  CHECK(a.ell_hat == b.ell_hat);
  CHECK(a.pairs_used == b.pairs_used);
}

TEST_CASE("KKT residual") {
  const GameSpec g = testing::shared_budget_game().to_game();
  CHECK(kkt_residual(g, v2(0.5, 0.5), Vec::Ones(1)) < 1e-12);

  QuadraticGame free = testing::shared_budget_game();
  free.b = Vec::Constant(1, 5.0);
  CHECK(kkt_residual(free.to_game(), v2(1, 1), Vec::Zero(1)) == 0.0);

  // At (1, 1) the gradient vanishes and only the dual part remains:
  // |0 - max(0, 0 + 2 - 1)| = 1.
  CHECK(kkt_residual(g, v2(1, 1), Vec::Zero(1)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("KKT residual is Lipschitz along random perturbations") {
  const GameSpec g = testing::shared_budget_game().to_game();
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const Vec u = v2(3 * n(rng), 3 * n(rng)), du = v2(n(rng), n(rng));
    const Vec lam = Vec::Constant(1, std::abs(n(rng)));
    const double dl = n(rng);
    for (double d : {1e-3, 1e-5}) {
      const double r0 = kkt_residual(g, u, lam);
      const double r1 = kkt_residual(g, u + d * du, lam + Vec::Constant(1, d * dl));
      worst = std::max(worst, std::abs(r1 - r0) / (d * std::sqrt(du.squaredNorm() + dl * dl)));
    }
  }
  CHECK(worst < 10.0);
}

TEST_CASE("quadratic game validation") {
  QuadraticGame g = testing::shared_budget_game();
  g.b = Vec::Ones(2);
  CHECK_THROWS_AS(g.validate(), ValidationError);
}
