#include "gne/projection.hpp"

#include <doctest.h>

#include <random>

using namespace gne;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

std::vector<ConvexSet> sample_sets() {
  Mat C(3, 2);
  C << 1, 1, -1, 0, 0, -1;
  return {ConvexSet::box(v2(-1, -2), v2(1, 0.5)), ConvexSet::ball(v2(0.3, -0.2), 1.5),
          ConvexSet::halfspaces(C, Vec::Ones(3))};
}

}  // namespace

TEST_CASE("projection examples") {
  CHECK((project(ConvexSet::box(v2(-1, -1), v2(1, 1)), v2(2, -3)) - v2(1, -1)).norm() == 0.0);
  CHECK((project(ConvexSet::ball(v2(0, 0), 1.0), v2(3, 4)) - v2(0.6, 0.8)).norm() < 1e-15);
  Mat C(1, 2);
  C << 1, 1;
  const Vec p = project(ConvexSet::halfspaces(C, Vec::Ones(1)), v2(1, 1));
  CHECK((p - v2(0.5, 0.5)).norm() < 1e-12);
}

TEST_CASE("halfspace projection matches the closed form for one constraint") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int k = 0; k < 50; ++k) {
    Vec a(3), v(3);
    for (int i = 0; i < 3; ++i) {
      a[i] = n(rng);
      v[i] = n(rng);
    }
    const double d = n(rng);
    const Vec expect = v - std::max(0.0, a.dot(v) - d) / a.squaredNorm() * a;
    CHECK((project(ConvexSet::halfspaces(a.transpose(), Vec::Constant(1, d)), v) - expect).norm() < 1e-9);
  }
}

TEST_CASE("empty polyhedron is rejected") {
  Mat C(2, 1);
  C << 1, -1;
  CHECK_THROWS_AS(ConvexSet::halfspaces(C, v2(-1, -1)), ValidationError);
  CHECK_THROWS_AS(ConvexSet::box(v2(1, 0), v2(0, 1)), ValidationError);
  CHECK_THROWS_AS(ConvexSet::ball(v2(0, 0), 0.0), ValidationError);
}

TEST_CASE("projection is idempotent, firmly nonexpansive and fixes members") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (const auto& set : sample_sets()) {
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
      const Vec a = v2(u(rng), u(rng)), b = v2(u(rng), u(rng));
      const Vec pa = project(set, a), pb = project(set, b);
      worst = std::min(worst, (pa - pb).dot((a - b) - (pa - pb)));
      CHECK((project(set, pa) - pa).norm() < 1e-12);
      CHECK(set.contains(pa));
      if (set.contains(a, 0.0)) CHECK((pa - a).norm() < 1e-12);
    }
    CHECK(worst >= -1e-12);
  }
}

TEST_CASE("nonnegative orthant") {
  CHECK((project_nonneg(v2(-1, 2)) - v2(0, 2)).norm() == 0.0);
  CHECK(project_nonneg(Vec::Zero(3)).norm() == 0.0);
  const Vec once = project_nonneg(Vec::Constant(1, -5.0));
  CHECK(once[0] == 0.0);
  CHECK((project_nonneg(once) - once).norm() == 0.0);
}

TEST_CASE("tangent cone of a box") {
  const auto unit = ConvexSet::box(Vec::Zero(1), Vec::Ones(1));
  CHECK(project_tangent_cone(unit, Vec::Constant(1, 0.5), Vec::Constant(1, -3.0))[0] == -3.0);
  CHECK(project_tangent_cone(unit, Vec::Constant(1, 0.0), Vec::Constant(1, -3.0))[0] == 0.0);
  const auto sq = ConvexSet::box(Vec::Zero(2), Vec::Ones(2));
  CHECK((project_tangent_cone(sq, v2(0, 0.5), v2(-1, -1)) - v2(0, -1)).norm() == 0.0);
  CHECK_THROWS_AS(project_tangent_cone(sq, v2(2, 0.5), v2(1, 1)), Error);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 2);
  for (int k = 0; k < 500; ++k) {
    Vec p(2), v = v2(u(rng), u(rng));
    for (int i = 0; i < 2; ++i) {
      const int s = pick(rng);
      p[i] = s == 0 ? 0.0 : s == 1 ? 1.0 : 0.5 * (u(rng) + 1.0);
    }
    const Vec w = project_tangent_cone(sq, p, v);
    CHECK(sq.contains(p + 1e-8 * w, 0.0));
  }
}
