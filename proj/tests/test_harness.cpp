#include "gne/cli.hpp"
#include "gne/config.hpp"
#include "gne/harness.hpp"
#include "gne/sweep.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace gne;
namespace fs = std::filesystem;

namespace {

StateLayout scalar_layout() {
  StateLayout L;
  L.dims = {1};
  L.m = 1;
  L.total = 1;
  return L;
}

GameSpec scalar_game() {
  GameSpec g;
  g.dims = {1};
  g.cost = {[](const Vec& u) { return u[0] * u[0]; }};
  g.local_sets = {ConvexSet::box(Vec::Constant(1, -5.0), Vec::Constant(1, 5.0))};
  g.A = Mat::Ones(1, 1);
  g.b = Vec::Constant(1, 2.0);
  return g;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gne_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("RK4 on exponential decay") {
  RunConfig cfg;
  cfg.h = 0.01;
  cfg.T = 1.0;
  const Trajectory tr = integrate([](double, const Vec& x, Vec& dx) { dx = -x; }, Vec::Ones(1), cfg);
  REQUIRE(tr.ok());
  CHECK(tr.t.back() == doctest::Approx(1.0));
  CHECK(std::abs(tr.final_state()[0] - std::exp(-1.0)) < 1e-9);

  const Trajectory flat = integrate([](double, const Vec& x, Vec& dx) { dx = Vec::Zero(x.size()); },
                                    Vec::Constant(2, 3.0), cfg);
  for (const Vec& s : flat.states) CHECK((s.array() == 3.0).all());
}

TEST_CASE("RK4 global error is fourth order") {
  auto err = [](double h) {
    RunConfig cfg;
    cfg.h = h;
    cfg.T = 2.0;
    const Trajectory tr =
        integrate([](double t, const Vec& x, Vec& dx) { dx = Vec::Constant(1, std::cos(t) * x[0]); }, Vec::Ones(1), cfg);
    return std::abs(tr.final_state()[0] - std::exp(std::sin(2.0)));
  };
  CHECK(std::log2(err(0.1) / err(0.05)) == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("integration failures are reported") {
  RunConfig cfg;
  cfg.h = 0.1;
  cfg.T = 5.0;
  cfg.sample_stride = 1;
  const Trajectory blow = integrate(
      [](double t, const Vec& x, Vec& dx) { dx = Vec::Constant(1, t > 1.0 ? std::nan("") : x[0]); }, Vec::Ones(1), cfg);
  CHECK(blow.status == RunStatus::NonFinite);
  CHECK(blow.final_state().allFinite());

  StepHooks hooks;
  hooks.admissible = [](const Vec& s) { return s[0] < 2.0; };
  const Trajectory out = integrate([](double, const Vec& x, Vec& dx) { dx = x; }, Vec::Ones(1), cfg, hooks);
  CHECK(out.status == RunStatus::LeftStateSet);

  const Trajectory thrown = integrate([](double, const Vec&, Vec&) { throw Error("boom"); }, Vec::Ones(1), cfg);
  CHECK(thrown.status == RunStatus::Failed);
  CHECK(thrown.message == "boom");

  RunConfig bad = cfg;
  bad.h = 0.0;
  CHECK_THROWS_AS(integrate([](double, const Vec& x, Vec& dx) { dx = x; }, Vec::Ones(1), bad), ValidationError);
}

TEST_CASE("metrics of a trajectory sitting at the equilibrium") {
  RunConfig cfg;
  cfg.h = 0.01;
  cfg.T = 10.0;
  const Trajectory tr = integrate([](double, const Vec& x, Vec& dx) { dx = Vec::Zero(x.size()); }, Vec::Constant(1, 1.5), cfg);
  const RunMetrics m = run_metrics(tr, scalar_layout(), scalar_game(), Vec::Constant(1, 1.5), 0.1, 1.0);
  CHECK(m.dist_to_vgne <= 1e-14);
  CHECK(m.entry_time == 0.0);
  CHECK(m.max_violation == 0.0);
  CHECK(m.status_label() == "ok");
}

TEST_CASE("tail average removes a sinusoid") {
  const double a = 0.4, w = 5.0, T = 200.0;
  RunConfig cfg;
  cfg.h = 0.01;
  cfg.T = T;
  const Trajectory tr =
      integrate([&](double t, const Vec&, Vec& dx) { dx = Vec::Constant(1, a * w * std::cos(w * t)); }, Vec::Constant(1, 1.0), cfg);
  REQUIRE(0.1 * T > 10 * 2 * M_PI / w);
  const RunMetrics m = run_metrics(tr, scalar_layout(), scalar_game(), Vec::Constant(1, 1.0), 0.5, 2 * M_PI / w);
  CHECK(m.dist_to_vgne < a / 10);
}

TEST_CASE("sustained entry ignores brief visits") {
  const std::vector<double> t{0, 1, 2, 3, 4, 5, 6, 7};
  const std::vector<double> d{5, 0.5, 5, 0.5, 0.4, 0.3, 0.2, 0.1};
  CHECK(sustained_entry_time(t, d, 1.0, 2.0) == 3.0);
  CHECK(sustained_entry_time(t, d, 0.01, 2.0) == kNotConverged);
  const RunMetrics none;
  CHECK_FALSE(none.converged());
}

TEST_CASE("constraint violation is measured on the tail") {
  RunConfig cfg;
  cfg.h = 0.01;
  cfg.T = 10.0;
  const Trajectory tr = integrate([](double, const Vec& x, Vec& dx) { dx = Vec::Zero(x.size()); }, Vec::Constant(1, 2.25), cfg);
  const RunMetrics m = run_metrics(tr, scalar_layout(), scalar_game(), Vec::Constant(1, 2.0), 0.1, 1.0);
  CHECK(m.max_violation == doctest::Approx(0.25));
  CHECK(m.dist_to_vgne == doctest::Approx(0.25));
}

TEST_CASE("sweep grid indexing") {
  SweepGrid g{{{"a", {1, 2, 3}}, {"b", {10, 20}}}};
  CHECK(g.cell_count() == 6);
  CHECK(g.cell(0) == std::vector<double>{1, 10});
  CHECK(g.cell(1) == std::vector<double>{1, 20});
  CHECK(g.cell(5) == std::vector<double>{3, 20});
  CHECK_THROWS_AS(SweepGrid{}.validate(), ValidationError);
  CHECK_THROWS_AS((SweepGrid{{{"a", {}}}}.validate()), ValidationError);
}

TEST_CASE("parallel sweep equals the serial reference and isolates failures") {
  SweepGrid g{{{"a", {1, 2, 3}}, {"b", {0.5, 1.0, 2.0}}}};
  const CellRunner runner = [](const std::vector<double>& c) {
    if (c[0] == 2 && c[1] == 1.0) throw Error("cell failed");
    RunMetrics m;
    m.dist_to_vgne = c[0] * c[1];
    m.entry_time = c[0] + c[1];
    return m;
  };
  const auto par = sweep(g, runner), ser = sweep_serial(g, runner);
  REQUIRE(par.size() == 9);
  std::ostringstream a, b;
  write_sweep_csv(a, g, par);
  write_sweep_csv(b, g, ser);
  CHECK(a.str() == b.str());
  CHECK(par[4].metrics.status == RunStatus::Failed);
  CHECK(par[5].metrics.status == RunStatus::Ok);
  CHECK(a.str().rfind("a,b,dist_to_vgne,entry_time,max_violation,status\n", 0) == 0);

  const auto ms = marginals(g, par);
  CHECK(ms.size() == 6);
  CHECK(ms[0].mean_dist == doctest::Approx((0.5 + 1.0 + 2.0) / 3.0));
  CHECK(nondecreasing({1, 2, 2, 3}));
  CHECK_FALSE(nondecreasing({1, 3, 2}));
  CHECK(nonincreasing({3, 2, 2.05}, 0.1));
}

TEST_CASE("trajectory CSV forms") {
  const Scenario sc = build_scenario(load_config(testing::source_path("scenarios/quadratic2.toml")));
  Scenario s = sc;
  s.run.T = 0.1;
  const RunResult r = run_scenario(s);
  std::ostringstream lf, wf;
  write_trajectory_csv(lf, r.traj, r.layout, {});
  CsvOptions wide;
  wide.wide = true;
  write_trajectory_csv(wf, r.traj, r.layout, wide);
  CHECK(lf.str().rfind("t,agent,var,value\n", 0) == 0);
  CHECK(wf.str().rfind("t,u_1,u_2,lambda_1\n", 0) == 0);
}

TEST_CASE("three-by-three sweep is byte-identical across reruns") {
  const fs::path dir = scratch("sweep3");
  {
    std::ofstream(dir / "grid.toml") << "[grid]\namplitude = [0.1, 0.2, 0.3]\nstep = [0.0025, 0.005, 0.01]\n";
  }
  CliOptions o;
  o.scenario = testing::source_path("scenarios/quadratic2.toml");
  o.grid = (dir / "grid.toml").string();
  o.overrides.mode = "static_zero_order";
  o.overrides.horizon = 5.0;
  std::ostringstream out, err;
  o.out_dir = (dir / "a").string();
  REQUIRE(cmd_sweep(o, out, err) == kExitOk);
  o.out_dir = (dir / "b").string();
  REQUIRE(cmd_sweep(o, out, err) == kExitOk);
  const std::string a = slurp(dir / "a" / "sweep.csv");
  CHECK(a == slurp(dir / "b" / "sweep.csv"));
  CHECK(std::count(a.begin(), a.end(), '\n') == 10);
  CHECK(slurp(dir / "a" / "marginals.csv") == slurp(dir / "b" / "marginals.csv"));
}

TEST_CASE("singleton grid reproduces a single run") {
  const fs::path dir = scratch("singleton");
  {
    std::ofstream(dir / "grid.toml") << "[grid]\namplitude = 0.1\n";
  }
  CliOptions o;
  o.scenario = testing::source_path("scenarios/quadratic2.toml");
  o.overrides.horizon = 20.0;
  o.command = "fixed";
  std::ostringstream out, err;
  o.out_dir = (dir / "run").string();
  REQUIRE(cmd_run(o, out, err) == kExitOk);
  o.grid = (dir / "grid.toml").string();
  o.out_dir = (dir / "sweep").string();
  REQUIRE(cmd_sweep(o, out, err) == kExitOk);
  for (const char* f : {"trajectory.csv", "metrics.json", "manifest.toml"})
    CHECK(slurp(dir / "run" / f) == slurp(dir / "sweep" / f));
}
