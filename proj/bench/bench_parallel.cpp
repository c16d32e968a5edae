// Serial reference vs OpenMP kernel for the three parallel hot spots.
#include "gne/config.hpp"
#include "gne/estimator.hpp"
#include "gne/game.hpp"
#include "gne/log.hpp"
#include "gne/parallel.hpp"
#include "gne/sweep.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <string>

namespace {

gne::Json config(const std::string& name) {
  return gne::load_config(std::string(GNE_SOURCE_DIR) + "/scenarios/" + name + ".toml");
}

template <bool Parallel>
void BM_Monotonicity(benchmark::State& state) {
  const gne::Scenario sc = gne::build_scenario(config("connectivity"));
  const auto pairs = gne::sample_pairs(sc.game(), state.range(0), 3);
  for (auto _ : state) {
    auto est = Parallel ? gne::estimate_monotonicity(sc.game(), pairs) : gne::estimate_monotonicity_serial(sc.game(), pairs);
    benchmark::DoNotOptimize(est);
  }
  state.counters["threads"] = Parallel ? gne::thread_count() : 1;
}

template <bool Parallel>
void BM_PeMetric(benchmark::State& state) {
  std::vector<gne::Vec> c;
  const double dt = 1e-3;
  for (long k = 0; k < state.range(0); ++k) {
    const double t = k * dt;
    gne::Vec v(3);
    v << 1.0, std::sin(5.1 * t), std::cos(7.3 * t);
    c.push_back(v);
  }
  for (auto _ : state) {
    const double a = Parallel ? gne::pe_metric(c, dt, 2.0) : gne::pe_metric_serial(c, dt, 2.0);
    benchmark::DoNotOptimize(a);
  }
  state.counters["threads"] = Parallel ? gne::thread_count() : 1;
}

template <bool Parallel>
void BM_Sweep(benchmark::State& state) {
  gne::Overrides o;
  o.horizon = 2.0;
  const gne::Json base = gne::apply_overrides(config("quadratic_dither"), o);
  const gne::Scenario sc0 = gne::build_scenario(base);
  const auto oracle = gne::oracle_for(sc0, base);
  gne::SweepGrid grid;
  grid.axes.push_back({"amplitude", {1.0, 2.0, 3.0, 4.0}});
  grid.axes.push_back({"K", {50.0, 100.0}});
  const gne::CellRunner run = [&](const std::vector<double>& x) {
    gne::Json cfg = gne::apply_axis(gne::apply_axis(base, "amplitude", x[0]), "K", x[1]);
    const gne::Scenario sc = gne::build_scenario(cfg);
    const gne::RunResult r = gne::run_scenario(sc);
    return gne::run_metrics(r.traj, r.layout, sc.game(), oracle.front().u, sc.eps_ball, sc.hold_time());
  };
  for (auto _ : state) {
    auto rows = Parallel ? gne::sweep(grid, run) : gne::sweep_serial(grid, run);
    benchmark::DoNotOptimize(rows);
  }
  state.counters["threads"] = Parallel ? gne::thread_count() : 1;
}

}  // namespace

BENCHMARK(BM_Monotonicity<false>)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Monotonicity<true>)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PeMetric<false>)->Arg(20000)->Arg(200000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PeMetric<true>)->Arg(20000)->Arg(200000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Sweep<false>)->Unit(benchmark::kMillisecond)->Iterations(1);
BENCHMARK(BM_Sweep<true>)->Unit(benchmark::kMillisecond)->Iterations(1);

int main(int argc, char** argv) {
  gne::configure_threads();
  gne::set_warning_sink([](const std::string&) {});
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
