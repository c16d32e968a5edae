// One PASS/FAIL line per acceptance criterion. `acceptance` runs all of them,
// `acceptance --criterion N` a single one; the exit code is nonzero on any FAIL.
#include "gne/cli.hpp"
#include "gne/config.hpp"
#include "gne/log.hpp"
#include "gne/oracle.hpp"
#include "gne/parallel.hpp"
#include "gne/projection.hpp"

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace gne;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[FAILED: " << what << "] ";
    }
  }
};

std::string source_path(const std::string& rel) { return std::string(GNE_SOURCE_DIR) + "/" + rel; }

Json scenario_config(const std::string& name) { return load_config(source_path("scenarios/" + name + ".toml")); }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1: full-information flow on the shared-budget game from random feasible starts.
void criterion1(Outcome& out) {
  const Json base = scenario_config("quadratic2");
  const Scenario probe = build_scenario(base);
  const GameSpec& g = probe.game();
  const CertificateReport cert = step_size_certificate(g, probe.steps, 2.0, 2.0);
  out.require(cert.pass, "step_size_certificate");
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> U(-10.0, 10.0);
  const Vec star = Vec::Constant(2, 0.5);
  double worst_dist = 0.0, worst_kkt = 0.0, worst_time = 0.0;
  for (int k = 0; k < 10; ++k) {
    Vec u0(2);
    do {
      u0 << U(rng), U(rng);
    } while (u0.sum() > 1.0);
    Json cfg = base;
    cfg["initial"]["u0"] = {u0[0], u0[1]};
    const Scenario sc = build_scenario(resolve_config(cfg));
    const auto t0 = std::chrono::steady_clock::now();
    const RunResult r = run_scenario(sc);
    const double took = seconds_since(t0);
    out.require(r.traj.ok(), "run " + std::to_string(k) + " " + r.traj.message);
    if (!r.traj.ok()) continue;
    const Vec& s = r.traj.final_state();
    worst_dist = std::max(worst_dist, (s.head(2) - star).norm());
    worst_kkt = std::max(worst_kkt, kkt_residual(g, s.head(2), s.tail(1)));
    worst_time = std::max(worst_time, took);
  }
  out.require(worst_dist < 1e-4, "dist");
  out.require(worst_kkt < 1e-6, "kkt");
  out.require(worst_time < 5.0, "runtime");
  out.detail << "10 starts: max |u(T)-u*|=" << fmt(worst_dist) << " max kkt=" << fmt(worst_kkt)
             << " max runtime=" << fmt(worst_time) << "s certificate beta*sigma_min=" << fmt(cert.beta * cert.sigma_min)
             << " >= sigma_max^2=" << fmt(cert.sigma_max * cert.sigma_max);
}

QuadraticGame random_game(std::mt19937_64& rng, int agents, int rows) {
  std::normal_distribution<double> N(0.0, 1.0);
  QuadraticGame q;
  q.dims.assign(static_cast<size_t>(agents), 1);
  Mat R(agents, agents);
  for (int i = 0; i < agents; ++i)
    for (int j = 0; j < agents; ++j) R(i, j) = N(rng);
  q.M = R * R.transpose() + Mat::Identity(agents, agents);
  q.q = Vec(agents);
  for (int i = 0; i < agents; ++i) q.q[i] = N(rng);
  q.constant = Vec::Zero(agents);
  q.lower = Vec::Constant(agents, -5.0);
  q.upper = Vec::Constant(agents, 5.0);
  q.A = Mat(rows, agents);
  for (int r = 0; r < rows; ++r)
    for (int j = 0; j < agents; ++j) q.A(r, j) = N(rng);
  q.b = Vec::Constant(rows, 1.0);
  return q;
}

// 2: preconditioner identity and bounds, firm nonexpansiveness probes.
void criterion2(Outcome& out) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> logg(-3.0, 0.5);
  double worst_gap = 0.0;
  int applicable = 0, bound_violations = 0, inapplicable = 0;
  for (int k = 0; k < 300; ++k) {
    const QuadraticGame q = random_game(rng, 2 + k % 4, 1 + k % 3);
    const GameSpec g = q.to_game();
    StepSizes st;
    st.gamma = Vec(g.n_agents());
    for (Index i = 0; i < g.n_agents(); ++i) st.gamma[i] = std::pow(10.0, logg(rng));
    st.gamma0 = std::pow(10.0, logg(rng));
    const Preconditioner p = preconditioner_matrices(g, st);
    worst_gap = std::max(worst_gap, (p.GammaBlockInv - p.Ahat - p.Phi - p.Psi).cwiseAbs().maxCoeff());
    if (!std::isfinite(p.sigma_max)) {
      ++inapplicable;
      continue;
    }
    ++applicable;
    Eigen::SelfAdjointEigenSolver<Mat> eig(p.Phi.inverse(), Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
    if (lo < p.sigma_min * (1.0 - 1e-12) || hi > p.sigma_max * (1.0 + 1e-12)) ++bound_violations;
  }
  out.require(worst_gap <= 1e-12, "identity");
  out.require(bound_violations == 0 && applicable > 0, "spectral bounds");

  double worst_slack = std::numeric_limits<double>::infinity();
  for (const char* name : {"quadratic2", "connectivity"}) {
    const Json cfg = scenario_config(name);
    const Scenario sc = build_scenario(cfg);
    const GameSpec& g = sc.game();
    const OracleSolution star = solve_vgne(g, sc.quadratic ? &*sc.quadratic : nullptr);
    std::mt19937_64 r2(5);
    std::uniform_real_distribution<double> L(0.0, 2.0 * (star.lambda.size() ? star.lambda.maxCoeff() : 0.0) + 1.0);
    for (int k = 0; k < 1000; ++k) {
      PrimalDualState x{sample_omega(g, r2), Vec(g.q())};
      for (Index i = 0; i < g.q(); ++i) x.lambda[i] = L(r2);
      worst_slack = std::min(worst_slack, lemma1_probe(g, sc.steps, x, {star.u, star.lambda}, ProbeMetric::Phi));
    }
  }
  out.require(worst_slack >= -1e-9, "lemma1 slack");

  std::normal_distribution<double> N(0.0, 3.0);
  auto rvec = [&](Index n) {
    Vec v(n);
    for (Index i = 0; i < n; ++i) v[i] = N(rng);
    return v;
  };
  Mat C(3, 3);
  C << 1, 1, 0, -1, 2, 1, 0, -1, 1;
  const std::vector<ConvexSet> sets = {ConvexSet::box(Vec::Constant(3, -1.0), Vec::Constant(3, 2.0)),
                                       ConvexSet::ball(Vec::Constant(3, 0.5), 1.5),
                                       ConvexSet::halfspaces(C, Vec::Constant(3, 1.0))};
  double worst_fne = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < 1000; ++k) {
    const Vec x = rvec(3), y = rvec(3);
    for (const auto& S : sets) {
      const Vec px = project(S, x), py = project(S, y);
      worst_fne = std::max(worst_fne, (px - py).squaredNorm() - (px - py).dot(x - y));
    }
    const Vec px = project_nonneg(x), py = project_nonneg(y);
    worst_fne = std::max(worst_fne, (px - py).squaredNorm() - (px - py).dot(x - y));
  }
  out.require(worst_fne <= 1e-9, "firm nonexpansiveness");
  out.detail << "identity gap=" << fmt(worst_gap) << " bounds ok on " << applicable << " instances ("
             << inapplicable << " fail the precondition) lemma1 min slack=" << fmt(worst_slack)
             << " fne max excess=" << fmt(worst_fne);
}

// 3: estimator consistency on the dithered quadratic game.
void criterion3(Outcome& out) {
  const Json base = scenario_config("quadratic_dither");
  double err[2] = {0.0, 0.0};
  bool spd = true, in_theta = true;
  for (int k = 0; k < 2; ++k) {
    const Json cfg = apply_axis(base, "K", k == 0 ? 100.0 : 200.0);
    const Scenario sc = build_scenario(cfg);
    const RunResult r = run_scenario(sc);
    out.require(r.traj.ok(), "run " + r.traj.message);
    if (!r.traj.ok()) return;
    err[k] = tail_gradient_error(r, sc, sc.tail_fraction);
    const auto& L = r.layout;
    for (const Vec& s : r.traj.states)
      for (Index i = 0; i < L.n_agents(); ++i) {
        const Mat S = L.Sigma(s, i);
        if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-12 * S.cwiseAbs().maxCoeff()) spd = false;
        if (S.llt().info() != Eigen::Success) spd = false;
        const Index p = L.est_p[static_cast<size_t>(i)];
        const Vec th = s.segment(L.est_offset[static_cast<size_t>(i)] + 2, p);
        if (!sc.tuning[static_cast<size_t>(i)].Theta.contains(th, 1e-12)) in_theta = false;
      }
  }
  out.require(err[0] < 0.05, "error at K=100");
  out.require(err[1] < err[0], "shrinks with K");
  out.require(spd, "Sigma SPD");
  out.require(in_theta, "theta in Theta");
  out.detail << "tail gradient error K=100: " << fmt(err[0]) << ", K=200: " << fmt(err[1])
             << " Sigma SPD=" << spd << " theta in Theta=" << in_theta;
}

// 4: neighbourhood trends over the dither amplitude.
void criterion4(Outcome& out) {
  const Json base = scenario_config("connectivity_static");
  const Scenario sc0 = build_scenario(base);
  const auto oracle = oracle_for(sc0, base);
  SweepGrid grid;
  grid.axes.push_back({"amplitude", {0.1, 0.3, 0.49}});
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = sweep(grid, [&](const std::vector<double>& c) {
    const Scenario sc = build_scenario(apply_axis(base, "amplitude", c[0]));
    return execute_run(sc, oracle, false).metrics;
  });
  const double took = seconds_since(t0);
  std::vector<double> dist, entry;
  for (size_t k = 0; k < rows.size(); ++k) {
    const RunMetrics& m = rows[k].metrics;
    out.require(m.status == RunStatus::Ok, "run " + m.message);
    dist.push_back(m.dist_to_vgne);
    entry.push_back(m.entry_time);
    out.require(m.dist_to_vgne < 3.0 * grid.axes[0].values[k], "dist < 3a at a=" + fmt(grid.axes[0].values[k]));
    out.detail << "a=" << grid.axes[0].values[k] << ": dist=" << fmt(m.dist_to_vgne) << " entry=" << fmt(m.entry_time) << "; ";
  }
  out.require(nondecreasing(dist) && dist.front() < dist.back(), "dist increasing");
  out.require(nonincreasing(entry), "entry non-increasing");
  out.require(took < 600.0, "runtime");
  out.detail << "sweep " << fmt(took) << "s";
}

// Agents with some component whose tail mean sits within `margin` of a box face.
std::vector<bool> tail_active(const GameSpec& g, const Vec& u_tail, double margin) {
  std::vector<bool> out;
  for (Index i = 0; i < g.n_agents(); ++i) {
    const Box& box = g.local_sets[static_cast<size_t>(i)].as_box();
    const Vec ui = u_tail.segment(g.offset(i), g.dims[static_cast<size_t>(i)]);
    const double gap = ((ui - box.lower).cwiseMin(box.upper - ui)).minCoeff();
    out.push_back(gap <= margin);
  }
  return out;
}

// 5: dynamic learning on the connectivity scenario.
void criterion5(Outcome& out) {
  const Json cfg = scenario_config("connectivity");
  const Scenario sc = build_scenario(cfg);
  const auto oracle = oracle_for(sc, cfg);
  const RunOutcome r = execute_run(sc, oracle, false);
  const RunMetrics& m = r.metrics;
  out.require(m.status == RunStatus::Ok, "run " + m.message);
  if (m.status != RunStatus::Ok) return;
  out.require(m.dist_per_agent.maxCoeff() < 1.5, "per-agent distance");
  const GameSpec& g = sc.game();
  const auto& tr = r.run.traj;
  const double t_tail = tr.t_end * (1.0 - sc.tail_fraction);
  double worst_ratio = 0.0;
  for (size_t k = 0; k < tr.t.size(); ++k) {
    if (tr.t[k] < t_tail) continue;
    const Vec v = g.A * tr.states[k].head(r.run.layout.m) - g.b;
    for (Index row = 0; row < g.q(); ++row) worst_ratio = std::max(worst_ratio, std::max(v[row], 0.0) / g.b[row]);
  }
  out.require(worst_ratio < 0.05, "coupling violation");
  const double amplitude = sc.dither.amplitudes.size() ? sc.dither.amplitudes.maxCoeff() : 0.0;
  const auto active = tail_active(g, m.u_tail_mean, amplitude);
  out.require(active.size() >= 3 && active[0] && active[2], "agents 1 and 3 tail-active");
  out.detail << "per-agent dist=[";
  for (Index i = 0; i < m.dist_per_agent.size(); ++i) out.detail << (i ? ", " : "") << fmt(m.dist_per_agent[i]);
  out.detail << "] max tail violation/b=" << fmt(worst_ratio) << " tail-active agents:";
  for (size_t i = 0; i < active.size(); ++i)
    if (active[i]) out.detail << ' ' << i + 1;
}

// 6: wind farm power ordering and gap closure per wind interval.
void criterion6(Outcome& out) {
  const Json cfg = scenario_config("windfarm");
  const Scenario sc = build_scenario(cfg);
  const auto oracle = oracle_for(sc, cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const RunOutcome r = execute_run(sc, oracle, false);
  const double took = seconds_since(t0);
  out.require(r.metrics.status == RunStatus::Ok, "run " + r.metrics.message);
  out.require(r.power.size() == 3, "three intervals");
  for (size_t k = 0; k < r.power.size(); ++k) {
    const auto& p = r.power[k];
    const double closure = (p.algorithm - p.greedy) / (p.oracle - p.greedy);
    const std::string tag = "interval " + std::to_string(k + 1);
    out.require(p.greedy <= p.algorithm && p.algorithm <= p.oracle, tag + " ordering");
    out.require(closure >= 0.5, tag + " gap closure");
    out.detail << tag << ": greedy=" << fmt(p.greedy) << " alg=" << fmt(p.algorithm) << " oracle=" << fmt(p.oracle)
               << " closure=" << fmt(closure) << "; ";
  }
  out.require(took < 900.0, "runtime");
  out.detail << "run " << fmt(took) << "s";
}

// 7: zero dither plus the true gradient reproduces the full-information flow.
void criterion7(Outcome& out) {
  for (const char* name : {"quadratic2", "connectivity_static"}) {
    Overrides zo;
    zo.mode = "static_zero_order";
    zo.amplitude = 0.0;
    const Json zcfg = apply_overrides(scenario_config(name), zo);
    Overrides fo;
    fo.mode = "full_info";
    const Json fcfg = apply_overrides(scenario_config(name), fo);
    const Scenario zsc = build_scenario(zcfg), fsc = build_scenario(fcfg);

    ClosedLoop loop(zsc);
    loop.use_oracle_gradient(true);
    StepHooks hooks;
    hooks.post_step = [&loop](Vec& s) { loop.post_step(s); };
    const Trajectory zt = integrate([&loop](double t, const Vec& s, Vec& ds) { loop.rhs(t, s, ds); },
                                    loop.initial_state(), zsc.run, hooks, zsc.tail_fraction);
    const RunResult ft = run_scenario(fsc);
    out.require(zt.ok() && ft.traj.ok(), std::string(name) + " runs");
    out.require(zt.t == ft.traj.t, std::string(name) + " sample times");
    if (!zt.ok() || !ft.traj.ok() || zt.t != ft.traj.t) continue;
    const Index m = loop.layout().m, q = loop.layout().q;
    double worst = 0.0;
    for (size_t k = 0; k < zt.t.size(); ++k)
      worst = std::max(worst, (zt.states[k].head(m + q) - ft.traj.states[k].head(m + q)).cwiseAbs().maxCoeff());
    out.require(worst <= 1e-9, std::string(name) + " match");
    out.detail << name << ": max |diff| over " << zt.t.size() << " samples to T=" << fmt(zt.t_end) << " = " << fmt(worst) << "; ";
  }
}

// 8: byte-identical reruns and step-halving self-convergence.
void criterion8(Outcome& out) {
  struct Case {
    const char* name;
    double horizon;  // <= 0: scenario horizon
  };
  const Case cases[] = {{"quadratic2", 0.0}, {"quadratic_dither", 0.0}, {"connectivity_static", 0.0},
                        {"connectivity", 0.0}, {"windfarm", 2000.0}};
  for (const Case& c : cases) {
    Json cfg = scenario_config(c.name);
    if (c.horizon > 0.0) {
      Overrides o;
      o.horizon = c.horizon;
      cfg = apply_overrides(cfg, o);
    }
    const Scenario sc = build_scenario(cfg);
    const RunResult a = run_scenario(sc), b = run_scenario(sc);
    std::ostringstream ca, cb;
    write_trajectory_csv(ca, a.traj, a.layout, {});
    write_trajectory_csv(cb, b.traj, b.layout, {});
    out.require(a.traj.ok() && ca.str() == cb.str(), std::string(c.name) + " rerun identical");

    const Json halved = apply_axis(cfg, "step", sc.run.h / 2.0);
    const RunResult h2 = run_scenario(build_scenario(halved));
    out.require(h2.traj.ok(), std::string(c.name) + " halved run");
    if (!a.traj.ok() || !h2.traj.ok()) continue;
    const Vec& s1 = a.traj.final_state();
    const Vec& s2 = h2.traj.final_state();
    const double rel = (s1 - s2).norm() / s2.norm();
    out.require(rel < 1e-4, std::string(c.name) + " step halving");
    out.detail << c.name << " (T=" << fmt(a.traj.t_end) << ", h=" << sc.run.h << "): rel change " << fmt(rel) << "; ";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  int only = 0;
  app.add_option("--criterion", only, "Run a single criterion (1-8)")->check(CLI::Range(1, 8));
  CLI11_PARSE(app, argc, argv);
  configure_threads();
  set_warning_sink([](const std::string&) {});

  const std::vector<std::function<void(Outcome&)>> all = {criterion1, criterion2, criterion3, criterion4,
                                                          criterion5, criterion6, criterion7, criterion8};
  bool ok = true;
  for (int n = 1; n <= 8; ++n) {
    if (only && n != only) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      all[static_cast<size_t>(n - 1)](o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "[exception: " << e.what() << "]";
    }
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail.str() << " ("
              << fmt(seconds_since(t0)) << "s)" << std::endl;
    ok = ok && o.pass;
  }
  return ok ? 0 : 1;
}
