#include "gne/cli.hpp"

#include "gne/log.hpp"
#include "gne/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;

namespace gne {

namespace {

std::vector<double> std_vec(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os << text;
  if (!os) throw Error("write failed: " + path.string());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

RunOutcome execute_run(const Scenario& sc, const std::vector<OracleSolution>& oracle, bool with_aux) {
  RunOutcome o;
  o.run = run_scenario(sc, with_aux);
  const auto& tr = o.run.traj;
  const size_t ph = sc.phase_at(tr.t_end);
  const OracleSolution& star = oracle.at(ph);
  o.metrics = run_metrics(tr, o.run.layout, sc.phases[ph].game, star.u, sc.eps_ball, sc.hold_time(),
                          sc.tail_fraction);

  Json& j = o.metrics_json;
  j["scenario"] = sc.name;
  j["mode"] = to_string(sc.run.mode);
  j["status"] = o.metrics.status_label();
  if (!o.metrics.message.empty()) j["message"] = o.metrics.message;
  j["t_end"] = tr.t_end;
  j["steps"] = tr.steps_taken;
  j["dist_to_vgne"] = o.metrics.dist_to_vgne;
  j["dist_per_agent"] = std_vec(o.metrics.dist_per_agent);
  j["entry_time"] = number_or_null(o.metrics.entry_time);
  j["converged"] = o.metrics.converged();
  j["eps_ball"] = sc.eps_ball;
  j["max_violation"] = o.metrics.max_violation;
  j["u_tail_mean"] = std_vec(o.metrics.u_tail_mean);
  j["u_star"] = std_vec(star.u);
  j["lambda_star"] = std_vec(star.lambda);
  j["oracle_method"] = star.method;
  j["oracle_residual"] = star.residual;
  if (tr.ok()) {
    const Vec& s = tr.final_state();
    j["kkt_residual_final"] = kkt_residual(sc.phases[ph].game, s.head(o.run.layout.m),
                                           s.segment(o.run.layout.m, o.run.layout.q));
    if (!o.run.layout.est_offset.empty())
      j["tail_gradient_error"] = tail_gradient_error(o.run, sc, sc.tail_fraction);
  }
  if (sc.kind == "windfarm" && tr.ok()) {
    o.power = windfarm_power_summary(o.run, sc, oracle, sc.tail_fraction);
    Json arr = Json::array();
    for (const auto& p : o.power)
      arr.push_back({{"t_begin", p.t_begin}, {"t_end", p.t_end}, {"algorithm", p.algorithm},
                     {"greedy", p.greedy}, {"oracle", p.oracle}});
    j["power"] = arr;
    j["final_power"] = o.power.back().algorithm;
  }
  return o;
}

void write_power_csv(std::ostream& os, const std::vector<IntervalPower>& power) {
  os << "interval,t_begin,t_end,p_algorithm,p_greedy,p_oracle,gap_closure\n";
  char buf[256];
  for (size_t k = 0; k < power.size(); ++k) {
    const auto& p = power[k];
    const double gap = p.oracle - p.greedy;
    const double closure = gap > 0.0 ? (p.algorithm - p.greedy) / gap : 1.0;
    std::snprintf(buf, sizeof buf, "%zu,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n", k + 1, p.t_begin, p.t_end,
                  p.algorithm, p.greedy, p.oracle, closure);
    os << buf;
  }
}

void write_run_artifacts(const std::string& dir, const RunOutcome& out, const Json& resolved,
                         const std::string& command, const CsvOptions& csv) {
  fs::create_directories(dir);
  const fs::path d(dir);
  {
    std::ofstream os(d / "trajectory.csv", std::ios::binary);
    if (!os) throw Error("cannot write " + (d / "trajectory.csv").string());
    write_trajectory_csv(os, out.run.traj, out.run.layout, csv);
  }
  write_file(d / "metrics.json", out.metrics_json.dump(2) + "\n");
  write_file(d / "manifest.toml", manifest_toml(resolved, command));
  if (!out.power.empty()) {
    std::ostringstream os;
    write_power_csv(os, out.power);
    write_file(d / "power_summary.csv", os.str());
  }
}

std::string to_string(CheckLevel level) {
  switch (level) {
    case CheckLevel::Pass: return "pass";
    case CheckLevel::Warn: return "warn";
    case CheckLevel::Fail: return "fail";
  }
  return "?";
}

namespace {

CheckResult check_monotonicity(const GameSpec& g) {
  CheckResult c{"monotonicity", CheckLevel::Pass, ""};
  const auto est = estimate_monotonicity(g, sample_pairs(g, 100, 11));
  c.detail = "mu_hat=" + fmt(est.mu_hat) + " ell_hat=" + fmt(est.ell_hat) + " pairs=" +
             std::to_string(est.pairs_used);
  if (est.assumption_violated) c.level = CheckLevel::Warn;
  return c;
}

CheckResult check_certificate(const GameSpec& g, const StepSizes& steps) {
  CheckResult c{"step_size_certificate", CheckLevel::Pass, ""};
  const auto rep = step_size_certificate_empirical(g, steps, 100, 11);
  c.level = rep.pass ? CheckLevel::Pass : CheckLevel::Fail;
  c.detail = "beta=" + fmt(rep.beta) + " sigma_min=" + fmt(rep.sigma_min) + " sigma_max=" + fmt(rep.sigma_max) +
             " (empirical mu, ell)";
  if (!rep.note.empty()) c.detail += "; " + rep.note;
  return c;
}

CheckResult check_steady_state(const Scenario& sc) {
  CheckResult c{"steady_state_residual", CheckLevel::Pass, ""};
  if (!sc.plant) {
    c.detail = "static agents, no plant";
    return c;
  }
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) worst = std::max(worst, steady_state_residual(*sc.plant, sample_omega(sc.game(), rng)));
  c.detail = "max ||f(pi(u), u)|| over 50 samples = " + fmt(worst);
  if (!(worst <= 1e-9)) c.level = CheckLevel::Fail;
  return c;
}

CheckResult check_pe(const Scenario& base) {
  CheckResult c{"pe_metric", CheckLevel::Pass, ""};
  Scenario sc = base;
  if (sc.run.mode == Mode::FullInfo) sc.run.mode = Mode::StaticZeroOrder;
  // Learning loop opened: u moves with the dither only.
  sc.steps = StepSizes::uniform(sc.game().n_agents(), 1e-12, 1e-12);
  const double window = sc.dither.amplitudes.size() ? sc.dither.slowest_period() : 1.0;
  sc.run.T = std::min(base.run.T, std::max(10.0 * window, 100.0 * sc.run.h));
  sc.run.sample_stride = 1;
  const RunResult r = run_scenario(sc);
  if (!r.traj.ok()) {
    c.level = CheckLevel::Fail;
    c.detail = "pilot run failed: " + r.traj.message;
    return c;
  }
  // The final sample may sit off the uniform grid; drop it in that case.
  size_t n = r.traj.t.size();
  if (n >= 2 && std::abs((r.traj.t[n - 1] - r.traj.t[n - 2]) - sc.run.h) > 1e-9 * sc.run.h) --n;
  double alpha = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < r.layout.n_agents(); ++i) {
    std::vector<Vec> cs;
    cs.reserve(n);
    for (size_t k = 0; k < n; ++k) cs.emplace_back(r.layout.c(r.traj.states[k], i));
    alpha = std::min(alpha, pe_metric(cs, sc.run.h, window));
  }
  c.detail = "alpha=" + fmt(alpha) + " window=" + fmt(window) + " open-loop pilot T=" + fmt(sc.run.T);
  if (!(alpha > 1e-8 * window)) c.level = CheckLevel::Warn;
  return c;
}

CheckResult check_lemma1(const GameSpec& g, const StepSizes& steps, const OracleSolution& star) {
  CheckResult c{"lemma1_probe", CheckLevel::Pass, ""};
  const Preconditioner p = preconditioner_matrices(g, steps);
  if (p.Phi.llt().info() != Eigen::Success) {
    c.level = CheckLevel::Warn;
    c.detail = "not applicable: Phi is not positive definite";
    return c;
  }
  std::mt19937_64 rng(13);
  const double lmax = 2.0 * (star.lambda.size() ? star.lambda.maxCoeff() : 0.0) + 1.0;
  std::uniform_real_distribution<double> U(0.0, lmax);
  const PrimalDualState fixed{star.u, star.lambda};
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 1000; ++k) {
    PrimalDualState x{sample_omega(g, rng), Vec(g.q())};
    for (Index r = 0; r < g.q(); ++r) x.lambda[r] = U(rng);
    worst = std::min(worst, lemma1_probe(g, steps, x, fixed, ProbeMetric::Phi));
  }
  c.detail = "min slack over 1000 points = " + fmt(worst);
  if (!(worst >= -1e-9)) c.level = CheckLevel::Fail;
  return c;
}

CheckResult check_identity(const GameSpec& g, const StepSizes& steps) {
  CheckResult c{"matrix_identity", CheckLevel::Pass, ""};
  const Preconditioner p = preconditioner_matrices(g, steps);
  const double gap = (p.GammaBlockInv - p.Ahat - p.Phi - p.Psi).cwiseAbs().maxCoeff();
  c.detail = "max gap=" + fmt(gap);
  if (!(gap <= 1e-12)) c.level = CheckLevel::Fail;
  if (!std::isfinite(p.sigma_max)) {
    c.detail += "; spectral bounds not applicable (min gamma^-1 <= ||A||)";
    return c;
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(p.Phi.inverse(), Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
  c.detail += " spec(Phi^-1)=[" + fmt(lo) + ", " + fmt(hi) + "] bounds=[" + fmt(p.sigma_min) + ", " +
              fmt(p.sigma_max) + "]";
  if (lo < p.sigma_min - 1e-12 || hi > p.sigma_max + 1e-12) c.level = CheckLevel::Fail;
  return c;
}

template <class F>
CheckResult guarded(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {name, CheckLevel::Fail, e.what()};
  }
}

}  // namespace

std::vector<CheckResult> verify_scenario(const Scenario& sc, const Json&, const std::vector<OracleSolution>& oracle) {
  std::vector<CheckResult> out;
  for (size_t k = 0; k < sc.phases.size(); ++k) {
    const GameSpec& g = sc.phases[k].game;
    const std::string tag = sc.phases.size() > 1 ? " [phase " + std::to_string(k + 1) + "]" : "";
    auto add = [&](CheckResult c) {
      c.name += tag;
      out.push_back(std::move(c));
    };
    add(guarded("monotonicity", [&] { return check_monotonicity(g); }));
    add(guarded("step_size_certificate", [&] { return check_certificate(g, sc.steps); }));
    add(guarded("lemma1_probe", [&] { return check_lemma1(g, sc.steps, oracle.at(k)); }));
    add(guarded("matrix_identity", [&] { return check_identity(g, sc.steps); }));
  }
  out.push_back(guarded("steady_state_residual", [&] { return check_steady_state(sc); }));
  out.push_back(guarded("pe_metric", [&] { return check_pe(sc); }));
  return out;
}

// ---------------------------------------------------------------- commands

namespace {

struct Loaded {
  Json resolved;
  Scenario sc;
};

Loaded load(const CliOptions& o) {
  Json resolved = load_config(o.scenario);
  if (!o.overrides.empty()) resolved = apply_overrides(resolved, o.overrides);
  Scenario sc = build_scenario(resolved);
  return {std::move(resolved), std::move(sc)};
}

CsvOptions csv_options(const CliOptions& o) {
  CsvOptions c;
  c.wide = o.wide;
  c.trace_estimator = o.trace_estimator;
  c.trace_messages = o.trace_messages;
  return c;
}

// Maps exceptions to exit codes; `stage` names where a runtime failure happened.
template <class F>
int guarded_command(std::ostream& err, std::string& stage, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << stage << " failed: " << e.what() << '\n';
    return kExitRuntime;
  }
}

std::string cache_path(const CliOptions& o) { return (fs::path(o.out_dir) / "oracle_cache.json").string(); }

}  // namespace

int cmd_run(const CliOptions& o, std::ostream& out, std::ostream& err) {
  std::string stage = "load";
  return guarded_command(err, stage, [&] {
    Loaded L = load(o);
    stage = "oracle";
    fs::create_directories(o.out_dir);
    const auto oracle = oracle_for(L.sc, L.resolved, cache_path(o));
    stage = "integrate";
    const RunOutcome res = execute_run(L.sc, oracle, o.trace_estimator || o.trace_messages);
    stage = "write";
    write_run_artifacts(o.out_dir, res, L.resolved, o.command, csv_options(o));
    out << "dist_to_vgne=" << fmt(res.metrics.dist_to_vgne) << " entry_time=" << fmt(res.metrics.entry_time)
        << " max_violation=" << fmt(res.metrics.max_violation) << " status=" << res.metrics.status_label()
        << '\n';
    for (const auto& p : res.power)
      out << "interval t=[" << fmt(p.t_begin) << ", " << fmt(p.t_end) << ") power algorithm=" << fmt(p.algorithm)
          << " greedy=" << fmt(p.greedy) << " oracle=" << fmt(p.oracle) << '\n';
    if (!res.run.traj.ok()) {
      err << "integrate failed: " << res.run.traj.message << '\n';
      return static_cast<int>(kExitRuntime);
    }
    return static_cast<int>(kExitOk);
  });
}

int cmd_sweep(const CliOptions& o, std::ostream& out, std::ostream& err) {
  std::string stage = "load";
  return guarded_command(err, stage, [&] {
    Loaded L = load(o);
    const SweepGrid grid = load_grid(o.grid);
    // Validate every cell before running anything.
    std::vector<Json> cells;
    for (size_t k = 0; k < grid.cell_count(); ++k) {
      const auto coords = grid.cell(k);
      Json j = L.resolved;
      for (size_t a = 0; a < coords.size(); ++a) j = apply_axis(j, grid.axes[a].name, coords[a]);
      build_scenario(j).validate();
      cells.push_back(std::move(j));
    }
    stage = "oracle";
    fs::create_directories(o.out_dir);
    const std::string base_hash = game_hash(L.resolved);
    std::vector<std::vector<OracleSolution>> oracles;
    for (const auto& j : cells)
      oracles.push_back(game_hash(j) == base_hash ? oracle_for(L.sc, L.resolved, cache_path(o))
                                                  : oracle_for(build_scenario(j), j, cache_path(o)));
    stage = "sweep";
    configure_threads();
    const bool artifacts = o.cell_artifacts || grid.cell_count() == 1;
    const CsvOptions csv = csv_options(o);
    std::vector<std::vector<IntervalPower>> powers(cells.size());
    auto runner = [&](size_t k) {
      const Scenario sc = build_scenario(cells[k]);
      RunOutcome res = execute_run(sc, oracles[k], o.trace_estimator || o.trace_messages);
      if (artifacts) {
        char name[32];
        std::snprintf(name, sizeof name, "cell_%04zu", k);
        const std::string dir = grid.cell_count() == 1 ? o.out_dir : (fs::path(o.out_dir) / name).string();
        write_run_artifacts(dir, res, cells[k], o.command, csv);
      }
      powers[k] = res.power;
      return res.metrics;
    };
    // The grid coordinates identify the cell; map them back to its index.
    std::vector<SweepRow> rows = sweep(grid, [&](const std::vector<double>& coords) {
      for (size_t k = 0; k < cells.size(); ++k)
        if (grid.cell(k) == coords) return runner(k);
      throw Error("sweep: unknown cell");
    });
    stage = "write";
    {
      std::ostringstream os;
      write_sweep_csv(os, grid, rows);
      write_file(fs::path(o.out_dir) / "sweep.csv", os.str());
    }
    {
      std::ostringstream os;
      write_marginals_csv(os, marginals(grid, rows));
      write_file(fs::path(o.out_dir) / "marginals.csv", os.str());
    }
    if (L.sc.kind == "windfarm") {
      std::ostringstream os;
      os << "cell,interval,t_begin,t_end,p_algorithm,p_greedy,p_oracle,gap_closure\n";
      for (size_t k = 0; k < powers.size(); ++k) {
        std::ostringstream one;
        write_power_csv(one, powers[k]);
        std::string line;
        std::istringstream in(one.str());
        std::getline(in, line);
        while (std::getline(in, line)) os << k << ',' << line << '\n';
      }
      write_file(fs::path(o.out_dir) / "power_summary.csv", os.str());
    }
    if (grid.cell_count() > 1) write_file(fs::path(o.out_dir) / "manifest.toml", manifest_toml(L.resolved, o.command));
    size_t failed = 0;
    for (const auto& r : rows)
      if (r.metrics.status != RunStatus::Ok) ++failed;
    out << rows.size() << " cells, " << failed << " failed, threads=" << thread_count() << '\n';
    return static_cast<int>(failed ? kExitRuntime : kExitOk);
  });
}

int cmd_verify(const CliOptions& o, std::ostream& out, std::ostream& err) {
  std::string stage = "load";
  return guarded_command(err, stage, [&] {
    Loaded L = load(o);
    stage = "oracle";
    const auto oracle = oracle_for(L.sc, L.resolved, "");
    stage = "verify";
    for (const auto& c : verify_scenario(L.sc, L.resolved, oracle))
      out << to_string(c.level) << "  " << c.name << "  " << c.detail << '\n';
    return static_cast<int>(kExitOk);
  });
}

}  // namespace gne
