#include "gne/harness.hpp"

#include "gne/log.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace gne {

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::FullInfo: return "full_info";
    case Mode::StaticZeroOrder: return "static_zero_order";
    case Mode::DynamicZeroOrder: return "dynamic_zero_order";
  }
  return "?";
}

Mode parse_mode(const std::string& name) {
  if (name == "full_info") return Mode::FullInfo;
  if (name == "static_zero_order") return Mode::StaticZeroOrder;
  if (name == "dynamic_zero_order") return Mode::DynamicZeroOrder;
  throw ValidationError("unknown mode '" + name +
                        "' (expected full_info, static_zero_order or dynamic_zero_order)");
}

std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Ok: return "ok";
    case RunStatus::NonFinite: return "non_finite";
    case RunStatus::LeftStateSet: return "left_state_set";
    case RunStatus::Failed: return "failed";
  }
  return "?";
}

void RunConfig::validate(double epsilon) const {
  if (!(h > 0.0)) throw ValidationError("run: step must be positive");
  if (!(T >= h)) throw ValidationError("run: horizon must be at least one step");
  if (sample_stride < 1) throw ValidationError("run: sample_stride must be >= 1");
  if (mode == Mode::DynamicZeroOrder && epsilon > 0.0 && h > epsilon / 10.0) {
    std::ostringstream os;
    os << "step " << h << " exceeds epsilon/10 = " << epsilon / 10.0
       << "; the fast subsystem may be under-resolved";
    log_warning(os.str());
  }
}

long RunConfig::steps() const { return static_cast<long>(std::llround(T / h)); }

Trajectory integrate(const RhsFn& rhs, const Vec& s0, const RunConfig& cfg, const StepHooks& hooks,
                     double tail_fraction) {
  cfg.validate();
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0))
    throw ValidationError("tail fraction must lie in (0, 1]");
  const Index n = s0.size();
  const long steps = cfg.steps();
  const long tail_step = static_cast<long>(std::floor(static_cast<double>(steps) * (1.0 - tail_fraction)));
  const double h = cfg.h;

  Trajectory traj;
  traj.tail_begin = static_cast<double>(tail_step) * h;
  traj.tail_mean = Vec::Zero(n);

  Vec s = s0, k1(n), k2(n), k3(n), k4(n), tmp(n), prev(n);
  auto record = [&](double t) {
    traj.t.push_back(t);
    traj.states.push_back(s);
    if (hooks.aux) traj.aux.push_back(hooks.aux(t, s));
  };

  if (!s.allFinite()) {
    traj.status = RunStatus::NonFinite;
    traj.message = "non-finite initial state";
    return traj;
  }
  try {
    record(0.0);
    for (long k = 0; k < steps; ++k) {
      const double t = static_cast<double>(k) * h;
      prev = s;
      rhs(t, s, k1);
      tmp = s + 0.5 * h * k1;
      rhs(t + 0.5 * h, tmp, k2);
      tmp = s + 0.5 * h * k2;
      rhs(t + 0.5 * h, tmp, k3);
      tmp = s + h * k3;
      rhs(t + h, tmp, k4);
      s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (hooks.post_step) hooks.post_step(s);
      const double t1 = static_cast<double>(k + 1) * h;
      traj.steps_taken = k + 1;
      traj.t_end = t1;
      if (!s.allFinite()) {
        s = prev;
        traj.status = RunStatus::NonFinite;
        traj.message = "non-finite state at t = " + std::to_string(t1);
        traj.t_end = t;
        record(t);
        return traj;
      }
      if (k >= tail_step) traj.tail_mean += 0.5 * h * (prev + s);
      if (hooks.admissible && !hooks.admissible(s)) {
        traj.status = RunStatus::LeftStateSet;
        traj.message = "state left the admissible set at t = " + std::to_string(t1);
        record(t1);
        return traj;
      }
      if ((k + 1) % cfg.sample_stride == 0 || k + 1 == steps) record(t1);
    }
  } catch (const std::exception& e) {
    traj.status = RunStatus::Failed;
    traj.message = e.what();
    if (traj.states.empty()) record(0.0);
    return traj;
  }
  const double span = traj.t_end - traj.tail_begin;
  if (span > 0.0) traj.tail_mean /= span;
  else traj.tail_mean = s;
  return traj;
}

Index StateLayout::u_offset(Index agent) const {
  Index off = 0;
  for (Index i = 0; i < agent; ++i) off += dims[static_cast<size_t>(i)];
  return off;
}

Eigen::Map<const Vec> StateLayout::theta1(const Vec& s, Index agent) const {
  const auto a = static_cast<size_t>(agent);
  return {s.data() + est_offset[a] + 3, est_p[a] - 1};
}

Eigen::Map<const Vec> StateLayout::c(const Vec& s, Index agent) const {
  const auto a = static_cast<size_t>(agent);
  return {s.data() + est_offset[a] + 2 + est_p[a], est_p[a]};
}

Eigen::Map<const Mat> StateLayout::Sigma(const Vec& s, Index agent) const {
  const auto a = static_cast<size_t>(agent);
  return {s.data() + est_offset[a] + 2 + 2 * est_p[a], est_p[a], est_p[a]};
}

std::string RunMetrics::status_label() const {
  if (status != RunStatus::Ok) return to_string(status) + (message.empty() ? "" : ": " + message);
  return converged() ? "ok" : "did_not_converge";
}

double sustained_entry_time(const std::vector<double>& t, const std::vector<double>& dist,
                            double eps_ball, double hold) {
  long start = -1;
  for (size_t j = 0; j < t.size(); ++j) {
    if (dist[j] <= eps_ball) {
      if (start < 0) start = static_cast<long>(j);
      if (t[j] - t[static_cast<size_t>(start)] >= hold) return t[static_cast<size_t>(start)];
    } else {
      start = -1;
    }
  }
  // A trajectory that starts inside and never leaves counts from t = 0 even
  // when shorter than the hold window.
  if (start == 0 && !t.empty()) return t.front();
  return kNotConverged;
}

RunMetrics run_metrics(const Trajectory& traj, const StateLayout& layout, const GameSpec& game,
                       const Vec& u_star, double eps_ball, double hold, double tail_fraction) {
  if (u_star.size() != layout.m) throw ValidationError("run_metrics: u_star dimension mismatch");
  RunMetrics r;
  r.status = traj.status;
  r.message = traj.message;
  if (traj.states.empty()) return r;

  const double t_end = traj.t.back();
  const double tail_begin = t_end * (1.0 - tail_fraction);
  if (traj.ok() && traj.tail_mean.size() == layout.total) {
    r.u_tail_mean = traj.tail_mean.head(layout.m);
  } else {
    r.u_tail_mean = Vec::Zero(layout.m);
    Index count = 0;
    for (size_t k = 0; k < traj.t.size(); ++k)
      if (traj.t[k] >= tail_begin) {
        r.u_tail_mean += traj.states[k].head(layout.m);
        ++count;
      }
    r.u_tail_mean /= static_cast<double>(std::max<Index>(count, 1));
  }
  const Index n = layout.n_agents();
  r.dist_per_agent.resize(n);
  for (Index i = 0; i < n; ++i) {
    const Index off = layout.u_offset(i), mi = layout.dims[static_cast<size_t>(i)];
    r.dist_per_agent[i] = (r.u_tail_mean.segment(off, mi) - u_star.segment(off, mi)).norm();
  }
  r.dist_to_vgne = (r.u_tail_mean - u_star).norm();

  std::vector<double> dist(traj.t.size());
  for (size_t k = 0; k < traj.t.size(); ++k) dist[k] = (traj.states[k].head(layout.m) - u_star).norm();
  r.entry_time = sustained_entry_time(traj.t, dist, eps_ball, hold);

  if (game.q() > 0) {
    for (size_t k = 0; k < traj.t.size(); ++k) {
      if (traj.t[k] < tail_begin) continue;
      const Vec viol = game.A * traj.states[k].head(layout.m) - game.b;
      r.max_violation = std::max(r.max_violation, viol.maxCoeff());
    }
  }
  return r;
}

namespace {

void put(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  os << buf;
}

struct Column {
  Index agent;
  std::string var;
  std::function<double(size_t)> value;
};

std::vector<Column> columns(const Trajectory& traj, const StateLayout& L, const CsvOptions& o) {
  std::vector<Column> cols;
  const auto& S = traj.states;
  const Index n = L.n_agents();
  for (Index i = 0; i < n; ++i) {
    const Index off = L.u_offset(i), mi = L.dims[static_cast<size_t>(i)];
    for (Index j = 0; j < mi; ++j) {
      const Index idx = off + j;
      cols.push_back({i + 1, "u_" + std::to_string(idx + 1), [&S, idx](size_t k) { return S[k][idx]; }});
    }
  }
  for (Index r = 0; r < L.q; ++r) {
    const Index idx = L.m + r;
    cols.push_back({0, "lambda_" + std::to_string(r + 1), [&S, idx](size_t k) { return S[k][idx]; }});
  }
  if (o.include_plant)
    for (Index j = 0; j < L.nx; ++j) {
      const Index idx = L.x_offset + j;
      // Plant states are per agent in contiguous equal-size blocks.
      const Index agent = n > 0 ? j / std::max<Index>(1, L.nx / n) + 1 : 0;
      cols.push_back({agent, L.x_names[static_cast<size_t>(j)], [&S, idx](size_t k) { return S[k][idx]; }});
    }
  const bool have_aux = L.has_aux && traj.aux.size() == traj.states.size();
  if (o.trace_estimator && !L.est_offset.empty()) {
    const auto& A = traj.aux;
    for (Index i = 0; i < n; ++i) {
      const auto a = static_cast<size_t>(i);
      const Index base = L.est_offset[a], p = L.est_p[a];
      cols.push_back({i + 1, "l_hat", [&S, base](size_t k) { return S[k][base]; }});
      cols.push_back({i + 1, "eta_hat", [&S, base](size_t k) { return S[k][base + 1]; }});
      for (Index j = 0; j < p; ++j)
        cols.push_back({i + 1, "theta_hat_" + std::to_string(j),
                        [&S, base, j](size_t k) { return S[k][base + 2 + j]; }});
      auto eig = [&S, &L, i](size_t k, bool hi) {
        Eigen::SelfAdjointEigenSolver<Mat> es(Mat(L.Sigma(S[k], i)), Eigen::EigenvaluesOnly);
        return hi ? es.eigenvalues().maxCoeff() : es.eigenvalues().minCoeff();
      };
      cols.push_back({i + 1, "sigma_eig_min", [eig](size_t k) { return eig(k, false); }});
      cols.push_back({i + 1, "sigma_eig_max", [eig](size_t k) { return eig(k, true); }});
      if (have_aux)
        cols.push_back({i + 1, "e", [&S, &A, base, i](size_t k) { return A[k][i] - S[k][base]; }});
    }
  }
  if (o.trace_messages && have_aux) {
    const auto& A = traj.aux;
    for (Index i = 0; i < n; ++i) {
      const Index off = L.u_offset(i), mi = L.dims[static_cast<size_t>(i)];
      for (Index j = 0; j < mi; ++j) {
        const Index idx = n + off + j;
        cols.push_back({i + 1, "msg_u_dot_" + std::to_string(off + j + 1),
                        [&A, idx](size_t k) { return A[k][idx]; }});
      }
    }
  }
  return cols;
}

}  // namespace

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const StateLayout& layout,
                          const CsvOptions& opts) {
  const auto cols = columns(traj, layout, opts);
  if (opts.wide) {
    os << 't';
    for (const auto& c : cols) {
      os << ',' << c.var;
      if (c.var.rfind("u_", 0) != 0 && c.var.rfind("lambda_", 0) != 0 && c.var.rfind("msg_", 0) != 0 &&
          std::find(layout.x_names.begin(), layout.x_names.end(), c.var) == layout.x_names.end())
        os << '_' << c.agent;
    }
    os << '\n';
    for (size_t k = 0; k < traj.t.size(); ++k) {
      put(os, traj.t[k]);
      for (const auto& c : cols) {
        os << ',';
        put(os, c.value(k));
      }
      os << '\n';
    }
    return;
  }
  os << "t,agent,var,value\n";
  for (size_t k = 0; k < traj.t.size(); ++k)
    for (const auto& c : cols) {
      put(os, traj.t[k]);
      os << ',' << c.agent << ',' << c.var << ',';
      put(os, c.value(k));
      os << '\n';
    }
}

}  // namespace gne
