#include "gne/plant.hpp"

#include <cmath>
#include <memory>
#include <sstream>

namespace gne {

Vec plant_rhs(const Plant& plant, double t, const Vec& x, const Vec& u) {
  Vec f(plant.state_dim());
  plant.flow(t, x, u, f);
  return f / plant.epsilon();
}

Vec cost_output(const Plant& plant, double t, const Vec& x) {
  Vec y(plant.n_agents());
  plant.outputs(t, x, y);
  return y;
}

double steady_state_residual(const Plant& plant, const Vec& u, double t) {
  const Vec x = plant.steady_state(u);
  Vec f(plant.state_dim());
  plant.flow(t, x, u, f);
  return f.norm();
}

DecayReport frozen_input_decay_probe(const Plant& plant, const Vec& u_bar, const Vec& x0,
                                     double horizon, double step) {
  if (!(step > 0.0) || !(horizon >= step)) throw ValidationError("decay probe: bad step/horizon");
  const Vec target = plant.steady_state(u_bar);
  const Index n = plant.state_dim();
  const double inv_eps = 1.0 / plant.epsilon();
  DecayReport rep;
  rep.initial_error = (x0 - target).norm();
  if (rep.initial_error == 0.0) {
    rep.constant = true;
    Vec f(n);
    plant.flow(0.0, x0, u_bar, f);
    rep.final_error = f.norm();
    return rep;
  }
  Vec x = x0, k1(n), k2(n), k3(n), k4(n), tmp(n);
  std::vector<double> ts, logs;
  const auto steps = static_cast<long>(std::llround(horizon / step));
  const double floor = 1e-10 * rep.initial_error;
  for (long s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) * step;
    const double err = (x - target).norm();
    if (!std::isfinite(err) || err > 10.0 * rep.initial_error) {
      rep.diverged = true;
      rep.final_error = err;
      return rep;
    }
    if (err > floor) {
      ts.push_back(t);
      logs.push_back(std::log(err));
    }
    rep.final_error = err;
    if (s == steps) break;
    plant.flow(t, x, u_bar, k1);
    k1 *= inv_eps;
    tmp = x + 0.5 * step * k1;
    plant.flow(t + 0.5 * step, tmp, u_bar, k2);
    k2 *= inv_eps;
    tmp = x + 0.5 * step * k2;
    plant.flow(t + 0.5 * step, tmp, u_bar, k3);
    k3 *= inv_eps;
    tmp = x + step * k3;
    plant.flow(t + step, tmp, u_bar, k4);
    k4 *= inv_eps;
    x += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  if (ts.size() >= 2) {
    const double nt = static_cast<double>(ts.size());
    double st = 0, sl = 0, stt = 0, stl = 0;
    for (size_t k = 0; k < ts.size(); ++k) {
      st += ts[k];
      sl += logs[k];
      stt += ts[k] * ts[k];
      stl += ts[k] * logs[k];
    }
    const double slope = (nt * stl - st * sl) / (nt * stt - st * st);
    rep.rate = -slope;
  }
  return rep;
}

// ---------------------------------------------------------------- unicycle

void UnicycleParams::validate() const {
  const Index n = K1.size();
  if (n == 0) throw ValidationError("unicycle: no agents");
  if (K2.size() != n || static_cast<Index>(sources.size()) != n)
    throw ValidationError("unicycle: K1, K2 and sources need one entry per agent");
  if (!((K1.array() > 0).all() && (K2.array() > 0).all()))
    throw ValidationError("unicycle: gains must be positive");
  if (!(x_min < x_max && y_min < y_max)) throw ValidationError("unicycle: empty rectangle");
  if (!(c > 0.0 && b > 0.0)) throw ValidationError("unicycle: c and b must be positive");
  if (!(epsilon > 0.0)) throw ValidationError("unicycle: epsilon must be positive");
}

UnicyclePlant::UnicyclePlant(UnicycleParams p) : p_(std::move(p)) { p_.validate(); }

void UnicyclePlant::flow(double, const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& u,
                         Eigen::Ref<Vec> f) const {
  for (Index i = 0; i < p_.n_agents(); ++i) {
    const double px = x[3 * i], py = x[3 * i + 1], phi = x[3 * i + 2];
    const double ex = px - u[2 * i], ey = py - u[2 * i + 1];
    const double R = std::hypot(ex, ey);
    const double bearing = std::atan2(ey, ex);
    const double speed = -p_.K1[i] * R * std::cos(phi);
    f[3 * i] = speed * std::cos(bearing - phi);
    f[3 * i + 1] = speed * std::sin(bearing - phi);
    f[3 * i + 2] = -p_.K2[i] * phi;
  }
}

void UnicyclePlant::outputs(double, const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> y) const {
  const Index n = p_.n_agents();
  for (Index i = 0; i < n; ++i) {
    const Eigen::Vector2d ri(x[3 * i], x[3 * i + 1]);
    double yi = (ri - p_.sources[static_cast<size_t>(i)]).squaredNorm();
    double coupling = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      coupling += (ri - Eigen::Vector2d(x[3 * j], x[3 * j + 1])).squaredNorm();
    }
    y[i] = yi + p_.c * coupling;
  }
}

Vec UnicyclePlant::steady_state(const Vec& u) const {
  Vec x(state_dim());
  for (Index i = 0; i < p_.n_agents(); ++i) {
    x[3 * i] = u[2 * i];
    x[3 * i + 1] = u[2 * i + 1];
    x[3 * i + 2] = 0.0;
  }
  return x;
}

bool UnicyclePlant::in_state_set(const Eigen::Ref<const Vec>& x) const {
  const double m = p_.state_margin;
  for (Index i = 0; i < p_.n_agents(); ++i) {
    if (x[3 * i] < p_.x_min - m || x[3 * i] > p_.x_max + m) return false;
    if (x[3 * i + 1] < p_.y_min - m || x[3 * i + 1] > p_.y_max + m) return false;
    if (std::abs(x[3 * i + 2]) > M_PI) return false;
  }
  return true;
}

std::vector<std::string> UnicyclePlant::state_names() const {
  std::vector<std::string> names;
  for (Index i = 0; i < p_.n_agents(); ++i) {
    const std::string s = std::to_string(i + 1);
    names.push_back("px_" + s);
    names.push_back("py_" + s);
    names.push_back("phi_" + s);
  }
  return names;
}

void pairwise_coupling(Index n_agents, Index dim, const std::vector<std::pair<Index, Index>>& pairs,
                       double bound, Mat& A, Vec& b) {
  const Index rows = 2 * dim * static_cast<Index>(pairs.size());
  A = Mat::Zero(rows, n_agents * dim);
  b = Vec::Constant(rows, bound);
  Index r = 0;
  for (const auto& [i, j] : pairs) {
    for (Index k = 0; k < dim; ++k) {
      A(r, i * dim + k) = 1.0;
      A(r, j * dim + k) = -1.0;
      ++r;
      A(r, i * dim + k) = -1.0;
      A(r, j * dim + k) = 1.0;
      ++r;
    }
  }
}

GameSpec connectivity_game(const UnicycleParams& p) {
  p.validate();
  const Index n = p.n_agents();
  GameSpec g;
  for (Index i = 0; i < n; ++i) {
    const Eigen::Vector2d s = p.sources[static_cast<size_t>(i)];
    const double c = p.c;
    g.dims.push_back(2);
    g.cost.push_back([i, n, s, c](const Vec& u) {
      const Eigen::Vector2d ui = u.segment<2>(2 * i);
      double v = (ui - s).squaredNorm();
      for (Index j = 0; j < n; ++j)
        if (j != i) v += c * (ui - u.segment<2>(2 * j)).squaredNorm();
      return v;
    });
    g.cost_grad.push_back([i, n, s, c](const Vec& u) -> Vec {
      const Eigen::Vector2d ui = u.segment<2>(2 * i);
      Eigen::Vector2d gi = 2.0 * (ui - s);
      for (Index j = 0; j < n; ++j)
        if (j != i) gi += 2.0 * c * (ui - u.segment<2>(2 * j));
      return gi;
    });
    g.local_sets.push_back(ConvexSet::box(Eigen::Vector2d(p.x_min, p.y_min),
                                          Eigen::Vector2d(p.x_max, p.y_max)));
  }
  std::vector<std::pair<Index, Index>> pairs;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  pairwise_coupling(n, 2, pairs, p.b, g.A, g.b);
  g.validate();
  return g;
}

// ---------------------------------------------------------------- wind farm

double circle_overlap_area(double R, double r, double d) {
  if (d >= R + r) return 0.0;
  if (d <= std::abs(R - r)) {
    const double s = std::min(R, r);
    return M_PI * s * s;
  }
  const double a1 = std::acos(std::clamp((d * d + r * r - R * R) / (2.0 * d * r), -1.0, 1.0));
  const double a2 = std::acos(std::clamp((d * d + R * R - r * r) / (2.0 * d * R), -1.0, 1.0));
  const double k = (-d + r + R) * (d + r - R) * (d - r + R) * (d + r + R);
  return r * r * a1 + R * R * a2 - 0.5 * std::sqrt(std::max(0.0, k));
}

Mat jensen_wake_matrix(const std::vector<Eigen::Vector2d>& positions, const Eigen::Vector2d& wind,
                       double rotor_radius, double decay) {
  if (!(rotor_radius > 0.0) || !(decay >= 0.0) || wind.norm() == 0.0)
    throw ValidationError("wake model: invalid rotor radius, decay or wind direction");
  const auto n = static_cast<Index>(positions.size());
  const Eigen::Vector2d w = wind.normalized();
  const double rotor = M_PI * rotor_radius * rotor_radius;
  Mat C = Mat::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      if (i == j) continue;
      const Eigen::Vector2d d = positions[static_cast<size_t>(i)] - positions[static_cast<size_t>(j)];
      const double along = d.dot(w);
      if (along <= 0.0) continue;
      const double lateral = (d - along * w).norm();
      const double wake_r = rotor_radius + decay * along;
      const double overlap = circle_overlap_area(wake_r, rotor_radius, lateral) / rotor;
      const double ratio = rotor_radius / wake_r;
      C(j, i) = ratio * ratio * overlap;
    }
  }
  return C;
}

void WindFarmParams::validate() const {
  const Index n = n_agents();
  if (rows < 1 || cols < 1) throw ValidationError("wind farm: rows and cols must be positive");
  if (static_cast<Index>(positions.size()) != n)
    throw ValidationError("wind farm: one position per turbine required");
  if (!(tau > 0.0 && rho_air > 0.0 && rotor_radius > 0.0 && U_inf > 0.0 && power_scale > 0.0))
    throw ValidationError("wind farm: physical parameters must be positive");
  if (!(0.0 < a_min && a_min < a_max && a_max <= 1.0 / 3.0 + 1e-9))
    throw ValidationError("wind farm: need 0 < a_min < a_max <= 1/3");
  if (!(b > 0.0)) throw ValidationError("wind farm: coupling bound must be positive");
  if (!(epsilon > 0.0)) throw ValidationError("wind farm: epsilon must be positive");
  if (intervals.empty()) throw ValidationError("wind farm: at least one wind interval required");
  for (size_t k = 0; k < intervals.size(); ++k) {
    const auto& iv = intervals[k];
    if (iv.wake.rows() != n || iv.wake.cols() != n)
      throw ValidationError("wind farm: wake matrix must be N x N");
    if ((iv.wake.array() < 0.0).any()) throw ValidationError("wind farm: negative wake entry");
    if (k > 0 && !(iv.t_begin > intervals[k - 1].t_begin))
      throw ValidationError("wind farm: interval start times must increase");
  }
}

const WindInterval& WindFarmParams::interval_at(double t) const {
  size_t k = 0;
  while (k + 1 < intervals.size() && t >= intervals[k + 1].t_begin) ++k;
  return intervals[k];
}

namespace {

// Wake-reduced speed at each turbine; throws on an over-waked turbine.
void wind_speeds(const WindFarmParams& p, const Mat& wake, const Eigen::Ref<const Vec>& a,
                 double* V, double* S) {
  const Index n = p.n_agents();
  for (Index i = 0; i < n; ++i) {
    double s2 = 0.0;
    for (Index j = 0; j < n; ++j) {
      const double t = a[j] * wake(j, i);
      s2 += t * t;
    }
    S[i] = std::sqrt(s2);
    V[i] = p.U_inf * (1.0 - 2.0 * S[i]);
    if (V[i] < 0.0)
      throw Error("wind farm: negative wind speed at turbine " + std::to_string(i + 1) +
                  " (unphysical wake matrix)");
  }
}

}  // namespace

double farm_power(const WindFarmParams& p, const Mat& wake, const Eigen::Ref<const Vec>& a) {
  const Index n = p.n_agents();
  double V[64], S[64];
  std::vector<double> Vh, Sh;
  double* Vp = V;
  double* Sp = S;
  if (n > 64) {
    Vh.resize(static_cast<size_t>(n));
    Sh.resize(static_cast<size_t>(n));
    Vp = Vh.data();
    Sp = Sh.data();
  }
  wind_speeds(p, wake, a, Vp, Sp);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) total += power_coefficient(a[i]) * Vp[i] * Vp[i] * Vp[i];
  return p.power_scale * 0.5 * p.rho_air * p.rotor_area() * total;
}

Vec farm_power_gradient(const WindFarmParams& p, const Mat& wake, const Vec& a) {
  const Index n = p.n_agents();
  std::vector<double> V(static_cast<size_t>(n)), S(static_cast<size_t>(n));
  wind_speeds(p, wake, a, V.data(), S.data());
  const double scale = p.power_scale * 0.5 * p.rho_air * p.rotor_area();
  Vec g(n);
  for (Index k = 0; k < n; ++k) {
    const double ak = a[k];
    double gk = (1.0 - ak) * (1.0 - 3.0 * ak) * std::pow(V[static_cast<size_t>(k)], 3);
    for (Index i = 0; i < n; ++i) {
      const double Si = S[static_cast<size_t>(i)];
      if (Si <= 0.0) continue;
      const double dV = -2.0 * p.U_inf * ak * wake(k, i) * wake(k, i) / Si;
      gk += power_coefficient(a[i]) * 3.0 * V[static_cast<size_t>(i)] * V[static_cast<size_t>(i)] * dV;
    }
    g[k] = scale * gk;
  }
  return g;
}

WindFarmPlant::WindFarmPlant(WindFarmParams p) : p_(std::move(p)) { p_.validate(); }

void WindFarmPlant::flow(double, const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& u,
                         Eigen::Ref<Vec> f) const {
  f = -(x - u) / p_.tau;
}

void WindFarmPlant::outputs(double t, const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> y) const {
  y.setConstant(-farm_power(p_, p_.interval_at(t).wake, x));
}

bool WindFarmPlant::in_state_set(const Eigen::Ref<const Vec>& x) const {
  return (x.array() >= 0.0).all() && (x.array() <= 0.5).all();
}

std::vector<std::string> WindFarmPlant::state_names() const {
  std::vector<std::string> names;
  for (Index i = 0; i < p_.n_agents(); ++i) names.push_back("a_" + std::to_string(i + 1));
  return names;
}

GameSpec windfarm_game(const WindFarmParams& p, const Mat& wake) {
  p.validate();
  const Index n = p.n_agents();
  GameSpec g;
  auto params = std::make_shared<const WindFarmParams>(p);
  auto W = std::make_shared<const Mat>(wake);
  for (Index i = 0; i < n; ++i) {
    g.dims.push_back(1);
    g.cost.push_back([params, W](const Vec& u) { return -farm_power(*params, *W, u); });
    g.cost_grad.push_back([params, W, i](const Vec& u) -> Vec {
      Vec gi(1);
      gi[0] = -farm_power_gradient(*params, *W, u)[i];
      return gi;
    });
    g.local_sets.push_back(ConvexSet::box(Vec::Constant(1, p.a_min), Vec::Constant(1, p.a_max)));
  }
  std::vector<std::pair<Index, Index>> pairs;
  for (Index r = 0; r + 1 < p.rows; ++r)
    for (Index c1 = 0; c1 < p.cols; ++c1)
      for (Index c2 = 0; c2 < p.cols; ++c2) pairs.emplace_back(r * p.cols + c1, (r + 1) * p.cols + c2);
  pairwise_coupling(n, 1, pairs, p.b, g.A, g.b);
  g.validate();
  return g;
}

std::vector<Eigen::Vector2d> grid_layout(Index rows, Index cols, double dx, double dy) {
  std::vector<Eigen::Vector2d> pos;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      pos.emplace_back(static_cast<double>(c) * dx, -static_cast<double>(r) * dy);
  return pos;
}

}  // namespace gne
