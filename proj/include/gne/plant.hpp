#pragma once

#include "gne/game.hpp"
#include "gne/types.hpp"

#include <string>
#include <vector>

namespace gne {

// Fast agent dynamics  eps x' = f(x, u),  y_i = h_i(x).
// Implementations are immutable after construction.
class Plant {
 public:
  virtual ~Plant() = default;

  virtual Index n_agents() const = 0;
  virtual Index state_dim() const = 0;
  virtual double epsilon() const = 0;

  // f(x, u), not yet divided by epsilon.
  virtual void flow(double t, const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& u,
                    Eigen::Ref<Vec> f) const = 0;
  // Per-agent cost outputs y_i.
  virtual void outputs(double t, const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> y) const = 0;
  // Steady-state map pi(u).
  virtual Vec steady_state(const Vec& u) const = 0;
  // Membership in the compact state set X.
  virtual bool in_state_set(const Eigen::Ref<const Vec>& x) const = 0;
  virtual std::vector<std::string> state_names() const = 0;
};

// f(x, u) / eps.
Vec plant_rhs(const Plant& plant, double t, const Vec& x, const Vec& u);
// y(x).
Vec cost_output(const Plant& plant, double t, const Vec& x);
// ||f(pi(u), u)||.
double steady_state_residual(const Plant& plant, const Vec& u, double t = 0.0);

struct DecayReport {
  double rate = 0.0;           // fitted exponential rate of ||x(t) - pi(u)||
  double initial_error = 0.0;
  double final_error = 0.0;
  bool diverged = false;
  bool constant = false;       // started at the steady state
};

// Holds u at u_bar, integrates eps x' = f(x, u_bar) and fits
// ||x - pi(u_bar)|| ~ C exp(-rate t) by least squares on the log-error.
DecayReport frozen_input_decay_probe(const Plant& plant, const Vec& u_bar, const Vec& x0,
                                     double horizon, double step);

// Unicycle agents with a setpoint regulator; per-agent state (x, y, phi).
struct UnicycleParams {
  Vec K1;                      // per agent
  Vec K2;                      // per agent
  std::vector<Eigen::Vector2d> sources;
  double c = 0.04;             // coupling weight in the cost
  double b = 14.0;             // coupling bound
  double x_min = -16, x_max = 16, y_min = -6, y_max = 6;
  double epsilon = 0.1;
  double state_margin = 20.0;  // X = rectangle grown by this margin, |phi| <= pi

  Index n_agents() const { return K1.size(); }
  void validate() const;
};

class UnicyclePlant final : public Plant {
 public:
  explicit UnicyclePlant(UnicycleParams p);

  Index n_agents() const override { return p_.n_agents(); }
  Index state_dim() const override { return 3 * p_.n_agents(); }
  double epsilon() const override { return p_.epsilon; }
  void flow(double t, const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& u,
            Eigen::Ref<Vec> f) const override;
  void outputs(double t, const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> y) const override;
  Vec steady_state(const Vec& u) const override;
  bool in_state_set(const Eigen::Ref<const Vec>& x) const override;
  std::vector<std::string> state_names() const override;

  const UnicycleParams& params() const { return p_; }

 private:
  UnicycleParams p_;
};

// Steady-state connectivity game: J_i(u) = ||u_i - s_i||^2 + c sum_j ||u_i - u_j||^2
// on the rectangle, with pairwise coupling |u_i - u_j|_inf <= b.
GameSpec connectivity_game(const UnicycleParams& p);

// Pairwise difference constraints |v_i - v_j| <= b for the listed agent pairs
// and every coordinate of an m_i-dimensional decision: two rows per scalar pair.
void pairwise_coupling(Index n_agents, Index dim, const std::vector<std::pair<Index, Index>>& pairs,
                       double bound, Mat& A, Vec& b);

// Jensen-type wake coefficients C(j, i) = c_ji, the influence of turbine j on
// turbine i, for wind blowing along `wind`: (r0 / (r0 + k x))^2 times the
// fraction of rotor i inside the wake cone of j.
Mat jensen_wake_matrix(const std::vector<Eigen::Vector2d>& positions, const Eigen::Vector2d& wind,
                       double rotor_radius, double decay);

// Area of intersection of two circles of radii R and r with centres d apart.
double circle_overlap_area(double R, double r, double d);

struct WindInterval {
  double t_begin = 0.0;
  Eigen::Vector2d direction{0.0, -1.0};
  Mat wake;  // c_ji
};

struct WindFarmParams {
  Index rows = 3;
  Index cols = 3;
  std::vector<Eigen::Vector2d> positions;
  double tau = 10.0;
  double rho_air = 1.225;
  double rotor_radius = 40.0;
  double U_inf = 8.0;
  double power_scale = 1e-6;  // output unit (W -> MW)
  double a_min = 0.1;
  double a_max = 1.0 / 3.0;
  double b = 0.03;
  double epsilon = 0.005;
  std::vector<WindInterval> intervals;

  Index n_agents() const { return rows * cols; }
  double rotor_area() const { return M_PI * rotor_radius * rotor_radius; }
  void validate() const;
  const WindInterval& interval_at(double t) const;
};

// C_P(a) = a (1 - a)^2.
inline double power_coefficient(double a) { return a * (1.0 - a) * (1.0 - a); }

// Farm power sum_i P_i(a) in output units for one wake matrix.
double farm_power(const WindFarmParams& p, const Mat& wake, const Eigen::Ref<const Vec>& a);
// d(farm power)/da.
Vec farm_power_gradient(const WindFarmParams& p, const Mat& wake, const Vec& a);

class WindFarmPlant final : public Plant {
 public:
  explicit WindFarmPlant(WindFarmParams p);

  Index n_agents() const override { return p_.n_agents(); }
  Index state_dim() const override { return p_.n_agents(); }
  double epsilon() const override { return p_.epsilon; }
  void flow(double t, const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& u,
            Eigen::Ref<Vec> f) const override;
  // Every agent measures the negated farm power.
  void outputs(double t, const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> y) const override;
  Vec steady_state(const Vec& u) const override { return u; }
  bool in_state_set(const Eigen::Ref<const Vec>& x) const override;
  std::vector<std::string> state_names() const override;

  const WindFarmParams& params() const { return p_; }

 private:
  WindFarmParams p_;
};

// Potential game of one wind interval: J_i(u) = -farm_power(u) for all i, with
// row-to-row coupling |u_i - u_j| <= b.
GameSpec windfarm_game(const WindFarmParams& p, const Mat& wake);

// Grid layout: turbine i = i_c + i_r C, row 0 upwind for wind (0, -1).
std::vector<Eigen::Vector2d> grid_layout(Index rows, Index cols, double dx, double dy);

}  // namespace gne
