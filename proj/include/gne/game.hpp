#pragma once

#include "gne/projection.hpp"
#include "gne/types.hpp"

#include <functional>
#include <random>
#include <utility>
#include <vector>

namespace gne {

// J_i evaluated on the collective decision u = col(u_1, ..., u_N).
using CostFn = std::function<double(const Vec& u)>;
// Partial gradient of J_i with respect to the agent's own block u_i.
using GradFn = std::function<Vec(const Vec& u)>;

// A game with local sets Omega_i and shared coupling constraint A u <= b.
// Read-only after construction; safe to share across sweep workers.
struct GameSpec {
  std::vector<Index> dims;
  std::vector<CostFn> cost;
  std::vector<GradFn> cost_grad;  // optional per agent; empty -> finite differences
  std::vector<ConvexSet> local_sets;
  Mat A;
  Vec b;

  Index n_agents() const { return static_cast<Index>(dims.size()); }
  Index m() const;
  Index q() const { return b.size(); }
  Index offset(Index agent) const;
  bool has_analytic_gradient() const;

  // Throws ValidationError on inconsistent dimensions.
  void validate() const;
};

// Central-difference step h = kFdRelStep * max(1, |u_k|).
inline constexpr double kFdRelStep = 1e-5;

// Stacked partial gradients F(u). Uses cost_grad when present, central finite
// differences otherwise.
Vec pseudo_gradient(const GameSpec& game, const Vec& u);

// F(u) by central finite differences, ignoring any analytic gradients.
Vec finite_difference_pseudo_gradient(const GameSpec& game, const Vec& u);

// Full gradient of J_i with respect to the collective u (finite differences).
Vec cost_gradient_full(const GameSpec& game, Index agent, const Vec& u);

// Evaluate J_i(u) and reject non-finite values.
double evaluate_cost(const GameSpec& game, Index agent, const Vec& u);

// Projection onto Omega = Omega_1 x ... x Omega_N.
Vec project_omega(const GameSpec& game, const Vec& v);
void project_omega_into(const GameSpec& game, const Vec& v, Vec& out);
bool in_omega(const GameSpec& game, const Vec& u, double tol = 1e-9);

// Natural-map residual of the v-GNE KKT system; zero iff (u, lambda) solves it.
double kkt_residual(const GameSpec& game, const Vec& u, const Vec& lambda);

struct MonotonicityEstimate {
  double mu_hat = 0.0;
  double ell_hat = 0.0;
  Index pairs_used = 0;
  bool assumption_violated = false;  // mu_hat <= 0 on the samples
};

using SamplePairs = std::vector<std::pair<Vec, Vec>>;

// Sampled strong-monotonicity and Lipschitz constants of F. Pairs are
// evaluated in parallel; estimate_monotonicity_serial is the reference.
MonotonicityEstimate estimate_monotonicity(const GameSpec& game, const SamplePairs& pairs);
MonotonicityEstimate estimate_monotonicity_serial(const GameSpec& game, const SamplePairs& pairs);

// Random point of a convex set (uniform for boxes and balls).
Vec sample_point(const ConvexSet& set, std::mt19937_64& rng);
// Random point of Omega.
Vec sample_omega(const GameSpec& game, std::mt19937_64& rng);
SamplePairs sample_pairs(const GameSpec& game, Index count, std::uint64_t seed);

// Quadratic family: J_i(u) = 1/2 u_i' M_ii u_i + u_i' sum_{j!=i} M_ij u_j + q_i' u_i + k_i
// so that F(u) = M u + q. Local sets are boxes.
struct QuadraticGame {
  std::vector<Index> dims;
  Mat M;
  Vec q;
  Vec constant;  // k_i per agent
  Vec lower;
  Vec upper;
  Mat A;
  Vec b;

  void validate() const;
  GameSpec to_game() const;
};

}  // namespace gne
