#pragma once

#include "gne/types.hpp"

#include <variant>

namespace gne {

struct Box {
  Vec lower;
  Vec upper;
};

struct Ball {
  Vec center;
  double radius = 1.0;
};

// Polyhedron {x : C x <= d}.
struct Halfspaces {
  Mat C;
  Vec d;
};

// Nonempty closed convex set. Construct through the factories, which validate
// the invariants (bounds ordered, positive radius, feasible polyhedron).
class ConvexSet {
 public:
  static ConvexSet box(Vec lower, Vec upper);
  static ConvexSet ball(Vec center, double radius);
  static ConvexSet halfspaces(Mat C, Vec d);

  Index dim() const;
  bool contains(const Eigen::Ref<const Vec>& x, double tol = 1e-9) const;

  bool is_box() const { return std::holds_alternative<Box>(shape_); }
  const Box& as_box() const;
  const std::variant<Box, Ball, Halfspaces>& shape() const { return shape_; }

 private:
  explicit ConvexSet(std::variant<Box, Ball, Halfspaces> s) : shape_(std::move(s)) {}
  std::variant<Box, Ball, Halfspaces> shape_;
};

// Result of the dense nonnegative quadratic program
//   min 1/2 x'Qx + p'x  s.t.  x >= 0
struct NonnegQpResult {
  Vec x;
  int iterations = 0;
  bool converged = false;
};

// Active-set (Lawson-Hanson style) solver for small dense problems with
// positive semidefinite Q. Subproblems use a complete orthogonal
// decomposition so rank-deficient Q is tolerated.
NonnegQpResult solve_nonneg_qp(const Mat& Q, const Vec& p, int max_iters = 500);

// Euclidean projection argmin_{y in S} ||y - v||.
Vec project(const ConvexSet& set, const Eigen::Ref<const Vec>& v);

// Same as project, writing into out (allocation-free for Box and Ball).
void project_into(const ConvexSet& set, const Eigen::Ref<const Vec>& v, Eigen::Ref<Vec> out);

// Componentwise max(v, 0).
Vec project_nonneg(const Eigen::Ref<const Vec>& v);

// Tangent-cone projection for a box at a point inside it: outward components
// at active bounds are zeroed.
Vec project_tangent_cone(const ConvexSet& box, const Eigen::Ref<const Vec>& point,
                         const Eigen::Ref<const Vec>& v);

// Unchecked variant used inside integrator stages, where the point may sit
// marginally outside the box. Components beyond a bound count as active.
void tangent_cone_box_inplace(const Box& box, const Eigen::Ref<const Vec>& point,
                              Eigen::Ref<Vec> v);

inline constexpr double kActiveBoundTol = 1e-9;

}  // namespace gne
