#include "gne/projection.hpp"

#include <cmath>
#include <sstream>
#include <vector>

namespace gne {

ConvexSet ConvexSet::box(Vec lower, Vec upper) {
  if (lower.size() != upper.size() || lower.size() == 0)
    throw ValidationError("box: lower/upper dimension mismatch");
  for (Index k = 0; k < lower.size(); ++k) {
    if (!(lower[k] <= upper[k]))
      throw ValidationError("box: lower > upper in component " + std::to_string(k));
  }
  return ConvexSet(Box{std::move(lower), std::move(upper)});
}

ConvexSet ConvexSet::ball(Vec center, double radius) {
  if (!(radius > 0.0)) throw ValidationError("ball: radius must be positive");
  if (center.size() == 0) throw ValidationError("ball: empty center");
  return ConvexSet(Ball{std::move(center), radius});
}

ConvexSet ConvexSet::halfspaces(Mat C, Vec d) {
  if (C.rows() != d.size() || C.rows() == 0 || C.cols() == 0)
    throw ValidationError("halfspaces: C rows must match d size");
  // Farkas: {Cx <= d} is empty iff some mu >= 0 has C'mu = 0 and d'mu = -1.
  // Minimise ||M mu - t||^2 over mu >= 0 with M = [C'; d'], t = (0, -1).
  const Index n = C.cols();
  Mat M(n + 1, C.rows());
  M.topRows(n) = C.transpose();
  M.row(n) = d.transpose();
  Vec t = Vec::Zero(n + 1);
  t[n] = -1.0;
  const NonnegQpResult r = solve_nonneg_qp(M.transpose() * M, -M.transpose() * t, 1000);
  const double gap = (M * r.x - t).norm();
  if (gap < 1e-9) throw ValidationError("halfspaces: set {Cx <= d} is empty");
  return ConvexSet(Halfspaces{std::move(C), std::move(d)});
}

Index ConvexSet::dim() const {
  return std::visit(
      [](const auto& s) -> Index {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Box>) return s.lower.size();
        else if constexpr (std::is_same_v<T, Ball>) return s.center.size();
        else return s.C.cols();
      },
      shape_);
}

const Box& ConvexSet::as_box() const {
  if (!is_box()) throw Error("convex set is not a box");
  return std::get<Box>(shape_);
}

bool ConvexSet::contains(const Eigen::Ref<const Vec>& x, double tol) const {
  if (x.size() != dim()) return false;
  return std::visit(
      [&](const auto& s) -> bool {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Box>) {
          return ((x - s.lower).array() >= -tol).all() && ((s.upper - x).array() >= -tol).all();
        } else if constexpr (std::is_same_v<T, Ball>) {
          return (x - s.center).norm() <= s.radius + tol;
        } else {
          return ((s.C * x - s.d).array() <= tol).all();
        }
      },
      shape_);
}

NonnegQpResult solve_nonneg_qp(const Mat& Q, const Vec& p, int max_iters) {
  const Index n = p.size();
  NonnegQpResult res;
  res.x = Vec::Zero(n);
  std::vector<bool> passive(static_cast<size_t>(n), false);
  const double tol = 1e-12 * std::max(1.0, Q.cwiseAbs().maxCoeff() + p.cwiseAbs().maxCoeff());

  auto solve_passive = [&](Vec& z) {
    std::vector<Index> idx;
    for (Index k = 0; k < n; ++k)
      if (passive[static_cast<size_t>(k)]) idx.push_back(k);
    z = Vec::Zero(n);
    if (idx.empty()) return;
    const Index np = static_cast<Index>(idx.size());
    Mat Qp(np, np);
    Vec rhs(np);
    for (Index a = 0; a < np; ++a) {
      rhs[a] = -p[idx[a]];
      for (Index b = 0; b < np; ++b) Qp(a, b) = Q(idx[a], idx[b]);
    }
    const Vec zp = Qp.completeOrthogonalDecomposition().solve(rhs);
    for (Index a = 0; a < np; ++a) z[idx[a]] = zp[a];
  };

  Vec z;
  for (int it = 0; it < max_iters; ++it) {
    res.iterations = it + 1;
    const Vec w = -(Q * res.x + p);
    Index enter = -1;
    double best = tol;
    for (Index k = 0; k < n; ++k) {
      if (!passive[static_cast<size_t>(k)] && w[k] > best) {
        best = w[k];
        enter = k;
      }
    }
    if (enter < 0) {
      res.converged = true;
      return res;
    }
    passive[static_cast<size_t>(enter)] = true;
    for (int inner = 0; inner < max_iters; ++inner) {
      solve_passive(z);
      bool ok = true;
      for (Index k = 0; k < n; ++k)
        if (passive[static_cast<size_t>(k)] && z[k] <= 0.0) ok = false;
      if (ok) {
        res.x = z;
        break;
      }
      double alpha = 1.0;
      for (Index k = 0; k < n; ++k) {
        if (passive[static_cast<size_t>(k)] && z[k] <= 0.0) {
          const double denom = res.x[k] - z[k];
          if (denom > 0.0) alpha = std::min(alpha, res.x[k] / denom);
        }
      }
      res.x += alpha * (z - res.x);
      for (Index k = 0; k < n; ++k) {
        if (passive[static_cast<size_t>(k)] && res.x[k] <= tol) {
          passive[static_cast<size_t>(k)] = false;
          res.x[k] = 0.0;
        }
      }
    }
  }
  return res;
}

namespace {

void project_halfspaces(const Halfspaces& h, const Eigen::Ref<const Vec>& v, Eigen::Ref<Vec> out) {
  const Vec slack = h.C * v - h.d;
  if ((slack.array() <= 0.0).all()) {
    out = v;
    return;
  }
  // Dual: min 1/2 mu' C C' mu + (d - C v)' mu, mu >= 0; primal y = v - C' mu.
  const NonnegQpResult r = solve_nonneg_qp(h.C * h.C.transpose(), -slack, 2000);
  out = v - h.C.transpose() * r.x;
  const double viol = std::max(0.0, (h.C * out - h.d).maxCoeff());
  const double scale = 1e-9 * std::max(1.0, v.cwiseAbs().maxCoeff());
  if (!r.converged || viol > scale) {
    std::ostringstream os;
    os << "halfspace projection did not converge (iterations " << r.iterations
       << ", primal residual " << viol << ")";
    throw Error(os.str());
  }
}

}  // namespace

void project_into(const ConvexSet& set, const Eigen::Ref<const Vec>& v, Eigen::Ref<Vec> out) {
  if (v.size() != set.dim() || out.size() != set.dim())
    throw ValidationError("project: dimension mismatch");
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Box>) {
          out = v.cwiseMax(s.lower).cwiseMin(s.upper);
        } else if constexpr (std::is_same_v<T, Ball>) {
          const double dist = (v - s.center).norm();
          if (dist <= s.radius) out = v;
          else out = s.center + (s.radius / dist) * (v - s.center);
        } else {
          project_halfspaces(s, v, out);
        }
      },
      set.shape());
}

Vec project(const ConvexSet& set, const Eigen::Ref<const Vec>& v) {
  Vec out(v.size());
  project_into(set, v, out);
  return out;
}

Vec project_nonneg(const Eigen::Ref<const Vec>& v) { return v.cwiseMax(0.0); }

void tangent_cone_box_inplace(const Box& box, const Eigen::Ref<const Vec>& point,
                              Eigen::Ref<Vec> v) {
  for (Index k = 0; k < v.size(); ++k) {
    if (point[k] <= box.lower[k] + kActiveBoundTol && v[k] < 0.0) v[k] = 0.0;
    else if (point[k] >= box.upper[k] - kActiveBoundTol && v[k] > 0.0) v[k] = 0.0;
  }
}

Vec project_tangent_cone(const ConvexSet& set, const Eigen::Ref<const Vec>& point,
                         const Eigen::Ref<const Vec>& v) {
  const Box& box = set.as_box();
  if (point.size() != box.lower.size() || v.size() != box.lower.size())
    throw ValidationError("project_tangent_cone: dimension mismatch");
  if (!set.contains(point, kActiveBoundTol))
    throw Error("project_tangent_cone: point lies outside the set");
  Vec out = v;
  tangent_cone_box_inplace(box, point, out);
  return out;
}

}  // namespace gne
