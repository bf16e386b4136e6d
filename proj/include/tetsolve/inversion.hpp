#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tetsolve/errors.hpp"
#include "tetsolve/greens.hpp"

namespace tetsolve {

/// Graph Laplacian over the unit-fault neighbour graph: degree on the
/// diagonal, -1 for neighbours. Columns of different slip directions never
/// couple. Neighbours are same-direction columns whose centers lie within
/// neighbor_radius.
inline Eigen::MatrixXd build_smoothing_matrix(const std::vector<GreensBank::ColumnMeta>& cols,
                                              double neighbor_radius) {
  const int n = static_cast<int>(cols.size());
  if (n < 1) throw ValidationError("smoothing matrix: no unit faults");
  if (neighbor_radius <= 0.0)
    throw ValidationError("smoothing matrix: neighbor radius must be positive");
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (cols[i].direction != cols[j].direction) continue;
      if (norm(cols[i].center - cols[j].center) > neighbor_radius) continue;
      l(i, j) = l(j, i) = -1.0;
      l(i, i) += 1.0;
      l(j, j) += 1.0;
    }
  return l;
}

struct RegularizedSolution {
  Eigen::VectorXd a;
  double residual_norm = 0.0; // ||G a - d||
  double seminorm = 0.0;      // ||L a||
};

/// Minimise ||G a - d||^2 + alpha^2 ||L a||^2 through the normal equations
/// (G^T G + alpha^2 L^T L) a = G^T d with a dense symmetric factorization.
inline RegularizedSolution solve_regularized(const Eigen::MatrixXd& g,
                                             const Eigen::VectorXd& d,
                                             const Eigen::MatrixXd& l, double alpha) {
  if (alpha < 0.0) throw ValidationError("solve_regularized: alpha must be >= 0");
  if (g.rows() != d.size() || l.cols() != g.cols() || l.rows() != l.cols())
    throw ValidationError("solve_regularized: dimension mismatch");
  const Eigen::MatrixXd normal = g.transpose() * g + (alpha * alpha) * (l.transpose() * l);
  const Eigen::VectorXd rhs = g.transpose() * d;

  RegularizedSolution sol;
  if (rhs.norm() == 0.0) {
    sol.a = Eigen::VectorXd::Zero(g.cols());
  } else {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    // pivoted LDLT silently "solves" consistent rank-deficient systems, so an
    // exactly vanishing pivot must be treated as singular
    const Eigen::VectorXd pivots = ldlt.vectorD();
    const bool zero_pivot = pivots.cwiseAbs().minCoeff() < 1e-280 || pivots.minCoeff() < 0.0;
    sol.a = ldlt.solve(rhs);
    // backward-error test: graded matrices (huge alpha) are fine even though
    // their condition number overflows double precision
    const double backward = (normal * sol.a - rhs).norm() /
                            (normal.cwiseAbs().maxCoeff() * sol.a.norm() + rhs.norm());
    if (ldlt.info() != Eigen::Success || zero_pivot || !sol.a.allFinite() || backward > 1e-8)
      throw ValidationError(
          "solve_regularized: normal matrix is numerically singular; increase alpha");
  }
  sol.residual_norm = (g * sol.a - d).norm();
  sol.seminorm = (l * sol.a).norm();
  return sol;
}

struct LCurvePoint {
  double alpha = 0.0;
  double residual_norm = 0.0;
  double seminorm = 0.0;
  double curvature = 0.0; // signed three-point curvature; endpoints get -inf
};

struct LCurve {
  double selected_alpha = 0.0;
  int selected_index = -1;
  std::vector<LCurvePoint> points;
};

/// Sweep a log-spaced grid of weights, plot (log residual, log seminorm) and
/// pick the corner: the grid point of maximum discrete (three-point, signed)
/// curvature. Ties break toward larger alpha.
inline LCurve select_alpha_lcurve(const Eigen::MatrixXd& g, const Eigen::VectorXd& d,
                                  const Eigen::MatrixXd& l, std::vector<double> alphas) {
  if (alphas.size() < 5)
    throw ValidationError("l-curve: need at least 5 grid points, got " +
                          std::to_string(alphas.size()));
  for (double a : alphas)
    if (!(a > 0.0)) throw ValidationError("l-curve: all grid alphas must be positive");
  std::sort(alphas.begin(), alphas.end());
  alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());
  if (alphas.size() < 5)
    throw ValidationError("l-curve: need at least 5 distinct grid points");

  LCurve curve;
  curve.points.resize(alphas.size());
  for (size_t i = 0; i < alphas.size(); ++i) {
    const RegularizedSolution sol = solve_regularized(g, d, l, alphas[i]);
    curve.points[i] = {alphas[i], sol.residual_norm, sol.seminorm,
                       -std::numeric_limits<double>::infinity()};
  }

  double rmin = curve.points.front().residual_norm, rmax = rmin;
  for (const auto& p : curve.points) {
    rmin = std::min(rmin, p.residual_norm);
    rmax = std::max(rmax, p.residual_norm);
  }
  if (rmax - rmin <= 1e-14 * std::max(rmax, 1e-300))
    throw ValidationError("l-curve: degenerate curve, residual norm does not vary over the grid");

  auto log_clamped = [](double v) { return std::log(std::max(v, 1e-300)); };
  for (size_t i = 1; i + 1 < curve.points.size(); ++i) {
    const double x0 = log_clamped(curve.points[i - 1].residual_norm),
                 y0 = log_clamped(curve.points[i - 1].seminorm),
                 x1 = log_clamped(curve.points[i].residual_norm),
                 y1 = log_clamped(curve.points[i].seminorm),
                 x2 = log_clamped(curve.points[i + 1].residual_norm),
                 y2 = log_clamped(curve.points[i + 1].seminorm);
    const double ax = x1 - x0, ay = y1 - y0, bx = x2 - x1, by = y2 - y1;
    const double cross = ax * by - ay * bx;
    const double la = std::hypot(ax, ay), lb = std::hypot(bx, by),
                 lc = std::hypot(x2 - x0, y2 - y0);
    if (la == 0.0 || lb == 0.0 || lc == 0.0) continue;
    curve.points[i].curvature = 2.0 * cross / (la * lb * lc);
  }

  for (size_t i = 0; i < curve.points.size(); ++i) {
    if (curve.selected_index < 0 ||
        curve.points[i].curvature >= curve.points[curve.selected_index].curvature) {
      if (std::isfinite(curve.points[i].curvature)) curve.selected_index = static_cast<int>(i);
    }
  }
  if (curve.selected_index < 0)
    throw ValidationError("l-curve: no usable corner on the grid");
  curve.selected_alpha = curve.points[curve.selected_index].alpha;
  return curve;
}

inline std::vector<double> logspace(double lo, double hi, int count) {
  if (count < 2 || lo <= 0.0 || hi <= lo)
    throw ValidationError("logspace: need 0 < lo < hi and count >= 2");
  std::vector<double> out(count);
  const double step = (std::log(hi) - std::log(lo)) / (count - 1);
  for (int i = 0; i < count; ++i) out[i] = std::exp(std::log(lo) + step * i);
  return out;
}

} // namespace tetsolve
