#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "tetsolve/block_jacobi.hpp"
#include "tetsolve/solver_config.hpp"
#include "tetsolve/vector_batch.hpp"

namespace tetsolve {

struct InnerStats {
  int iterations = 0;
  bool converged = false;
};

/// Workspaces for one preconditioned CG run; reusable across calls of the
/// same shape.
template <typename T>
struct PcgWork {
  VectorBatch<T> e, z, p, q;
};

namespace detail {

/// Per-column ratio used for termination: ||num||^2 / ||den||^2 compared
/// against tol^2, i.e. tolerances bound the relative residual norm. Columns
/// with a zero reference are converged when their own norm is zero.
inline double max_rel_ratio(const std::vector<double>& num2, const std::vector<double>& den2) {
  double worst = 0.0;
  for (size_t b = 0; b < num2.size(); ++b) {
    if (den2[b] == 0.0) {
      if (num2[b] != 0.0) return std::numeric_limits<double>::infinity();
      continue;
    }
    worst = std::max(worst, num2[b] / den2[b]);
  }
  return worst;
}

} // namespace detail

/// Standard preconditioned conjugate gradients on a batch of columns, used as
/// the inner loop of every level. All vectors carry the operator's precision;
/// reductions accumulate in 64-bit. Per-column scalars; termination when the
/// maximum over columns of ||e|| / ||r|| drops to tol, or after max_iter
/// update steps. u enters as the warm start and leaves as the solution.
/// Hitting max_iter is normal operation, not a failure.
template <typename Op, typename T>
InnerStats inner_pcg(const Op& a, const BlockJacobi<T>& m, const VectorBatch<T>& r,
                     VectorBatch<T>& u, double tol, int max_iter, PcgWork<T>& w) {
  if (max_iter < 1) throw ValidationError("inner_pcg: max_iter must be >= 1");
  const int32_t nb = r.batch;
  const size_t nbs = static_cast<size_t>(nb);

  a.apply(u, w.e);                       // e = r - A u
  sub_columns(r, w.e, w.e);

  std::vector<double> rnorm2, enorm2, rho_a(nbs, 0.0), rho_b(nbs, 0.0), beta(nbs, 0.0),
      gamma(nbs, 0.0), alpha(nbs, 0.0);
  norm2_columns(r, rnorm2);
  norm2_columns(w.e, enorm2);

  InnerStats stats;
  const double tol2 = tol * tol;
  double ratio = detail::max_rel_ratio(enorm2, rnorm2);
  if (std::isnan(ratio)) throw SolverError("inner_pcg: non-finite initial residual");
  while (ratio > tol2 && stats.iterations < max_iter) {
    m.apply(w.e, w.z);
    dot_columns(w.z, w.e, rho_a);
    if (stats.iterations == 0) {
      std::fill(beta.begin(), beta.end(), 0.0);
      w.p = w.z;
    } else {
      for (size_t b = 0; b < nbs; ++b) beta[b] = rho_b[b] != 0.0 ? rho_a[b] / rho_b[b] : 0.0;
      xpby_columns(w.z, beta, w.p);
    }
    a.apply(w.p, w.q);
    dot_columns(w.p, w.q, gamma);
    bool stagnated = false;
    for (size_t b = 0; b < nbs; ++b) {
      if (gamma[b] > 0.0) {
        alpha[b] = rho_a[b] / gamma[b];
        continue;
      }
      if (gamma[b] == 0.0 && rho_a[b] == 0.0) {
        alpha[b] = 0.0; // converged or zero column: freeze
        continue;
      }
      // (p, Ap) <= 0: either true indefiniteness or round-off stagnation.
      // Stagnation shows as |gamma| vanishing against ||p|| ||Ap||.
      std::vector<double> pn, qn;
      norm2_columns(w.p, pn);
      norm2_columns(w.q, qn);
      const double scale = std::sqrt(pn[b]) * std::sqrt(qn[b]);
      constexpr double eps16 = 16.0 * double(std::numeric_limits<T>::epsilon());
      if (std::abs(gamma[b]) <= eps16 * scale) {
        alpha[b] = 0.0;
        stagnated = true;
        continue;
      }
      throw SolverError("inner_pcg: breakdown (p,Ap) <= 0 at iteration " +
                        std::to_string(stats.iterations + 1) + ", column " +
                        std::to_string(b));
    }
    if (stagnated) break;
    rho_b = rho_a;
    std::vector<double> neg_alpha(nbs);
    for (size_t b = 0; b < nbs; ++b) neg_alpha[b] = -alpha[b];
    axpy_columns(neg_alpha, w.q, w.e);
    axpy_columns(alpha, w.p, u);
    ++stats.iterations;
    norm2_columns(w.e, enorm2);
    ratio = detail::max_rel_ratio(enorm2, rnorm2);
    if (std::isnan(ratio))
      throw SolverError("inner_pcg: non-finite residual at iteration " +
                        std::to_string(stats.iterations));
  }
  stats.converged = ratio <= tol2;
  return stats;
}

} // namespace tetsolve
