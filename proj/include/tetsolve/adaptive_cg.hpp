#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tetsolve/aggregation.hpp"
#include "tetsolve/block_csr.hpp"
#include "tetsolve/block_jacobi.hpp"
#include "tetsolve/ebe_operator.hpp"
#include "tetsolve/mesh.hpp"
#include "tetsolve/pcg.hpp"
#include "tetsolve/prolongation.hpp"
#include "tetsolve/solver_config.hpp"

namespace tetsolve {

/// Everything the multigrid-preconditioned solver needs, built once per
/// stiffness problem and immutable afterwards.
///
/// Level 0 is the second-order grid, level 1 the first-order (vertex) grid,
/// level 2 the algebraic coarsening of level 1. The outer loop runs in 64-bit
/// on the EBE operator; all inner loops run in 32-bit.
struct SolverLevels {
  EbeOperator<double> outer;      // 64-bit second-order EBE (outer loop)
  EbeOperator<float> level0;      // 32-bit second-order EBE
  EbeOperator<float> level1;      // 32-bit first-order EBE
  BlockCsrMatrix<float> level2;   // 32-bit Galerkin coarse matrix
  Prolongation p1;                // level 1 -> level 0 (geometric)
  Prolongation p2;                // level 2 -> level 1 (aggregation)
  BlockJacobi<float> m0, m1, m2;
  std::vector<uint8_t> mask0, mask1, mask2;
  Aggregation aggregation;
};

inline SolverLevels build_solver_levels(const Mesh& mesh,
                                        const std::vector<Material>& materials,
                                        const std::vector<uint8_t>& dof_mask,
                                        const SolverConfig& cfg, int workers = 1) {
  cfg.validate();
  SolverLevels lv;
  lv.mask0 = dof_mask;
  lv.mask1.assign(dof_mask.begin(),
                  dof_mask.begin() + 3 * static_cast<size_t>(mesh.vertex_count));

  lv.outer = EbeOperator<double>(mesh, 2, materials, dof_mask, workers);
  lv.level0 = EbeOperator<float>(mesh, 2, materials, dof_mask, workers);
  lv.level1 = EbeOperator<float>(mesh, 1, materials, lv.mask1, workers);
  lv.p1 = build_geometric_prolongation(mesh);

  EbeOperator<double> k1d(mesh, 1, materials, lv.mask1, 1);
  const BlockCsrMatrix<double> k1 = assemble_bcsr(k1d);
  lv.aggregation = aggregate_p1(k1, cfg.aggregate_target);
  auto [p2, a2d] = build_level2(k1, lv.aggregation, lv.mask1);
  lv.p2 = std::move(p2);
  lv.level2 = cast_bcsr<float>(a2d);
  lv.level2.workers = workers;
  lv.mask2 = coarse_mask(lv.aggregation, lv.mask1);

  lv.m0 = extract_block_jacobi(lv.level0);
  lv.m1 = extract_block_jacobi(lv.level1);
  lv.m2 = extract_block_jacobi(lv.level2);
  return lv;
}

namespace detail {

/// One application of the adaptive preconditioner: block-Jacobi smoothing on
/// the fine grid, restriction through the two coarser grids, inexact PCG at
/// each level with warm starts prolongated upward, all in 32-bit. Returns the
/// preconditioned direction in 64-bit.
struct McycleWork {
  VectorBatch32 r0, u0, r1, u1, r2, u2;
  PcgWork<float> pcg0, pcg1, pcg2;
};

inline void apply_multigrid_preconditioner(const SolverLevels& lv, const SolverConfig& cfg,
                                           const VectorBatch64& r, VectorBatch64& z,
                                           McycleWork& w, SolveReport& rep) {
  using clock = std::chrono::steady_clock;
  cast_batch(r, w.r0);
  lv.m0.apply(w.r0, w.u0);

  lv.p1.restrict_to_coarse(w.r0, w.r1);
  lv.p1.restrict_to_coarse(w.u0, w.u1);
  zero_masked(w.r1, lv.mask1);
  zero_masked(w.u1, lv.mask1);

  lv.p2.restrict_to_coarse(w.r1, w.r2);
  lv.p2.restrict_to_coarse(w.u1, w.u2);
  zero_masked(w.r2, lv.mask2);
  zero_masked(w.u2, lv.mask2);

  auto t0 = clock::now();
  const InnerStats s2 =
      inner_pcg(lv.level2, lv.m2, w.r2, w.u2, cfg.level2.tol, cfg.level2.max_iter, w.pcg2);
  auto t1 = clock::now();
  lv.p2.apply(w.u2, w.u1);
  zero_masked(w.u1, lv.mask1);
  const InnerStats s1 =
      inner_pcg(lv.level1, lv.m1, w.r1, w.u1, cfg.level1.tol, cfg.level1.max_iter, w.pcg1);
  auto t2 = clock::now();
  lv.p1.apply(w.u1, w.u0);
  zero_masked(w.u0, lv.mask0);
  const InnerStats s0 =
      inner_pcg(lv.level0, lv.m0, w.r0, w.u0, cfg.level0.tol, cfg.level0.max_iter, w.pcg0);
  auto t3 = clock::now();

  rep.inner_iterations[2] += s2.iterations;
  rep.inner_iterations[1] += s1.iterations;
  rep.inner_iterations[0] += s0.iterations;
  rep.time_inner_s[2] += std::chrono::duration<double>(t1 - t0).count();
  rep.time_inner_s[1] += std::chrono::duration<double>(t2 - t1).count();
  rep.time_inner_s[0] += std::chrono::duration<double>(t3 - t2).count();

  cast_batch(w.u0, z);
}

/// Shared outer loop: flexible CG in 64-bit whose preconditioner may change
/// between iterations. Direction update keeps p conjugate to the previous
/// direction: beta = -(z, q_prev) / (p_prev, q_prev), which reduces to the
/// standard PCG beta for a fixed preconditioner.
template <typename Precond>
void run_outer_cg(const EbeOperator<double>& k, const VectorBatch64& f, VectorBatch64& u,
                  double tol, int max_iter, Precond&& precond, SolveReport& rep) {
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();
  const int32_t nb = f.batch;
  const size_t nbs = static_cast<size_t>(nb);
  if (u.n_nodes != f.n_nodes || u.batch != f.batch)
    throw ValidationError("solve: initial guess shape mismatch");

  std::vector<double> fnorm2;
  norm2_columns(f, fnorm2);

  VectorBatch64 r(f.n_nodes, nb), q(f.n_nodes, nb), z(f.n_nodes, nb), p(f.n_nodes, nb),
      scratch(f.n_nodes, nb);
  std::vector<double> rnorm2(nbs), rho(nbs), gamma_prev(nbs, 0.0), beta(nbs, 0.0),
      alpha(nbs), gamma(nbs), neg_alpha(nbs), zq(nbs);

  // recompute r = f - K u from scratch; guards against recurrence drift
  auto true_residual = [&]() {
    k.apply(u, scratch);
    sub_columns(f, scratch, r);
    norm2_columns(r, rnorm2);
  };
  auto finalize = [&]() {
    rep.batch_size = nb;
    rep.final_rel_residual.assign(nbs, 0.0);
    for (size_t b = 0; b < nbs; ++b)
      rep.final_rel_residual[b] = fnorm2[b] > 0.0 ? std::sqrt(rnorm2[b] / fnorm2[b])
                                  : (rnorm2[b] > 0.0 ? std::numeric_limits<double>::infinity()
                                                     : 0.0);
    rep.time_total_s = std::chrono::duration<double>(clock::now() - t_start).count();
    rep.time_outer_s = rep.time_total_s - rep.time_inner_s[0] - rep.time_inner_s[1] -
                       rep.time_inner_s[2];
  };

  true_residual();
  const double tol2 = tol * tol;
  rep.batch_size = nb;

  int it = 0;
  bool r_is_true = true;
  bool first_direction = true;
  while (true) {
    double ratio = detail::max_rel_ratio(rnorm2, fnorm2);
    if (std::isnan(ratio)) throw SolverError("solve: non-finite residual");
    if (ratio <= tol2) {
      if (r_is_true) break;
      true_residual();
      r_is_true = true;
      ratio = detail::max_rel_ratio(rnorm2, fnorm2);
      if (ratio <= tol2) break;
    }
    if (it >= max_iter) {
      if (!r_is_true) true_residual();
      rep.outer_iterations = it;
      rep.converged = false;
      finalize();
      throw ConvergenceError("solve: outer loop did not converge within " +
                                 std::to_string(max_iter) + " iterations (max residual " +
                                 std::to_string(std::sqrt(ratio)) + ")",
                             rep);
    }

    precond(r, z);

    if (first_direction) {
      std::fill(beta.begin(), beta.end(), 0.0);
      p = z;
      first_direction = false;
    } else {
      dot_columns(z, q, zq);
      for (size_t b = 0; b < nbs; ++b)
        beta[b] = gamma_prev[b] != 0.0 ? -zq[b] / gamma_prev[b] : 0.0;
      xpby_columns(z, beta, p);
    }
    k.apply(p, q);
    dot_columns(z, r, rho);
    dot_columns(p, q, gamma);
    for (size_t b = 0; b < nbs; ++b) {
      if (gamma[b] > 0.0) {
        alpha[b] = rho[b] / gamma[b];
      } else if (gamma[b] == 0.0 && rho[b] == 0.0) {
        alpha[b] = 0.0;
      } else {
        throw SolverError("solve: breakdown (p,Kp) <= 0 at outer iteration " +
                          std::to_string(it + 1) + ", column " + std::to_string(b));
      }
      neg_alpha[b] = -alpha[b];
    }
    gamma_prev = gamma;
    axpy_columns(neg_alpha, q, r);
    axpy_columns(alpha, p, u);
    r_is_true = false;
    ++it;
    norm2_columns(r, rnorm2);
    if (rep.residual_history_stride > 0 && it % rep.residual_history_stride == 0) {
      std::vector<double> snap(nbs);
      for (size_t b = 0; b < nbs; ++b)
        snap[b] = fnorm2[b] > 0.0 ? std::sqrt(rnorm2[b] / fnorm2[b]) : 0.0;
      rep.residual_history.emplace_back(it, std::move(snap));
    }
  }

  rep.outer_iterations = it;
  rep.converged = true;
  finalize();
}

} // namespace detail

/// Full Algorithm-1 solve: 64-bit adaptive CG over all batch columns with the
/// three-level mixed-precision inner-PCG preconditioner. Convergence uses the
/// maximum over batch columns of ||r|| / ||f||, with the final residual
/// recomputed from scratch. Throws SolverError on breakdown or when
/// outer_max_iter is exceeded.
inline std::pair<VectorBatch64, SolveReport> solve(const SolverLevels& levels,
                                                   const VectorBatch64& f,
                                                   const VectorBatch64& u0,
                                                   const SolverConfig& cfg) {
  cfg.validate();
  std::vector<double> fnorm2;
  norm2_columns(f, fnorm2);
  bool any_nonzero = false;
  for (double v : fnorm2) any_nonzero |= v != 0.0;
  if (!any_nonzero) throw ValidationError("solve: right-hand side has no nonzero column");

  SolveReport rep;
  rep.method = "amg";
  rep.residual_history_stride = cfg.residual_history_stride;
  VectorBatch64 u = u0;
  detail::McycleWork work;
  auto precond = [&](const VectorBatch64& r, VectorBatch64& z) {
    detail::apply_multigrid_preconditioner(levels, cfg, r, z, work, rep);
  };
  detail::run_outer_cg(levels.outer, f, u, cfg.outer_tol, cfg.outer_max_iter, precond, rep);
  return {std::move(u), std::move(rep)};
}

/// Baseline: standard 64-bit conjugate gradients with the 3x3 block-Jacobi
/// preconditioner and EBE products, no multigrid. Same convergence criterion.
inline std::pair<VectorBatch64, SolveReport> solve_pcge(const EbeOperator<double>& k,
                                                        const VectorBatch64& f,
                                                        const VectorBatch64& u0, double tol,
                                                        int max_iter) {
  SolveReport rep;
  rep.method = "pcge";
  rep.inner_precision = "float64";
  BlockJacobi<double> m = extract_block_jacobi(k);
  VectorBatch64 u = u0;
  auto precond = [&](const VectorBatch64& r, VectorBatch64& z) { m.apply(r, z); };
  detail::run_outer_cg(k, f, u, tol, max_iter, precond, rep);
  return {std::move(u), std::move(rep)};
}

} // namespace tetsolve
