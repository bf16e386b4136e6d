#pragma once

#include <cstdint>
#include <vector>

#include "tetsolve/mesh.hpp"
#include "tetsolve/vector_batch.hpp"

namespace tetsolve {

/// Sparse nodal mapping from a coarse grid to a fine grid; the same weights
/// apply to all three axes of a node. Restriction is exactly the transpose.
struct Prolongation {
  enum class Kind { geometric_p1_to_p2, aggregation_l2_to_l1 };

  Kind kind = Kind::geometric_p1_to_p2;
  int32_t n_fine_nodes = 0;
  int32_t n_coarse_nodes = 0;
  std::vector<int32_t> row_ptr;  // per fine node
  std::vector<int32_t> cols;     // coarse node ids
  std::vector<double> weights;

  /// fine = P coarse
  template <typename T>
  void apply(const VectorBatch<T>& coarse, VectorBatch<T>& fine) const {
    if (coarse.n_nodes != n_coarse_nodes)
      throw ValidationError("prolongation apply: coarse dimension mismatch");
    if (fine.n_nodes != n_fine_nodes || fine.batch != coarse.batch)
      fine = VectorBatch<T>(n_fine_nodes, coarse.batch);
    const int32_t nb = coarse.batch;
    for (int32_t fn = 0; fn < n_fine_nodes; ++fn) {
      T* out = fine.data.data() + static_cast<int64_t>(3) * fn * nb;
      for (int64_t i = 0; i < 3 * static_cast<int64_t>(nb); ++i) out[i] = T(0);
      for (int32_t e = row_ptr[fn]; e < row_ptr[fn + 1]; ++e) {
        const T w = static_cast<T>(weights[e]);
        const T* in = coarse.data.data() + static_cast<int64_t>(3) * cols[e] * nb;
        for (int i = 0; i < 3; ++i)
          for (int32_t b = 0; b < nb; ++b) out[i * nb + b] += w * in[i * nb + b];
      }
    }
  }

  /// coarse = P^T fine
  template <typename T>
  void restrict_to_coarse(const VectorBatch<T>& fine, VectorBatch<T>& coarse) const {
    if (fine.n_nodes != n_fine_nodes)
      throw ValidationError("prolongation restrict: fine dimension mismatch");
    if (coarse.n_nodes != n_coarse_nodes || coarse.batch != fine.batch)
      coarse = VectorBatch<T>(n_coarse_nodes, fine.batch);
    coarse.set_zero();
    const int32_t nb = fine.batch;
    for (int32_t fn = 0; fn < n_fine_nodes; ++fn) {
      const T* in = fine.data.data() + static_cast<int64_t>(3) * fn * nb;
      for (int32_t e = row_ptr[fn]; e < row_ptr[fn + 1]; ++e) {
        const T w = static_cast<T>(weights[e]);
        T* out = coarse.data.data() + static_cast<int64_t>(3) * cols[e] * nb;
        for (int i = 0; i < 3; ++i)
          for (int32_t b = 0; b < nb; ++b) out[i * nb + b] += w * in[i * nb + b];
      }
    }
  }
};

/// Geometric transfer between the first-order (vertex) grid and the
/// second-order grid: identity on vertex nodes, averaging of the two edge
/// endpoints on edge nodes. Every row sums to one.
inline Prolongation build_geometric_prolongation(const Mesh& mesh) {
  Prolongation p;
  p.kind = Prolongation::Kind::geometric_p1_to_p2;
  p.n_fine_nodes = mesh.node_count();
  p.n_coarse_nodes = mesh.vertex_count;
  p.row_ptr.assign(p.n_fine_nodes + 1, 0);

  // endpoints per edge node; edge nodes may appear in several elements but
  // carry the same endpoints (the mesh midpoint invariant guarantees it)
  std::vector<std::array<int32_t, 2>> ends(p.n_fine_nodes, {-1, -1});
  for (const auto& [key, mid] : mesh.edge_map) ends[mid] = {key.first, key.second};

  for (int32_t fn = 0; fn < p.n_fine_nodes; ++fn)
    p.row_ptr[fn + 1] = p.row_ptr[fn] + (fn < mesh.vertex_count ? 1 : 2);
  p.cols.resize(p.row_ptr.back());
  p.weights.resize(p.row_ptr.back());
  for (int32_t fn = 0; fn < p.n_fine_nodes; ++fn) {
    if (fn < mesh.vertex_count) {
      p.cols[p.row_ptr[fn]] = fn;
      p.weights[p.row_ptr[fn]] = 1.0;
    } else {
      if (ends[fn][0] < 0)
        throw ValidationError("geometric prolongation: edge node " + std::to_string(fn) +
                              " not present in edge map");
      p.cols[p.row_ptr[fn]] = ends[fn][0];
      p.cols[p.row_ptr[fn] + 1] = ends[fn][1];
      p.weights[p.row_ptr[fn]] = 0.5;
      p.weights[p.row_ptr[fn] + 1] = 0.5;
    }
  }
  return p;
}

} // namespace tetsolve
