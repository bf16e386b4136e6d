#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tetsolve/block_csr.hpp"
#include "tetsolve/geometry.hpp"
#include "tetsolve/vector_batch.hpp"

namespace tetsolve {

/// Per-node inverted 3x3 diagonal blocks. Constrained dofs hold identity.
template <typename T>
struct BlockJacobi {
  std::vector<std::array<T, 9>> inv_blocks;

  int32_t n_nodes() const { return static_cast<int32_t>(inv_blocks.size()); }

  /// z = M^{-1} r, all batch columns.
  void apply(const VectorBatch<T>& r, VectorBatch<T>& z) const {
    if (r.n_nodes != n_nodes())
      throw ValidationError("block jacobi apply: dimension mismatch");
    if (z.n_nodes != r.n_nodes || z.batch != r.batch)
      z = VectorBatch<T>(r.n_nodes, r.batch);
    const int32_t nb = r.batch;
    for (int32_t node = 0; node < n_nodes(); ++node) {
      const auto& m = inv_blocks[node];
      const T* rr = r.data.data() + static_cast<int64_t>(3) * node * nb;
      T* zr = z.data.data() + static_cast<int64_t>(3) * node * nb;
      for (int i = 0; i < 3; ++i)
        for (int32_t b = 0; b < nb; ++b)
          zr[i * nb + b] = static_cast<T>(double(m[3 * i]) * double(rr[b]) +
                                          double(m[3 * i + 1]) * double(rr[nb + b]) +
                                          double(m[3 * i + 2]) * double(rr[2 * nb + b]));
    }
  }
};

namespace detail {

/// Apply constraint semantics to a raw nodal diagonal block, then invert it.
/// Masked axes become identity rows/cols. Throws naming the node if singular.
template <typename T>
inline std::array<T, 9> invert_node_block(double blk[3][3], const uint8_t* dof_mask,
                                          int32_t node) {
  if (dof_mask) {
    for (int i = 0; i < 3; ++i)
      if (dof_mask[i]) {
        for (int j = 0; j < 3; ++j) blk[i][j] = blk[j][i] = 0.0;
        blk[i][i] = 1.0;
      }
  }
  double inv[3][3];
  double scale = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) scale = std::max(scale, std::abs(blk[i][j]));
  if (scale == 0.0 || !invert3(blk, inv, 1e-300))
    throw ValidationError("block jacobi: singular diagonal block at node " +
                          std::to_string(node));
  std::array<T, 9> out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out[3 * i + j] = static_cast<T>(inv[i][j]);
  return out;
}

} // namespace detail

/// Block Jacobi of an assembled block-CSR matrix (constraints are already
/// baked into the matrix as unit rows).
template <typename T>
inline BlockJacobi<T> extract_block_jacobi(const BlockCsrMatrix<T>& a) {
  BlockJacobi<T> m;
  m.inv_blocks.resize(a.n_block_rows);
  for (int32_t r = 0; r < a.n_block_rows; ++r) {
    const auto* blk = a.find_block(r, r);
    double d[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    if (blk)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) d[i][j] = double((*blk)[3 * i + j]);
    m.inv_blocks[r] = detail::invert_node_block<T>(d, nullptr, r);
  }
  return m;
}

} // namespace tetsolve
