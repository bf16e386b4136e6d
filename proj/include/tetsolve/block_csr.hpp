#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <ostream>
#include <thread>
#include <vector>

#include "tetsolve/vector_batch.hpp"

namespace tetsolve {

/// Sparse matrix of dense 3x3 blocks in block compressed row storage.
/// Column indices are strictly increasing within each block row.
template <typename T>
struct BlockCsrMatrix {
  int32_t n_block_rows = 0;
  std::vector<int32_t> row_ptr;            // size n_block_rows + 1
  std::vector<int32_t> col_idx;            // block column per entry
  std::vector<std::array<T, 9>> blocks;    // row-major 3x3 blocks
  int workers = 1;

  int64_t n_blocks() const { return static_cast<int64_t>(col_idx.size()); }

  const std::array<T, 9>* find_block(int32_t r, int32_t c) const {
    for (int32_t e = row_ptr[r]; e < row_ptr[r + 1]; ++e)
      if (col_idx[e] == c) return &blocks[e];
    return nullptr;
  }

  /// f = A u for every batch column in one sweep of the stored blocks.
  void apply(const VectorBatch<T>& u, VectorBatch<T>& f) const {
    if (u.n_nodes != n_block_rows)
      throw ValidationError("bcsr apply: dimension mismatch");
    if (f.n_nodes != u.n_nodes || f.batch != u.batch)
      f = VectorBatch<T>(u.n_nodes, u.batch);
    auto run = [&](int32_t row_begin, int32_t row_end) {
      const int32_t nb = u.batch;
      std::vector<double> acc(static_cast<size_t>(3) * nb);
      for (int32_t r = row_begin; r < row_end; ++r) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int32_t e = row_ptr[r]; e < row_ptr[r + 1]; ++e) {
          const auto& blk = blocks[e];
          const T* uc = u.data.data() + static_cast<int64_t>(3) * col_idx[e] * nb;
          for (int i = 0; i < 3; ++i) {
            const double b0 = blk[3 * i + 0], b1 = blk[3 * i + 1], b2 = blk[3 * i + 2];
            double* a = acc.data() + static_cast<size_t>(i) * nb;
            for (int32_t b = 0; b < nb; ++b)
              a[b] += b0 * double(uc[b]) + b1 * double(uc[b + nb]) + b2 * double(uc[b + 2 * nb]);
          }
        }
        T* fr = f.data.data() + static_cast<int64_t>(3) * r * nb;
        for (int64_t i = 0; i < static_cast<int64_t>(3) * nb; ++i) fr[i] = static_cast<T>(acc[i]);
      }
    };
    if (workers <= 1 || n_block_rows < 256) {
      run(0, n_block_rows);
      return;
    }
    std::vector<std::thread> pool;
    const int32_t chunk = (n_block_rows + workers - 1) / workers;
    for (int w = 1; w < workers; ++w) {
      const int32_t lo = w * chunk, hi = std::min(n_block_rows, lo + chunk);
      if (lo < hi) pool.emplace_back(run, lo, hi);
    }
    run(0, std::min(n_block_rows, chunk));
    for (auto& t : pool) t.join();
  }
};

template <typename To, typename From>
inline BlockCsrMatrix<To> cast_bcsr(const BlockCsrMatrix<From>& a) {
  BlockCsrMatrix<To> out;
  out.n_block_rows = a.n_block_rows;
  out.row_ptr = a.row_ptr;
  out.col_idx = a.col_idx;
  out.workers = a.workers;
  out.blocks.resize(a.blocks.size());
  for (size_t e = 0; e < a.blocks.size(); ++e)
    for (int k = 0; k < 9; ++k) out.blocks[e][k] = static_cast<To>(a.blocks[e][k]);
  return out;
}

/// MatrixMarket coordinate export (debugging aid).
template <typename T>
inline void write_matrix_market(const BlockCsrMatrix<T>& a, std::ostream& os) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  int64_t nnz = 0;
  for (int64_t e = 0; e < a.n_blocks(); ++e)
    for (int k = 0; k < 9; ++k)
      if (a.blocks[e][k] != T(0)) ++nnz;
  os << 3 * a.n_block_rows << ' ' << 3 * a.n_block_rows << ' ' << nnz << '\n';
  for (int32_t r = 0; r < a.n_block_rows; ++r)
    for (int32_t e = a.row_ptr[r]; e < a.row_ptr[r + 1]; ++e)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          if (a.blocks[e][3 * i + j] != T(0))
            os << 3 * r + i + 1 << ' ' << 3 * a.col_idx[e] + j + 1 << ' '
               << double(a.blocks[e][3 * i + j]) << '\n';
}

} // namespace tetsolve
