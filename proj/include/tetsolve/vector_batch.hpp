#pragma once

#include <cstdint>
#include <cstring>
#include <limits>
#include <vector>

#include "tetsolve/errors.hpp"

namespace tetsolve {

/// A batch of B nodal vectors (3 dofs per node) stored with the batch index
/// innermost: entry (dof, b) lives at data[dof * B + b]. The contiguous batch
/// stride is what lets one operator sweep serve all right-hand sides.
template <typename T>
struct VectorBatch {
  int32_t n_nodes = 0;
  int32_t batch = 0;
  std::vector<T> data;

  VectorBatch() = default;
  VectorBatch(int32_t nodes, int32_t b) : n_nodes(nodes), batch(b) {
    data.assign(static_cast<size_t>(3) * nodes * b, T(0));
  }

  int64_t n_dofs() const { return static_cast<int64_t>(3) * n_nodes; }
  T& at(int64_t dof, int32_t b) { return data[dof * batch + b]; }
  T at(int64_t dof, int32_t b) const { return data[dof * batch + b]; }

  void set_zero() { std::memset(data.data(), 0, data.size() * sizeof(T)); }
};

using VectorBatch64 = VectorBatch<double>;
using VectorBatch32 = VectorBatch<float>;

template <typename T>
inline void check_same_shape(const VectorBatch<T>& a, const VectorBatch<T>& b,
                             const char* what) {
  if (a.n_nodes != b.n_nodes || a.batch != b.batch)
    throw ValidationError(std::string(what) + ": vector batch shape mismatch");
}

template <typename From, typename To>
inline void cast_batch(const VectorBatch<From>& src, VectorBatch<To>& dst) {
  if (dst.n_nodes != src.n_nodes || dst.batch != src.batch)
    dst = VectorBatch<To>(src.n_nodes, src.batch);
  const size_t n = src.data.size();
  for (size_t i = 0; i < n; ++i) dst.data[i] = static_cast<To>(src.data[i]);
}

/// Per-column dot products, accumulated in 64-bit regardless of T.
template <typename T>
inline void dot_columns(const VectorBatch<T>& x, const VectorBatch<T>& y,
                        std::vector<double>& out) {
  check_same_shape(x, y, "dot_columns");
  const int32_t nb = x.batch;
  out.assign(nb, 0.0);
  const int64_t nd = x.n_dofs();
  for (int64_t d = 0; d < nd; ++d) {
    const T* xr = x.data.data() + d * nb;
    const T* yr = y.data.data() + d * nb;
    for (int32_t b = 0; b < nb; ++b) out[b] += double(xr[b]) * double(yr[b]);
  }
}

template <typename T>
inline void norm2_columns(const VectorBatch<T>& x, std::vector<double>& out) {
  dot_columns(x, x, out);
}

/// y += alpha[b] * x, per column.
template <typename T>
inline void axpy_columns(const std::vector<double>& alpha, const VectorBatch<T>& x,
                         VectorBatch<T>& y) {
  check_same_shape(x, y, "axpy_columns");
  const int32_t nb = x.batch;
  const int64_t nd = x.n_dofs();
  for (int64_t d = 0; d < nd; ++d) {
    const T* xr = x.data.data() + d * nb;
    T* yr = y.data.data() + d * nb;
    for (int32_t b = 0; b < nb; ++b) yr[b] += static_cast<T>(alpha[b]) * xr[b];
  }
}

/// p = z + beta[b] * p, per column.
template <typename T>
inline void xpby_columns(const VectorBatch<T>& z, const std::vector<double>& beta,
                         VectorBatch<T>& p) {
  check_same_shape(z, p, "xpby_columns");
  const int32_t nb = z.batch;
  const int64_t nd = z.n_dofs();
  for (int64_t d = 0; d < nd; ++d) {
    const T* zr = z.data.data() + d * nb;
    T* pr = p.data.data() + d * nb;
    for (int32_t b = 0; b < nb; ++b) pr[b] = zr[b] + static_cast<T>(beta[b]) * pr[b];
  }
}

/// out = a - b.
template <typename T>
inline void sub_columns(const VectorBatch<T>& a, const VectorBatch<T>& b, VectorBatch<T>& out) {
  check_same_shape(a, b, "sub_columns");
  if (out.n_nodes != a.n_nodes || out.batch != a.batch)
    out = VectorBatch<T>(a.n_nodes, a.batch);
  for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] - b.data[i];
}

/// Zero all entries of constrained dofs (mask is per dof, 1 = constrained).
template <typename T>
inline void zero_masked(VectorBatch<T>& x, const std::vector<uint8_t>& mask) {
  if (mask.empty()) return;
  const int32_t nb = x.batch;
  const int64_t nd = x.n_dofs();
  for (int64_t d = 0; d < nd; ++d)
    if (mask[d]) {
      T* xr = x.data.data() + d * nb;
      for (int32_t b = 0; b < nb; ++b) xr[b] = T(0);
    }
}

/// Copy one batch column into a flat vector.
template <typename T>
inline std::vector<T> extract_column(const VectorBatch<T>& x, int32_t b) {
  std::vector<T> out(x.n_dofs());
  for (int64_t d = 0; d < x.n_dofs(); ++d) out[d] = x.at(d, b);
  return out;
}

template <typename T>
inline void insert_column(VectorBatch<T>& x, int32_t b, const std::vector<T>& col) {
  if (static_cast<int64_t>(col.size()) != x.n_dofs())
    throw ValidationError("insert_column: length mismatch");
  for (int64_t d = 0; d < x.n_dofs(); ++d) x.at(d, b) = col[d];
}

template <typename T>
inline bool all_finite(const VectorBatch<T>& x) {
  for (T v : x.data)
    if (!std::isfinite(double(v))) return false;
  return true;
}

} // namespace tetsolve
