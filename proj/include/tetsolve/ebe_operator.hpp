#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

#include "tetsolve/block_csr.hpp"
#include "tetsolve/block_jacobi.hpp"
#include "tetsolve/element_stiffness.hpp"
#include "tetsolve/mesh.hpp"
#include "tetsolve/vector_batch.hpp"

namespace tetsolve {

/// Matrix-free element-by-element stiffness operator: f = sum_e Q_e K_e Q_e^T u.
/// Element matrices are recomputed from nodal coordinates and material
/// properties on every product; only per-element vertex coordinates, Lame
/// parameters and connectivity are stored.
///
/// Constrained dofs behave as identity rows: their inputs are zeroed on
/// gather, their output contributions discarded on scatter, and the input
/// value written back.
///
/// The serial path scatters in ascending element order. With workers > 1,
/// elements are partitioned by greedy graph coloring so that no two elements
/// processed concurrently share a node; output is bit-identical for any
/// worker count.
template <typename T>
class EbeOperator {
public:
  EbeOperator() = default;

  /// order 1 builds on the vertex (tet4) view, order 2 on the full tet10 mesh.
  EbeOperator(const Mesh& mesh, int order, const std::vector<Material>& materials,
              std::vector<uint8_t> dof_mask, int workers = 1)
      : order_(order), workers_(std::max(1, workers)), mask_(std::move(dof_mask)) {
    if (order != 1 && order != 2) throw ValidationError("ebe: order must be 1 or 2");
    npe_ = order == 1 ? 4 : 10;
    n_nodes_ = order == 1 ? mesh.vertex_count : mesh.node_count();
    n_elems_ = mesh.element_count();
    if (!mask_.empty() && static_cast<int64_t>(mask_.size()) != 3 * int64_t(n_nodes_))
      throw ValidationError("ebe: dof mask length mismatch");

    conn_.resize(static_cast<size_t>(npe_) * n_elems_);
    vtx_.resize(static_cast<size_t>(12) * n_elems_);
    lame_.resize(static_cast<size_t>(2) * n_elems_);
    for (int32_t e = 0; e < n_elems_; ++e) {
      const int32_t mid = mesh.material_id[e];
      if (mid < 0 || mid >= static_cast<int32_t>(materials.size()))
        throw ValidationError("ebe: element " + std::to_string(e) +
                              " references material " + std::to_string(mid) +
                              " but only " + std::to_string(materials.size()) + " defined");
      lame_[2 * e] = static_cast<T>(materials[mid].lambda);
      lame_[2 * e + 1] = static_cast<T>(materials[mid].mu);
      for (int a = 0; a < npe_; ++a)
        conn_[static_cast<size_t>(npe_) * e + a] =
            order == 1 ? mesh.tets4[e][a] : mesh.tets10[e][a];
      for (int v = 0; v < 4; ++v)
        for (int c = 0; c < 3; ++c)
          vtx_[12 * static_cast<size_t>(e) + 3 * v + c] =
              static_cast<T>(mesh.coords[mesh.tets4[e][v]][c]);
    }
    if (workers_ > 1) build_coloring();
  }

  int32_t n_nodes() const { return n_nodes_; }
  int32_t n_elements() const { return n_elems_; }
  int order() const { return order_; }
  int nodes_per_element() const { return npe_; }
  const std::vector<uint8_t>& mask() const { return mask_; }

  int32_t element_node(int32_t e, int a) const {
    return conn_[static_cast<size_t>(npe_) * e + a];
  }

  /// Recompute the element stiffness into k (row-major, side 3*npe).
  void element_matrix(int32_t e, double* k) const {
    Vec3 v[4];
    const T* vc = vtx_.data() + static_cast<size_t>(12) * e;
    for (int a = 0; a < 4; ++a)
      v[a] = {double(vc[3 * a]), double(vc[3 * a + 1]), double(vc[3 * a + 2])};
    if (order_ == 1)
      detail::tet4_stiffness_kernel(v, double(lame_[2 * e]), double(lame_[2 * e + 1]), k);
    else
      detail::tet10_stiffness_kernel(v, double(lame_[2 * e]), double(lame_[2 * e + 1]), k);
  }

  /// f = A u, all batch columns in one traversal of the elements.
  void apply(const VectorBatch<T>& u, VectorBatch<T>& f) const {
    if (u.n_nodes != n_nodes_) throw ValidationError("ebe apply: dimension mismatch");
    if (f.n_nodes != u.n_nodes || f.batch != u.batch)
      f = VectorBatch<T>(u.n_nodes, u.batch);
    const int32_t nb = u.batch;

    // identity rows for constrained dofs, zero elsewhere
    if (mask_.empty()) {
      f.set_zero();
    } else {
      const int64_t nd = f.n_dofs();
      for (int64_t d = 0; d < nd; ++d) {
        T* fr = f.data.data() + d * nb;
        if (mask_[d]) {
          const T* ur = u.data.data() + d * nb;
          for (int32_t b = 0; b < nb; ++b) fr[b] = ur[b];
        } else {
          for (int32_t b = 0; b < nb; ++b) fr[b] = T(0);
        }
      }
    }

    if (workers_ <= 1) {
      Scratch s(npe_, nb);
      for (int32_t e = 0; e < n_elems_; ++e) process_element(e, u, f, s);
      return;
    }
    // colored schedule: within a color no two elements share a node
    for (size_t c = 0; c + 1 < color_ptr_.size(); ++c) {
      const int32_t lo = color_ptr_[c], hi = color_ptr_[c + 1];
      const int32_t span = hi - lo;
      const int32_t chunk = (span + workers_ - 1) / workers_;
      std::vector<std::thread> pool;
      auto run = [&](int32_t begin, int32_t end) {
        Scratch s(npe_, nb);
        for (int32_t i = begin; i < end; ++i) process_element(color_elems_[i], u, f, s);
      };
      for (int w = 1; w < workers_; ++w) {
        const int32_t b = lo + w * chunk, eend = std::min(hi, b + chunk);
        if (b < eend) pool.emplace_back(run, b, eend);
      }
      run(lo, std::min(hi, lo + chunk));
      for (auto& t : pool) t.join();
    }
  }

private:
  struct Scratch {
    std::vector<double> u_local, acc;
    Scratch(int npe, int32_t nb)
        : u_local(static_cast<size_t>(3) * npe * nb), acc(static_cast<size_t>(3) * npe * nb) {}
  };

  void process_element(int32_t e, const VectorBatch<T>& u, VectorBatch<T>& f,
                       Scratch& s) const {
    const int32_t nb = u.batch;
    const int ndl = 3 * npe_;
    const int32_t* conn = conn_.data() + static_cast<size_t>(npe_) * e;

    for (int a = 0; a < npe_; ++a) {
      const int64_t node = conn[a];
      for (int i = 0; i < 3; ++i) {
        const int64_t dof = 3 * node + i;
        double* dst = s.u_local.data() + static_cast<size_t>(3 * a + i) * nb;
        if (!mask_.empty() && mask_[dof]) {
          for (int32_t b = 0; b < nb; ++b) dst[b] = 0.0;
        } else {
          const T* src = u.data.data() + dof * nb;
          for (int32_t b = 0; b < nb; ++b) dst[b] = double(src[b]);
        }
      }
    }

    double k[900];
    element_matrix(e, k);

    // local product in 64-bit, rounded once on scatter
    std::fill(s.acc.begin(), s.acc.begin() + static_cast<size_t>(ndl) * nb, 0.0);
    for (int r = 0; r < ndl; ++r) {
      double* arow = s.acc.data() + static_cast<size_t>(r) * nb;
      const double* krow = k + static_cast<size_t>(r) * ndl;
      for (int c = 0; c < ndl; ++c) {
        const double krc = krow[c];
        const double* uc = s.u_local.data() + static_cast<size_t>(c) * nb;
        for (int32_t b = 0; b < nb; ++b) arow[b] += krc * uc[b];
      }
    }

    for (int a = 0; a < npe_; ++a) {
      const int64_t node = conn[a];
      for (int i = 0; i < 3; ++i) {
        const int64_t dof = 3 * node + i;
        if (!mask_.empty() && mask_[dof]) continue;
        T* dst = f.data.data() + dof * nb;
        const double* src = s.acc.data() + static_cast<size_t>(3 * a + i) * nb;
        for (int32_t b = 0; b < nb; ++b) dst[b] += static_cast<T>(src[b]);
      }
    }
  }

  void build_coloring() {
    std::vector<std::vector<int32_t>> node_elems(n_nodes_);
    for (int32_t e = 0; e < n_elems_; ++e)
      for (int a = 0; a < npe_; ++a) node_elems[conn_[static_cast<size_t>(npe_) * e + a]].push_back(e);
    std::vector<int32_t> color(n_elems_, -1);
    std::vector<int32_t> forbidden;
    int32_t n_colors = 0;
    for (int32_t e = 0; e < n_elems_; ++e) {
      forbidden.assign(n_colors + 1, 0);
      for (int a = 0; a < npe_; ++a)
        for (int32_t other : node_elems[conn_[static_cast<size_t>(npe_) * e + a]])
          if (color[other] >= 0) forbidden[color[other]] = 1;
      int32_t c = 0;
      while (forbidden[c]) ++c;
      color[e] = c;
      n_colors = std::max(n_colors, c + 1);
    }
    std::vector<int32_t> count(n_colors, 0);
    for (int32_t e = 0; e < n_elems_; ++e) ++count[color[e]];
    color_ptr_.assign(n_colors + 1, 0);
    for (int32_t c = 0; c < n_colors; ++c) color_ptr_[c + 1] = color_ptr_[c] + count[c];
    color_elems_.resize(n_elems_);
    std::vector<int32_t> cursor(color_ptr_.begin(), color_ptr_.end() - 1);
    for (int32_t e = 0; e < n_elems_; ++e) color_elems_[cursor[color[e]]++] = e;
  }

  int order_ = 2;
  int npe_ = 10;
  int workers_ = 1;
  int32_t n_nodes_ = 0;
  int32_t n_elems_ = 0;
  std::vector<int32_t> conn_;
  std::vector<T> vtx_;   // 4 vertex coordinates per element, flattened
  std::vector<T> lame_;  // (lambda, mu) per element
  std::vector<uint8_t> mask_;
  std::vector<int32_t> color_ptr_, color_elems_;
};

/// Assemble the operator's action into an explicit block-CSR matrix
/// (identity rows at constrained dofs, constrained columns dropped).
template <typename T>
inline BlockCsrMatrix<T> assemble_bcsr(const EbeOperator<T>& op) {
  const int npe = op.nodes_per_element();
  const int32_t n = op.n_nodes();
  const auto& mask = op.mask();

  std::vector<std::vector<int32_t>> adj(n);
  for (int32_t e = 0; e < op.n_elements(); ++e)
    for (int a = 0; a < npe; ++a)
      for (int b = 0; b < npe; ++b) adj[op.element_node(e, a)].push_back(op.element_node(e, b));
  BlockCsrMatrix<T> m;
  m.n_block_rows = n;
  m.row_ptr.assign(n + 1, 0);
  for (int32_t r = 0; r < n; ++r) {
    auto& row = adj[r];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    m.row_ptr[r + 1] = m.row_ptr[r] + static_cast<int32_t>(row.size());
  }
  m.col_idx.reserve(m.row_ptr[n]);
  for (int32_t r = 0; r < n; ++r)
    m.col_idx.insert(m.col_idx.end(), adj[r].begin(), adj[r].end());
  std::vector<std::array<double, 9>> acc(m.col_idx.size(), std::array<double, 9>{});

  auto entry_of = [&](int32_t r, int32_t c) {
    auto lo = m.col_idx.begin() + m.row_ptr[r], hi = m.col_idx.begin() + m.row_ptr[r + 1];
    return static_cast<size_t>(std::lower_bound(lo, hi, c) - m.col_idx.begin());
  };

  double k[900];
  for (int32_t e = 0; e < op.n_elements(); ++e) {
    op.element_matrix(e, k);
    for (int a = 0; a < npe; ++a)
      for (int b = 0; b < npe; ++b) {
        const int32_t ga = op.element_node(e, a), gb = op.element_node(e, b);
        auto& blk = acc[entry_of(ga, gb)];
        for (int i = 0; i < 3; ++i) {
          if (!mask.empty() && mask[3 * ga + i]) continue;
          for (int j = 0; j < 3; ++j) {
            if (!mask.empty() && mask[3 * gb + j]) continue;
            blk[3 * i + j] += k[(3 * a + i) * 3 * npe + 3 * b + j];
          }
        }
      }
  }
  if (!mask.empty())
    for (int32_t r = 0; r < n; ++r)
      for (int i = 0; i < 3; ++i)
        if (mask[3 * r + i]) acc[entry_of(r, r)][4 * i] = 1.0;

  m.blocks.resize(acc.size());
  for (size_t idx = 0; idx < acc.size(); ++idx)
    for (int q = 0; q < 9; ++q) m.blocks[idx][q] = static_cast<T>(acc[idx][q]);
  return m;
}

/// Block Jacobi of the EBE operator: nodal diagonal blocks accumulated
/// element-wise, constrained axes set to identity, then inverted.
template <typename T>
inline BlockJacobi<T> extract_block_jacobi(const EbeOperator<T>& op) {
  const int npe = op.nodes_per_element();
  std::vector<std::array<double, 9>> diag(op.n_nodes(), std::array<double, 9>{});
  double k[900];
  for (int32_t e = 0; e < op.n_elements(); ++e) {
    op.element_matrix(e, k);
    for (int a = 0; a < npe; ++a) {
      const int32_t g = op.element_node(e, a);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          diag[g][3 * i + j] += k[(3 * a + i) * 3 * npe + 3 * a + j];
    }
  }
  const auto& mask = op.mask();
  BlockJacobi<T> m;
  m.inv_blocks.resize(op.n_nodes());
  for (int32_t node = 0; node < op.n_nodes(); ++node) {
    double blk[3][3];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) blk[i][j] = diag[node][3 * i + j];
    m.inv_blocks[node] =
        detail::invert_node_block<T>(blk, mask.empty() ? nullptr : &mask[3 * node], node);
  }
  return m;
}

} // namespace tetsolve
