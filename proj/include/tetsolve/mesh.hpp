#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tetsolve/errors.hpp"
#include "tetsolve/geometry.hpp"

namespace tetsolve {

/// One Dirichlet constraint: (node id, axis 0..2).
struct DirichletBc {
  int32_t node = 0;
  int8_t axis = 0;
  friend bool operator==(const DirichletBc&, const DirichletBc&) = default;
};

/// Tetrahedral mesh carrying both the 10-node (quadratic) element view and
/// the derived 4-node (vertex) view. Vertex nodes occupy ids [0, vertex_count);
/// edge midpoint nodes follow, so first-order vectors are prefixes of
/// second-order vectors. Immutable once built.
struct Mesh {
  std::vector<Vec3> coords;                       // all nodes, vertices first
  std::vector<std::array<int32_t, 10>> tets10;    // 4 vertices + 6 edge nodes
  std::vector<std::array<int32_t, 4>> tets4;      // first four entries of tets10
  std::vector<int32_t> material_id;               // per element
  std::map<std::pair<int32_t, int32_t>, int32_t> edge_map; // (vmin,vmax) -> edge node
  int32_t vertex_count = 0;
  std::vector<DirichletBc> dirichlet;

  int32_t node_count() const { return static_cast<int32_t>(coords.size()); }
  int32_t element_count() const { return static_cast<int32_t>(tets10.size()); }

  double element_volume(int32_t e) const {
    const auto& t = tets4[e];
    return tet_volume(coords[t[0]], coords[t[1]], coords[t[2]], coords[t[3]]);
  }
};

/// Lightweight first-order view: same vertex numbering as the parent,
/// elements are the vertex tetrahedra only.
struct P1View {
  const Mesh* parent = nullptr;
  int32_t node_count = 0;
  const std::vector<std::array<int32_t, 4>>* tets4 = nullptr;
};

inline P1View p1_restrict_view(const Mesh& m) {
  return P1View{&m, m.vertex_count, &m.tets4};
}

/// Applying the restriction to a view is the identity.
inline P1View p1_restrict_view(const P1View& v) { return v; }

/// Rebuild edge_map from connectivity. Local edges follow the tet10 node
/// convention: nodes 4..9 sit on edges (0,1),(1,2),(2,0),(0,3),(1,3),(2,3).
inline void rebuild_edge_map(Mesh& m) {
  static constexpr int edge_ends[6][2] = {{0, 1}, {1, 2}, {2, 0}, {0, 3}, {1, 3}, {2, 3}};
  m.edge_map.clear();
  for (const auto& t : m.tets10) {
    for (int k = 0; k < 6; ++k) {
      int32_t a = t[edge_ends[k][0]], b = t[edge_ends[k][1]];
      if (a > b) std::swap(a, b);
      m.edge_map[{a, b}] = t[4 + k];
    }
  }
}

/// Check all structural invariants; throws ValidationError naming the first
/// offending element or node.
inline void validate_mesh(const Mesh& m) {
  static constexpr int edge_ends[6][2] = {{0, 1}, {1, 2}, {2, 0}, {0, 3}, {1, 3}, {2, 3}};
  const int32_t n = m.node_count();
  if (m.vertex_count < 0 || m.vertex_count > n)
    throw ValidationError("mesh: vertex_count out of range");
  if (m.tets4.size() != m.tets10.size() || m.material_id.size() != m.tets10.size())
    throw ValidationError("mesh: inconsistent per-element array sizes");

  double scale = 0.0;
  for (const auto& c : m.coords)
    scale = std::max({scale, std::abs(c[0]), std::abs(c[1]), std::abs(c[2])});
  const double tol = 1e-12 * std::max(scale, 1.0);

  for (int32_t e = 0; e < m.element_count(); ++e) {
    const auto& t = m.tets10[e];
    for (int k = 0; k < 10; ++k)
      if (t[k] < 0 || t[k] >= n)
        throw ValidationError("mesh: element " + std::to_string(e) + " references node " +
                              std::to_string(t[k]) + " out of range");
    for (int k = 0; k < 4; ++k)
      if (m.tets4[e][k] != t[k])
        throw ValidationError("mesh: element " + std::to_string(e) +
                              ": tets4 is not the vertex prefix of tets10");
    if (m.element_volume(e) <= 0.0)
      throw ValidationError("mesh: element " + std::to_string(e) + " has non-positive volume");
    for (int k = 0; k < 6; ++k) {
      const Vec3& a = m.coords[t[edge_ends[k][0]]];
      const Vec3& b = m.coords[t[edge_ends[k][1]]];
      const Vec3& mid = m.coords[t[4 + k]];
      const Vec3 expect = 0.5 * (a + b);
      if (norm(mid - expect) > tol)
        throw ValidationError("mesh: element " + std::to_string(e) + " edge node " +
                              std::to_string(t[4 + k]) + " is not at its edge midpoint");
    }
  }
  for (const auto& bc : m.dirichlet)
    if (bc.node < 0 || bc.node >= n || bc.axis < 0 || bc.axis > 2)
      throw ValidationError("mesh: dirichlet entry out of range");
}

/// Sum of signed element volumes.
inline double total_volume(const Mesh& m) {
  double v = 0.0;
  for (int32_t e = 0; e < m.element_count(); ++e) v += m.element_volume(e);
  return v;
}

/// Face-sharing census: returns {interior faces, boundary faces, worst count}.
/// A conforming mesh has every face shared by one or two elements.
struct FaceCensus {
  int64_t interior = 0;
  int64_t boundary = 0;
  int max_share = 0;
};

inline FaceCensus count_faces(const Mesh& m) {
  std::map<std::array<int32_t, 3>, int> faces;
  static constexpr int face_verts[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
  for (const auto& t : m.tets4) {
    for (const auto& fv : face_verts) {
      std::array<int32_t, 3> key = {t[fv[0]], t[fv[1]], t[fv[2]]};
      std::sort(key.begin(), key.end());
      ++faces[key];
    }
  }
  FaceCensus c;
  for (const auto& [k, cnt] : faces) {
    if (cnt == 1) ++c.boundary;
    else if (cnt == 2) ++c.interior;
    c.max_share = std::max(c.max_share, cnt);
  }
  return c;
}

/// Per-dof constraint mask (3 dofs per node); 1 = constrained.
inline std::vector<uint8_t> dirichlet_mask(const Mesh& m) {
  std::vector<uint8_t> mask(3 * static_cast<size_t>(m.node_count()), 0);
  for (const auto& bc : m.dirichlet) mask[3 * static_cast<size_t>(bc.node) + bc.axis] = 1;
  return mask;
}

} // namespace tetsolve
