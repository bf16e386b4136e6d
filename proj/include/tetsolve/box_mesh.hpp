#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tetsolve/mesh.hpp"

namespace tetsolve {

/// Which box faces carry Dirichlet constraints.
enum class FixedBoundary {
  none,                      // free-floating (testing only)
  bottom_and_sides,          // bottom clamped, sides fixed in their normal direction, top free
  all_clamped,               // every boundary face clamped in all three axes
};

/// Structured box split into hexahedral cells, each cut into six tetrahedra
/// with a globally consistent diagonal. Horizontal layer interfaces split the
/// box into material layers; layer 0 is the TOP layer so a materials table can
/// be listed shallow-to-deep.
struct BoxMeshSpec {
  Vec3 extents = {1.0, 1.0, 1.0};                    // (Lx, Ly, Lz), meters
  std::array<int32_t, 3> divisions = {1, 1, 1};      // cells per axis
  std::vector<double> layer_interfaces;              // z values, strictly increasing, interior to (0, Lz)
  FixedBoundary fixed_boundary = FixedBoundary::bottom_and_sides;
};

inline void validate_spec(const BoxMeshSpec& spec) {
  for (int a = 0; a < 3; ++a) {
    if (spec.extents[a] <= 0.0)
      throw ValidationError("box mesh spec: extents must be positive, got " +
                            std::to_string(spec.extents[a]) + " on axis " + std::to_string(a));
    if (spec.divisions[a] < 1)
      throw ValidationError("box mesh spec: divisions must be >= 1, got " +
                            std::to_string(spec.divisions[a]) + " on axis " + std::to_string(a));
  }
  double prev = 0.0;
  for (double z : spec.layer_interfaces) {
    if (z <= prev || z >= spec.extents[2])
      throw ValidationError("box mesh spec: layer interfaces must be strictly increasing and "
                            "interior to (0, Lz)");
    prev = z;
  }
}

/// Generate the conforming quadratic tetrahedral mesh of the box.
///
/// Each cell is split with the Kuhn decomposition: the six tetrahedra given by
/// the six axis orderings of the path from the low corner to the high corner.
/// All cells use the same orientation, so face diagonals match between
/// neighbours and the mesh is conforming. Vertices are numbered first (lexico
/// by z,y,x), then unique edge midpoints in discovery order.
inline Mesh generate_box_mesh(const BoxMeshSpec& spec) {
  validate_spec(spec);
  const int32_t nx = spec.divisions[0], ny = spec.divisions[1], nz = spec.divisions[2];
  const double hx = spec.extents[0] / nx, hy = spec.extents[1] / ny, hz = spec.extents[2] / nz;

  Mesh m;
  m.vertex_count = (nx + 1) * (ny + 1) * (nz + 1);
  m.coords.reserve(m.vertex_count);
  auto vid = [&](int32_t i, int32_t j, int32_t k) {
    return i + (nx + 1) * (j + (ny + 1) * k);
  };
  for (int32_t k = 0; k <= nz; ++k)
    for (int32_t j = 0; j <= ny; ++j)
      for (int32_t i = 0; i <= nx; ++i)
        m.coords.push_back({i * hx, j * hy, k * hz});

  // Six axis permutations; each walks low corner -> high corner.
  static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                      {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};

  auto layer_of = [&](double zc) {
    // count interfaces below the centroid, then flip so layer 0 is on top
    int below = 0;
    for (double z : spec.layer_interfaces)
      if (zc > z) ++below;
    const int n_layers = static_cast<int>(spec.layer_interfaces.size()) + 1;
    return n_layers - 1 - below;
  };

  const int64_t n_cells = int64_t(nx) * ny * nz;
  m.tets10.reserve(6 * n_cells);
  m.tets4.reserve(6 * n_cells);
  m.material_id.reserve(6 * n_cells);

  for (int32_t k = 0; k < nz; ++k)
    for (int32_t j = 0; j < ny; ++j)
      for (int32_t i = 0; i < nx; ++i) {
        const int32_t base[3] = {i, j, k};
        for (const auto& p : perms) {
          int32_t corner[4][3] = {{base[0], base[1], base[2]}, {}, {}, {}};
          for (int s = 0; s < 3; ++s) {
            for (int a = 0; a < 3; ++a) corner[s + 1][a] = corner[s][a];
            corner[s + 1][p[s]] += 1;
          }
          std::array<int32_t, 4> v = {vid(corner[0][0], corner[0][1], corner[0][2]),
                                      vid(corner[1][0], corner[1][1], corner[1][2]),
                                      vid(corner[2][0], corner[2][1], corner[2][2]),
                                      vid(corner[3][0], corner[3][1], corner[3][2])};
          if (tet_volume(m.coords[v[0]], m.coords[v[1]], m.coords[v[2]], m.coords[v[3]]) < 0.0)
            std::swap(v[2], v[3]);
          std::array<int32_t, 10> t{};
          for (int s = 0; s < 4; ++s) t[s] = v[s];
          m.tets10.push_back(t);
          m.tets4.push_back(v);
          const double zc = (m.coords[v[0]][2] + m.coords[v[1]][2] + m.coords[v[2]][2] +
                             m.coords[v[3]][2]) / 4.0;
          m.material_id.push_back(layer_of(zc));
        }
      }

  // Insert edge midpoint nodes after the vertex block.
  static constexpr int edge_ends[6][2] = {{0, 1}, {1, 2}, {2, 0}, {0, 3}, {1, 3}, {2, 3}};
  for (auto& t : m.tets10) {
    for (int e = 0; e < 6; ++e) {
      int32_t a = t[edge_ends[e][0]], b = t[edge_ends[e][1]];
      std::pair<int32_t, int32_t> key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
      auto it = m.edge_map.find(key);
      int32_t id;
      if (it == m.edge_map.end()) {
        id = m.node_count();
        m.coords.push_back(0.5 * (m.coords[a] + m.coords[b]));
        m.edge_map.emplace(key, id);
      } else {
        id = it->second;
      }
      t[4 + e] = id;
    }
  }

  // Dirichlet set by node coordinate, edge nodes included.
  if (spec.fixed_boundary != FixedBoundary::none) {
    const double tol = 1e-9 * std::max({spec.extents[0], spec.extents[1], spec.extents[2]});
    for (int32_t nidx = 0; nidx < m.node_count(); ++nidx) {
      const Vec3& c = m.coords[nidx];
      const bool on_bottom = std::abs(c[2]) <= tol;
      const bool on_top = std::abs(c[2] - spec.extents[2]) <= tol;
      const bool on_x = std::abs(c[0]) <= tol || std::abs(c[0] - spec.extents[0]) <= tol;
      const bool on_y = std::abs(c[1]) <= tol || std::abs(c[1] - spec.extents[1]) <= tol;
      if (spec.fixed_boundary == FixedBoundary::all_clamped) {
        if (on_bottom || on_top || on_x || on_y)
          for (int8_t a = 0; a < 3; ++a) m.dirichlet.push_back({nidx, a});
        continue;
      }
      if (on_bottom) {
        for (int8_t a = 0; a < 3; ++a) m.dirichlet.push_back({nidx, a});
        continue;
      }
      if (on_x) m.dirichlet.push_back({nidx, 0});
      if (on_y) m.dirichlet.push_back({nidx, 1});
    }
  }
  return m;
}

} // namespace tetsolve
