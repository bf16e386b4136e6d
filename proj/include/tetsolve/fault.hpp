#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tetsolve/ebe_operator.hpp"
#include "tetsolve/mesh.hpp"
#include "tetsolve/vector_batch.hpp"

namespace tetsolve {

/// A fault face: one interior mesh triangle (3 vertices + its 3 edge nodes,
/// base-mesh numbering) with its unit normal, strike and dip vectors.
/// strike is horizontal in the fault plane, dip points down-dip, and
/// normal = strike x dip orientation is right-handed.
struct FaultFace {
  std::array<int32_t, 3> verts{};
  std::array<int32_t, 3> edges{};
  Vec3 normal{}, strike{}, dip{};
};

/// One duplicated fault node. The minus-side copy keeps a renumbered original
/// id, the plus-side copy is new; both are geometrically coincident.
struct SplitNode {
  int32_t base = 0;   // id in the unsplit mesh
  int32_t minus = 0;  // id in the split mesh
  int32_t plus = 0;   // id in the split mesh
  Vec3 coord{}, strike{}, dip{};
};

struct FaultPatch {
  std::vector<FaultFace> faces;
  std::vector<SplitNode> split_nodes;
  std::vector<int32_t> to_base; // split-mesh node id -> base-mesh node id
};

/// Fault definition file:
///   TSFAULT 1
///   faces F
///   F lines "v0 v1 v2" (base-mesh vertex ids)
inline std::vector<std::array<int32_t, 3>> read_fault_faces(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open fault file: " + path);
  std::string line;
  long lineno = 0;
  auto next = [&]() {
    if (!std::getline(is, line)) throw ParseError(path, lineno + 1, "unexpected end of file");
    ++lineno;
    return std::istringstream(line);
  };
  {
    auto ls = next();
    std::string magic;
    int ver = 0;
    ls >> magic >> ver;
    if (magic != "TSFAULT" || ver != 1) throw ParseError(path, lineno, "expected 'TSFAULT 1'");
  }
  int64_t n = -1;
  {
    auto ls = next();
    std::string k;
    ls >> k >> n;
    if (k != "faces" || ls.fail() || n < 1) throw ParseError(path, lineno, "expected 'faces F'");
  }
  std::vector<std::array<int32_t, 3>> out(n);
  for (int64_t i = 0; i < n; ++i) {
    auto ls = next();
    ls >> out[i][0] >> out[i][1] >> out[i][2];
    if (ls.fail()) throw ParseError(path, lineno, "expected 3 vertex ids");
  }
  return out;
}

inline void write_fault_faces(const std::vector<std::array<int32_t, 3>>& faces,
                              const std::string& path);

/// Collect the interior triangles lying on the plane {axis = coord} whose
/// vertices fall inside the closed box [lo, hi]. The standard way to carve a
/// mesh-aligned rectangular fault out of a box mesh.
inline std::vector<std::array<int32_t, 3>> find_plane_fault_faces(const Mesh& mesh, int axis,
                                                                  double coord, const Vec3& lo,
                                                                  const Vec3& hi) {
  if (axis < 0 || axis > 2) throw ValidationError("fault plane: axis must be 0..2");
  double scale = std::abs(coord);
  for (const auto& c : mesh.coords)
    scale = std::max({scale, std::abs(c[0]), std::abs(c[1]), std::abs(c[2])});
  const double tol = 1e-9 * std::max(scale, 1.0);

  auto on_plane = [&](int32_t v) {
    const Vec3& c = mesh.coords[v];
    if (std::abs(c[axis] - coord) > tol) return false;
    for (int a = 0; a < 3; ++a)
      if (c[a] < lo[a] - tol || c[a] > hi[a] + tol) return false;
    return true;
  };

  std::map<std::array<int32_t, 3>, int> counts;
  static constexpr int face_verts[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
  for (const auto& t : mesh.tets4)
    for (const auto& fv : face_verts) {
      std::array<int32_t, 3> key = {t[fv[0]], t[fv[1]], t[fv[2]]};
      if (!on_plane(key[0]) || !on_plane(key[1]) || !on_plane(key[2])) continue;
      std::sort(key.begin(), key.end());
      ++counts[key];
    }
  std::vector<std::array<int32_t, 3>> out;
  for (const auto& [key, cnt] : counts)
    if (cnt == 2) out.push_back(key);
  if (out.empty())
    throw ValidationError("fault plane: no interior faces found on the requested plane");
  return out;
}

namespace detail {

inline void face_frame(const Vec3& a, const Vec3& b, const Vec3& c, Vec3& normal, Vec3& strike,
                       Vec3& dip) {
  normal = normalized(cross(b - a, c - a));
  const Vec3 up = {0.0, 0.0, 1.0};
  Vec3 s = cross(up, normal);
  if (norm(s) < 1e-12) s = {1.0, 0.0, 0.0}; // horizontal fault: pick x as strike
  strike = normalized(s);
  dip = cross(strike, normal); // in-plane, pointing down-dip
}

} // namespace detail

/// Duplicate every node of the fault surface (vertices and edge nodes),
/// point plus-side elements at the plus copies and return the renumbered mesh
/// (vertices still before edge nodes) together with the split table.
///
/// The surface must be an interior manifold: every fault face adjacent to
/// exactly two elements, no fault node carrying a Dirichlet constraint.
inline std::pair<Mesh, FaultPatch> split_nodes(const Mesh& mesh,
                                               const std::vector<std::array<int32_t, 3>>& fault_tris) {
  if (fault_tris.empty()) throw ValidationError("split_nodes: empty fault surface");

  FaultPatch patch;
  patch.faces.reserve(fault_tris.size());

  // resolve faces, orient normals consistently with the first face
  std::set<int32_t> fault_vert_set, fault_node_set;
  for (const auto& tri : fault_tris) {
    FaultFace f;
    f.verts = tri;
    for (int32_t v : tri) {
      if (v < 0 || v >= mesh.vertex_count)
        throw ValidationError("split_nodes: fault vertex " + std::to_string(v) +
                              " is not a mesh vertex");
      fault_vert_set.insert(v);
    }
    for (int k = 0; k < 3; ++k) {
      int32_t a = tri[k], b = tri[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      auto it = mesh.edge_map.find({a, b});
      if (it == mesh.edge_map.end())
        throw ValidationError("split_nodes: fault triangle edge (" + std::to_string(a) + "," +
                              std::to_string(b) + ") is not a mesh edge");
      f.edges[k] = it->second;
    }
    detail::face_frame(mesh.coords[tri[0]], mesh.coords[tri[1]], mesh.coords[tri[2]], f.normal,
                       f.strike, f.dip);
    patch.faces.push_back(f);
  }
  const Vec3 ref_normal = patch.faces[0].normal;
  for (auto& f : patch.faces)
    if (dot(f.normal, ref_normal) < 0.0) {
      std::swap(f.verts[1], f.verts[2]);
      detail::face_frame(mesh.coords[f.verts[0]], mesh.coords[f.verts[1]],
                         mesh.coords[f.verts[2]], f.normal, f.strike, f.dip);
    }
  for (const auto& f : patch.faces) {
    for (int32_t v : f.verts) fault_node_set.insert(v);
    for (int32_t e : f.edges) fault_node_set.insert(e);
  }

  // no Dirichlet constraint may touch the fault
  for (const auto& bc : mesh.dirichlet)
    if (fault_node_set.count(bc.node))
      throw ValidationError("split_nodes: fault face adjacent to a Dirichlet boundary (node " +
                            std::to_string(bc.node) + ")");

  // each fault face must be interior: shared by exactly two elements
  std::map<std::array<int32_t, 3>, std::vector<int32_t>> face_elems;
  static constexpr int face_verts[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
  for (int32_t e = 0; e < mesh.element_count(); ++e)
    for (const auto& fv : face_verts) {
      std::array<int32_t, 3> key = {mesh.tets4[e][fv[0]], mesh.tets4[e][fv[1]],
                                    mesh.tets4[e][fv[2]]};
      std::sort(key.begin(), key.end());
      if (!fault_vert_set.count(key[0]) || !fault_vert_set.count(key[1]) ||
          !fault_vert_set.count(key[2]))
        continue;
      face_elems[key].push_back(e);
    }
  for (const auto& f : patch.faces) {
    std::array<int32_t, 3> key = f.verts;
    std::sort(key.begin(), key.end());
    auto it = face_elems.find(key);
    if (it == face_elems.end() || it->second.size() != 2)
      throw ValidationError("split_nodes: fault face (" + std::to_string(f.verts[0]) + "," +
                            std::to_string(f.verts[1]) + "," + std::to_string(f.verts[2]) +
                            ") is not an interior manifold face");
  }

  // plane offset for side classification (mesh-aligned planar surface)
  const double plane_d = dot(ref_normal, mesh.coords[patch.faces[0].verts[0]]);

  // per-node frames averaged over incident faces
  std::map<int32_t, Vec3> node_strike, node_dip;
  for (const auto& f : patch.faces)
    for (int k = 0; k < 3; ++k)
      for (int32_t nd : {f.verts[k], f.edges[k]}) {
        auto& s = node_strike[nd];
        auto& d = node_dip[nd];
        s = s + f.strike;
        d = d + f.dip;
      }

  // elements incident to fault nodes, classified by centroid side
  std::vector<int8_t> elem_side(mesh.element_count(), 0); // +1 plus, -1 minus, 0 untouched
  for (int32_t e = 0; e < mesh.element_count(); ++e) {
    bool touches = false;
    for (int k = 0; k < 10 && !touches; ++k)
      touches = fault_node_set.count(mesh.tets10[e][k]) != 0;
    if (!touches) continue;
    Vec3 centroid = {0, 0, 0};
    for (int k = 0; k < 4; ++k) centroid = centroid + mesh.coords[mesh.tets4[e][k]];
    centroid = 0.25 * centroid;
    const double s = dot(ref_normal, centroid) - plane_d;
    if (s == 0.0)
      throw ValidationError("split_nodes: element " + std::to_string(e) +
                            " centroid lies on the fault plane; cannot classify side");
    elem_side[e] = s > 0.0 ? int8_t(1) : int8_t(-1);
  }

  // renumber: [orig verts][dup verts][orig edges][dup edges]
  std::vector<int32_t> dup_verts, dup_edges;
  for (int32_t nd : fault_node_set)
    (nd < mesh.vertex_count ? dup_verts : dup_edges).push_back(nd);
  const int32_t ndv = static_cast<int32_t>(dup_verts.size());
  const int32_t n_old_nodes = mesh.node_count();

  auto renum = [&](int32_t old_id) {
    return old_id < mesh.vertex_count ? old_id : old_id + ndv;
  };
  std::map<int32_t, int32_t> plus_of; // base id -> plus copy id (split numbering)
  for (size_t i = 0; i < dup_verts.size(); ++i)
    plus_of[dup_verts[i]] = mesh.vertex_count + static_cast<int32_t>(i);
  const int32_t edge_dup_base = n_old_nodes + ndv;
  for (size_t i = 0; i < dup_edges.size(); ++i)
    plus_of[dup_edges[i]] = edge_dup_base + static_cast<int32_t>(i);

  Mesh out;
  out.vertex_count = mesh.vertex_count + ndv;
  out.coords.resize(n_old_nodes + ndv + static_cast<int32_t>(dup_edges.size()));
  patch.to_base.assign(out.coords.size(), -1);
  for (int32_t nd = 0; nd < n_old_nodes; ++nd) {
    out.coords[renum(nd)] = mesh.coords[nd];
    patch.to_base[renum(nd)] = nd;
  }
  for (const auto& [base, plus] : plus_of) {
    out.coords[plus] = mesh.coords[base];
    patch.to_base[plus] = base;
  }

  out.tets10.resize(mesh.element_count());
  out.tets4.resize(mesh.element_count());
  out.material_id = mesh.material_id;
  for (int32_t e = 0; e < mesh.element_count(); ++e) {
    for (int k = 0; k < 10; ++k) {
      const int32_t old = mesh.tets10[e][k];
      int32_t nid = renum(old);
      if (elem_side[e] > 0 && fault_node_set.count(old)) nid = plus_of[old];
      out.tets10[e][k] = nid;
    }
    for (int k = 0; k < 4; ++k) out.tets4[e][k] = out.tets10[e][k];
  }
  for (const auto& bc : mesh.dirichlet) out.dirichlet.push_back({renum(bc.node), bc.axis});
  rebuild_edge_map(out);

  patch.split_nodes.reserve(fault_node_set.size());
  for (int32_t base : fault_node_set) {
    SplitNode sn;
    sn.base = base;
    sn.minus = renum(base);
    sn.plus = plus_of[base];
    sn.coord = mesh.coords[base];
    sn.strike = normalized(node_strike[base]);
    sn.dip = normalized(node_dip[base]);
    patch.split_nodes.push_back(sn);
  }

  // faces keep base-mesh numbering for basis evaluation and reporting
  return {std::move(out), std::move(patch)};
}

enum class SlipDirection { dip = 0, strike = 1 };

/// Compactly supported bell built from the quadratic B-spline: value 1 at the
/// center, smooth decay to 0 at the radius. Evaluated at every split node.
struct UnitSlip {
  Vec3 center{};
  SlipDirection direction = SlipDirection::dip;
  double radius = 0.0;
  std::vector<double> magnitude; // per patch.split_nodes entry, in [0, 1]
};

/// Quadratic B-spline bell profile, normalized to 1 at s = 0 and supported on
/// s in [0, 1).
inline double bspline_bell(double s) {
  const double t = 1.5 * std::abs(s);
  double v = 0.0;
  if (t <= 0.5) v = 0.75 - t * t;
  else if (t <= 1.5) v = 0.5 * (1.5 - t) * (1.5 - t);
  return v / 0.75;
}

inline UnitSlip unit_slip_basis(const FaultPatch& patch, const Mesh& base_mesh,
                                const Vec3& center, SlipDirection direction, double radius) {
  if (radius <= 0.0) throw ValidationError("unit_slip_basis: radius must be positive");
  if (patch.faces.empty()) throw ValidationError("unit_slip_basis: empty fault patch");
  const Vec3& n = patch.faces[0].normal;
  const Vec3 p0 = base_mesh.coords[patch.faces[0].verts[0]];
  double scale = std::max(radius, norm(center - p0));
  if (std::abs(dot(center - p0, n)) > 1e-6 * scale)
    throw ValidationError("unit_slip_basis: center does not lie on the fault plane");

  UnitSlip slip;
  slip.center = center;
  slip.direction = direction;
  slip.radius = radius;
  slip.magnitude.resize(patch.split_nodes.size());
  for (size_t i = 0; i < patch.split_nodes.size(); ++i)
    slip.magnitude[i] = bspline_bell(norm(patch.split_nodes[i].coord - center) / radius);
  return slip;
}

/// Per-split-node prescribed slip vectors (the displacement jump across the
/// fault; plus side gets +delta/2, minus side -delta/2).
inline std::vector<Vec3> slip_vectors(const FaultPatch& patch, const UnitSlip& slip) {
  std::vector<Vec3> delta(patch.split_nodes.size());
  for (size_t i = 0; i < patch.split_nodes.size(); ++i) {
    const auto& sn = patch.split_nodes[i];
    const Vec3 dir = slip.direction == SlipDirection::dip ? sn.dip : sn.strike;
    delta[i] = slip.magnitude[i] * dir;
  }
  return delta;
}

/// Convert a prescribed displacement jump into the equivalent force vector on
/// the unsplit mesh: f = -T^T K_split g, where g holds +delta/2 on plus copies
/// and -delta/2 on minus copies and T ties each split pair to its base node.
/// Dirichlet-constrained dofs of the base mesh are zeroed.
///
/// split_raw must be the unmasked second-order EBE operator on the split mesh.
inline VectorBatch64 slip_to_rhs(const EbeOperator<double>& split_raw, const FaultPatch& patch,
                                 const std::vector<Vec3>& delta,
                                 const std::vector<uint8_t>& base_mask, int32_t base_nodes) {
  if (delta.size() != patch.split_nodes.size())
    throw ValidationError("slip_to_rhs: one slip vector per split node required");
  VectorBatch64 g(split_raw.n_nodes(), 1);
  for (size_t i = 0; i < patch.split_nodes.size(); ++i) {
    const auto& sn = patch.split_nodes[i];
    for (int a = 0; a < 3; ++a) {
      g.at(3 * int64_t(sn.plus) + a, 0) = 0.5 * delta[i][a];
      g.at(3 * int64_t(sn.minus) + a, 0) = -0.5 * delta[i][a];
    }
  }
  VectorBatch64 w(split_raw.n_nodes(), 1);
  split_raw.apply(g, w);

  VectorBatch64 f(base_nodes, 1);
  for (int32_t s = 0; s < split_raw.n_nodes(); ++s) {
    const int32_t base = patch.to_base[s];
    for (int a = 0; a < 3; ++a) f.at(3 * int64_t(base) + a, 0) -= w.at(3 * int64_t(s) + a, 0);
  }
  if (!base_mask.empty())
    for (int64_t d = 0; d < f.n_dofs(); ++d)
      if (base_mask[d]) f.at(d, 0) = 0.0;
  return f;
}

/// Expand a base-mesh solution onto the split mesh, re-imposing the
/// prescribed jump: plus copies get +delta/2, minus copies -delta/2.
inline VectorBatch64 reconstruct_split_solution(const FaultPatch& patch,
                                                const std::vector<Vec3>& delta,
                                                const VectorBatch64& u_base,
                                                int32_t split_nodes_count) {
  if (delta.size() != patch.split_nodes.size())
    throw ValidationError("reconstruct_split_solution: one jump vector per split node");
  VectorBatch64 u(split_nodes_count, u_base.batch);
  for (int32_t s = 0; s < split_nodes_count; ++s)
    for (int a = 0; a < 3; ++a)
      for (int32_t b = 0; b < u.batch; ++b)
        u.at(3 * int64_t(s) + a, b) = u_base.at(3 * int64_t(patch.to_base[s]) + a, b);
  for (size_t i = 0; i < patch.split_nodes.size(); ++i) {
    const auto& sn = patch.split_nodes[i];
    for (int a = 0; a < 3; ++a)
      for (int32_t b = 0; b < u.batch; ++b) {
        u.at(3 * int64_t(sn.plus) + a, b) += 0.5 * delta[i][a];
        u.at(3 * int64_t(sn.minus) + a, b) -= 0.5 * delta[i][a];
      }
  }
  return u;
}

inline void write_fault_faces(const std::vector<std::array<int32_t, 3>>& faces,
                              const std::string& path) {
  std::ofstream os(path);
  os << "TSFAULT 1\nfaces " << faces.size() << "\n";
  for (const auto& f : faces) os << f[0] << ' ' << f[1] << ' ' << f[2] << "\n";
}

} // namespace tetsolve
