#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "tetsolve/io_util.hpp"
#include "tetsolve/mesh.hpp"

namespace tetsolve {

/// Text mesh format, versioned:
///   TSMESH 1
///   nodes N vertex_nodes V tets T
///   N lines "x y z" (full precision)
///   T lines of 10 node ids + material id (0-based)
/// The Dirichlet set lives in a sidecar file of "node_id axis" pairs.

inline void write_mesh(const Mesh& m, const std::string& path) {
  atomic_write(path, [&](std::ostream& os) {
    os << "TSMESH 1\n";
    os << "nodes " << m.node_count() << " vertex_nodes " << m.vertex_count << " tets "
       << m.element_count() << "\n";
    char buf[96];
    for (const auto& c : m.coords) {
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", c[0], c[1], c[2]);
      os << buf;
    }
    for (int32_t e = 0; e < m.element_count(); ++e) {
      const auto& t = m.tets10[e];
      for (int k = 0; k < 10; ++k) os << t[k] << ' ';
      os << m.material_id[e] << "\n";
    }
  });
}

inline void write_dirichlet(const Mesh& m, const std::string& path) {
  atomic_write(path, [&](std::ostream& os) {
    for (const auto& bc : m.dirichlet) os << bc.node << ' ' << int(bc.axis) << "\n";
  });
}

inline Mesh read_mesh(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open mesh file: " + path);
  long lineno = 0;
  std::string line;
  auto next_line = [&]() {
    if (!std::getline(is, line)) throw ParseError(path, lineno + 1, "unexpected end of file");
    ++lineno;
    return std::istringstream(line);
  };

  {
    auto ls = next_line();
    std::string magic;
    int version = 0;
    ls >> magic >> version;
    if (magic != "TSMESH" || version != 1)
      throw ParseError(path, lineno, "expected header 'TSMESH 1'");
  }
  int64_t n_nodes = -1, n_verts = -1, n_tets = -1;
  {
    auto ls = next_line();
    std::string k1, k2, k3;
    ls >> k1 >> n_nodes >> k2 >> n_verts >> k3 >> n_tets;
    if (k1 != "nodes" || k2 != "vertex_nodes" || k3 != "tets" || ls.fail() || n_nodes < 0 ||
        n_verts < 0 || n_tets < 0)
      throw ParseError(path, lineno, "expected 'nodes N vertex_nodes V tets T'");
  }

  Mesh m;
  m.vertex_count = static_cast<int32_t>(n_verts);
  m.coords.resize(n_nodes);
  for (int64_t i = 0; i < n_nodes; ++i) {
    auto ls = next_line();
    ls >> m.coords[i][0] >> m.coords[i][1] >> m.coords[i][2];
    if (ls.fail()) throw ParseError(path, lineno, "expected 3 node coordinates");
  }
  m.tets10.resize(n_tets);
  m.tets4.resize(n_tets);
  m.material_id.resize(n_tets);
  for (int64_t e = 0; e < n_tets; ++e) {
    auto ls = next_line();
    for (int k = 0; k < 10; ++k) ls >> m.tets10[e][k];
    ls >> m.material_id[e];
    if (ls.fail())
      throw ParseError(path, lineno, "expected 10 node ids and a material id for element " +
                                         std::to_string(e));
    for (int k = 0; k < 4; ++k) m.tets4[e][k] = m.tets10[e][k];
  }
  rebuild_edge_map(m);
  validate_mesh(m);
  return m;
}

inline void read_dirichlet(Mesh& m, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open dirichlet file: " + path);
  m.dirichlet.clear();
  std::string line;
  long lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    int64_t node = -1;
    int axis = -1;
    ls >> node >> axis;
    if (ls.fail() || node < 0 || node >= m.node_count() || axis < 0 || axis > 2)
      throw ParseError(path, lineno, "expected 'node_id axis' with axis in 0..2");
    m.dirichlet.push_back({static_cast<int32_t>(node), static_cast<int8_t>(axis)});
  }
}

} // namespace tetsolve
