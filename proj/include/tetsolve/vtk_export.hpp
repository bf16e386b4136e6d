#pragma once

#include <ostream>
#include <string>

#include "tetsolve/io_util.hpp"
#include "tetsolve/mesh.hpp"
#include "tetsolve/vector_batch.hpp"

namespace tetsolve {

/// Legacy VTK unstructured-grid export of one displacement column (for
/// plotting only). The local node ordering matches VTK's quadratic tetra.
inline void write_vtk(const Mesh& mesh, const VectorBatch64& u, int32_t column,
                      const std::string& path) {
  if (u.n_nodes != mesh.node_count() || column < 0 || column >= u.batch)
    throw ValidationError("vtk export: dimension mismatch");
  atomic_write(path, [&](std::ostream& os) {
    os << "# vtk DataFile Version 2.0\n";
    os << "displacement field\n";
    os << "ASCII\n";
    os << "DATASET UNSTRUCTURED_GRID\n";
    os << "POINTS " << mesh.node_count() << " double\n";
    for (const auto& c : mesh.coords)
      os << fmt_g17(c[0]) << ' ' << fmt_g17(c[1]) << ' ' << fmt_g17(c[2]) << "\n";
    os << "CELLS " << mesh.element_count() << ' ' << 11 * int64_t(mesh.element_count())
       << "\n";
    for (const auto& t : mesh.tets10) {
      os << 10;
      for (int k = 0; k < 10; ++k) os << ' ' << t[k];
      os << "\n";
    }
    os << "CELL_TYPES " << mesh.element_count() << "\n";
    for (int32_t e = 0; e < mesh.element_count(); ++e) os << 24 << "\n";
    os << "POINT_DATA " << mesh.node_count() << "\n";
    os << "VECTORS displacement double\n";
    for (int32_t n = 0; n < mesh.node_count(); ++n)
      os << fmt_g17(u.at(3 * int64_t(n), column)) << ' '
         << fmt_g17(u.at(3 * int64_t(n) + 1, column)) << ' '
         << fmt_g17(u.at(3 * int64_t(n) + 2, column)) << "\n";
  });
}

} // namespace tetsolve
