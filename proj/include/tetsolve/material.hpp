#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tetsolve/errors.hpp"

namespace tetsolve {

/// Isotropic linear-elastic material given by wave speeds and density.
/// lambda and mu are derived: mu = rho*vs^2, lambda = rho*(vp^2 - 2*vs^2).
struct Material {
  double vp = 0.0;     // primary wave velocity (m/s)
  double vs = 0.0;     // secondary wave velocity (m/s)
  double rho = 0.0;    // density (kg/m^3)
  double lambda = 0.0; // first Lame parameter (Pa)
  double mu = 0.0;     // shear modulus (Pa)
};

inline Material material_from_wavespeeds(double vp, double vs, double rho) {
  if (vp <= 0.0 || vs <= 0.0 || rho <= 0.0)
    throw ValidationError("material: vp, vs, rho must be positive");
  if (vp * vp <= 2.0 * vs * vs)
    throw ValidationError("material: requires vp^2 > 2*vs^2 (lambda must be positive)");
  Material m;
  m.vp = vp;
  m.vs = vs;
  m.rho = rho;
  m.mu = rho * vs * vs;
  m.lambda = rho * (vp * vp - 2.0 * vs * vs);
  return m;
}

/// Materials file: one "vp vs rho" line per material id.
inline std::vector<Material> read_materials(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open materials file: " + path);
  std::vector<Material> mats;
  std::string line;
  long lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    double vp, vs, rho;
    if (!(ls >> vp)) continue; // blank line
    if (!(ls >> vs >> rho)) throw ParseError(path, lineno, "expected 'vp vs rho'");
    mats.push_back(material_from_wavespeeds(vp, vs, rho));
  }
  if (mats.empty()) throw ValidationError(path + ": no materials defined");
  return mats;
}

} // namespace tetsolve
