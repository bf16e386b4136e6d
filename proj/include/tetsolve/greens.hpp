#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tetsolve/io_util.hpp"
#include "tetsolve/model.hpp"

namespace tetsolve {

/// One observed displacement component: a surface point and an axis.
struct ObservationComponent {
  Vec3 point{};
  int axis = 0;
};

/// Observation file: "x y z axis" per line; axis is 0..2 or x|y|z.
inline std::vector<ObservationComponent> read_observations(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open observations file: " + path);
  std::vector<ObservationComponent> out;
  std::string line;
  long lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    ObservationComponent oc;
    std::string axis;
    if (!(ls >> oc.point[0])) continue;
    if (!(ls >> oc.point[1] >> oc.point[2] >> axis))
      throw ParseError(path, lineno, "expected 'x y z axis'");
    if (axis == "x" || axis == "0") oc.axis = 0;
    else if (axis == "y" || axis == "1") oc.axis = 1;
    else if (axis == "z" || axis == "2") oc.axis = 2;
    else throw ParseError(path, lineno, "axis must be one of x, y, z or 0..2");
    out.push_back(oc);
  }
  if (out.empty()) throw ValidationError(path + ": no observation components");
  return out;
}

/// Locate the element containing a point and interpolate one displacement
/// component with the quadratic shape functions. Throws when the point lies
/// outside the mesh.
inline double sample_displacement(const Mesh& mesh, const VectorBatch64& u, int32_t col,
                                  const Vec3& point, int axis) {
  const double bary_tol = -1e-8;
  for (int32_t e = 0; e < mesh.element_count(); ++e) {
    const Vec3& v0 = mesh.coords[mesh.tets4[e][0]];
    double jac[3][3], inv[3][3];
    for (int c = 0; c < 3; ++c) {
      const Vec3 edge = mesh.coords[mesh.tets4[e][c + 1]] - v0;
      for (int r = 0; r < 3; ++r) jac[r][c] = edge[r];
    }
    if (!invert3(jac, inv)) continue;
    const Vec3 d = point - v0;
    double xi[3];
    for (int r = 0; r < 3; ++r) xi[r] = inv[r][0] * d[0] + inv[r][1] * d[1] + inv[r][2] * d[2];
    const double l0 = 1.0 - xi[0] - xi[1] - xi[2];
    if (xi[0] < bary_tol || xi[1] < bary_tol || xi[2] < bary_tol || l0 < bary_tol) continue;
    double n[10];
    tet10_shape_values(xi, n);
    double val = 0.0;
    for (int a = 0; a < 10; ++a)
      val += n[a] * u.at(3 * int64_t(mesh.tets10[e][a]) + axis, col);
    return val;
  }
  throw ValidationError("observation point (" + std::to_string(point[0]) + ", " +
                        std::to_string(point[1]) + ", " + std::to_string(point[2]) +
                        ") lies outside the mesh");
}

/// Surface responses: rows are observation components, columns unit slips.
struct GreensBank {
  struct ColumnMeta {
    Vec3 center{};
    SlipDirection direction = SlipDirection::dip;
    double radius = 0.0;
  };
  int32_t rows = 0;
  int32_t cols = 0;
  std::vector<double> values; // row-major rows x cols
  std::vector<ObservationComponent> obs;
  std::vector<ColumnMeta> columns;

  double& at(int32_t r, int32_t c) { return values[static_cast<size_t>(r) * cols + c]; }
  double at(int32_t r, int32_t c) const { return values[static_cast<size_t>(r) * cols + c]; }
};

struct GreensReport {
  int solver_calls = 0;
  long outer_iterations = 0;
  std::vector<SolveReport> per_batch;
};

/// Column ranges [begin, end) dispatched per solver call: ceil(n / batch) calls.
inline std::vector<std::pair<int32_t, int32_t>> greens_batch_plan(int32_t n_slips,
                                                                  int32_t batch_size) {
  if (n_slips < 1) throw ValidationError("greens: need at least one unit slip");
  if (batch_size < 1) throw ValidationError("greens: batch size must be >= 1");
  std::vector<std::pair<int32_t, int32_t>> plan;
  for (int32_t lo = 0; lo < n_slips; lo += batch_size)
    plan.emplace_back(lo, std::min(n_slips, lo + batch_size));
  return plan;
}

/// Batch the unit slips into ceil(n/B) solver calls and fill the bank
/// column-wise with the sampled surface responses.
inline std::pair<GreensBank, GreensReport> compute_greens_bank(
    const FaultedModel& fm, const std::vector<UnitSlip>& slips,
    const std::vector<ObservationComponent>& obs, const SolverConfig& cfg) {
  const auto plan = greens_batch_plan(static_cast<int32_t>(slips.size()), cfg.batch_size);
  GreensBank bank;
  bank.rows = static_cast<int32_t>(obs.size());
  bank.cols = static_cast<int32_t>(slips.size());
  bank.values.assign(static_cast<size_t>(bank.rows) * bank.cols, 0.0);
  bank.obs = obs;
  for (const auto& s : slips)
    bank.columns.push_back({s.center, s.direction, s.radius});

  GreensReport report;
  const int32_t n_nodes = fm.base.mesh.node_count();
  for (const auto& [lo, hi] : plan) {
    const int32_t width = hi - lo;
    VectorBatch64 f(n_nodes, width);
    for (int32_t j = 0; j < width; ++j) {
      const VectorBatch64 col = slip_to_rhs(fm, slips[lo + j]);
      for (int64_t d = 0; d < f.n_dofs(); ++d) f.at(d, j) = col.at(d, 0);
    }
    VectorBatch64 u0(n_nodes, width);
    auto [u, rep] = solve(fm.base.levels, f, u0, cfg);
    ++report.solver_calls;
    report.outer_iterations += rep.outer_iterations;
    report.per_batch.push_back(std::move(rep));
    for (int32_t j = 0; j < width; ++j)
      for (int32_t r = 0; r < bank.rows; ++r)
        bank.at(r, lo + j) = sample_displacement(fm.base.mesh, u, j, obs[r].point, obs[r].axis);
  }
  return {std::move(bank), std::move(report)};
}

/// Bank file: text header with observation and column metadata, then the
/// row-major 64-bit matrix as little-endian binary after the DATA line.
inline void write_greens_bank(const GreensBank& bank, const std::string& path) {
  atomic_write(path, [&](std::ostream& os) {
    os << "TSGREENS 1\n";
    os << "rows " << bank.rows << " cols " << bank.cols << "\n";
    for (const auto& oc : bank.obs)
      os << "obs " << fmt_g17(oc.point[0]) << ' ' << fmt_g17(oc.point[1]) << ' '
         << fmt_g17(oc.point[2]) << ' ' << oc.axis << "\n";
    for (const auto& cm : bank.columns)
      os << "col " << fmt_g17(cm.center[0]) << ' ' << fmt_g17(cm.center[1]) << ' '
         << fmt_g17(cm.center[2]) << ' '
         << (cm.direction == SlipDirection::dip ? "dip" : "strike") << ' '
         << fmt_g17(cm.radius) << "\n";
    os << "DATA\n";
    os.write(reinterpret_cast<const char*>(bank.values.data()),
             static_cast<std::streamsize>(bank.values.size() * sizeof(double)));
  });
}

inline GreensBank read_greens_bank(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open greens bank: " + path);
  GreensBank bank;
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
    if (magic != "TSGREENS" || ver != 1) throw ParseError(path, lineno, "expected 'TSGREENS 1'");
  }
  {
    auto ls = next();
    std::string k1, k2;
    ls >> k1 >> bank.rows >> k2 >> bank.cols;
    if (k1 != "rows" || k2 != "cols" || ls.fail() || bank.rows < 1 || bank.cols < 1)
      throw ParseError(path, lineno, "expected 'rows M cols N'");
  }
  for (int32_t r = 0; r < bank.rows; ++r) {
    auto ls = next();
    std::string tag;
    ObservationComponent oc;
    ls >> tag >> oc.point[0] >> oc.point[1] >> oc.point[2] >> oc.axis;
    if (tag != "obs" || ls.fail()) throw ParseError(path, lineno, "expected 'obs x y z axis'");
    bank.obs.push_back(oc);
  }
  for (int32_t c = 0; c < bank.cols; ++c) {
    auto ls = next();
    std::string tag, dir;
    GreensBank::ColumnMeta cm;
    ls >> tag >> cm.center[0] >> cm.center[1] >> cm.center[2] >> dir >> cm.radius;
    if (tag != "col" || ls.fail() || (dir != "dip" && dir != "strike"))
      throw ParseError(path, lineno, "expected 'col x y z dip|strike radius'");
    cm.direction = dir == "dip" ? SlipDirection::dip : SlipDirection::strike;
    bank.columns.push_back(cm);
  }
  {
    auto ls = next();
    std::string tag;
    ls >> tag;
    if (tag != "DATA") throw ParseError(path, lineno, "expected 'DATA'");
  }
  bank.values.resize(static_cast<size_t>(bank.rows) * bank.cols);
  is.read(reinterpret_cast<char*>(bank.values.data()),
          static_cast<std::streamsize>(bank.values.size() * sizeof(double)));
  if (is.gcount() != static_cast<std::streamsize>(bank.values.size() * sizeof(double)))
    throw ParseError(path, lineno + 1, "truncated binary matrix payload");
  return bank;
}

} // namespace tetsolve
