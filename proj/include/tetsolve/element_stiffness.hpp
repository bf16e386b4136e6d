#pragma once

#include <array>
#include <cmath>
#include <cstring>

#include "tetsolve/errors.hpp"
#include "tetsolve/geometry.hpp"
#include "tetsolve/material.hpp"

namespace tetsolve {

/// Dense symmetric element stiffness, 12x12 (tet4) or 30x30 (tet10),
/// row/col = 3*local_node + axis.
struct ElementStiffness {
  int n = 0;
  std::array<double, 900> k{};
  double volume = 0.0;

  double at(int r, int c) const { return k[static_cast<size_t>(r) * n + c]; }
  double& at(int r, int c) { return k[static_cast<size_t>(r) * n + c]; }
};

/// 6x6 isotropic elasticity matrix, Voigt order (xx, yy, zz, xy, yz, zx),
/// engineering shear strains.
inline std::array<double, 36> elasticity_matrix(const Material& m) {
  std::array<double, 36> d{};
  const double l = m.lambda, two_mu = 2.0 * m.mu;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) d[6 * i + j] = l + (i == j ? two_mu : 0.0);
  for (int i = 3; i < 6; ++i) d[6 * i + i] = m.mu;
  return d;
}

namespace detail {

// Reference-tet quadrature: 4 symmetric points, degree-2 exact, weight 1/24
// each once multiplied by |J| (reference volume 1/6, equal weights 1/4).
constexpr double kQuadA = 0.58541019662496845; // (5 + 3*sqrt(5)) / 20
constexpr double kQuadB = 0.13819660112501051; // (5 - sqrt(5)) / 20
constexpr double kQuadW = 1.0 / 24.0;

constexpr int kEdgeEnds[6][2] = {{0, 1}, {1, 2}, {2, 0}, {0, 3}, {1, 3}, {2, 3}};

inline const double (&quad_points())[4][3] {
  static const double pts[4][3] = {{kQuadB, kQuadB, kQuadB},
                                   {kQuadA, kQuadB, kQuadB},
                                   {kQuadB, kQuadA, kQuadB},
                                   {kQuadB, kQuadB, kQuadA}};
  return pts;
}

// Gradients of the barycentric coordinates w.r.t. (xi, eta, zeta).
constexpr double kGradL[4][3] = {{-1, -1, -1}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

inline void tet10_shape_values(const double xi[3], double n_out[10]) {
  const double l[4] = {1.0 - xi[0] - xi[1] - xi[2], xi[0], xi[1], xi[2]};
  for (int a = 0; a < 4; ++a) n_out[a] = l[a] * (2.0 * l[a] - 1.0);
  for (int e = 0; e < 6; ++e)
    n_out[4 + e] = 4.0 * l[kEdgeEnds[e][0]] * l[kEdgeEnds[e][1]];
}

// Reference-space gradients of the 10 quadratic shape functions at xi.
inline void tet10_ref_gradients(const double xi[3], double g[10][3]) {
  const double l[4] = {1.0 - xi[0] - xi[1] - xi[2], xi[0], xi[1], xi[2]};
  for (int a = 0; a < 4; ++a)
    for (int c = 0; c < 3; ++c) g[a][c] = (4.0 * l[a] - 1.0) * kGradL[a][c];
  for (int e = 0; e < 6; ++e) {
    const int p = kEdgeEnds[e][0], q = kEdgeEnds[e][1];
    for (int c = 0; c < 3; ++c)
      g[4 + e][c] = 4.0 * (l[p] * kGradL[q][c] + l[q] * kGradL[p][c]);
  }
}

// Affine geometry of a straight-sided tet: J columns are the edge vectors
// from vertex 0; returns det(J) = 6V and the inverse transpose.
inline double tet_geometry(const Vec3 v[4], double inv_jt[3][3]) {
  double j[3][3];
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < 3; ++r) j[r][c] = v[c + 1][r] - v[0][r];
  double inv[3][3];
  if (!invert3(j, inv)) return 0.0;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) inv_jt[r][c] = inv[c][r];
  return det3(j);
}

// Accumulate w * (lambda ga gb^T + mu gb ga^T + mu (ga.gb) I) into the
// 3x3 block (a, b) of k. This is the isotropic B^T D B integrand expanded.
template <int NN>
inline void add_block(double* k, int a, int b, const double ga[3], const double gb[3],
                      double wl, double wm) {
  const double gdot = ga[0] * gb[0] + ga[1] * gb[1] + ga[2] * gb[2];
  double* row0 = k + (3 * a) * (3 * NN) + 3 * b;
  for (int i = 0; i < 3; ++i) {
    double* row = row0 + i * (3 * NN);
    for (int j = 0; j < 3; ++j) row[j] += wl * ga[i] * gb[j] + wm * gb[i] * ga[j];
    row[i] += wm * gdot;
  }
}

/// 12x12 tet4 stiffness from vertex coordinates; exact (constant strain).
/// Returns the signed volume; caller rejects non-positive values.
inline double tet4_stiffness_kernel(const Vec3 v[4], double lambda, double mu, double* k) {
  double inv_jt[3][3];
  const double detj = tet_geometry(v, inv_jt);
  if (detj == 0.0) return 0.0;
  double g[4][3];
  for (int a = 0; a < 4; ++a)
    for (int r = 0; r < 3; ++r)
      g[a][r] = inv_jt[r][0] * kGradL[a][0] + inv_jt[r][1] * kGradL[a][1] +
                inv_jt[r][2] * kGradL[a][2];
  std::memset(k, 0, sizeof(double) * 144);
  const double vol = detj / 6.0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) add_block<4>(k, a, b, g[a], g[b], vol * lambda, vol * mu);
  return vol;
}

/// 30x30 tet10 stiffness by the fixed 4-point rule (exact for straight-sided
/// elements with constant material). Only the 4 vertex coordinates enter; edge
/// nodes are assumed at midpoints. Returns the signed volume.
inline double tet10_stiffness_kernel(const Vec3 v[4], double lambda, double mu, double* k) {
  double inv_jt[3][3];
  const double detj = tet_geometry(v, inv_jt);
  if (detj == 0.0) return 0.0;
  std::memset(k, 0, sizeof(double) * 900);
  const auto& pts = quad_points();
  for (int q = 0; q < 4; ++q) {
    double gr[10][3], g[10][3];
    tet10_ref_gradients(pts[q], gr);
    for (int a = 0; a < 10; ++a)
      for (int r = 0; r < 3; ++r)
        g[a][r] = inv_jt[r][0] * gr[a][0] + inv_jt[r][1] * gr[a][1] + inv_jt[r][2] * gr[a][2];
    const double w = kQuadW * detj;
    for (int a = 0; a < 10; ++a)
      for (int b = 0; b < 10; ++b) add_block<10>(k, a, b, g[a], g[b], w * lambda, w * mu);
  }
  return detj / 6.0;
}

} // namespace detail

/// Strain-displacement matrix B (6 x 3n) from physical shape gradients,
/// Voigt order (xx, yy, zz, xy, yz, zx) with engineering shear rows.
template <int NN>
inline std::array<double, 6 * 3 * NN> strain_displacement(const double g[NN][3]) {
  std::array<double, 6 * 3 * NN> b{};
  auto at = [&](int r, int c) -> double& { return b[static_cast<size_t>(r) * 3 * NN + c]; };
  for (int a = 0; a < NN; ++a) {
    const int cx = 3 * a, cy = 3 * a + 1, cz = 3 * a + 2;
    at(0, cx) = g[a][0];
    at(1, cy) = g[a][1];
    at(2, cz) = g[a][2];
    at(3, cx) = g[a][1];
    at(3, cy) = g[a][0];
    at(4, cy) = g[a][2];
    at(4, cz) = g[a][1];
    at(5, cx) = g[a][2];
    at(5, cz) = g[a][0];
  }
  return b;
}

/// Physical gradients of the 10 tet10 shape functions at reference point xi.
inline void tet10_gradients(const Vec3 v[4], const double xi[3], double g[10][3]) {
  double inv_jt[3][3];
  if (detail::tet_geometry(v, inv_jt) == 0.0)
    throw ValidationError("tet10_gradients: degenerate element");
  double gr[10][3];
  detail::tet10_ref_gradients(xi, gr);
  for (int a = 0; a < 10; ++a)
    for (int r = 0; r < 3; ++r)
      g[a][r] = inv_jt[r][0] * gr[a][0] + inv_jt[r][1] * gr[a][1] + inv_jt[r][2] * gr[a][2];
}

inline void tet10_shape_values(const double xi[3], double n_out[10]) {
  detail::tet10_shape_values(xi, n_out);
}

inline ElementStiffness element_stiffness_tet4(const std::array<Vec3, 4>& coords,
                                               const Material& mat) {
  ElementStiffness es;
  es.n = 12;
  const double vol = detail::tet4_stiffness_kernel(coords.data(), mat.lambda, mat.mu,
                                                   es.k.data());
  if (vol <= 0.0) throw ValidationError("element_stiffness_tet4: degenerate element");
  es.volume = vol;
  return es;
}

inline ElementStiffness element_stiffness_tet10(const std::array<Vec3, 10>& coords,
                                                const Material& mat) {
  // straight-sided assumption: edge nodes must sit at edge midpoints
  double scale = 0.0;
  for (const auto& c : coords)
    scale = std::max({scale, std::abs(c[0]), std::abs(c[1]), std::abs(c[2])});
  for (int e = 0; e < 6; ++e) {
    const Vec3 mid = 0.5 * (coords[detail::kEdgeEnds[e][0]] + coords[detail::kEdgeEnds[e][1]]);
    if (norm(coords[4 + e] - mid) > 1e-9 * std::max(scale, 1.0))
      throw ValidationError("element_stiffness_tet10: edge node " + std::to_string(4 + e) +
                            " is not at its edge midpoint");
  }
  ElementStiffness es;
  es.n = 30;
  const double vol = detail::tet10_stiffness_kernel(coords.data(), mat.lambda, mat.mu,
                                                    es.k.data());
  if (vol <= 0.0) throw ValidationError("element_stiffness_tet10: degenerate element");
  es.volume = vol;
  return es;
}

} // namespace tetsolve
