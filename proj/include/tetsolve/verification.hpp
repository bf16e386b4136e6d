#pragma once

#include <random>
#include <string>
#include <vector>

#include "tetsolve/ebe_operator.hpp"
#include "tetsolve/mesh.hpp"

namespace tetsolve {

/// Deterministic uniform deviates from raw mt19937_64 bits; identical streams
/// on every platform.
struct DeterministicRng {
  std::mt19937_64 eng;
  explicit DeterministicRng(uint64_t seed) : eng(seed) {}
  double unit() { return (eng() >> 11) * 0x1.0p-53; }
  double sym() { return unit() * 2.0 - 1.0; }
};

/// Max relative deviation between the matrix-free product and the assembled
/// block-CSR product over a few random batches.
template <typename T>
inline double ebe_vs_assembled_rel_error(const Mesh& mesh, const std::vector<Material>& mats,
                                         const std::vector<uint8_t>& mask, int order,
                                         int32_t n_vectors, uint64_t seed, int workers = 1) {
  const EbeOperator<T> op(mesh, order, mats, mask, workers);
  const BlockCsrMatrix<T> a = assemble_bcsr(op);
  DeterministicRng rng(seed);
  VectorBatch<T> u(op.n_nodes(), n_vectors);
  for (auto& v : u.data) v = static_cast<T>(rng.sym());
  VectorBatch<T> f_ebe, f_mat;
  op.apply(u, f_ebe);
  a.apply(u, f_mat);
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < f_ebe.data.size(); ++i) {
    const double d = double(f_ebe.data[i]) - double(f_mat.data[i]);
    num += d * d;
    den += double(f_mat.data[i]) * double(f_mat.data[i]);
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

/// Global quadratic patch test: the internal forces of an arbitrary linear
/// displacement field must equal the per-element constant-stress forces.
/// Returns the max deviation relative to the force scale.
inline double patch_test_rel_error(const Mesh& mesh, const std::vector<Material>& mats,
                                   uint64_t seed = 2024) {
  const EbeOperator<double> op(mesh, 2, mats, {}); // unconstrained operator
  DeterministicRng rng(seed);
  double amat[3][3], b[3];
  for (auto& row : amat)
    for (auto& x : row) x = rng.sym();
  for (auto& x : b) x = rng.sym();

  VectorBatch64 u(mesh.node_count(), 1);
  for (int32_t n = 0; n < mesh.node_count(); ++n) {
    const Vec3& x = mesh.coords[n];
    for (int i = 0; i < 3; ++i)
      u.at(3 * int64_t(n) + i, 0) =
          amat[i][0] * x[0] + amat[i][1] * x[1] + amat[i][2] * x[2] + b[i];
  }
  VectorBatch64 f;
  op.apply(u, f);

  // oracle: sigma is constant, and the integral of the linear B equals its
  // centroid value, so f_e = V * B(centroid)^T sigma exactly
  VectorBatch64 f_exact(mesh.node_count(), 1);
  const double centroid[3] = {0.25, 0.25, 0.25};
  for (int32_t e = 0; e < mesh.element_count(); ++e) {
    const Material& mat = mats.at(mesh.material_id[e]);
    double eps[6] = {amat[0][0],
                     amat[1][1],
                     amat[2][2],
                     amat[0][1] + amat[1][0],
                     amat[1][2] + amat[2][1],
                     amat[2][0] + amat[0][2]};
    const auto d = elasticity_matrix(mat);
    double sigma[6] = {0, 0, 0, 0, 0, 0};
    for (int r = 0; r < 6; ++r)
      for (int c = 0; c < 6; ++c) sigma[r] += d[6 * r + c] * eps[c];

    Vec3 verts[4];
    for (int k = 0; k < 4; ++k) verts[k] = mesh.coords[mesh.tets4[e][k]];
    double g[10][3];
    tet10_gradients(verts, centroid, g);
    const double vol = mesh.element_volume(e);
    for (int a = 0; a < 10; ++a) {
      // rows of B^T sigma for node a
      const double fx = g[a][0] * sigma[0] + g[a][1] * sigma[3] + g[a][2] * sigma[5];
      const double fy = g[a][1] * sigma[1] + g[a][0] * sigma[3] + g[a][2] * sigma[4];
      const double fz = g[a][2] * sigma[2] + g[a][1] * sigma[4] + g[a][0] * sigma[5];
      const int64_t node = mesh.tets10[e][a];
      f_exact.at(3 * node + 0, 0) += vol * fx;
      f_exact.at(3 * node + 1, 0) += vol * fy;
      f_exact.at(3 * node + 2, 0) += vol * fz;
    }
  }

  double scale = 0.0;
  for (double v : f_exact.data) scale = std::max(scale, std::abs(v));
  double worst = 0.0;
  for (size_t i = 0; i < f.data.size(); ++i)
    worst = std::max(worst, std::abs(f.data[i] - f_exact.data[i]));
  return scale > 0.0 ? worst / scale : worst;
}

/// Rigid translations must be annihilated by the unconstrained operator.
inline double translation_nullspace_rel_error(const Mesh& mesh,
                                              const std::vector<Material>& mats) {
  const EbeOperator<double> op(mesh, 2, mats, {});
  double kscale = 0.0;
  double k[900];
  op.element_matrix(0, k);
  for (int i = 0; i < 900; ++i) kscale = std::max(kscale, std::abs(k[i]));
  double worst = 0.0;
  for (int axis = 0; axis < 3; ++axis) {
    VectorBatch64 t(mesh.node_count(), 1), f;
    for (int32_t n = 0; n < mesh.node_count(); ++n) t.at(3 * int64_t(n) + axis, 0) = 1.0;
    op.apply(t, f);
    for (double v : f.data) worst = std::max(worst, std::abs(v));
  }
  return kscale > 0.0 ? worst / kscale : worst;
}

struct VerifyCheck {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
};

/// The oracle suite behind the verify command: mesh invariants, matrix-free
/// versus assembled products in both precision tiers, the quadratic patch
/// test, and the rigid-body nullspace.
inline std::vector<VerifyCheck> run_verification(const Mesh& mesh,
                                                 const std::vector<Material>& mats,
                                                 uint64_t seed = 2024, int workers = 1) {
  std::vector<VerifyCheck> checks;
  {
    VerifyCheck c{"mesh_invariants", false, 0.0, 0.0};
    try {
      validate_mesh(mesh);
      const auto census = count_faces(mesh);
      c.value = census.max_share;
      c.threshold = 2;
      c.passed = census.max_share <= 2;
    } catch (const Error&) {
      c.passed = false;
    }
    checks.push_back(c);
  }
  const auto mask = dirichlet_mask(mesh);
  {
    VerifyCheck c{"ebe_vs_assembled_float64", false, 0.0, 1e-12};
    c.value = ebe_vs_assembled_rel_error<double>(mesh, mats, mask, 2, 3, seed, workers);
    c.passed = c.value <= c.threshold;
    checks.push_back(c);
  }
  {
    VerifyCheck c{"ebe_vs_assembled_float32", false, 0.0, 1e-5};
    c.value = ebe_vs_assembled_rel_error<float>(mesh, mats, mask, 2, 3, seed, workers);
    c.passed = c.value <= c.threshold;
    checks.push_back(c);
  }
  {
    VerifyCheck c{"patch_test_quadratic", false, 0.0, 1e-10};
    c.value = patch_test_rel_error(mesh, mats, seed);
    c.passed = c.value <= c.threshold;
    checks.push_back(c);
  }
  {
    VerifyCheck c{"rigid_translation_nullspace", false, 0.0, 1e-11};
    c.value = translation_nullspace_rel_error(mesh, mats);
    c.passed = c.value <= c.threshold;
    checks.push_back(c);
  }
  return checks;
}

} // namespace tetsolve
