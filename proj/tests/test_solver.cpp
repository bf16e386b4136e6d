#include <catch2/catch.hpp>

#include <Eigen/Dense>

#include "tetsolve/adaptive_cg.hpp"
#include "tetsolve/model.hpp"
#include "test_helpers.hpp"

using namespace tetsolve;

namespace {

Mesh box(int nx, int ny, int nz, double lx, double ly, double lz,
         std::vector<double> layers = {}) {
  BoxMeshSpec spec;
  spec.extents = {lx, ly, lz};
  spec.divisions = {nx, ny, nz};
  spec.layer_interfaces = std::move(layers);
  return generate_box_mesh(spec);
}

SolverConfig quiet_config() {
  SolverConfig cfg;
  cfg.residual_history_stride = 1;
  return cfg;
}

} // namespace

TEST_CASE("inner pcg: exact block preconditioner converges in one step") {
  tst::Rng rng(61);
  const int32_t n = 6;
  BlockCsrMatrix<float> a;
  a.n_block_rows = n;
  a.row_ptr.resize(n + 1);
  for (int32_t r = 0; r <= n; ++r) a.row_ptr[r] = r;
  for (int32_t r = 0; r < n; ++r) {
    a.col_idx.push_back(r);
    // random SPD 3x3 block
    Eigen::Matrix3d b;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) b(i, j) = rng.sym();
    b = (b * b.transpose() + 3.0 * Eigen::Matrix3d::Identity()).eval();
    std::array<float, 9> blk;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) blk[3 * i + j] = float(b(i, j));
    a.blocks.push_back(blk);
  }
  const auto m = extract_block_jacobi(a);
  const auto r = tst::random_batch<float>(n, 3, rng);
  VectorBatch32 u(n, 3);
  PcgWork<float> w;
  const InnerStats stats = inner_pcg(a, m, r, u, 1e-5, 50, w);
  CHECK(stats.converged);
  CHECK(stats.iterations == 1);
}

TEST_CASE("inner pcg: a single allowed step still reduces the residual") {
  const Mesh mesh = tst::unit_cube_mesh();
  const EbeOperator<float> op(mesh, 2, tst::stiff_material(), dirichlet_mask(mesh));
  const auto m = extract_block_jacobi(op);
  tst::Rng rng(62);
  auto r = tst::random_batch<float>(mesh.node_count(), 2, rng);
  zero_masked(r, dirichlet_mask(mesh));
  VectorBatch32 u(mesh.node_count(), 2);
  PcgWork<float> w;
  const InnerStats stats = inner_pcg(op, m, r, u, 1e-12, 1, w);
  CHECK(stats.iterations == 1);

  // e = r - A u must not exceed the initial residual norm
  VectorBatch32 au, e;
  op.apply(u, au);
  sub_columns(r, au, e);
  std::vector<double> en, rn;
  norm2_columns(e, en);
  norm2_columns(r, rn);
  for (size_t b = 0; b < en.size(); ++b) CHECK(en[b] <= rn[b] * (1.0 + 1e-6));
}

TEST_CASE("inner pcg matches a dense direct solve on one tet10 element") {
  Mesh m;
  m.coords = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  m.vertex_count = 4;
  m.tets4 = {{0, 1, 2, 3}};
  m.tets10 = {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};
  m.material_id = {0};
  static constexpr int ee[6][2] = {{0, 1}, {1, 2}, {2, 0}, {0, 3}, {1, 3}, {2, 3}};
  for (const auto& e : ee) m.coords.push_back(0.5 * (m.coords[e[0]] + m.coords[e[1]]));
  // clamp three non-collinear corner nodes to kill all six rigid modes
  for (int8_t a = 0; a < 3; ++a) {
    m.dirichlet.push_back({0, a});
    m.dirichlet.push_back({1, a});
    m.dirichlet.push_back({2, a});
  }
  validate_mesh(m);

  const auto mask = dirichlet_mask(m);
  const EbeOperator<float> op(m, 2, tst::stiff_material(), mask);
  const EbeOperator<double> op64(m, 2, tst::stiff_material(), mask);
  const auto mj = extract_block_jacobi(op);

  tst::Rng rng(63);
  VectorBatch32 r = tst::random_batch<float>(m.node_count(), 1, rng);
  zero_masked(r, mask);
  VectorBatch32 u(m.node_count(), 1);
  PcgWork<float> w;
  inner_pcg(op, mj, r, u, 1e-6, 10000, w);

  const auto a64 = assemble_bcsr(op64);
  const Eigen::MatrixXd dense = tst::bcsr_to_dense(a64);
  Eigen::VectorXd rhs(3 * m.node_count());
  for (int64_t d = 0; d < rhs.size(); ++d) rhs(d) = r.at(d, 0);
  const Eigen::VectorXd exact = Eigen::PartialPivLU<Eigen::MatrixXd>(dense).solve(rhs);

  double num = 0.0, den = 0.0;
  for (int64_t d = 0; d < rhs.size(); ++d) {
    num += (u.at(d, 0) - exact(d)) * (u.at(d, 0) - exact(d));
    den += exact(d) * exact(d);
  }
  CHECK(std::sqrt(num / den) < 1e-4);
}

TEST_CASE("inner pcg rejects an indefinite operator") {
  BlockCsrMatrix<float> a;
  a.n_block_rows = 2;
  a.row_ptr = {0, 1, 2};
  a.col_idx = {0, 1};
  a.blocks = {{1, 0, 0, 0, 1, 0, 0, 0, 1}, {-2, 0, 0, 0, -2, 0, 0, 0, -2}};
  BlockJacobi<float> m;
  m.inv_blocks = {{1, 0, 0, 0, 1, 0, 0, 0, 1}, {1, 0, 0, 0, 1, 0, 0, 0, 1}};
  VectorBatch32 r(2, 1), u(2, 1);
  for (auto& v : r.data) v = 1.0f;
  PcgWork<float> w;
  CHECK_THROWS_AS(inner_pcg(a, m, r, u, 1e-10, 100, w), SolverError);
}

TEST_CASE("manufactured solution on a two-layer box") {
  const Vec3 extents = {400.0, 400.0, 200.0};
  Mesh mesh = box(4, 4, 4, extents[0], extents[1], extents[2], {100.0});
  const auto mats = tst::layered_materials();
  SolverConfig cfg = quiet_config();
  cfg.batch_size = 2;
  const CrustModel model = build_crust_model(std::move(mesh), mats, cfg);

  const VectorBatch64 ustar =
      tst::smooth_manufactured(model.mesh, extents, 2, model.mask, 0.05);
  VectorBatch64 f;
  model.levels.outer.apply(ustar, f);

  VectorBatch64 u0(model.mesh.node_count(), 2);
  auto [u, rep] = solve(model.levels, f, u0, cfg);

  CHECK(rep.converged);
  CHECK(rep.max_final_residual() <= 1e-8);
  CHECK(tst::rel_diff_norm(u, ustar) < 1e-7);
  CHECK(rep.method == "amg");
  CHECK(rep.inner_precision == "float32");
  CHECK(rep.inner_iterations[0] > 0);
  CHECK(rep.inner_iterations[1] > 0);
  CHECK(rep.inner_iterations[2] > 0);

  SECTION("warm start from the exact solution converges immediately") {
    auto [u2, rep2] = solve(model.levels, f, u, cfg);
    CHECK(rep2.outer_iterations == 0);
  }

  SECTION("residual history is captured at the configured stride") {
    CHECK(rep.residual_history.size() == size_t(rep.outer_iterations));
    // diagnostic: the outer residual is non-increasing in at least 95% of steps
    int drops = 0, total = 0;
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& [it, res] : rep.residual_history) {
      double worst = 0.0;
      for (double v : res) worst = std::max(worst, v);
      if (total > 0 && worst > prev) ++drops;
      prev = worst;
      ++total;
    }
    if (total > 1) CHECK(double(drops) / total <= 0.05);
  }
}

TEST_CASE("batch of identical columns stays bitwise identical") {
  const Vec3 extents = {100.0, 100.0, 100.0};
  Mesh mesh = box(2, 2, 2, extents[0], extents[1], extents[2]);
  SolverConfig cfg = quiet_config();
  cfg.batch_size = 16;
  const CrustModel model = build_crust_model(std::move(mesh), tst::stiff_material(), cfg);

  tst::Rng rng(67);
  VectorBatch64 f(model.mesh.node_count(), 16);
  for (int64_t d = 0; d < f.n_dofs(); ++d) {
    const double v = model.mask[d] ? 0.0 : rng.sym();
    for (int32_t b = 0; b < 16; ++b) f.at(d, b) = v;
  }
  VectorBatch64 u0(model.mesh.node_count(), 16);
  auto [u, rep] = solve(model.levels, f, u0, cfg);
  CHECK(rep.converged);
  for (int32_t b = 1; b < 16; ++b)
    for (int64_t d = 0; d < u.n_dofs(); ++d) REQUIRE(u.at(d, b) == u.at(d, 0));
}

TEST_CASE("pcge agrees with the multigrid solver and needs more iterations") {
  const Vec3 extents = {400.0, 400.0, 200.0};
  Mesh mesh = box(3, 3, 3, extents[0], extents[1], extents[2], {100.0});
  const auto mats = tst::layered_materials();
  SolverConfig cfg = quiet_config();
  cfg.batch_size = 1;
  const CrustModel model = build_crust_model(std::move(mesh), mats, cfg);

  const VectorBatch64 ustar =
      tst::smooth_manufactured(model.mesh, extents, 1, model.mask, 0.02);
  VectorBatch64 f;
  model.levels.outer.apply(ustar, f);
  VectorBatch64 u0(model.mesh.node_count(), 1);

  auto [u_mg, rep_mg] = solve(model.levels, f, u0, cfg);
  auto [u_cg, rep_cg] = solve_pcge(model.levels.outer, f, u0, cfg.outer_tol, 100000);

  CHECK(rep_cg.converged);
  CHECK(rep_cg.max_final_residual() <= 1e-8);
  CHECK(tst::rel_diff_norm(u_cg, ustar) < 1e-7);
  CHECK(tst::rel_diff_norm(u_cg, u_mg) < 1e-7);
  CHECK(rep_cg.outer_iterations >= rep_mg.outer_iterations);
  CHECK(rep_cg.method == "pcge");
}

TEST_CASE("pcge: zero right-hand side returns zero in zero iterations") {
  Mesh mesh = box(1, 1, 1, 1, 1, 1);
  SolverConfig cfg;
  const CrustModel model = build_crust_model(std::move(mesh), tst::stiff_material(), cfg);
  VectorBatch64 f(model.mesh.node_count(), 1), u0(model.mesh.node_count(), 1);
  auto [u, rep] = solve_pcge(model.levels.outer, f, u0, 1e-8, 100);
  CHECK(rep.outer_iterations == 0);
  for (double v : u.data) CHECK(v == 0.0);
}

TEST_CASE("solve requires a nonzero right-hand side") {
  Mesh mesh = box(1, 1, 1, 1, 1, 1);
  SolverConfig cfg;
  const CrustModel model = build_crust_model(std::move(mesh), tst::stiff_material(), cfg);
  VectorBatch64 f(model.mesh.node_count(), 2), u0(model.mesh.node_count(), 2);
  CHECK_THROWS_AS(solve(model.levels, f, u0, cfg), ValidationError);
}

TEST_CASE("exceeding the outer cap raises an error that carries the report") {
  const Vec3 extents = {400.0, 400.0, 200.0};
  Mesh mesh = box(3, 3, 2, extents[0], extents[1], extents[2], {100.0});
  SolverConfig cfg = quiet_config();
  cfg.batch_size = 1;
  cfg.outer_max_iter = 1;
  const CrustModel model = build_crust_model(std::move(mesh), tst::layered_materials(), cfg);
  const VectorBatch64 ustar =
      tst::smooth_manufactured(model.mesh, extents, 1, model.mask, 0.05);
  VectorBatch64 f;
  model.levels.outer.apply(ustar, f);
  VectorBatch64 u0(model.mesh.node_count(), 1);
  try {
    solve(model.levels, f, u0, cfg);
    FAIL("expected non-convergence");
  } catch (const ConvergenceError& e) {
    CHECK(e.report.outer_iterations == 1);
    CHECK_FALSE(e.report.converged);
    CHECK(e.report.final_rel_residual.size() == 1);
  }
}

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  cfg.outer_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = SolverConfig{};
  cfg.level1.tol = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = SolverConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = SolverConfig{};
  CHECK(cfg.outer_tol == 1e-8);
  CHECK(cfg.level0.tol == 0.1);
  CHECK(cfg.level0.max_iter == 30);
  CHECK(cfg.level1.tol == 0.05);
  CHECK(cfg.level1.max_iter == 300);
  CHECK(cfg.level2.tol == 0.025);
  CHECK(cfg.level2.max_iter == 3000);
  CHECK(cfg.batch_size == 16);
  CHECK(cfg.outer_max_iter == 5000);
  CHECK_NOTHROW(cfg.validate());
}
