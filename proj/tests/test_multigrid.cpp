#include <catch2/catch.hpp>

#include <Eigen/Dense>
#include <set>

#include "tetsolve/aggregation.hpp"
#include "tetsolve/ebe_operator.hpp"
#include "tetsolve/prolongation.hpp"
#include "test_helpers.hpp"

using namespace tetsolve;

namespace {

/// Block tridiagonal SPD path-graph matrix on n nodes.
BlockCsrMatrix<double> path_matrix(int32_t n) {
  BlockCsrMatrix<double> a;
  a.n_block_rows = n;
  a.row_ptr.assign(n + 1, 0);
  for (int32_t r = 0; r < n; ++r) {
    int cnt = 1 + (r > 0) + (r + 1 < n);
    a.row_ptr[r + 1] = a.row_ptr[r] + cnt;
  }
  for (int32_t r = 0; r < n; ++r) {
    std::array<double, 9> diag = {4, 0, 0, 0, 4, 0, 0, 0, 4};
    std::array<double, 9> off = {-1, 0, 0, 0, -1, 0, 0, 0, -1};
    if (r > 0) {
      a.col_idx.push_back(r - 1);
      a.blocks.push_back(off);
    }
    a.col_idx.push_back(r);
    a.blocks.push_back(diag);
    if (r + 1 < n) {
      a.col_idx.push_back(r + 1);
      a.blocks.push_back(off);
    }
  }
  return a;
}

BlockCsrMatrix<double> diagonal_matrix(int32_t n) {
  BlockCsrMatrix<double> a;
  a.n_block_rows = n;
  a.row_ptr.resize(n + 1);
  for (int32_t r = 0; r <= n; ++r) a.row_ptr[r] = r;
  a.col_idx.resize(n);
  a.blocks.assign(n, {2, 0, 0, 0, 2, 0, 0, 0, 2});
  for (int32_t r = 0; r < n; ++r) a.col_idx[r] = r;
  return a;
}

} // namespace

TEST_CASE("geometric prolongation reproduces constants and linear fields") {
  const Mesh m = tst::unit_cube_mesh();
  const Prolongation p = build_geometric_prolongation(m);
  CHECK(p.n_coarse_nodes == m.vertex_count);
  CHECK(p.n_fine_nodes == m.node_count());

  SECTION("rows sum to one") {
    for (int32_t fn = 0; fn < p.n_fine_nodes; ++fn) {
      double s = 0.0;
      for (int32_t e = p.row_ptr[fn]; e < p.row_ptr[fn + 1]; ++e) s += p.weights[e];
      CHECK(s == 1.0);
    }
  }

  SECTION("constant coarse field stays constant") {
    VectorBatch64 c(m.vertex_count, 2), f;
    for (auto& v : c.data) v = 3.25;
    p.apply(c, f);
    for (double v : f.data) CHECK(v == 3.25);
  }

  SECTION("linear vertex field is exact at edge midpoints") {
    VectorBatch64 c(m.vertex_count, 1), f;
    const double a[3] = {1.5, -2.0, 0.75};
    for (int32_t n = 0; n < m.vertex_count; ++n)
      for (int ax = 0; ax < 3; ++ax)
        c.at(3 * int64_t(n) + ax, 0) = a[0] * m.coords[n][0] + a[1] * m.coords[n][1] +
                                       a[2] * m.coords[n][2];
    p.apply(c, f);
    for (int32_t n = 0; n < m.node_count(); ++n) {
      const double want =
          a[0] * m.coords[n][0] + a[1] * m.coords[n][1] + a[2] * m.coords[n][2];
      for (int ax = 0; ax < 3; ++ax)
        CHECK(std::abs(f.at(3 * int64_t(n) + ax, 0) - want) < 1e-13 * std::abs(want) + 1e-15);
    }
  }

  SECTION("restricting a field supported on vertices returns the vertex subfield") {
    tst::Rng rng(41);
    VectorBatch64 fine(m.node_count(), 1), coarse;
    for (int32_t n = 0; n < m.vertex_count; ++n)
      for (int ax = 0; ax < 3; ++ax) fine.at(3 * int64_t(n) + ax, 0) = rng.sym();
    p.restrict_to_coarse(fine, coarse);
    for (int32_t n = 0; n < m.vertex_count; ++n)
      for (int ax = 0; ax < 3; ++ax)
        CHECK(coarse.at(3 * int64_t(n) + ax, 0) == fine.at(3 * int64_t(n) + ax, 0));
  }

  SECTION("restriction is the transpose of prolongation") {
    tst::Rng rng(42);
    const auto w = tst::random_batch<double>(m.vertex_count, 1, rng);
    const auto v = tst::random_batch<double>(m.node_count(), 1, rng);
    VectorBatch64 pw, ptv;
    p.apply(w, pw);
    p.restrict_to_coarse(v, ptv);
    std::vector<double> lhs, rhs;
    dot_columns(pw, v, lhs);
    dot_columns(w, ptv, rhs);
    CHECK(std::abs(lhs[0] - rhs[0]) < 1e-12 * std::abs(lhs[0]) + 1e-14);
  }
}

TEST_CASE("aggregation: singletons, paths, and the cube graph") {
  SECTION("diagonal-only matrix leaves every node a singleton") {
    const auto a = diagonal_matrix(6);
    const Aggregation agg = aggregate_p1(a, 4);
    CHECK(agg.n_aggregates == 6);
    for (int32_t n = 0; n < 6; ++n) CHECK(agg.agg_of_node[n] == n);
  }

  SECTION("path graph of 8 nodes with target 8 becomes one aggregate") {
    const auto a = path_matrix(8);
    const Aggregation agg = aggregate_p1(a, 8);
    CHECK(agg.n_aggregates == 1);
    for (int32_t n = 0; n < 8; ++n) CHECK(agg.agg_of_node[n] == 0);
  }

  SECTION("path graph with target 4 gives two aggregates of four") {
    const auto a = path_matrix(8);
    const Aggregation agg = aggregate_p1(a, 4);
    CHECK(agg.n_aggregates == 2);
  }

  SECTION("unit-cube vertex graph with target 8 is one aggregate") {
    const Mesh m = tst::unit_cube_mesh(FixedBoundary::none);
    const EbeOperator<double> op(m, 1, tst::stiff_material(), {});
    const auto k1 = assemble_bcsr(op);

    // brute-force connectivity check on the known adjacency
    std::set<int32_t> reached = {0};
    std::vector<int32_t> stack = {0};
    while (!stack.empty()) {
      const int32_t n = stack.back();
      stack.pop_back();
      for (int32_t e = k1.row_ptr[n]; e < k1.row_ptr[n + 1]; ++e)
        if (reached.insert(k1.col_idx[e]).second) stack.push_back(k1.col_idx[e]);
    }
    REQUIRE(reached.size() == 8);

    const Aggregation agg = aggregate_p1(k1, 8);
    CHECK(agg.n_aggregates == 1);
    for (int32_t n = 0; n < 8; ++n) CHECK(agg.agg_of_node[n] == 0);
  }

  SECTION("target below 2 is rejected") {
    CHECK_THROWS_AS(aggregate_p1(diagonal_matrix(3), 1), ValidationError);
  }
}

TEST_CASE("level-2 Galerkin product matches the dense triple product") {
  const Mesh m = tst::unit_cube_mesh(FixedBoundary::none);
  const EbeOperator<double> op(m, 1, tst::stiff_material(), {});
  const auto k1 = assemble_bcsr(op);

  SECTION("single aggregate sums every block of a constrained operator") {
    // constrained so the block sum is not annihilated by rigid translations
    const Mesh mc = tst::unit_cube_mesh();
    const auto full = dirichlet_mask(mc);
    std::vector<uint8_t> mask1(full.begin(), full.begin() + 3 * mc.vertex_count);
    const EbeOperator<double> opc(mc, 1, tst::stiff_material(), mask1);
    const auto k1c = assemble_bcsr(opc);
    const Aggregation agg = aggregate_p1(k1c, 8);
    REQUIRE(agg.n_aggregates == 1);
    auto [p2, a2] = build_level2(k1c, agg, mask1);
    REQUIRE(a2.n_block_rows == 1);
    Eigen::Matrix3d sum = Eigen::Matrix3d::Zero();
    for (size_t e = 0; e < k1c.blocks.size(); ++e) {
      // the Galerkin product drops constrained rows/cols before summing
      const int32_t r = [&] {
        int32_t row = 0;
        while (k1c.row_ptr[row + 1] <= static_cast<int32_t>(e)) ++row;
        return row;
      }();
      const int32_t c = k1c.col_idx[e];
      for (int i = 0; i < 3; ++i) {
        if (mask1[3 * r + i]) continue;
        for (int j = 0; j < 3; ++j) {
          if (mask1[3 * c + j]) continue;
          sum(i, j) += k1c.blocks[e][3 * i + j];
        }
      }
    }
    // axes whose fine support is entirely constrained collapse to identity
    for (int i = 0; i < 3; ++i)
      if (sum(i, i) == 0.0) sum(i, i) = 1.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        CHECK(std::abs(a2.blocks[0][3 * i + j] - sum(i, j)) <=
              1e-12 * std::abs(sum.cwiseAbs().maxCoeff()));
    (void)p2;
  }

  SECTION("two aggregates against the dense oracle") {
    const Aggregation agg = aggregate_p1(k1, 4);
    REQUIRE(agg.n_aggregates >= 2);
    auto [p2, a2] = build_level2(k1, agg);

    Eigen::MatrixXd pd = Eigen::MatrixXd::Zero(3 * k1.n_block_rows, 3 * agg.n_aggregates);
    for (int32_t fn = 0; fn < k1.n_block_rows; ++fn)
      for (int i = 0; i < 3; ++i) pd(3 * fn + i, 3 * agg.agg_of_node[fn] + i) = 1.0;
    const Eigen::MatrixXd kd = tst::bcsr_to_dense(k1);
    const Eigen::MatrixXd oracle = pd.transpose() * kd * pd;
    const Eigen::MatrixXd got = tst::bcsr_to_dense(a2);
    CHECK((got - oracle).cwiseAbs().maxCoeff() <= 1e-12 * oracle.cwiseAbs().maxCoeff());

    // P2 preserves constants
    VectorBatch64 c(agg.n_aggregates, 1), f;
    for (auto& v : c.data) v = -1.5;
    p2.apply(c, f);
    for (double v : f.data) CHECK(v == -1.5);

    // Galerkin symmetry
    CHECK((got - got.transpose()).cwiseAbs().maxCoeff() <=
          1e-12 * got.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("energy identity: (w, A2 w) = (P2 w, K1 P2 w)") {
  BoxMeshSpec spec;
  spec.extents = {2, 2, 2};
  spec.divisions = {2, 2, 2};
  spec.fixed_boundary = FixedBoundary::none;
  const Mesh m = generate_box_mesh(spec);
  const EbeOperator<double> op(m, 1, tst::layered_materials(), {});
  const auto k1 = assemble_bcsr(op);
  const Aggregation agg = aggregate_p1(k1, 8);
  auto [p2, a2] = build_level2(k1, agg);

  tst::Rng rng(51);
  SECTION("64-bit route, tight") {
    const auto w = tst::random_batch<double>(agg.n_aggregates, 1, rng);
    VectorBatch64 a2w, pw, kpw;
    a2.apply(w, a2w);
    p2.apply(w, pw);
    k1.apply(pw, kpw);
    std::vector<double> lhs, rhs;
    dot_columns(w, a2w, lhs);
    dot_columns(pw, kpw, rhs);
    CHECK(std::abs(lhs[0] - rhs[0]) <= 1e-11 * std::abs(rhs[0]));
  }
  SECTION("32-bit route at the documented tolerance") {
    const auto a2f = cast_bcsr<float>(a2);
    const auto k1f = cast_bcsr<float>(k1);
    auto w = tst::random_batch<float>(agg.n_aggregates, 1, rng);
    VectorBatch32 a2w, pw, kpw;
    a2f.apply(w, a2w);
    p2.apply(w, pw);
    k1f.apply(pw, kpw);
    std::vector<double> lhs, rhs;
    dot_columns(w, a2w, lhs);
    dot_columns(pw, kpw, rhs);
    CHECK(std::abs(lhs[0] - rhs[0]) <= 1e-5 * std::abs(rhs[0]));
  }
}

TEST_CASE("coarse level is strictly smaller and masked dofs become identity") {
  BoxMeshSpec spec;
  spec.extents = {2, 2, 1};
  spec.divisions = {2, 2, 1};
  const Mesh m = generate_box_mesh(spec);
  const auto full = dirichlet_mask(m);
  std::vector<uint8_t> mask1(full.begin(), full.begin() + 3 * m.vertex_count);
  const EbeOperator<double> op(m, 1, tst::layered_materials(), mask1);
  const auto k1 = assemble_bcsr(op);
  const Aggregation agg = aggregate_p1(k1, 4);
  CHECK(agg.n_aggregates < k1.n_block_rows);

  auto [p2, a2] = build_level2(k1, agg, mask1);
  const auto mask2 = coarse_mask(agg, mask1);
  const Eigen::MatrixXd d = tst::bcsr_to_dense(a2);

  // every coarse dof flagged as constrained carries a clean identity row
  for (int32_t cd = 0; cd < 3 * agg.n_aggregates; ++cd) {
    if (!mask2[cd]) {
      CHECK(d(cd, cd) > 0.0);
      continue;
    }
    for (int32_t c = 0; c < d.cols(); ++c) CHECK(d(cd, c) == (c == cd ? 1.0 : 0.0));
  }

  // SPD on the free dofs
  std::vector<int> free_dofs;
  for (int32_t cd = 0; cd < 3 * agg.n_aggregates; ++cd)
    if (!mask2[cd]) free_dofs.push_back(cd);
  Eigen::MatrixXd dfree(free_dofs.size(), free_dofs.size());
  for (size_t i = 0; i < free_dofs.size(); ++i)
    for (size_t j = 0; j < free_dofs.size(); ++j) dfree(i, j) = d(free_dofs[i], free_dofs[j]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dfree);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);

  // empty aggregate is rejected
  Aggregation bad = agg;
  bad.n_aggregates += 1;
  CHECK_THROWS_AS(build_level2(k1, bad, mask1), ValidationError);
}
