#include <catch2/catch.hpp>

#include <filesystem>

#include "tetsolve/greens.hpp"
#include "tetsolve/model.hpp"
#include "test_helpers.hpp"

using namespace tetsolve;

namespace {

/// Two unit cells stacked in z with the horizontal interface as the fault:
/// two triangles, four vertices, five edges.
struct StackedPair {
  Mesh mesh;
  std::vector<std::array<int32_t, 3>> fault;
};

StackedPair stacked_pair(FixedBoundary fb) {
  BoxMeshSpec spec;
  spec.extents = {1.0, 1.0, 2.0};
  spec.divisions = {1, 1, 2};
  spec.fixed_boundary = fb;
  StackedPair sp;
  sp.mesh = generate_box_mesh(spec);
  sp.fault = find_plane_fault_faces(sp.mesh, 2, 1.0, {0, 0, 1}, {1, 1, 1});
  return sp;
}

/// Two tets sharing one face, the shared face being the fault.
struct TwoTets {
  Mesh mesh;
  std::vector<std::array<int32_t, 3>> fault;
};

TwoTets two_tets() {
  TwoTets tt;
  Mesh& m = tt.mesh;
  m.coords = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0.2, 0.2, 1.0}, {0.3, 0.1, -1.0}};
  m.vertex_count = 5;
  m.tets4 = {{0, 1, 2, 3}, {0, 2, 1, 4}};
  m.material_id = {0, 0};
  m.tets10.resize(2);
  static constexpr int ee[6][2] = {{0, 1}, {1, 2}, {2, 0}, {0, 3}, {1, 3}, {2, 3}};
  for (int e = 0; e < 2; ++e) {
    for (int k = 0; k < 4; ++k) m.tets10[e][k] = m.tets4[e][k];
    for (int k = 0; k < 6; ++k) {
      int32_t a = m.tets4[e][ee[k][0]], b = m.tets4[e][ee[k][1]];
      auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
      auto it = m.edge_map.find(key);
      int32_t id;
      if (it == m.edge_map.end()) {
        id = m.node_count();
        m.coords.push_back(0.5 * (m.coords[a] + m.coords[b]));
        m.edge_map.emplace(key, id);
      } else {
        id = it->second;
      }
      m.tets10[e][4 + k] = id;
    }
  }
  validate_mesh(m);
  tt.fault = {{0, 1, 2}};
  return tt;
}

} // namespace

TEST_CASE("splitting duplicates every fault node including edge nodes") {
  const StackedPair sp = stacked_pair(FixedBoundary::none);
  REQUIRE(sp.fault.size() == 2);

  auto [split, patch] = split_nodes(sp.mesh, sp.fault);
  // 4 vertices plus 5 edge nodes on the two-triangle surface
  CHECK(split.vertex_count - sp.mesh.vertex_count == 4);
  CHECK(split.node_count() - sp.mesh.node_count() == 9);
  CHECK(patch.split_nodes.size() == 9);
  validate_mesh(split);

  for (const auto& sn : patch.split_nodes) {
    CHECK(split.coords[sn.minus] == split.coords[sn.plus]);
    CHECK(patch.to_base[sn.minus] == sn.base);
    CHECK(patch.to_base[sn.plus] == sn.base);
    // dip, strike and the face normal form an orthonormal frame
    const Vec3& n = patch.faces[0].normal;
    CHECK(std::abs(dot(sn.dip, sn.strike)) < 1e-12);
    CHECK(std::abs(dot(sn.dip, n)) < 1e-12);
    CHECK(std::abs(norm(sn.dip) - 1.0) < 1e-12);
    CHECK(std::abs(norm(sn.strike) - 1.0) < 1e-12);
  }
}

TEST_CASE("tied split pairs reproduce the unsplit operator") {
  const StackedPair sp = stacked_pair(FixedBoundary::none);
  auto [split, patch] = split_nodes(sp.mesh, sp.fault);
  const auto mats = tst::stiff_material();
  const EbeOperator<double> k_split(split, 2, mats, {});
  const EbeOperator<double> k_base(sp.mesh, 2, mats, {});

  tst::Rng rng(71);
  const auto x = tst::random_batch<double>(sp.mesh.node_count(), 1, rng);
  // T x: both copies carry the base value
  VectorBatch64 tx(split.node_count(), 1);
  for (int32_t s = 0; s < split.node_count(); ++s)
    for (int a = 0; a < 3; ++a)
      tx.at(3 * int64_t(s) + a, 0) = x.at(3 * int64_t(patch.to_base[s]) + a, 0);
  VectorBatch64 w, kx;
  k_split.apply(tx, w);
  k_base.apply(x, kx);
  // T^T w folds the copies back
  VectorBatch64 folded(sp.mesh.node_count(), 1);
  for (int32_t s = 0; s < split.node_count(); ++s)
    for (int a = 0; a < 3; ++a)
      folded.at(3 * int64_t(patch.to_base[s]) + a, 0) += w.at(3 * int64_t(s) + a, 0);
  CHECK(tst::rel_diff_norm(folded, kx) < 1e-12);
}

TEST_CASE("fault touching a Dirichlet boundary is rejected") {
  const StackedPair sp = stacked_pair(FixedBoundary::bottom_and_sides);
  CHECK_THROWS_AS(split_nodes(sp.mesh, sp.fault), ValidationError);
}

TEST_CASE("boundary faces cannot form a fault") {
  const StackedPair sp = stacked_pair(FixedBoundary::none);
  // a triangle on the outer surface of the box is not interior
  std::array<int32_t, 3> boundary_tri{};
  bool found = false;
  for (int32_t e = 0; e < sp.mesh.element_count() && !found; ++e)
    for (int k = 0; k < 4 && !found; ++k) {
      static constexpr int fv[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
      std::array<int32_t, 3> tri = {sp.mesh.tets4[e][fv[k][0]], sp.mesh.tets4[e][fv[k][1]],
                                    sp.mesh.tets4[e][fv[k][2]]};
      bool on_bottom = true;
      for (int32_t v : tri) on_bottom &= sp.mesh.coords[v][2] == 0.0;
      if (on_bottom) {
        boundary_tri = tri;
        found = true;
      }
    }
  REQUIRE(found);
  CHECK_THROWS_AS(split_nodes(sp.mesh, {boundary_tri}), ValidationError);
}

TEST_CASE("unit slip basis: bell profile and partition of unity") {
  const StackedPair sp = stacked_pair(FixedBoundary::none);
  auto [split, patch] = split_nodes(sp.mesh, sp.fault);

  SECTION("center value one, zero beyond the radius") {
    // center exactly on the corner node of the surface
    const Vec3 center = {0.0, 0.0, 1.0};
    const UnitSlip slip = unit_slip_basis(patch, sp.mesh, center, SlipDirection::dip, 0.8);
    for (size_t i = 0; i < patch.split_nodes.size(); ++i) {
      const double dist = norm(patch.split_nodes[i].coord - center);
      if (dist == 0.0) CHECK(slip.magnitude[i] == 1.0);
      if (dist >= 0.8) CHECK(slip.magnitude[i] == 0.0);
      CHECK(slip.magnitude[i] >= 0.0);
      CHECK(slip.magnitude[i] <= 1.0);
    }
  }

  SECTION("shifted bells on a line sum to a constant") {
    // quadratic B-splines overlap exactly when centers sit 2R/3 apart
    const double radius = 1.0, spacing = 2.0 / 3.0;
    for (double x : {0.0, 0.21, 0.4, 0.55}) {
      double sum = 0.0;
      for (int k = -40; k <= 40; ++k) sum += bspline_bell(std::abs(x - k * spacing) / radius);
      CHECK(std::abs(sum - 4.0 / 3.0) < 1e-12);
    }
  }

  SECTION("off-plane center is rejected") {
    CHECK_THROWS_AS(
        unit_slip_basis(patch, sp.mesh, Vec3{0.5, 0.5, 1.4}, SlipDirection::dip, 0.5),
        ValidationError);
  }
}

TEST_CASE("slip lifting: zero slip, linearity, energy gradient") {
  const TwoTets tt = two_tets();
  auto [split, patch] = split_nodes(tt.mesh, tt.fault);
  REQUIRE(patch.split_nodes.size() == 6); // 3 vertices + 3 edge nodes
  const auto mats = tst::stiff_material();
  const EbeOperator<double> k_split(split, 2, mats, {});

  std::vector<Vec3> delta(patch.split_nodes.size(), Vec3{0, 0, 0});

  SECTION("zero slip gives a zero right-hand side") {
    const auto f = slip_to_rhs(k_split, patch, delta, {}, tt.mesh.node_count());
    for (double v : f.data) CHECK(v == 0.0);
  }

  SECTION("doubling the slip doubles the force exactly") {
    tst::Rng rng(73);
    for (auto& d : delta) d = {rng.sym(), rng.sym(), rng.sym()};
    std::vector<Vec3> delta2 = delta;
    for (auto& d : delta2) d = 2.0 * d;
    const auto f1 = slip_to_rhs(k_split, patch, delta, {}, tt.mesh.node_count());
    const auto f2 = slip_to_rhs(k_split, patch, delta2, {}, tt.mesh.node_count());
    for (int64_t d = 0; d < f1.n_dofs(); ++d) CHECK(f2.at(d, 0) == 2.0 * f1.at(d, 0));
  }

  SECTION("force equals the negative energy gradient at zero") {
    tst::Rng rng(74);
    for (auto& d : delta) d = {rng.sym(), rng.sym(), rng.sym()};
    const auto f = slip_to_rhs(k_split, patch, delta, {}, tt.mesh.node_count());

    // E(v) = 1/2 (T v + g)^T K_split (T v + g) with g the +-delta/2 field
    VectorBatch64 g(split.node_count(), 1);
    for (size_t i = 0; i < patch.split_nodes.size(); ++i)
      for (int a = 0; a < 3; ++a) {
        g.at(3 * int64_t(patch.split_nodes[i].plus) + a, 0) = 0.5 * delta[i][a];
        g.at(3 * int64_t(patch.split_nodes[i].minus) + a, 0) = -0.5 * delta[i][a];
      }
    auto energy = [&](const VectorBatch64& v) {
      VectorBatch64 full(split.node_count(), 1), kf;
      for (int32_t s = 0; s < split.node_count(); ++s)
        for (int a = 0; a < 3; ++a)
          full.at(3 * int64_t(s) + a, 0) =
              g.at(3 * int64_t(s) + a, 0) + v.at(3 * int64_t(patch.to_base[s]) + a, 0);
      k_split.apply(full, kf);
      std::vector<double> e;
      dot_columns(full, kf, e);
      return 0.5 * e[0];
    };

    double fscale = 0.0;
    for (double v : f.data) fscale = std::max(fscale, std::abs(v));
    const double h = 1.0; // E is quadratic: the central difference is exact
    for (int64_t d = 0; d < f.n_dofs(); d += 7) {
      VectorBatch64 vp(tt.mesh.node_count(), 1), vm(tt.mesh.node_count(), 1);
      vp.at(d, 0) = h;
      vm.at(d, 0) = -h;
      const double grad = (energy(vp) - energy(vm)) / (2.0 * h);
      CHECK(std::abs(-grad - f.at(d, 0)) <= 1e-6 * std::max(fscale, 1.0));
    }
  }
}

TEST_CASE("greens bank on a faulted box") {
  BoxMeshSpec spec;
  spec.extents = {2.0, 3.0, 2.0};
  spec.divisions = {2, 3, 2};
  Mesh mesh = generate_box_mesh(spec);
  const auto fault = find_plane_fault_faces(mesh, 0, 1.0, {1.0, 1.0, 1.0}, {1.0, 2.0, 2.0});
  REQUIRE(fault.size() == 2);

  SolverConfig cfg;
  cfg.batch_size = 16;
  cfg.outer_tol = 1e-9;
  FaultedModel fm = build_faulted_model(std::move(mesh), tst::stiff_material(), fault, cfg);

  const Vec3 center = {1.0, 1.5, 1.5};
  const double radius = 1.2;

  SECTION("17 slips with batch 16 run exactly 2 solver calls") {
    CHECK(greens_batch_plan(368, 16).size() == 23);
    CHECK(greens_batch_plan(17, 16).size() == 2);
    CHECK(greens_batch_plan(16, 16).size() == 1);
    CHECK(greens_batch_plan(1, 16).size() == 1);

    std::vector<UnitSlip> slips;
    for (int i = 0; i < 17; ++i)
      slips.push_back(unit_slip_basis(fm.patch, fm.base.mesh, center,
                                      i % 2 ? SlipDirection::strike : SlipDirection::dip,
                                      radius * (1.0 + 0.02 * i)));
    std::vector<ObservationComponent> obs = {{{0.5, 1.5, 2.0}, 0},
                                             {{0.5, 1.5, 2.0}, 2},
                                             {{1.5, 2.0, 2.0}, 1}};
    auto [bank, report] = compute_greens_bank(fm, slips, obs, cfg);
    CHECK(report.solver_calls == 2);
    CHECK(bank.rows == 3);
    CHECK(bank.cols == 17);
    for (double v : bank.values) CHECK(std::isfinite(v));

    // the same slip recomputed in another batch agrees to solver accuracy
    // (iteration counts differ because termination is max over columns)
    std::vector<UnitSlip> again = {slips[0], slips[2]};
    auto [bank2, report2] = compute_greens_bank(fm, again, obs, cfg);
    CHECK(report2.solver_calls == 1);
    for (int32_t r = 0; r < 3; ++r) {
      CHECK(tst::rel_err(bank2.at(r, 0), bank.at(r, 0)) < 1e-6);
      CHECK(tst::rel_err(bank2.at(r, 1), bank.at(r, 2)) < 1e-6);
    }

    SECTION("bank file round-trips bit-exactly") {
      namespace fs = std::filesystem;
      const auto dir = fs::temp_directory_path() / "tetsolve_fault_test";
      fs::create_directories(dir);
      const auto path = (dir / "bank.tsgreens").string();
      write_greens_bank(bank, path);
      const GreensBank back = read_greens_bank(path);
      CHECK(back.rows == bank.rows);
      CHECK(back.cols == bank.cols);
      CHECK(back.values == bank.values);
      CHECK(back.columns.size() == bank.columns.size());
      for (size_t c = 0; c < back.columns.size(); ++c) {
        CHECK(back.columns[c].center == bank.columns[c].center);
        CHECK(back.columns[c].direction == bank.columns[c].direction);
        CHECK(back.columns[c].radius == bank.columns[c].radius);
      }
    }
  }

  SECTION("superposition of two slips") {
    const UnitSlip s1 = unit_slip_basis(fm.patch, fm.base.mesh, center, SlipDirection::dip,
                                        radius);
    const UnitSlip s2 = unit_slip_basis(fm.patch, fm.base.mesh, Vec3{1.0, 1.8, 1.4},
                                        SlipDirection::dip, 0.9);
    const double a1 = 0.7, a2 = -1.3;

    auto solve_rhs = [&](const VectorBatch64& f) {
      VectorBatch64 u0(fm.base.mesh.node_count(), 1);
      SolverConfig c1 = cfg;
      c1.batch_size = 1;
      return solve(fm.base.levels, f, u0, c1).first;
    };
    const auto f1 = slip_to_rhs(fm, s1);
    const auto f2 = slip_to_rhs(fm, s2);
    VectorBatch64 fc(fm.base.mesh.node_count(), 1);
    for (int64_t d = 0; d < fc.n_dofs(); ++d)
      fc.at(d, 0) = a1 * f1.at(d, 0) + a2 * f2.at(d, 0);

    const auto u1 = solve_rhs(f1);
    const auto u2 = solve_rhs(f2);
    const auto uc = solve_rhs(fc);
    VectorBatch64 combo(fm.base.mesh.node_count(), 1);
    for (int64_t d = 0; d < combo.n_dofs(); ++d)
      combo.at(d, 0) = a1 * u1.at(d, 0) + a2 * u2.at(d, 0);
    CHECK(tst::rel_diff_norm(uc, combo) < 1e-5);
  }

  SECTION("reciprocity: source and receiver exchange") {
    const UnitSlip s1 = unit_slip_basis(fm.patch, fm.base.mesh, center, SlipDirection::strike,
                                        radius);
    const auto f1 = slip_to_rhs(fm, s1);
    // receiver: an unconstrained top-surface node, x component
    int32_t obs_node = -1;
    for (int32_t n = 0; n < fm.base.mesh.node_count(); ++n)
      if (fm.base.mesh.coords[n][2] == 2.0 && !fm.base.mask[3 * n]) {
        obs_node = n;
        break;
      }
    REQUIRE(obs_node >= 0);
    const int64_t obs_dof = 3 * int64_t(obs_node);

    VectorBatch64 f2(fm.base.mesh.node_count(), 1);
    f2.at(obs_dof, 0) = 1.0;
    VectorBatch64 u0(fm.base.mesh.node_count(), 1);
    SolverConfig c1 = cfg;
    c1.batch_size = 1;
    const auto u1 = solve(fm.base.levels, f1, u0, c1).first;
    const auto u2 = solve(fm.base.levels, f2, u0, c1).first;

    const double direct = u1.at(obs_dof, 0);
    std::vector<double> exchanged;
    dot_columns(f1, u2, exchanged);
    CHECK(std::abs(direct - exchanged[0]) <= 1e-6 * std::abs(direct));
  }

  SECTION("the solution reproduces the prescribed jump and equilibrium") {
    const UnitSlip s1 = unit_slip_basis(fm.patch, fm.base.mesh, center, SlipDirection::dip,
                                        radius);
    const auto delta = slip_vectors(fm.patch, s1);
    const auto f1 = slip_to_rhs(fm, s1);
    VectorBatch64 u0(fm.base.mesh.node_count(), 1);
    SolverConfig c1 = cfg;
    c1.batch_size = 1;
    const auto u_base = solve(fm.base.levels, f1, u0, c1).first;

    const auto u_split = reconstruct_split_solution(fm.patch, delta, u_base,
                                                    fm.split_mesh.node_count());
    // jump across every split pair equals the prescribed slip exactly
    for (size_t i = 0; i < fm.patch.split_nodes.size(); ++i) {
      const auto& sn = fm.patch.split_nodes[i];
      for (int a = 0; a < 3; ++a) {
        const double jump =
            u_split.at(3 * int64_t(sn.plus) + a, 0) - u_split.at(3 * int64_t(sn.minus) + a, 0);
        CHECK(std::abs(jump - delta[i][a]) <= 1e-12 * std::max(1.0, std::abs(delta[i][a])));
      }
    }
    // split-mesh internal forces folded onto the free base dofs vanish to
    // solver tolerance (equilibrium of the reconstructed state)
    VectorBatch64 w;
    fm.split_raw.apply(u_split, w);
    VectorBatch64 folded(fm.base.mesh.node_count(), 1);
    for (int32_t s = 0; s < fm.split_mesh.node_count(); ++s)
      for (int a = 0; a < 3; ++a)
        folded.at(3 * int64_t(fm.patch.to_base[s]) + a, 0) += w.at(3 * int64_t(s) + a, 0);
    zero_masked(folded, fm.base.mask);
    std::vector<double> res2, f2n;
    norm2_columns(folded, res2);
    norm2_columns(f1, f2n);
    CHECK(std::sqrt(res2[0] / f2n[0]) <= 1e-8);
  }

  SECTION("sampling at a node returns the nodal value; outside points fail") {
    const UnitSlip s1 = unit_slip_basis(fm.patch, fm.base.mesh, center, SlipDirection::dip,
                                        radius);
    const auto f1 = slip_to_rhs(fm, s1);
    VectorBatch64 u0(fm.base.mesh.node_count(), 1);
    SolverConfig c1 = cfg;
    c1.batch_size = 1;
    const auto u = solve(fm.base.levels, f1, u0, c1).first;

    const int32_t node = 4; // a vertex somewhere in the mesh
    const Vec3 p = fm.base.mesh.coords[node];
    for (int a = 0; a < 3; ++a) {
      const double got = sample_displacement(fm.base.mesh, u, 0, p, a);
      const double want = u.at(3 * int64_t(node) + a, 0);
      CHECK(std::abs(got - want) <= 1e-10 * std::max(std::abs(want), 1e-300));
    }
    CHECK_THROWS_AS(sample_displacement(fm.base.mesh, u, 0, Vec3{-5, 0, 0}, 0),
                    ValidationError);
  }
}

TEST_CASE("fault file round trip and parse errors") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "tetsolve_fault_test";
  fs::create_directories(dir);
  const auto path = (dir / "fault.tsfault").string();
  const std::vector<std::array<int32_t, 3>> faces = {{0, 1, 2}, {3, 4, 5}};
  write_fault_faces(faces, path);
  CHECK(read_fault_faces(path) == faces);

  const auto bad = (dir / "bad.tsfault").string();
  {
    std::ofstream os(bad);
    os << "TSFAULT 1\nfaces 2\n0 1 2\n";
  }
  CHECK_THROWS_AS(read_fault_faces(bad), ParseError);
}
