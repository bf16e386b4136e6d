// tetsolve: multigrid mixed-precision FEM solver for crust deformation,
// batched Green's functions, and regularized slip inversion.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "tetsolve/adaptive_cg.hpp"
#include "tetsolve/box_mesh.hpp"
#include "tetsolve/greens.hpp"
#include "tetsolve/inversion.hpp"
#include "tetsolve/mesh_io.hpp"
#include "tetsolve/model.hpp"
#include "tetsolve/solution_io.hpp"
#include "tetsolve/verification.hpp"
#include "tetsolve/vtk_export.hpp"

namespace fs = std::filesystem;
using namespace tetsolve;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNoConvergence = 3;
constexpr int kExitInternal = 4;

struct CommonOpts {
  std::string config;
  std::string out = ".";
  int workers = 1;
  uint64_t seed = 1;
  int batch = 0; // 0: use config/default
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_batch = true) {
  cmd->add_option("--config", o.config, "configuration file")->required();
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--workers", o.workers, "worker thread count")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "random seed");
  if (with_batch)
    cmd->add_option("--batch", o.batch, "batch size override")->check(CLI::PositiveNumber);
}

void ensure_out_dir(const CommonOpts& o) {
  if (!fs::exists(o.out)) fs::create_directories(o.out);
}

std::string out_path(const CommonOpts& o, const std::string& name) {
  return (fs::path(o.out) / name).string();
}

FixedBoundary parse_boundary(const std::string& s) {
  if (s == "none") return FixedBoundary::none;
  if (s == "bottom_and_sides") return FixedBoundary::bottom_and_sides;
  if (s == "all_clamped") return FixedBoundary::all_clamped;
  throw ValidationError("unknown fixed_boundary: " + s);
}

BoxMeshSpec parse_mesh_spec(const Config& cfg) {
  BoxMeshSpec spec;
  const auto ext = cfg.get_doubles("mesh", "extents");
  const auto div = cfg.get_doubles("mesh", "divisions");
  if (ext.size() != 3 || div.size() != 3)
    throw ValidationError("mesh config: extents and divisions need 3 values each");
  for (int a = 0; a < 3; ++a) {
    spec.extents[a] = ext[a];
    spec.divisions[a] = static_cast<int32_t>(div[a]);
  }
  if (cfg.has("mesh", "layers")) spec.layer_interfaces = cfg.get_doubles("mesh", "layers");
  spec.fixed_boundary =
      parse_boundary(cfg.get_string("mesh", "fixed_boundary", "bottom_and_sides"));
  return spec;
}

SolverConfig parse_solver_config(const Config& cfg, const std::string& sec,
                                 const CommonOpts& o) {
  SolverConfig sc;
  sc.outer_tol = cfg.get_double(sec, "outer_tol", sc.outer_tol);
  sc.outer_max_iter = static_cast<int>(cfg.get_int(sec, "outer_max_iter", sc.outer_max_iter));
  sc.level0.tol = cfg.get_double(sec, "level0_tol", sc.level0.tol);
  sc.level0.max_iter = static_cast<int>(cfg.get_int(sec, "level0_max_iter", sc.level0.max_iter));
  sc.level1.tol = cfg.get_double(sec, "level1_tol", sc.level1.tol);
  sc.level1.max_iter = static_cast<int>(cfg.get_int(sec, "level1_max_iter", sc.level1.max_iter));
  sc.level2.tol = cfg.get_double(sec, "level2_tol", sc.level2.tol);
  sc.level2.max_iter = static_cast<int>(cfg.get_int(sec, "level2_max_iter", sc.level2.max_iter));
  sc.batch_size = static_cast<int32_t>(cfg.get_int(sec, "batch", sc.batch_size));
  sc.aggregate_target =
      static_cast<int32_t>(cfg.get_int(sec, "aggregate_target", sc.aggregate_target));
  sc.residual_history_stride =
      static_cast<int>(cfg.get_int(sec, "history_stride", sc.residual_history_stride));
  if (o.batch > 0) sc.batch_size = o.batch;
  sc.validate();
  return sc;
}

Mesh load_mesh(const Config& cfg, const std::string& sec) {
  const std::string mesh_path = cfg.get_string(sec, "mesh");
  Mesh mesh = read_mesh(mesh_path);
  std::string bc_path = cfg.get_string(sec, "dirichlet", "");
  if (bc_path.empty()) {
    const fs::path guess = fs::path(mesh_path).replace_extension(".dirichlet");
    if (fs::exists(guess)) bc_path = guess.string();
  }
  if (!bc_path.empty()) read_dirichlet(mesh, bc_path);
  return mesh;
}

Eigen::VectorXd read_data_vector(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open data file: " + path);
  std::vector<double> vals;
  std::string line;
  long lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    double v;
    if (!(ls >> v)) continue;
    vals.push_back(v);
    if (ls >> v) throw ParseError(path, lineno, "expected exactly one value per line");
  }
  Eigen::VectorXd d(vals.size());
  for (size_t i = 0; i < vals.size(); ++i) d(i) = vals[i];
  return d;
}

/// Slips file: TSSLIPS 1 / count K / K lines "x y z radius"; each center
/// produces a dip column and a strike column, in that order.
std::vector<UnitSlip> read_slips(const std::string& path, const FaultedModel& fm) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open slips file: " + path);
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
    if (magic != "TSSLIPS" || ver != 1) throw ParseError(path, lineno, "expected 'TSSLIPS 1'");
  }
  int64_t count = -1;
  {
    auto ls = next();
    std::string k;
    ls >> k >> count;
    if (k != "count" || ls.fail() || count < 1)
      throw ParseError(path, lineno, "expected 'count K'");
  }
  std::vector<UnitSlip> slips;
  for (int64_t i = 0; i < count; ++i) {
    auto ls = next();
    Vec3 c{};
    double radius = 0.0;
    ls >> c[0] >> c[1] >> c[2] >> radius;
    if (ls.fail()) throw ParseError(path, lineno, "expected 'x y z radius'");
    slips.push_back(unit_slip_basis(fm.patch, fm.base.mesh, c, SlipDirection::dip, radius));
    slips.push_back(unit_slip_basis(fm.patch, fm.base.mesh, c, SlipDirection::strike, radius));
  }
  return slips;
}

int cmd_mesh(const CommonOpts& o) {
  const Config cfg = Config::parse_file(o.config);
  const BoxMeshSpec spec = parse_mesh_spec(cfg);
  const std::string name = cfg.get_string("mesh", "name", "mesh");

  const Mesh mesh = generate_box_mesh(spec);
  validate_mesh(mesh);
  ensure_out_dir(o);
  write_mesh(mesh, out_path(o, name + ".tsmesh"));
  write_dirichlet(mesh, out_path(o, name + ".dirichlet"));

  Summary s;
  s.emplace_back("command", "mesh");
  s.emplace_back("nodes", std::to_string(mesh.node_count()));
  s.emplace_back("vertex_nodes", std::to_string(mesh.vertex_count));
  s.emplace_back("tets", std::to_string(mesh.element_count()));
  s.emplace_back("dofs", std::to_string(3 * int64_t(mesh.node_count())));
  s.emplace_back("dirichlet_dofs", std::to_string(mesh.dirichlet.size()));
  s.emplace_back("volume", fmt_g17(total_volume(mesh)));
  write_summary(out_path(o, name + ".summary"), s);

  std::cout << "mesh: " << mesh.element_count() << " tets, " << mesh.node_count()
            << " nodes (" << mesh.vertex_count << " vertices), "
            << 3 * int64_t(mesh.node_count()) << " dofs\n";
  std::cout << "wrote " << out_path(o, name + ".tsmesh") << "\n";
  return kExitOk;
}

int cmd_solve(const CommonOpts& o, bool export_vtk) {
  const auto t0 = std::chrono::steady_clock::now();
  const Config cfg = Config::parse_file(o.config);
  Mesh mesh = load_mesh(cfg, "solve");
  const auto mats = read_materials(cfg.get_string("solve", "materials"));
  const SolverConfig sc = parse_solver_config(cfg, "solve", o);
  const std::string solver = cfg.get_string("solve", "solver", "amg");
  const std::string rhs_kind = cfg.get_string("solve", "rhs", "manufactured");

  const Vec3 extents = [&] {
    Vec3 e = {0, 0, 0};
    for (const auto& c : mesh.coords)
      for (int a = 0; a < 3; ++a) e[a] = std::max(e[a], c[a]);
    return e;
  }();

  const CrustModel model = build_crust_model(std::move(mesh), mats, sc, o.workers);
  const auto t1 = std::chrono::steady_clock::now();

  VectorBatch64 f(model.mesh.node_count(), sc.batch_size);
  VectorBatch64 ustar;
  bool have_ustar = false;
  if (rhs_kind == "manufactured") {
    // smooth displacement field, amplitude jittered per seed and column
    const double base = cfg.get_double("solve", "amplitude", 0.05);
    DeterministicRng rng(o.seed);
    ustar = VectorBatch64(model.mesh.node_count(), sc.batch_size);
    for (int32_t b = 0; b < sc.batch_size; ++b) {
      const double amp = base * (1.0 + 0.25 * rng.sym());
      for (int32_t n = 0; n < model.mesh.node_count(); ++n) {
        const Vec3& x = model.mesh.coords[n];
        const double pi = 3.14159265358979323846;
        const Vec3 val = {amp * std::sin(pi * x[0] / extents[0]) *
                              std::cos(pi * x[1] / extents[1]) *
                              std::sin(0.5 * pi * x[2] / extents[2]),
                          amp * std::cos(pi * x[0] / extents[0]) *
                              std::sin(pi * x[1] / extents[1]) *
                              std::sin(0.5 * pi * x[2] / extents[2]),
                          amp * std::cos(pi * x[0] / extents[0]) *
                              std::cos(pi * x[1] / extents[1]) *
                              std::sin(0.5 * pi * x[2] / extents[2])};
        for (int a = 0; a < 3; ++a)
          ustar.at(3 * int64_t(n) + a, b) = model.mask[3 * size_t(n) + a] ? 0.0 : val[a];
      }
    }
    model.levels.outer.apply(ustar, f);
    have_ustar = true;
  } else if (rhs_kind.rfind("file:", 0) == 0) {
    f = read_solution(rhs_kind.substr(5));
    if (f.n_nodes != model.mesh.node_count())
      throw ValidationError("rhs file does not match the mesh");
  } else {
    throw ValidationError("solve config: rhs must be 'manufactured' or 'file:PATH'");
  }

  VectorBatch64 u0(model.mesh.node_count(), f.batch);
  std::pair<VectorBatch64, SolveReport> result;
  if (solver == "amg") {
    result = solve(model.levels, f, u0, sc);
  } else if (solver == "pcge") {
    result = solve_pcge(model.levels.outer, f, u0, sc.outer_tol, sc.outer_max_iter);
  } else {
    throw ValidationError("solve config: solver must be 'amg' or 'pcge'");
  }
  auto& [u, rep] = result;
  rep.time_setup_s = std::chrono::duration<double>(t1 - t0).count();

  ensure_out_dir(o);
  write_solution(u, out_path(o, "solution.tsvec"));
  atomic_write(out_path(o, "solve.log"), [&](std::ostream& os) { rep.write_log(os); });
  Summary s = rep.summary();
  s.emplace_back("command", "solve");
  s.emplace_back("dofs", std::to_string(3 * int64_t(model.mesh.node_count())));
  if (have_ustar) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < u.data.size(); ++i) {
      const double d = u.data[i] - ustar.data[i];
      num += d * d;
      den += ustar.data[i] * ustar.data[i];
    }
    s.emplace_back("manufactured_rel_error", fmt_g17(std::sqrt(num / den)));
  }
  write_summary(out_path(o, "solve.summary"), s);
  if (export_vtk) write_vtk(model.mesh, u, 0, out_path(o, "solution.vtk"));

  std::cout << "solve: " << rep.method << ", " << rep.outer_iterations
            << " outer iterations, max residual " << rep.max_final_residual() << "\n";
  return kExitOk;
}

int cmd_greens(const CommonOpts& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const Config cfg = Config::parse_file(o.config);
  Mesh mesh = load_mesh(cfg, "greens");
  const auto mats = read_materials(cfg.get_string("greens", "materials"));
  const SolverConfig sc = parse_solver_config(cfg, "greens", o);
  const auto fault = read_fault_faces(cfg.get_string("greens", "fault"));
  const auto obs = read_observations(cfg.get_string("greens", "observations"));

  FaultedModel fm = build_faulted_model(std::move(mesh), mats, fault, sc, o.workers);
  const auto slips = read_slips(cfg.get_string("greens", "slips"), fm);
  const auto t1 = std::chrono::steady_clock::now();

  auto [bank, report] = compute_greens_bank(fm, slips, obs, sc);

  ensure_out_dir(o);
  write_greens_bank(bank, out_path(o, "greens.tsgreens"));
  atomic_write(out_path(o, "greens.log"), [&](std::ostream& os) {
    os << "setup_time_s " << std::chrono::duration<double>(t1 - t0).count() << "\n";
    for (size_t i = 0; i < report.per_batch.size(); ++i) {
      os << "batch " << i << "\n";
      report.per_batch[i].write_log(os);
    }
  });
  Summary s;
  s.emplace_back("command", "greens");
  s.emplace_back("rows", std::to_string(bank.rows));
  s.emplace_back("cols", std::to_string(bank.cols));
  s.emplace_back("solver_calls", std::to_string(report.solver_calls));
  s.emplace_back("outer_iterations_total", std::to_string(report.outer_iterations));
  s.emplace_back("split_nodes", std::to_string(fm.patch.split_nodes.size()));
  write_summary(out_path(o, "greens.summary"), s);

  std::cout << "greens: " << bank.cols << " columns via " << report.solver_calls
            << " solver calls, " << bank.rows << " observation components\n";
  return kExitOk;
}

int cmd_invert(const CommonOpts& o) {
  const Config cfg = Config::parse_file(o.config);
  const GreensBank bank = read_greens_bank(cfg.get_string("invert", "bank"));
  const Eigen::VectorXd d = read_data_vector(cfg.get_string("invert", "data"));
  if (d.size() != bank.rows)
    throw ValidationError("data vector length " + std::to_string(d.size()) +
                          " does not match bank rows " + std::to_string(bank.rows));

  std::vector<double> alphas;
  if (cfg.has("invert", "alphas")) {
    alphas = cfg.get_doubles("invert", "alphas");
  } else {
    alphas = logspace(cfg.get_double("invert", "alpha_min"),
                      cfg.get_double("invert", "alpha_max"),
                      static_cast<int>(cfg.get_int("invert", "alpha_count")));
  }
  const double neighbor_radius = cfg.get_double("invert", "neighbor_radius");

  Eigen::MatrixXd g(bank.rows, bank.cols);
  for (int32_t r = 0; r < bank.rows; ++r)
    for (int32_t c = 0; c < bank.cols; ++c) g(r, c) = bank.at(r, c);
  const Eigen::MatrixXd l = build_smoothing_matrix(bank.columns, neighbor_radius);

  const LCurve curve = select_alpha_lcurve(g, d, l, alphas);
  const RegularizedSolution sol = solve_regularized(g, d, l, curve.selected_alpha);

  ensure_out_dir(o);
  atomic_write(out_path(o, "inversion.txt"), [&](std::ostream& os) {
    os << "# alpha residual seminorm curvature\n";
    for (const auto& p : curve.points)
      os << fmt_g17(p.alpha) << ' ' << fmt_g17(p.residual_norm) << ' ' << fmt_g17(p.seminorm)
         << ' ' << fmt_g17(p.curvature) << "\n";
    os << "selected_alpha " << fmt_g17(curve.selected_alpha) << "\n";
  });
  atomic_write(out_path(o, "slip_estimate.txt"), [&](std::ostream& os) {
    os << "# x y z direction radius coefficient\n";
    for (int32_t c = 0; c < bank.cols; ++c) {
      const auto& cm = bank.columns[c];
      os << fmt_g17(cm.center[0]) << ' ' << fmt_g17(cm.center[1]) << ' '
         << fmt_g17(cm.center[2]) << ' '
         << (cm.direction == SlipDirection::dip ? "dip" : "strike") << ' '
         << fmt_g17(cm.radius) << ' ' << fmt_g17(sol.a(c)) << "\n";
    }
  });
  Summary s;
  s.emplace_back("command", "invert");
  s.emplace_back("selected_alpha", fmt_g17(curve.selected_alpha));
  s.emplace_back("residual_norm", fmt_g17(sol.residual_norm));
  s.emplace_back("seminorm", fmt_g17(sol.seminorm));
  s.emplace_back("grid_points", std::to_string(curve.points.size()));
  write_summary(out_path(o, "invert.summary"), s);

  std::cout << "invert: selected alpha " << curve.selected_alpha << ", residual "
            << sol.residual_norm << ", seminorm " << sol.seminorm << "\n";
  return kExitOk;
}

int cmd_verify(const CommonOpts& o) {
  const Config cfg = Config::parse_file(o.config);
  const Mesh mesh = load_mesh(cfg, "verify");
  const auto mats = read_materials(cfg.get_string("verify", "materials"));

  const auto checks = run_verification(mesh, mats, o.seed, o.workers);
  bool all_ok = true;
  Summary s;
  s.emplace_back("command", "verify");
  for (const auto& c : checks) {
    all_ok &= c.passed;
    std::printf("[%s] %-28s value %.3e threshold %.3e\n", c.passed ? "PASS" : "FAIL",
                c.name.c_str(), c.value, c.threshold);
    s.emplace_back(c.name, c.passed ? "pass" : "fail");
  }
  ensure_out_dir(o);
  write_summary(out_path(o, "verify.summary"), s);
  if (!all_ok) {
    std::cout << "verify: FAILED\n";
    return kExitInternal;
  }
  std::cout << "verify: all checks passed\n";
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"tetsolve: unstructured FEM crust deformation toolkit"};
  app.require_subcommand(1);

  CommonOpts mesh_o, solve_o, greens_o, invert_o, verify_o;
  bool export_vtk = false;

  CLI::App* c_mesh = app.add_subcommand("mesh", "generate a layered box mesh");
  add_common(c_mesh, mesh_o, false);
  CLI::App* c_solve = app.add_subcommand("solve", "solve one stiffness system");
  add_common(c_solve, solve_o);
  c_solve->add_flag("--export-vtk", export_vtk, "write a legacy VTK displacement file");
  CLI::App* c_greens = app.add_subcommand("greens", "compute a Green's function bank");
  add_common(c_greens, greens_o);
  CLI::App* c_invert = app.add_subcommand("invert", "regularized slip inversion");
  add_common(c_invert, invert_o, false);
  CLI::App* c_verify = app.add_subcommand("verify", "run the oracle checks on a mesh");
  add_common(c_verify, verify_o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (c_mesh->parsed()) return cmd_mesh(mesh_o);
    if (c_solve->parsed()) return cmd_solve(solve_o, export_vtk);
    if (c_greens->parsed()) return cmd_greens(greens_o);
    if (c_invert->parsed()) return cmd_invert(invert_o);
    if (c_verify->parsed()) return cmd_verify(verify_o);
    std::cerr << "error: no command given\n";
    return kExitValidation;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNoConvergence;
  } catch (const SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNoConvergence;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
