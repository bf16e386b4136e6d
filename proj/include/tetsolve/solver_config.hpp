#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "tetsolve/errors.hpp"
#include "tetsolve/io_util.hpp"

namespace tetsolve {

/// Per-level inner-loop control: tolerance on the relative residual norm and
/// the maximum number of update steps.
struct InnerLoopConfig {
  double tol = 0.1;
  int max_iter = 30;
};

struct SolverConfig {
  double outer_tol = 1e-8;   // relative residual norm ||r|| / ||f||
  int outer_max_iter = 5000;
  InnerLoopConfig level0 = {0.1, 30};
  InnerLoopConfig level1 = {0.05, 300};
  InnerLoopConfig level2 = {0.025, 3000};
  int32_t batch_size = 16;
  int32_t aggregate_target = 8;
  int residual_history_stride = 1; // 0 disables history capture

  void validate() const {
    auto check_tol = [](double t, const char* what) {
      if (!(t > 0.0 && t < 1.0))
        throw ValidationError(std::string("solver config: ") + what +
                              " tolerance must lie in (0, 1)");
    };
    check_tol(outer_tol, "outer");
    check_tol(level0.tol, "level 0");
    check_tol(level1.tol, "level 1");
    check_tol(level2.tol, "level 2");
    if (outer_max_iter < 1 || level0.max_iter < 1 || level1.max_iter < 1 ||
        level2.max_iter < 1)
      throw ValidationError("solver config: max iterations must be >= 1");
    if (batch_size < 1) throw ValidationError("solver config: batch size must be >= 1");
    if (aggregate_target < 2)
      throw ValidationError("solver config: aggregate target must be >= 2");
  }
};

struct SolveReport {
  bool converged = false;
  int residual_history_stride = 0;
  int outer_iterations = 0;
  long inner_iterations[3] = {0, 0, 0};        // totals for levels 0, 1, 2
  std::vector<double> final_rel_residual;       // per batch column, recomputed from scratch
  std::vector<std::pair<int, std::vector<double>>> residual_history; // (iter, per-column)
  double time_setup_s = 0.0;
  double time_outer_s = 0.0;
  double time_inner_s[3] = {0.0, 0.0, 0.0};
  double time_total_s = 0.0;
  int32_t batch_size = 0;
  std::string method = "amg";                   // "amg" or "pcge"
  std::string inner_precision = "float32";

  double max_final_residual() const {
    double m = 0.0;
    for (double v : final_rel_residual) m = std::max(m, v);
    return m;
  }

  /// Human-readable line-oriented log (includes timings).
  void write_log(std::ostream& os) const {
    os << "solver " << method << " batch " << batch_size << " inner_precision "
       << inner_precision << "\n";
    os << "converged " << (converged ? "yes" : "no") << "\n";
    os << "outer_iterations " << outer_iterations << "\n";
    os << "inner_iterations level0 " << inner_iterations[0] << " level1 "
       << inner_iterations[1] << " level2 " << inner_iterations[2] << "\n";
    os << "time_s setup " << time_setup_s << " outer " << time_outer_s << " inner0 "
       << time_inner_s[0] << " inner1 " << time_inner_s[1] << " inner2 " << time_inner_s[2]
       << " total " << time_total_s << "\n";
    for (size_t b = 0; b < final_rel_residual.size(); ++b)
      os << "final_rel_residual col " << b << " " << fmt_g17(final_rel_residual[b]) << "\n";
    for (const auto& [it, res] : residual_history) {
      os << "history iter " << it;
      for (double v : res) os << ' ' << fmt_g17(v);
      os << "\n";
    }
  }

  /// Structured summary; excludes wall times so outputs stay byte-reproducible.
  Summary summary() const {
    Summary s;
    s.emplace_back("method", method);
    s.emplace_back("converged", converged ? "1" : "0");
    s.emplace_back("batch_size", std::to_string(batch_size));
    s.emplace_back("outer_iterations", std::to_string(outer_iterations));
    s.emplace_back("inner_iterations_level0", std::to_string(inner_iterations[0]));
    s.emplace_back("inner_iterations_level1", std::to_string(inner_iterations[1]));
    s.emplace_back("inner_iterations_level2", std::to_string(inner_iterations[2]));
    s.emplace_back("inner_precision", inner_precision);
    s.emplace_back("max_final_rel_residual", fmt_g17(max_final_residual()));
    for (size_t b = 0; b < final_rel_residual.size(); ++b)
      s.emplace_back("final_rel_residual_" + std::to_string(b),
                     fmt_g17(final_rel_residual[b]));
    return s;
  }
};

/// Outer loop exhausted its iteration cap; carries the report accumulated so far.
class ConvergenceError : public SolverError {
public:
  ConvergenceError(const std::string& msg, SolveReport rep)
      : SolverError(msg), report(std::move(rep)) {}
  SolveReport report;
};

} // namespace tetsolve
