#pragma once

#include <string>
#include <vector>

namespace coex {

/// min c^T x  s.t.  A x = b, x >= 0, with sparse columns.
struct LpProblem {
  int rows = 0;
  std::vector<std::vector<std::pair<int, double>>> cols;
  std::vector<double> cost;
  std::vector<double> rhs;
};

enum class LpStatus { Optimal, Infeasible, IterationLimit, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::IterationLimit;
  double objective = 0;
  std::vector<double> x;
  long iterations = 0;
  double max_infeasibility = 0;
};

struct LpOptions {
  long max_iterations = 0;     // 0: auto from problem size
  double feas_tol = 1e-9;
  double cost_tol = 1e-9;
  bool always_bland = false;   // Dantzig pricing otherwise, Bland after stalls
  int refactor_every = 512;
};

/// Two-phase revised simplex with a dense basis inverse. Pricing is
/// Dantzig's rule switching permanently to Bland's rule after a run of
/// degenerate pivots, which keeps the iteration finite. Ties break towards
/// the smallest index everywhere, so results are deterministic.
LpResult solve_lp(const LpProblem& lp, const LpOptions& opts = {});

std::string to_string(LpStatus s);

}  // namespace coex
