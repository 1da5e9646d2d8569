#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "coex/mesh.hpp"
#include "coex/metric.hpp"

namespace coex::verify {

/// Exhaustive bounded integer program: minimize sum area(f) |x_f| over
/// integer 2-chains with boundary exactly `rhs` and |x_f| <= bound.
/// Deliberately naive (depth-first with edge-closure pruning) and fully
/// independent of the LP path; only usable on very small complexes.
/// Returns nothing when no bounded chain matches the boundary.
std::optional<double> ilp_filling_bounded(const SimplicialComplex& X,
                                          const std::vector<double>& face_area,
                                          const Chain& rhs, Coeff bound);

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0;
};

struct SuiteOptions {
  unsigned seed = 7;
  bool quick = false;  // trimmed sizes for smoke runs
  std::function<void(const CriterionResult&)> on_result;
};

/// Run the full acceptance suite; prints nothing itself.
std::vector<CriterionResult> run_acceptance(const SuiteOptions& opts = {});

}  // namespace coex::verify
