#pragma once

#include <optional>
#include <string>
#include <vector>

#include "coex/curves.hpp"
#include "coex/homology.hpp"
#include "coex/metric.hpp"
#include "coex/simplex_lp.hpp"

namespace coex {

struct FillingOptions {
  bool use_universal_r = false;  // r = lcm of torsion orders instead of per-curve
  Coeff r_override = 0;          // force a specific multiplier
  LpOptions lp;
};

struct FillingResult {
  double area = 0;           // A(gamma) estimate: LP objective / r
  Vec chain;                 // real 2-chain S with d2 S = r * gamma
  Coeff r_used = 1;
  LpStatus lp_status = LpStatus::Optimal;
  double residual = 0;       // max-norm feasibility of d2 chain = r gamma
  long lp_iterations = 0;
  double integrality_gap = std::numeric_limits<double>::quiet_NaN();

  double chain_area(const MetricData& M) const;  // area mass of the chain itself
};

/// Minimal-area real 2-chain with boundary r * gamma, area normalized by r.
/// Requires gamma to be real homologically trivial; raises otherwise.
FillingResult min_filling_area(const MetricData& M, const HomologyBasis& H,
                               const Chain& gamma, const FillingOptions& opts = {});

struct SkeletonProjection {
  Chain chain;                     // 1-cycle in the skeleton, homologous to the input
  double correction_area = 0;      // total area of the per-cell cone triangles
  double curve_length = 0;         // metric length of the input polyline
  double chain_length = 0;         // sum |coeff| * edge length of the projection
  long cone_triangles = 0;         // logged off-skeleton triangle count
  double length_factor = 0;        // chain_length / curve_length (the measured C)
  double area_factor = 0;          // correction_area / curve_length
};

/// Project a closed piecewise-linear curve to the 1-skeleton: within each
/// cell the chord is replaced by the edge between the snapped endpoints and
/// the homotopy is the pair of cone triangles whose area is logged.
SkeletonProjection project_to_skeleton(const MetricData& M,
                                       const std::vector<CurveSegment>& poly,
                                       bool require_closed = true);

struct CheegerConfig {
  int tree_cycles = 120;       // fundamental cycles of the shortest-path tree
  int edge_cycles = 120;       // shortest cycles through sampled edges
  int max_lp_calls = 160;
  std::vector<Chain> extra_cycles;  // e.g. projected flow curves
  FillingOptions filling;
};

struct CheegerRow {
  long id = 0;
  double length = 0;
  Coeff r = 1;
  double area = 0;
  double ratio = 0;
};

struct CheegerEstimate {
  double h1_upper = 0;
  Chain witness;
  FillingResult witness_filling;
  long cycles_examined = 0;
  std::vector<CheegerRow> rows;

  std::string to_csv() const;
};

/// Upper bound on the discrete h^1: the best length/filling-area ratio over
/// homologically trivial cycles sampled from spanning-tree fundamental
/// cycles, short cycles through edges, and any supplied candidates.
CheegerEstimate cheeger_estimate(const MetricData& M, const HomologyBasis& H,
                                 const CheegerConfig& config = {});

double chain_length(const MetricData& M, const Chain& gamma);

}  // namespace coex
