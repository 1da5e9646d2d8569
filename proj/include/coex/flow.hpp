#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "coex/curves.hpp"
#include "coex/filling.hpp"
#include "coex/homology.hpp"
#include "coex/metric.hpp"

namespace coex {

/// Piecewise-constant cell field with single-valued face fluxes.
struct CellField {
  std::vector<Eigen::Vector3d> velocity;  // chart components per cell
  std::vector<double> speed;              // metric norm per cell
  double flux_l1 = 0;                     // sum vol_t |X_t|, the flow L1 norm
  double max_divergence = 0;              // exact check: 0 up to rounding
};

/// X = (star d alpha)#: per cell the constant vector whose fluxes through
/// the four faces are the 2-cochain D1 alpha, which is single-valued across
/// interior faces by construction. A zero field only warns through the
/// `trivial` flag.
struct FieldResult {
  CellField field;
  bool trivial = false;
};
FieldResult build_vector_field(const MetricData& M, const Vec& alpha);

/// Same structure for a globally constant chart field (flat torus runs and
/// straight-line tracing).
CellField constant_field(const MetricData& M, const Eigen::Vector3d& v);

struct FlowCurve {
  std::vector<CurveSegment> segments;
  std::vector<double> times;  // per segment
  double total_time = 0;
  double length = 0;
  Index start_tet = 0;
  Eigen::Vector4d start_bary;
  long stalled_cells = 0;   // time spent in zero-velocity cells
  long jitter_events = 0;   // near codimension-2 crossings nudged
};

struct TraceOptions {
  double time = 1.0;
  long max_segments = 50'000'000;
  // Streaming consumer; when set, segments are handed over instead of stored.
  std::function<void(const CurveSegment&, double dt)> sink;
};

/// Exact integration of the piecewise-constant field: straight chart
/// segments, faces crossed by ray-plane intersection, barycentric re-entry
/// into the neighbor.
FlowCurve integrate_trajectory(const MetricData& M, const CellField& field, Index start_tet,
                               const Eigen::Vector4d& start_bary, const TraceOptions& opts);

/// Where a plain trajectory ends and what it accumulated, streamed.
struct TrajectoryStats {
  double length = 0;
  std::vector<double> beta_pairings;  // line integrals of supplied cochains
  Index start_tet = 0, end_tet = 0;
  Eigen::Vector4d start_bary, end_bary;
  Chain projection;          // skeleton projection contribution (open chain)
  double projection_cone_area = 0;       // homotopy area to the skeleton
  Index snap_start = -1, snap_end = -1;  // dominant vertices at endpoints
  double snap_chord_length = 0;
  long stalled = 0, jitter = 0;
};

TrajectoryStats trace_with_pairings(const MetricData& M, const CellField& field,
                                    Index start_tet, const Eigen::Vector4d& start_bary,
                                    double T, const std::vector<Vec>& cochains);

struct ClosedConstruction {
  long n = 0;
  double T = 0;
  double gamma_length = 0;      // trajectories only
  double nu_length = 0;         // connectors, snaps and unrolling loops
  double connector_length = 0;  // chords + edge paths alone
  std::vector<Coeff> unroll_coeffs;       // c_j
  double rounding_residual = 0;           // max_j |pairing - c_j| before rounding
  double homology_residual = 0;           // max_j |<beta_j, Gamma>|
  Chain skeleton_cycle;                   // projected Gamma, exactly closed
  double skeleton_length = 0;
  double projection_cone_area = 0;        // homotopy area Gamma -> skeleton
  std::vector<double> gamma_pairings;     // raw trajectory-only pairings per j
  double primitive_pairing = 0;           // (1/nT) integral of beta over gamma
  // Pairings of the full closed Gamma with cochains supplied beyond the
  // k duals ("passengers", e.g. the primitive beta).
  std::vector<double> passenger_pairings;
};

struct MonteCarloConfig {
  long n = 64;
  double T = 8;
  unsigned long seed = 1;
  int threads = 1;
  double rounding_limit = 0.1;
  // The primitive residual is the lowest-order best-approximation error
  // of star(alpha) by exact Whitney 2-forms, O(h) with an O(1) constant
  // on oscillatory eigenforms; the limit only guards structural failure.
  double primitive_residual_limit = 0.8;
};

struct MonteCarloReport {
  // estimates vs targets, per Proposition-style items 1..4
  double nu_fraction = 0;            // item 1: l(nu)/nT
  double length_rate = 0;            // item 2: l(gamma)/nT
  double length_target = 0;          //         flux L1 norm of d alpha
  double dec_length_target = 0;      //         Whitney quadrature L1 norm
  double homology_residual = 0;      // item 3
  double pairing_rate = 0;           // item 4: (1/nT) int_gamma beta
  double pairing_target = 0;         //         flow average of i_X beta
  double alpha_l2sq = 0;             //         quadrature ||alpha||_2^2
  double stderr_length = 0;          // batch-means standard errors
  double stderr_pairing = 0;
  long n = 0;
  double T = 0;
  unsigned long seed = 0;
  ClosedConstruction construction;

  std::string to_json() const;
};

/// Close and homologically unroll a family of trajectories (Lemma-3.1
/// style): connectors are shortest edge paths between snapped endpoints,
/// unrolling subtracts rounded dual pairings times the basis loops.
/// Trajectory pairings beyond the first k (the duals of H) ride along as
/// passengers: their integrals over the full closed Gamma are reported.
ClosedConstruction close_and_unroll(const MetricData& M, const HomologyBasis& H,
                                    const std::vector<TrajectoryStats>& trajectories,
                                    double T, double rounding_limit = 0.1,
                                    const std::vector<Vec>& passengers = {});

/// Volume-weighted random starts, n trajectories of time T, the closed
/// construction, and the four estimates with batch-means errors.
/// beta is the minimum-M1-norm primitive with D1 beta = (discrete star alpha);
/// in analytic mode alpha/beta sampling is replaced by the supplied exact
/// field and primitive evaluated along straight trajectories.
MonteCarloReport run_monte_carlo(const MetricData& M, const HomologyBasis& H,
                                 const Vec& alpha, const MonteCarloConfig& config);

/// Closed-form run on the flat torus: the first coexact eigenform
/// alpha = sqrt(2) cos(2 pi z) dx drives straight trajectories with exact
/// lengths and primitive integrals; only the homology bookkeeping and the
/// skeleton projection use the mesh. The analytic targets replace the
/// discrete ones.
MonteCarloReport run_monte_carlo_torus_analytic(const MetricData& M, const HomologyBasis& H,
                                                const MonteCarloConfig& config);

/// Least-norm primitive: solve D1 beta = s with s the Galerkin 2-cochain of
/// star(W alpha); returns beta and the relative residual of the solve.
std::pair<Vec, double> coexact_primitive(const MetricData& M, const Vec& alpha);

/// Galerkin 2-cochain representation of star applied to a Whitney 1-cochain.
Vec star_one_form_cochain(const MetricData& M, const Vec& alpha);

}  // namespace coex
