#pragma once

#include <array>
#include <memory>
#include <vector>

#include "coex/homology.hpp"
#include "coex/mesh.hpp"
#include "coex/metric.hpp"

namespace coex::models {

// --- flat torus --------------------------------------------------------

struct TorusMesh {
  int N = 0;
  std::shared_ptr<const SimplicialComplex> complex;
  GeometrySpec geometry;
  /// Axis-aligned generator loops and their seam-crossing dual cocycles;
  /// valid (and exact) for N >= 3.
  HomologyBasis basis;
};

/// Unit flat 3-torus as an N^3 grid, each cube split into 6 tetrahedra.
/// Cell charts are unwrapped, so the metric is exactly flat.
TorusMesh torus_mesh(int N);

// --- Berger spheres ------------------------------------------------------

struct BergerModel {
  double epsilon = 1.0;
  /// Maurer-Cartan structure constant of the invariant coframe, pinned so
  /// that the round case has first invariant eigenvalue 4 and the vertical
  /// form satisfies d(alpha) = 2 * (unit horizontal area form).
  double structure_constant = 2.0;
};

struct BergerInvariantSpectrum {
  std::vector<double> eigenvalues;         // ascending, of delta d + d delta
  double smallest_coexact = 0;             // = 4 eps^2
  Eigen::Vector3d d_of_vertical;           // coefficients of d(sigma_v)
  double fiber_length = 0;                 // 2 pi eps
  double base_area = 0;                    // pi, from volume bookkeeping
};

/// Hodge Laplacian restricted to left-invariant 1-forms, reduced to 3x3
/// matrices through the structure constants and the diagonal Berger star.
BergerInvariantSpectrum berger_spectrum_invariant(const BergerModel& model);

/// (2 eps, pi): the fiber ratio upper bound and the filling-area lower bound.
std::pair<double, double> berger_h1_bounds(const BergerModel& model);

struct BergerMesh {
  BergerModel model;
  int refine = 0;
  std::shared_ptr<const SimplicialComplex> complex;
  GeometrySpec geometry;
  /// Closed edge loop following one Hopf fiber (a great-circle decagon of
  /// the 600-cell and its refinements).
  Chain fiber_loop;
  std::vector<Index> fiber_vertices;
};

/// Triangulated Berger sphere: the 600-cell refined `refine` times with
/// per-cell tensors sampled from g_eps in tangent charts at cell barycenters.
BergerMesh berger_mesh(const BergerModel& model, int refine);

/// Homology data of a 3-sphere mesh: empty basis, every cycle trivial at
/// r = 1. Verified against the SNF path on the unrefined mesh in tests.
HomologyBasis sphere_basis();

// --- cusp-like counterexample ---------------------------------------------

struct CuspModel {
  double epsilon = 0.1;  // in (0,1)
  double half_length() const;  // ln(1/eps)
};

struct CuspEigenvalue {
  double fd_value = 0;        // smallest Dirichlet eigenvalue of -f'' by FD
  double analytic_value = 0;  // (pi / (2 ln(1/eps)))^2
  double rayleigh = 0;        // Rayleigh quotient of the discrete eigenfunction
  int grid_size = 0;
};

/// Upper bound for the first coexact eigenvalue of the cusp manifold via
/// the warped-product test form: the interval Dirichlet problem on
/// [ln eps, -ln eps], second-order finite differences.
CuspEigenvalue cusp_eigenvalue(const CuspModel& model, int N);

struct CuspMesh {
  CuspModel model;
  std::shared_ptr<const SimplicialComplex> complex;
  GeometrySpec geometry;
  Chain meridian;                    // equator of the t = 0 sphere slice
  std::vector<Index> central_cells;  // cells of the warped product part
};

/// Product triangulation of [ln eps, -ln eps] x S^2 (octahedron refinement)
/// with warped per-cell tensors, closed by flat-ball caps of bounded
/// geometry.
CuspMesh cusp_mesh(const CuspModel& model, int s2_refine, int t_slices, int cap_layers);

// --- shared helpers -------------------------------------------------------

/// Refined octahedron sphere: positions on the unit S^2 and outward-oriented
/// faces, plus the equator vertex loop in order.
struct SphereMesh {
  std::vector<Eigen::Vector3d> positions;
  std::vector<std::array<Index, 3>> faces;
  std::vector<Index> equator;  // closed walk, consecutive entries adjacent
};
SphereMesh octahedron_sphere(int refine);

}  // namespace coex::models
