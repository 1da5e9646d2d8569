#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "coex/mesh.hpp"

namespace coex {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

/// Geometry of one tetrahedron: vertex positions in a cell-local chart
/// (ordered like the sorted global vertex tuple) and a constant SPD metric
/// tensor expressed in that chart. Identity tensor means the chart is
/// isometric, e.g. an embedding or an unwrapped flat chart.
struct CellGeometry {
  std::array<Eigen::Vector3d, 4> chart;
  Eigen::Matrix3d tensor = Eigen::Matrix3d::Identity();
};

struct GeometrySpec {
  // Option A: one position per vertex (embedded complex).
  std::vector<std::array<double, 3>> embedding;
  // Option B: explicit per-cell charts, size = number of tetrahedra.
  std::vector<CellGeometry> cells;
};

/// Pointwise value of a differential form in a 3-dimensional chart.
/// Degrees 0 and 3 are scalars; degree 1 is a covector; degree 2 is kept
/// as the axial vector m with w(u, v) = m . (u x v).
struct FormValue {
  int degree = 0;
  double s = 0.0;
  Eigen::Vector3d v = Eigen::Vector3d::Zero();

  static FormValue scalar(int degree, double value) { return {degree, value, {}}; }
  static FormValue covector(const Eigen::Vector3d& a) { return {1, 0.0, a}; }
  static FormValue two_form(const Eigen::Vector3d& m) { return {2, 0.0, m}; }
};

/// A point of the manifold with its metric frame: a location, the SPD
/// tensor there, and the handedness of the chart frame relative to the
/// orientation the Hodge star should use (cell charts are always +1).
struct PointFrame {
  Index tet = 0;
  Eigen::Vector4d bary = Eigen::Vector4d::Constant(0.25);
  Eigen::Matrix3d metric = Eigen::Matrix3d::Identity();
  int orientation = 1;
};

// Pointwise exterior algebra in the frame's chart.
FormValue star(const PointFrame& f, const FormValue& a);
FormValue wedge(const PointFrame& f, const FormValue& a, const FormValue& b);
FormValue sharp_as_form(const PointFrame& f, const FormValue& a);  // components of a#
Eigen::Vector3d sharp(const PointFrame& f, const FormValue& a);    // vector of a 1-form
FormValue flat(const PointFrame& f, const Eigen::Vector3d& y);     // y_flat
double interior(const PointFrame& f, const Eigen::Vector3d& y, const FormValue& beta);
double pointwise_norm(const PointFrame& f, const FormValue& a);
/// Pointwise mass in the comass sense (sup over orthonormal argument
/// tuples). For 1- and 2-forms in dimension 3
/// it coincides with the pointwise norm; asserted against brute force in
/// the tests.
double pointwise_mass(const PointFrame& f, const FormValue& a);

/// Metric structure of a tetrahedral complex: per-cell frames, volumes and
/// the Whitney-Galerkin mass matrices M0..M3.
class MetricData {
 public:
  struct Cell {
    std::array<Eigen::Vector3d, 4> chart;
    Eigen::Matrix3d G;       // metric tensor
    Eigen::Matrix3d Ginv;    // inverse (covector Gram)
    double sqrt_det_g = 1;
    double volume = 0;       // metric volume
    int orient = 1;          // chart orientation vs. stored simplex order
    Eigen::Matrix<double, 4, 3> grad;  // barycentric gradients (covectors)
  };

  std::shared_ptr<const SimplicialComplex> complex;
  std::vector<Cell> cells;
  std::array<SpMat, 4> mass;  // M0..M3
  double total_volume = 0;
  std::vector<double> face_area;    // averaged over tet cofaces
  std::vector<double> edge_length;  // averaged over tet cofaces

  const SimplicialComplex& X() const { return *complex; }

  // Cochain differentials (transposed boundary operators).
  const SpMat& d0() const { return d0_; }
  const SpMat& d1() const { return d1_; }

  /// Chart position of a barycentric point of a cell.
  Eigen::Vector3d position(Index tet, const Eigen::Vector4d& bary) const;
  PointFrame frame(Index tet, const Eigen::Vector4d& bary) const;

  /// Whitney reconstruction of a k-cochain at a barycentric point.
  FormValue whitney(int degree, const Vec& omega, Index tet,
                    const Eigen::Vector4d& bary) const;

  /// Exact integral of the Whitney form of a 1-cochain along the straight
  /// chart segment between two barycentric points of one cell.
  double line_integral(const Vec& omega, Index tet, const Eigen::Vector4d& from,
                       const Eigen::Vector4d& to) const;

  // Cached factorizations (thread-safe lazy construction).
  const Eigen::SimplicialLLT<SpMat>& llt_m1() const;
  /// 0-form stiffness with vertex 0 pinned, for potential solves.
  const Eigen::SimplicialLLT<SpMat>& llt_l0() const;

  SpMat d0_, d1_;

 private:
  struct FactorCache {
    std::once_flag m1_flag, l0_flag;
    std::shared_ptr<Eigen::SimplicialLLT<SpMat>> m1, l0;
  };
  std::shared_ptr<FactorCache> cache_ = std::make_shared<FactorCache>();
};

/// Assemble Whitney-Galerkin mass matrices and cell frames. Raises on
/// degenerate cells (naming the cell) and on charts whose orientation
/// contradicts the complex orientation.
MetricData assemble_metric(std::shared_ptr<const SimplicialComplex> X,
                           const GeometrySpec& geometry);

struct Norms {
  double L1 = 0, L2 = 0, Linf = 0, mass = 0;
};

/// L2 is exact (Gram matrix); L1, Linf and mass come from fixed order-2
/// barycentric quadrature (4 points per cell) of the Whitney reconstruction.
Norms norms(const MetricData& M, const Vec& omega, int degree);

struct HodgeParts {
  Vec exact, coexact, harmonic;
  double cg_residual = 0;
  int cg_iterations = 0;
};

/// Orthogonal splitting of a 1-cochain. The exact part comes from a pinned
/// 0-form potential solve, the coexact part from a CG solve of the 2-form
/// normal equations through M1^-1; the harmonic part is the remainder.
HodgeParts hodge_decompose(const MetricData& M, const Vec& omega, double tol = 1e-11,
                           int max_iter = 0);

/// Coordinate (row, col, value) text export for cross-checking.
std::string export_matrix_coordinate(const SpMat& A);

/// Order-2 barycentric quadrature points and weights on the tetrahedron.
extern const std::array<Eigen::Vector4d, 4> kTetQuadPoints;
constexpr double kTetQuadWeight = 0.25;

}  // namespace coex
