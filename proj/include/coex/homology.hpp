#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "coex/mesh.hpp"

namespace coex {

using BigInt = boost::multiprecision::cpp_int;

/// Sparse integer matrix with row and column access, used by the Smith
/// normal form reduction. Entries are arbitrary precision.
class SparseIntMatrix {
 public:
  SparseIntMatrix(int rows, int cols) : rows_(rows), cols_(cols), col_data_(cols), row_support_(rows) {}

  static SparseIntMatrix from_triplets(int rows, int cols,
                                       const std::vector<std::array<Coeff, 3>>& trips);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  BigInt get(int r, int c) const;
  void set(int r, int c, const BigInt& v);
  const std::map<int, BigInt>& col(int c) const { return col_data_[c]; }
  const std::map<int, int>& row_support(int r) const { return row_support_[r]; }
  size_t nnz() const;

  void swap_rows(int i, int j);
  void swap_cols(int i, int j);
  void add_row(int dst, int src, const BigInt& f);  // row dst += f * row src
  void add_col(int dst, int src, const BigInt& f);
  void negate_row(int i);
  void negate_col(int i);

 private:
  int rows_, cols_;
  std::vector<std::map<int, BigInt>> col_data_;
  // row -> {col -> +1}; values unused, kept as a multiplicity-free index.
  std::vector<std::map<int, int>> row_support_;
};

/// Elementary operation log; replayed to apply the unimodular factors of
/// the decomposition to vectors without materializing them.
struct ElemOp {
  enum Kind { Swap, Add, Negate } kind;
  int i, j;
  BigInt f;
};

/// U * A * V = S with S diagonal, d_i | d_{i+1} and U, V unimodular.
/// Row ops accumulate U (left), column ops V (right).
struct SmithNormalForm {
  int rows = 0, cols = 0, rank = 0;
  std::vector<BigInt> diag;  // size min(rows, cols), zeros past rank
  std::vector<ElemOp> row_ops, col_ops;

  std::vector<BigInt> apply_U(const std::vector<BigInt>& x) const;
  std::vector<BigInt> apply_Ut(const std::vector<BigInt>& x) const;     // U^T * x
  std::vector<BigInt> apply_Uinv(const std::vector<BigInt>& x) const;
  std::vector<BigInt> apply_V(const std::vector<BigInt>& x) const;      // V * x
  std::vector<BigInt> apply_Vt(const std::vector<BigInt>& x) const;     // V^T * x
  std::vector<BigInt> apply_Vinv(const std::vector<BigInt>& x) const;   // V^-1 * x
  std::vector<BigInt> apply_VinvT(const std::vector<BigInt>& x) const;  // V^-T * x
  std::vector<BigInt> apply_Uinv_col(int i) const;  // column i of U^-1

  /// Dense U, V and their inverses, for small-matrix verification.
  std::vector<std::vector<BigInt>> dense_U() const;
  std::vector<std::vector<BigInt>> dense_V() const;
};

SmithNormalForm smith_normal_form(SparseIntMatrix A);

/// Homology data of a complex in degree 1: a basis v_1..v_k of the free
/// part of H_1(M, Z) together with closed integer dual cochains b_1..b_k
/// pairing to the exact identity, plus the torsion structure used to find
/// the order r of a homologically trivial cycle.
struct HomologyBasis {
  int rank = 0;
  std::vector<Coeff> torsion_orders;  // invariant factors >= 2
  Coeff r_universal = 1;              // lcm of torsion orders
  std::vector<Chain> cycles;          // v_j, integer 1-cycles
  std::vector<Chain> dual_cocycles;   // b_j, closed integer 1-cochains
  std::array<long, 4> betti{0, 0, 0, 0};

  // Torsion classifier: y = U3 * Kplus * z per trivial-part cycle z, with
  // d_i the invariant factors of the boundary-in-cycle-coordinates matrix.
  // Absent for model-provided torsion-free bases.
  struct Classifier {
    SmithNormalForm snf1;        // of d1
    SmithNormalForm snf3;        // of C = Kplus * d2
    int kernel_rank = 0;         // dim ker d1
  };
  std::shared_ptr<const Classifier> classifier;

  std::string to_json() const;
};

HomologyBasis homology_basis(const SimplicialComplex& X);

struct CycleClass {
  std::vector<Coeff> free_coords;   // c_j = <b_j, gamma>
  bool trivial = false;             // all free coordinates vanish
  Coeff r = 0;                      // order; 0 encodes "infinite"
};

/// Coordinates of a 1-cycle against the basis and the least r making
/// r * (gamma - sum c_j v_j) an integer boundary. Raises on non-cycles.
CycleClass classify_cycle(const SimplicialComplex& X, const HomologyBasis& H,
                          const Chain& gamma);

/// Exact pairing <cochain, chain> of equal degree.
Coeff pair_chains(const Chain& cochain, const Chain& chain);

/// Structural validation of a (possibly model-provided) basis: cycles are
/// cycles, cocycles are closed, and the pairing matrix is the identity.
void validate_basis(const SimplicialComplex& X, const HomologyBasis& H);

}  // namespace coex
