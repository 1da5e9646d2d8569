#include "coex/homology.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace coex {

namespace {

// Quotient with minimal-magnitude remainder, |a - q*b| <= |b|/2.
BigInt rounded_div(const BigInt& a, const BigInt& b) {
  BigInt q = a / b, r = a - q * b;
  if (2 * abs(r) > abs(b)) q += (r < 0) == (b < 0) ? 1 : -1;
  return q;
}

Coeff to_coeff(const BigInt& v) {
  if (v > std::numeric_limits<Coeff>::max() || v < std::numeric_limits<Coeff>::min())
    throw std::runtime_error("integer chain coefficient overflow");
  return static_cast<Coeff>(v);
}

}  // namespace

SparseIntMatrix SparseIntMatrix::from_triplets(
    int rows, int cols, const std::vector<std::array<Coeff, 3>>& trips) {
  SparseIntMatrix A(rows, cols);
  for (auto& t : trips) {
    BigInt v = A.get((int)t[0], (int)t[1]) + t[2];
    A.set((int)t[0], (int)t[1], v);
  }
  return A;
}

BigInt SparseIntMatrix::get(int r, int c) const {
  auto it = col_data_[c].find(r);
  return it == col_data_[c].end() ? BigInt(0) : it->second;
}

void SparseIntMatrix::set(int r, int c, const BigInt& v) {
  if (v == 0) {
    col_data_[c].erase(r);
    row_support_[r].erase(c);
  } else {
    col_data_[c][r] = v;
    row_support_[r][c] = 1;
  }
}

size_t SparseIntMatrix::nnz() const {
  size_t n = 0;
  for (auto& c : col_data_) n += c.size();
  return n;
}

void SparseIntMatrix::swap_rows(int i, int j) {
  if (i == j) return;
  std::set<int> cols;
  for (auto& [c, _] : row_support_[i]) cols.insert(c);
  for (auto& [c, _] : row_support_[j]) cols.insert(c);
  for (int c : cols) {
    BigInt vi = get(i, c), vj = get(j, c);
    set(i, c, vj);
    set(j, c, vi);
  }
}

void SparseIntMatrix::swap_cols(int i, int j) {
  if (i == j) return;
  std::set<int> rows;
  for (auto& [r, _] : col_data_[i]) rows.insert(r);
  for (auto& [r, _] : col_data_[j]) rows.insert(r);
  std::swap(col_data_[i], col_data_[j]);
  for (int r : rows) {
    row_support_[r].erase(i);
    row_support_[r].erase(j);
    if (col_data_[i].count(r)) row_support_[r][i] = 1;
    if (col_data_[j].count(r)) row_support_[r][j] = 1;
  }
}

void SparseIntMatrix::add_row(int dst, int src, const BigInt& f) {
  if (f == 0) return;
  std::vector<int> cols;
  cols.reserve(row_support_[src].size());
  for (auto& [c, _] : row_support_[src]) cols.push_back(c);
  for (int c : cols) set(dst, c, get(dst, c) + f * col_data_[c].at(src));
}

void SparseIntMatrix::add_col(int dst, int src, const BigInt& f) {
  if (f == 0) return;
  std::vector<std::pair<int, BigInt>> entries(col_data_[src].begin(), col_data_[src].end());
  for (auto& [r, v] : entries) set(r, dst, get(r, dst) + f * v);
}

void SparseIntMatrix::negate_row(int i) {
  std::vector<int> cols;
  for (auto& [c, _] : row_support_[i]) cols.push_back(c);
  for (int c : cols) col_data_[c][i] = -col_data_[c][i];
}

void SparseIntMatrix::negate_col(int i) {
  for (auto& [r, v] : col_data_[i]) v = -v;
}

// --- operation replay --------------------------------------------------

namespace {

enum class Mode { U, Ut, Uinv, V, Vt, Vinv, VinvT };

// Row ops build U on the left (A' = E A), column ops build V on the right
// (A' = A E); replaying the logs in the right order and orientation gives
// every needed factor without materializing a matrix.
void apply_ops(const std::vector<ElemOp>& ops, std::vector<BigInt>& x, Mode mode) {
  bool forward = (mode == Mode::U || mode == Mode::Vt || mode == Mode::Vinv);
  auto step = [&](const ElemOp& op) {
    switch (op.kind) {
      case ElemOp::Swap:
        std::swap(x[op.i], x[op.j]);
        break;
      case ElemOp::Negate:
        x[op.i] = -x[op.i];
        break;
      case ElemOp::Add:
        // Row op: row i += f * row j. Col op: col i += f * col j.
        switch (mode) {
          case Mode::U: x[op.i] += op.f * x[op.j]; break;
          case Mode::Ut: x[op.j] += op.f * x[op.i]; break;
          case Mode::Uinv: x[op.i] -= op.f * x[op.j]; break;
          case Mode::V: x[op.j] += op.f * x[op.i]; break;
          case Mode::Vt: x[op.i] += op.f * x[op.j]; break;
          case Mode::Vinv: x[op.j] -= op.f * x[op.i]; break;
          case Mode::VinvT: x[op.i] -= op.f * x[op.j]; break;
        }
        break;
    }
  };
  if (forward)
    for (auto& op : ops) step(op);
  else
    for (auto it = ops.rbegin(); it != ops.rend(); ++it) step(*it);
}

}  // namespace

std::vector<BigInt> SmithNormalForm::apply_U(const std::vector<BigInt>& x) const {
  auto y = x;
  apply_ops(row_ops, y, Mode::U);
  return y;
}
std::vector<BigInt> SmithNormalForm::apply_Ut(const std::vector<BigInt>& x) const {
  auto y = x;
  apply_ops(row_ops, y, Mode::Ut);
  return y;
}
std::vector<BigInt> SmithNormalForm::apply_Uinv(const std::vector<BigInt>& x) const {
  auto y = x;
  apply_ops(row_ops, y, Mode::Uinv);
  return y;
}
std::vector<BigInt> SmithNormalForm::apply_V(const std::vector<BigInt>& x) const {
  auto y = x;
  apply_ops(col_ops, y, Mode::V);
  return y;
}
std::vector<BigInt> SmithNormalForm::apply_Vt(const std::vector<BigInt>& x) const {
  auto y = x;
  apply_ops(col_ops, y, Mode::Vt);
  return y;
}
std::vector<BigInt> SmithNormalForm::apply_Vinv(const std::vector<BigInt>& x) const {
  auto y = x;
  apply_ops(col_ops, y, Mode::Vinv);
  return y;
}
std::vector<BigInt> SmithNormalForm::apply_VinvT(const std::vector<BigInt>& x) const {
  auto y = x;
  apply_ops(col_ops, y, Mode::VinvT);
  return y;
}
std::vector<BigInt> SmithNormalForm::apply_Uinv_col(int i) const {
  std::vector<BigInt> e(rows, 0);
  e[i] = 1;
  apply_ops(row_ops, e, Mode::Uinv);
  return e;
}

std::vector<std::vector<BigInt>> SmithNormalForm::dense_U() const {
  std::vector<std::vector<BigInt>> U(rows, std::vector<BigInt>(rows, 0));
  for (int i = 0; i < rows; ++i) {
    std::vector<BigInt> e(rows, 0);
    e[i] = 1;
    e = apply_U(e);
    for (int r = 0; r < rows; ++r) U[r][i] = e[r];
  }
  return U;
}

std::vector<std::vector<BigInt>> SmithNormalForm::dense_V() const {
  std::vector<std::vector<BigInt>> V(cols, std::vector<BigInt>(cols, 0));
  for (int i = 0; i < cols; ++i) {
    std::vector<BigInt> e(cols, 0);
    e[i] = 1;
    e = apply_V(e);
    for (int r = 0; r < cols; ++r) V[r][i] = e[r];
  }
  return V;
}

// --- Smith normal form --------------------------------------------------

SmithNormalForm smith_normal_form(SparseIntMatrix A) {
  SmithNormalForm S;
  S.rows = A.rows();
  S.cols = A.cols();
  const int mn = std::min(A.rows(), A.cols());

  auto swap_rows = [&](int i, int j) {
    if (i == j) return;
    A.swap_rows(i, j);
    S.row_ops.push_back({ElemOp::Swap, i, j, 0});
  };
  auto swap_cols = [&](int i, int j) {
    if (i == j) return;
    A.swap_cols(i, j);
    S.col_ops.push_back({ElemOp::Swap, i, j, 0});
  };
  auto add_row = [&](int dst, int src, const BigInt& f) {
    if (f == 0) return;
    A.add_row(dst, src, f);
    S.row_ops.push_back({ElemOp::Add, dst, src, f});
  };
  auto add_col = [&](int dst, int src, const BigInt& f) {
    if (f == 0) return;
    A.add_col(dst, src, f);
    S.col_ops.push_back({ElemOp::Add, dst, src, f});
  };
  auto negate_row = [&](int i) {
    A.negate_row(i);
    S.row_ops.push_back({ElemOp::Negate, i, i, 0});
  };

  // Repeated row/column elimination at position k; keeps the invariant
  // that rows/cols < k are already diagonal and untouched by later ops.
  auto eliminate_at = [&](int k) {
    for (;;) {
      // Clear column k below the pivot; a nonzero remainder swaps the
      // strictly smaller value into the pivot, so this terminates.
      for (;;) {
        int target = -1;
        for (auto& [r, v] : A.col(k))
          if (r > k) { target = r; break; }
        if (target < 0) break;
        BigInt q = rounded_div(A.get(target, k), A.get(k, k));
        add_row(target, k, -q);
        if (A.get(target, k) != 0) swap_rows(target, k);
      }
      // Clear row k to the right of the pivot.
      for (;;) {
        int target = -1;
        for (auto& [c, _] : A.row_support(k))
          if (c > k) { target = c; break; }
        if (target < 0) break;
        BigInt q = rounded_div(A.get(k, target), A.get(k, k));
        add_col(target, k, -q);
        if (A.get(k, target) != 0) swap_cols(target, k);
      }
      // Column swaps during row clearing may have refilled the column.
      bool col_dirty = false;
      for (auto& [r, v] : A.col(k))
        if (r > k) { col_dirty = true; break; }
      if (!col_dirty) break;
    }
  };

  int k = 0;
  for (; k < mn; ++k) {
    // Pivot: smallest |value|, then least Markowitz fill, then position.
    int pr = -1, pc = -1;
    BigInt pval = 0;
    long pcost = 0;
    for (int c = k; c < A.cols(); ++c) {
      for (auto& [r, v] : A.col(c)) {
        if (r < k) continue;
        BigInt av = abs(v);
        long cost = (long)(A.col(c).size() - 1) * (long)(A.row_support(r).size() - 1);
        bool better = pr < 0 || av < pval || (av == pval && cost < pcost);
        if (better) {
          pr = r;
          pc = c;
          pval = av;
          pcost = cost;
          if (pval == 1 && pcost == 0) break;
        }
      }
      if (pr >= 0 && pval == 1 && pcost == 0) break;
    }
    if (pr < 0) break;  // submatrix is zero
    swap_rows(pr, k);
    swap_cols(pc, k);
    eliminate_at(k);
  }
  S.rank = k;

  // Positive diagonal.
  for (int i = 0; i < S.rank; ++i)
    if (A.get(i, i) < 0) negate_row(i);

  // Enforce the divisibility chain d_i | d_{i+1}.
  for (bool stable = false; !stable;) {
    stable = true;
    for (int i = 0; i + 1 < S.rank; ++i) {
      BigInt a = A.get(i, i), b = A.get(i + 1, i + 1);
      if (b % a != 0) {
        stable = false;
        add_col(i, i + 1, 1);  // brings b into column i, isolated 2x2 block
        eliminate_at(i);
        if (A.get(i, i) < 0) negate_row(i);
        if (A.get(i + 1, i + 1) < 0) negate_row(i + 1);
      }
    }
  }

  S.diag.assign(mn, 0);
  for (int i = 0; i < S.rank; ++i) S.diag[i] = A.get(i, i);
  return S;
}

// --- homology basis -----------------------------------------------------

Coeff pair_chains(const Chain& cochain, const Chain& chain) {
  Coeff s = 0;
  const auto& a = cochain.coeffs;
  const auto& b = chain.coeffs;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->first < ib->first)
      ++ia;
    else if (ib->first < ia->first)
      ++ib;
    else {
      s += ia->second * ib->second;
      ++ia;
      ++ib;
    }
  }
  return s;
}

HomologyBasis homology_basis(const SimplicialComplex& X) {
  const int nv = X.simplex_count(0);
  const int ne = X.simplex_count(1);
  const int nf = X.simplex_count(2);
  const int nt = X.simplex_count(3);

  auto classifier = std::make_shared<HomologyBasis::Classifier>();
  classifier->snf1 =
      smith_normal_form(SparseIntMatrix::from_triplets(nv, ne, X.boundary_triplets(1)));
  const int rank1 = classifier->snf1.rank;
  const int k1 = ne - rank1;
  classifier->kernel_rank = k1;

  // Kernel basis of d1: trailing columns of V1, as dense integer vectors.
  std::vector<std::vector<BigInt>> K(k1);
  for (int j = 0; j < k1; ++j) {
    std::vector<BigInt> e(ne, 0);
    e[rank1 + j] = 1;
    K[j] = classifier->snf1.apply_V(e);
  }

  // Boundaries of triangles expressed in kernel coordinates: C = Kplus * d2.
  SparseIntMatrix C(k1, nf);
  for (int f = 0; f < nf; ++f) {
    std::vector<BigInt> col(ne, 0);
    Chain face{2, {{(Index)f, 1}}};
    for (auto& [e, c] : X.boundary(face).coeffs) col[e] = c;
    auto w = classifier->snf1.apply_Vinv(col);
    for (int i = 0; i < k1; ++i)
      if (w[rank1 + i] != 0) C.set(i, f, w[rank1 + i]);
  }
  classifier->snf3 = smith_normal_form(std::move(C));
  const int rank2 = classifier->snf3.rank;

  HomologyBasis H;
  H.classifier = classifier;
  H.rank = k1 - rank2;
  for (int i = 0; i < rank2; ++i)
    if (classifier->snf3.diag[i] > 1) H.torsion_orders.push_back(to_coeff(classifier->snf3.diag[i]));
  H.r_universal = 1;
  for (Coeff d : H.torsion_orders) H.r_universal = std::lcm(H.r_universal, d);

  // Free generators v_j = K * (U3^-1 e_{rank2+j}).
  for (int j = 0; j < H.rank; ++j) {
    auto x = classifier->snf3.apply_Uinv_col(rank2 + j);
    Chain v{1, {}};
    for (int i = 0; i < k1; ++i)
      if (x[i] != 0)
        for (int e = 0; e < ne; ++e)
          if (K[i][e] != 0) v.add((Index)e, to_coeff(x[i] * K[i][e]));
    H.cycles.push_back(std::move(v));
  }

  // Dual cocycles b_j = row (rank2+j) of (U3 * Kplus) where Kplus is the
  // trailing row block of V1^-1; closedness and unit pairing against the
  // v_j hold exactly by construction.
  for (int j = 0; j < H.rank; ++j) {
    std::vector<BigInt> e(k1, 0);
    e[rank2 + j] = 1;
    auto row = classifier->snf3.apply_Ut(e);
    std::vector<BigInt> pad(ne, 0);
    for (int i = 0; i < k1; ++i) pad[rank1 + i] = row[i];
    auto beta = classifier->snf1.apply_VinvT(pad);
    Chain b{1, {}};
    for (int eidx = 0; eidx < ne; ++eidx)
      if (beta[eidx] != 0) b.add((Index)eidx, to_coeff(beta[eidx]));
    H.dual_cocycles.push_back(std::move(b));
  }

  // Betti numbers; rank of d3 via one more reduction.
  int rank3 = 0;
  if (nt > 0) {
    auto snf_d3 =
        smith_normal_form(SparseIntMatrix::from_triplets(nf, nt, X.boundary_triplets(3)));
    rank3 = snf_d3.rank;
  }
  H.betti = {nv - rank1, (long)H.rank, (long)(nf - rank2) - rank3, (long)nt - rank3};
  return H;
}

CycleClass classify_cycle(const SimplicialComplex& X, const HomologyBasis& H,
                          const Chain& gamma) {
  if (gamma.degree != 1) throw std::runtime_error("classify_cycle expects a 1-chain");
  if (!X.boundary(gamma).empty()) throw std::runtime_error("classify_cycle: not a cycle");

  CycleClass out;
  for (auto& b : H.dual_cocycles) out.free_coords.push_back(pair_chains(b, gamma));
  out.trivial = std::all_of(out.free_coords.begin(), out.free_coords.end(),
                            [](Coeff c) { return c == 0; });
  if (!out.trivial) {
    out.r = 0;
    return out;
  }

  Chain z = gamma;
  for (size_t j = 0; j < H.cycles.size(); ++j)
    z += H.cycles[j].scaled(-out.free_coords[j]);

  if (!H.classifier) {
    if (!H.torsion_orders.empty())
      throw std::runtime_error("basis lacks torsion classifier");
    out.r = 1;
    return out;
  }
  const auto& cl = *H.classifier;
  const int ne = X.simplex_count(1);
  std::vector<BigInt> zv(ne, 0);
  for (auto& [e, c] : z.coeffs) zv[e] = c;
  auto w = cl.snf1.apply_Vinv(zv);
  for (int i = 0; i < cl.snf1.rank; ++i)
    if (w[i] != 0) throw std::runtime_error("internal: reduced cycle not in kernel");
  std::vector<BigInt> x(w.begin() + cl.snf1.rank, w.end());
  auto y = cl.snf3.apply_U(x);
  BigInt r = 1;
  for (int i = 0; i < cl.snf3.rank; ++i) {
    const BigInt& d = cl.snf3.diag[i];
    BigInt rem = y[i] % d;
    if (rem < 0) rem += d;
    if (rem != 0) r = lcm(r, d / gcd(d, rem));
  }
  for (size_t i = cl.snf3.rank; i < y.size(); ++i)
    if (y[i] != 0) throw std::runtime_error("internal: free coordinate survived reduction");
  out.r = to_coeff(r);
  return out;
}

void validate_basis(const SimplicialComplex& X, const HomologyBasis& H) {
  if ((int)H.cycles.size() != H.rank || (int)H.dual_cocycles.size() != H.rank)
    throw std::runtime_error("basis size mismatch");
  for (auto& v : H.cycles)
    if (!X.boundary(v).empty()) throw std::runtime_error("basis cycle is not a cycle");
  const int nf = X.simplex_count(2);
  for (auto& b : H.dual_cocycles)
    for (Index f = 0; f < nf; ++f) {
      Chain face{2, {{f, 1}}};
      if (pair_chains(b, X.boundary(face)) != 0)
        throw std::runtime_error("dual cochain is not closed");
    }
  for (int i = 0; i < H.rank; ++i)
    for (int j = 0; j < H.rank; ++j)
      if (pair_chains(H.dual_cocycles[i], H.cycles[j]) != (i == j ? 1 : 0))
        throw std::runtime_error("pairing matrix is not the identity");
}

std::string HomologyBasis::to_json() const {
  nlohmann::json j;
  j["rank"] = rank;
  j["torsion_orders"] = torsion_orders;
  j["r_universal"] = r_universal;
  j["betti"] = betti;
  auto chains_json = [](const std::vector<Chain>& cs) {
    nlohmann::json arr = nlohmann::json::array();
    for (auto& c : cs) {
      nlohmann::json entries = nlohmann::json::array();
      for (auto& [i, v] : c.coeffs) entries.push_back({i, v});
      arr.push_back(entries);
    }
    return arr;
  };
  j["cycles"] = chains_json(cycles);
  j["dual_cocycles"] = chains_json(dual_cocycles);
  return j.dump(2);
}

}  // namespace coex
