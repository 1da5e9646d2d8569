// Independent reference computations used as test oracles. These stay
// deliberately naive (fraction-free Gaussian elimination, dense products,
// exhaustive search) and share no code with the library paths they check.
#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace coex::oracles {

using boost::multiprecision::cpp_int;

inline std::vector<std::vector<cpp_int>> matmul(const std::vector<std::vector<cpp_int>>& A,
                                                const std::vector<std::vector<cpp_int>>& B) {
  size_t m = A.size(), k = B.size(), n = B.empty() ? 0 : B[0].size();
  std::vector<std::vector<cpp_int>> C(m, std::vector<cpp_int>(n, 0));
  for (size_t i = 0; i < m; ++i)
    for (size_t l = 0; l < k; ++l) {
      if (A[i][l] == 0) continue;
      for (size_t j = 0; j < n; ++j) C[i][j] += A[i][l] * B[l][j];
    }
  return C;
}

/// |det| of a square integer matrix by Bareiss fraction-free elimination.
inline cpp_int bareiss_det_abs(std::vector<std::vector<cpp_int>> M) {
  const int n = (int)M.size();
  cpp_int prev = 1;
  int sign = 1;
  for (int k = 0; k < n - 1; ++k) {
    if (M[k][k] == 0) {
      int p = -1;
      for (int i = k + 1; i < n; ++i)
        if (M[i][k] != 0) { p = i; break; }
      if (p < 0) return 0;
      std::swap(M[k], M[p]);
      sign = -sign;
    }
    for (int i = k + 1; i < n; ++i)
      for (int j = k + 1; j < n; ++j)
        M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) / prev;
    prev = M[k][k];
  }
  cpp_int d = n == 0 ? 1 : M[n - 1][n - 1];
  return d < 0 ? -d : d;
}

inline int rank_over_q(std::vector<std::vector<long>> M) {
  std::vector<std::vector<double>> A(M.size());
  for (size_t i = 0; i < M.size(); ++i) A[i].assign(M[i].begin(), M[i].end());
  int rank = 0;
  size_t rows = A.size(), cols = rows ? A[0].size() : 0;
  for (size_t c = 0; c < cols && (size_t)rank < rows; ++c) {
    size_t p = rank;
    for (size_t r = rank; r < rows; ++r)
      if (std::fabs(A[r][c]) > std::fabs(A[p][c])) p = r;
    if (std::fabs(A[p][c]) < 1e-9) continue;
    std::swap(A[p], A[rank]);
    for (size_t r = 0; r < rows; ++r) {
      if (r == (size_t)rank) continue;
      double f = A[r][c] / A[rank][c];
      for (size_t j = c; j < cols; ++j) A[r][j] -= f * A[rank][j];
    }
    ++rank;
  }
  return rank;
}

inline int rank_over_gf2(std::vector<std::vector<long>> M) {
  size_t rows = M.size(), cols = rows ? M[0].size() : 0;
  std::vector<std::vector<int>> A(rows, std::vector<int>(cols, 0));
  for (size_t i = 0; i < rows; ++i)
    for (size_t j = 0; j < cols; ++j) A[i][j] = ((M[i][j] % 2) + 2) % 2;
  int rank = 0;
  for (size_t c = 0; c < cols && (size_t)rank < rows; ++c) {
    size_t p = rows;
    for (size_t r = rank; r < rows; ++r)
      if (A[r][c]) { p = r; break; }
    if (p == rows) continue;
    std::swap(A[p], A[rank]);
    for (size_t r = 0; r < rows; ++r)
      if (r != (size_t)rank && A[r][c])
        for (size_t j = 0; j < cols; ++j) A[r][j] ^= A[rank][j];
    ++rank;
  }
  return rank;
}

}  // namespace coex::oracles
