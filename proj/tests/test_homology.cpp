#include <doctest.h>

#include "coex/fixtures.hpp"
#include "coex/homology.hpp"
#include "test_oracles.hpp"

using namespace coex;

namespace {

SparseIntMatrix from_dense(const std::vector<std::vector<long>>& M) {
  std::vector<std::array<Coeff, 3>> trips;
  for (size_t r = 0; r < M.size(); ++r)
    for (size_t c = 0; c < M[r].size(); ++c)
      if (M[r][c] != 0) trips.push_back({(Coeff)r, (Coeff)c, M[r][c]});
  return SparseIntMatrix::from_triplets((int)M.size(), M.empty() ? 0 : (int)M[0].size(), trips);
}

// Checks U A V = S by direct multiplication and |det U| = |det V| = 1.
void check_snf_certificate(const std::vector<std::vector<long>>& Mdense,
                           const SmithNormalForm& S) {
  auto U = S.dense_U();
  auto V = S.dense_V();
  CHECK(oracles::bareiss_det_abs(U) == 1);
  CHECK(oracles::bareiss_det_abs(V) == 1);
  std::vector<std::vector<BigInt>> A(S.rows, std::vector<BigInt>(S.cols, 0));
  for (int r = 0; r < S.rows; ++r)
    for (int c = 0; c < S.cols; ++c) A[r][c] = Mdense[r][c];
  auto UA = oracles::matmul(U, A);
  auto UAV = oracles::matmul(UA, V);
  for (int r = 0; r < S.rows; ++r)
    for (int c = 0; c < S.cols; ++c) {
      BigInt want = (r == c && r < (int)S.diag.size()) ? S.diag[r] : BigInt(0);
      CHECK(UAV[r][c] == want);
    }
  for (int i = 0; i + 1 < S.rank; ++i) CHECK(S.diag[i + 1] % S.diag[i] == 0);
  for (int i = 0; i < S.rank; ++i) CHECK(S.diag[i] > 0);
}

}  // namespace

TEST_CASE("smith normal form of the identity is the identity") {
  auto S = smith_normal_form(from_dense({{1, 0}, {0, 1}}));
  CHECK(S.rank == 2);
  CHECK(S.diag[0] == 1);
  CHECK(S.diag[1] == 1);
}

TEST_CASE("smith normal form of [[2,4],[6,8]] is diag(2,4) with unimodular factors") {
  std::vector<std::vector<long>> M = {{2, 4}, {6, 8}};
  auto S = smith_normal_form(from_dense(M));
  CHECK(S.rank == 2);
  CHECK(S.diag[0] == 2);
  CHECK(S.diag[1] == 4);
  check_snf_certificate(M, S);
}

TEST_CASE("smith normal form certificate on random small matrices") {
  std::mt19937 rng(12345);
  for (int trial = 0; trial < 25; ++trial) {
    int m = 1 + (int)(rng() % 5), n = 1 + (int)(rng() % 5);
    std::vector<std::vector<long>> M(m, std::vector<long>(n, 0));
    for (auto& row : M)
      for (auto& v : row) v = (long)(rng() % 9) - 4;
    auto S = smith_normal_form(from_dense(M));
    check_snf_certificate(M, S);
  }
}

TEST_CASE("projective plane boundary matrix has exactly one invariant factor 2") {
  auto rp2 = fixtures::projective_plane();
  auto trips = rp2.boundary_triplets(2);
  std::vector<std::vector<long>> M(rp2.simplex_count(1),
                                   std::vector<long>(rp2.simplex_count(2), 0));
  for (auto& t : trips) M[t[0]][t[1]] += (long)t[2];

  // Independent oracle: rank over Q and over GF(2) pin the number of even
  // invariant factors; the certificate pins the factors themselves.
  CHECK(oracles::rank_over_q(M) == 10);
  CHECK(oracles::rank_over_gf2(M) == 9);

  auto S = smith_normal_form(from_dense(M));
  check_snf_certificate(M, S);
  CHECK(S.rank == 10);
  int twos = 0;
  for (int i = 0; i < S.rank; ++i)
    if (S.diag[i] != 1) {
      CHECK(S.diag[i] == 2);
      ++twos;
    }
  CHECK(twos == 1);
}

TEST_CASE("homology of the 3-sphere") {
  auto X = fixtures::sphere_s3();
  auto H = homology_basis(X);
  CHECK(H.rank == 0);
  CHECK(H.torsion_orders.empty());
  CHECK(H.r_universal == 1);
  CHECK(H.betti == std::array<long, 4>{1, 0, 0, 1});
  CHECK(H.betti[0] - H.betti[1] + H.betti[2] - H.betti[3] == X.euler_characteristic());
}

TEST_CASE("homology of the projective plane fixture") {
  auto X = fixtures::projective_plane();
  auto H = homology_basis(X);
  CHECK(H.rank == 0);
  REQUIRE(H.torsion_orders.size() == 1);
  CHECK(H.torsion_orders[0] == 2);
  CHECK(H.r_universal == 2);
  CHECK(H.betti[0] - H.betti[1] + H.betti[2] - H.betti[3] == X.euler_characteristic());

  auto loop = fixtures::projective_plane_core_loop(X);
  auto cls = classify_cycle(X, H, loop);
  CHECK(cls.free_coords.empty());
  CHECK(cls.trivial);
  CHECK(cls.r == 2);
}

TEST_CASE("equatorial loop on the octahedron sphere is trivial with r = 1") {
  auto oct = fixtures::octahedron_s2();
  auto H = homology_basis(oct.complex);
  CHECK(H.rank == 0);
  CHECK(H.betti == std::array<long, 4>{1, 0, 1, 0});
  auto cls = classify_cycle(oct.complex, H, oct.equator);
  CHECK(cls.trivial);
  CHECK(cls.r == 1);
}

TEST_CASE("classify_cycle rejects non-cycles") {
  auto oct = fixtures::octahedron_s2();
  auto H = homology_basis(oct.complex);
  Chain notcycle{1, {}};
  notcycle.add(0, 1);
  CHECK_THROWS_AS(classify_cycle(oct.complex, H, notcycle), std::runtime_error);
}
