#include <doctest.h>

#include "coex/fixtures.hpp"
#include "coex/mesh.hpp"

using namespace coex;

TEST_CASE("boundary of the 4-simplex is a closed orientable 3-manifold") {
  auto X = fixtures::sphere_s3();
  CHECK(X.simplex_count(0) == 5);
  CHECK(X.simplex_count(3) == 5);
  CHECK(X.closed());
  CHECK(X.orientable());
  CHECK(X.manifold_like());
  CHECK(X.euler_characteristic() == 0);
}

TEST_CASE("a single tetrahedron is valid but not closed") {
  auto X = SimplicialComplex::from_tetrahedra(4, {{0, 1, 2, 3}});
  CHECK(!X.closed());
  CHECK(X.manifold_like());
  CHECK(X.simplex_count(2) == 4);
  CHECK(X.simplex_count(1) == 6);
}

TEST_CASE("three tets sharing one triangle are rejected") {
  std::vector<std::array<Index, 4>> tets = {{0, 1, 2, 3}, {0, 1, 2, 4}, {0, 1, 2, 5}};
  CHECK_THROWS_WITH_AS(SimplicialComplex::from_tetrahedra(6, tets),
                       "not a manifold: a facet has more than two cofaces",
                       std::runtime_error);
}

TEST_CASE("duplicate and degenerate tetrahedra are rejected") {
  CHECK_THROWS_AS(SimplicialComplex::from_tetrahedra(5, {{0, 1, 2, 3}, {3, 2, 1, 0}}),
                  std::runtime_error);
  CHECK_THROWS_AS(SimplicialComplex::from_tetrahedra(4, {{0, 1, 2, 2}}), std::runtime_error);
}

TEST_CASE("single triangle boundary column follows the alternating-face rule") {
  auto X = SimplicialComplex::from_triangles(3, {{0, 1, 2}});
  auto B = X.boundary_triplets(2);
  // Faces of [0,1,2]: +[1,2], -[0,2], +[0,1].
  REQUIRE(B.size() == 3);
  auto sign_of = [&](Index a, Index b) {
    Index e = X.edge_index(a, b);
    for (auto& t : B)
      if (t[0] == e) return (int)t[2];
    return 0;
  };
  CHECK(sign_of(1, 2) == 1);
  CHECK(sign_of(0, 2) == -1);
  CHECK(sign_of(0, 1) == 1);
}

TEST_CASE("chain complex identity d(k-1) d(k) = 0 holds exactly") {
  for (auto X : {fixtures::sphere_s3(), fixtures::octahedron_s2().complex}) {
    for (int k = 2; k <= X.dimension(); ++k) {
      Eigen::SparseMatrix<double> P = X.boundary_matrix(k - 1) * X.boundary_matrix(k);
      P.prune(0.0);
      CHECK(P.nonZeros() == 0);
    }
  }
}

TEST_CASE("boundary of a coherently oriented closed surface vanishes") {
  auto oct = fixtures::octahedron_s2();
  Chain all{2, {}};
  for (Index f = 0; f < oct.complex.simplex_count(2); ++f)
    all.add(f, oct.complex.orientation(f));
  CHECK(oct.complex.boundary(all).empty());
}

TEST_CASE("projective plane fixture is non-orientable and needs its flag") {
  CHECK_THROWS_AS(fixtures::projective_plane(false), std::runtime_error);
  auto X = fixtures::projective_plane();
  CHECK(X.closed());
  CHECK(!X.orientable());
  CHECK(X.simplex_count(0) == 6);
  CHECK(X.simplex_count(1) == 15);
  CHECK(X.simplex_count(2) == 10);
  CHECK(X.euler_characteristic() == 1);
}

TEST_CASE("JSON and OFF serialization round-trip bit-exactly") {
  auto X = fixtures::sphere_s3();
  std::vector<std::array<double, 3>> pos(5, {0.1234567890123456789, -2.0 / 3.0, 1e-17});
  for (int i = 0; i < 5; ++i) pos[i][0] += i;

  auto text = X.to_json(pos);
  auto [X2, pos2] = SimplicialComplex::from_json(text);
  CHECK(pos2 == pos);
  CHECK(X2.to_json(pos2) == text);

  auto off = X.to_off(pos);
  auto [X3, pos3] = SimplicialComplex::from_off(off);
  CHECK(pos3 == pos);
  CHECK(X3.to_off(pos3) == off);
}
