#include <doctest.h>

#include <random>

#include "coex/metric.hpp"
#include "coex/models.hpp"

using namespace coex;

namespace {

MetricData unit_right_tet() {
  auto X = std::make_shared<SimplicialComplex>(
      SimplicialComplex::from_tetrahedra(4, {{0, 1, 2, 3}}));
  GeometrySpec g;
  g.embedding = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  return assemble_metric(X, g);
}

MetricData torus_metric(int N) {
  auto tm = models::torus_mesh(N);
  return assemble_metric(tm.complex, tm.geometry);
}

// Smallest eigenvalue estimate by inverse power iteration on a dense copy.
double min_eig(const SpMat& A) {
  Eigen::MatrixXd D(A);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D);
  return es.eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("unit right tetrahedron: M0 entries sum to the volume 1/6") {
  auto M = unit_right_tet();
  CHECK(M.total_volume == doctest::Approx(1.0 / 6).epsilon(1e-14));
  CHECK(M.mass[0].sum() == doctest::Approx(1.0 / 6).epsilon(1e-14));
}

TEST_CASE("flat torus: total volume 1 for all N and M0 sums to it") {
  for (int N : {3, 4, 5}) {
    auto M = torus_metric(N);
    CHECK(M.total_volume == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(M.mass[0].sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("mass matrices are symmetric positive definite") {
  auto M = torus_metric(3);
  for (int k = 0; k <= 3; ++k) {
    Eigen::MatrixXd D(M.mass[k]);
    CHECK((D - D.transpose()).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(min_eig(M.mass[k]) > 0);
  }
}

TEST_CASE("whitney 1-forms integrate to the cochain over their own edges") {
  auto M = unit_right_tet();
  const auto& X = M.X();
  Vec omega = Vec::Zero(X.simplex_count(1));
  omega[2] = 1.0;  // one arbitrary edge
  for (Index e = 0; e < X.simplex_count(1); ++e) {
    auto [a, b] = std::pair{X.edges()[e][0], X.edges()[e][1]};
    Eigen::Vector4d from = Eigen::Vector4d::Zero(), to = Eigen::Vector4d::Zero();
    const auto& vs = X.tetrahedra()[0];
    for (int i = 0; i < 4; ++i) {
      if (vs[i] == a) from[i] = 1;
      if (vs[i] == b) to[i] = 1;
    }
    double integral = M.line_integral(omega, 0, from, to);
    CHECK(integral == doctest::Approx(e == 2 ? 1.0 : 0.0).epsilon(1e-13));
  }
}

TEST_CASE("pointwise algebra satisfies the defining identities") {
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> U(-1, 1);
  PointFrame fr;
  // A generic SPD metric.
  Eigen::Matrix3d B;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) B(i, j) = U(rng);
  fr.metric = B * B.transpose() + 2 * Eigen::Matrix3d::Identity();

  SUBCASE("orthonormal frame in d = 3: star e1 = e2 ^ e3") {
    PointFrame id_frame;
    FormValue e1 = FormValue::covector({1, 0, 0});
    FormValue s = star(id_frame, e1);
    CHECK(s.degree == 2);
    CHECK((s.v - Eigen::Vector3d(1, 0, 0)).norm() < 1e-15);  // axial of e2^e3
    FormValue e23 = wedge(id_frame, FormValue::covector({0, 1, 0}), FormValue::covector({0, 0, 1}));
    CHECK((s.v - e23.v).norm() < 1e-15);
  }

  SUBCASE("star star = (-1)^{p(n-p)} id, and star is a pointwise isometry") {
    for (int trial = 0; trial < 10; ++trial) {
      FormValue a = FormValue::covector({U(rng), U(rng), U(rng)});
      FormValue ss = star(fr, star(fr, a));
      CHECK((ss.v - a.v).norm() < 1e-12);  // p=1, n=3: sign +1
      CHECK(pointwise_norm(fr, star(fr, a)) ==
            doctest::Approx(pointwise_norm(fr, a)).epsilon(1e-12));
      FormValue m = FormValue::two_form({U(rng), U(rng), U(rng)});
      FormValue mm = star(fr, star(fr, m));
      CHECK((mm.v - m.v).norm() < 1e-12);
      CHECK(pointwise_norm(fr, star(fr, m)) ==
            doctest::Approx(pointwise_norm(fr, m)).epsilon(1e-12));
    }
  }

  SUBCASE("interior product identity i_Y(beta) = star(Y_flat ^ star beta)") {
    PointFrame id_frame;
    Eigen::Vector3d Y(1, 0, 0);
    FormValue beta = FormValue::covector({1, 2, 0});
    CHECK(interior(id_frame, Y, beta) == doctest::Approx(1.0));
    FormValue rhs = star(id_frame, wedge(id_frame, flat(id_frame, Y), star(id_frame, beta)));
    CHECK(rhs.degree == 0);
    CHECK(rhs.s == doctest::Approx(1.0).epsilon(1e-14));

    for (int trial = 0; trial < 10; ++trial) {
      Eigen::Vector3d Yr(U(rng), U(rng), U(rng));
      FormValue br = FormValue::covector({U(rng), U(rng), U(rng)});
      double lhs = interior(fr, Yr, br);
      FormValue r2 = star(fr, wedge(fr, flat(fr, Yr), star(fr, br)));
      CHECK(lhs == doctest::Approx(r2.s).epsilon(1e-11));
    }
  }

  SUBCASE("wedge beyond the dimension raises") {
    FormValue m = FormValue::two_form({1, 0, 0});
    CHECK_THROWS_AS(wedge(fr, m, m), std::runtime_error);
  }

  SUBCASE("pointwise mass equals brute-force comass over orthonormal frames") {
    std::mt19937 rng2(2024);
    auto g_dot = [&](const Eigen::Vector3d& u, const Eigen::Vector3d& v) {
      return u.dot(fr.metric * v);
    };
    auto random_onb = [&]() {
      std::array<Eigen::Vector3d, 3> f;
      std::uniform_real_distribution<double> V(-1, 1);
      for (int i = 0; i < 3; ++i) {
        Eigen::Vector3d v(V(rng2), V(rng2), V(rng2));
        for (int j = 0; j < i; ++j) v -= g_dot(v, f[j]) * f[j];
        f[i] = v / std::sqrt(g_dot(v, v));
      }
      return f;
    };
    FormValue a = FormValue::covector({0.3, -1.1, 0.7});
    FormValue m2 = FormValue::two_form({-0.4, 0.9, 0.5});
    double best1 = 0, best2 = 0;
    for (int it = 0; it < 4000; ++it) {
      auto f = random_onb();
      best1 = std::max(best1, a.v.dot(f[0]));
      best2 = std::max(best2, m2.v.dot(f[0].cross(f[1])));
    }
    CHECK(best1 == doctest::Approx(pointwise_mass(fr, a)).epsilon(5e-3));
    CHECK(best2 == doctest::Approx(pointwise_mass(fr, m2)).epsilon(5e-3));
    CHECK(best1 <= pointwise_mass(fr, a) * (1 + 1e-12));
    CHECK(best2 <= pointwise_mass(fr, m2) * (1 + 1e-12));
  }
}

TEST_CASE("norms of a constant unit 1-form on the flat torus") {
  auto tm = models::torus_mesh(4);
  auto M = assemble_metric(tm.complex, tm.geometry);
  const auto& X = M.X();
  // Cochain of dx via unwrapped chart increments: read from any cell chart.
  Vec omega = Vec::Zero(X.simplex_count(1));
  std::vector<char> seen(X.simplex_count(1), 0);
  for (Index t = 0; t < X.simplex_count(3); ++t) {
    const auto& vs = X.tetrahedra()[t];
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) {
        Index e = X.edge_index(vs[i], vs[j]);
        if (seen[e]) continue;
        seen[e] = 1;
        omega[e] = (M.cells[t].chart[j] - M.cells[t].chart[i]).x();
      }
  }
  auto n = norms(M, omega, 1);
  CHECK(n.L2 * n.L2 == doctest::Approx(1.0).epsilon(1e-12));   // mu(M) = 1
  CHECK(n.Linf == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(n.mass == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(n.L1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(n.mass <= n.Linf + 1e-12);

  SUBCASE("norms scale homogeneously") {
    auto n3 = norms(M, Vec(-3.5 * omega), 1);
    CHECK(n3.L1 == doctest::Approx(3.5 * n.L1).epsilon(1e-12));
    CHECK(n3.L2 == doctest::Approx(3.5 * n.L2).epsilon(1e-12));
    CHECK(n3.Linf == doctest::Approx(3.5 * n.Linf).epsilon(1e-12));
    CHECK(n3.mass == doctest::Approx(3.5 * n.mass).epsilon(1e-12));
  }

  SUBCASE("this cochain is harmonic: hodge decomposition returns it whole") {
    auto parts = hodge_decompose(M, omega);
    double m1norm = std::sqrt(omega.dot(M.mass[1] * omega));
    CHECK(std::sqrt(parts.exact.dot(M.mass[1] * parts.exact)) < 1e-8 * m1norm);
    CHECK(std::sqrt(parts.coexact.dot(M.mass[1] * parts.coexact)) < 1e-8 * m1norm);
    CHECK((parts.harmonic - omega).norm() < 1e-8 * omega.norm());
  }
}

TEST_CASE("hodge decomposition recovers an exact form and is orthogonal") {
  auto M = torus_metric(3);
  const auto& X = M.X();
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> U(-1, 1);
  Vec f(X.simplex_count(0));
  for (int i = 0; i < f.size(); ++i) f[i] = U(rng);
  Vec omega = M.d0() * f;
  auto parts = hodge_decompose(M, omega);
  double m1 = std::sqrt(omega.dot(M.mass[1] * omega));
  CHECK((parts.exact - omega).norm() < 1e-8 * m1);
  CHECK(std::sqrt(parts.coexact.dot(M.mass[1] * parts.coexact)) < 1e-8 * m1);
  CHECK(std::sqrt(parts.harmonic.dot(M.mass[1] * parts.harmonic)) < 1e-8 * m1);

  SUBCASE("components recombine and are pairwise M1-orthogonal") {
    Vec g(X.simplex_count(1));
    for (int i = 0; i < g.size(); ++i) g[i] = U(rng);
    auto p = hodge_decompose(M, g);
    CHECK((p.exact + p.coexact + p.harmonic - g).norm() < 1e-8 * g.norm());
    auto ip = [&](const Vec& a, const Vec& b) { return a.dot(M.mass[1] * b); };
    double scale = ip(g, g);
    CHECK(std::abs(ip(p.exact, p.coexact)) < 1e-8 * scale);
    CHECK(std::abs(ip(p.exact, p.harmonic)) < 1e-8 * scale);
    CHECK(std::abs(ip(p.coexact, p.harmonic)) < 1e-8 * scale);
  }
}

TEST_CASE("degenerate cells are rejected with the cell named") {
  auto X = std::make_shared<SimplicialComplex>(
      SimplicialComplex::from_tetrahedra(4, {{0, 1, 2, 3}}));
  GeometrySpec g;
  g.embedding = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};  // coplanar
  CHECK_THROWS_WITH_AS(assemble_metric(X, g), "degenerate tetrahedron 0", std::runtime_error);
}

TEST_CASE("coordinate export emits one line per entry") {
  auto M = unit_right_tet();
  auto text = export_matrix_coordinate(M.mass[0]);
  CHECK(text.find("4 4 16") == 0);
}
