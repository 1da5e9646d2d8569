#include <doctest.h>

#include "coex/homology.hpp"
#include "coex/metric.hpp"
#include "coex/models.hpp"

using namespace coex;

TEST_CASE("smallest valid torus grid is N = 3; smaller wraps self-identify") {
  // A closed complex has F = 2T, so 48 tets on 8 vertices would need more
  // triangles than 8 vertices can carry; the generator refuses N < 3.
  CHECK_THROWS_AS(models::torus_mesh(2), std::runtime_error);
  auto tm = models::torus_mesh(3);
  CHECK(tm.complex->simplex_count(3) == 6 * 27);
  CHECK(tm.complex->euler_characteristic() == 0);
  CHECK(tm.complex->closed());
  CHECK(tm.complex->orientable());
}

TEST_CASE("torus N = 3: SNF homology is (1,3,3,1) and the model basis agrees") {
  auto tm = models::torus_mesh(3);
  auto H = homology_basis(*tm.complex);
  CHECK(H.betti == std::array<long, 4>{1, 3, 3, 1});
  CHECK(H.rank == 3);
  CHECK(H.torsion_orders.empty());
  validate_basis(*tm.complex, H);
  validate_basis(*tm.complex, tm.basis);

  SUBCASE("axis loop classifies as (1,0,0)-type against the model basis") {
    auto cls = classify_cycle(*tm.complex, tm.basis, tm.basis.cycles[0]);
    CHECK(!cls.trivial);
    CHECK(cls.free_coords == std::vector<Coeff>{1, 0, 0});

    // Against the SNF basis the coordinates differ by a unimodular change
    // of basis but triviality cannot.
    auto cls2 = classify_cycle(*tm.complex, H, tm.basis.cycles[0]);
    CHECK(!cls2.trivial);
  }

  SUBCASE("a face boundary is trivial with r = 1 in both bases") {
    Chain bd = tm.complex->boundary(Chain{2, {{0, 1}}});
    for (const HomologyBasis* B : {&H, &tm.basis}) {
      auto cls = classify_cycle(*tm.complex, *B, bd);
      CHECK(cls.trivial);
      CHECK(cls.r == 1);
    }
  }
}

TEST_CASE("berger invariant reduction gives exactly 4 eps^2") {
  for (double eps : {1.0, 0.5, 0.25, 0.1}) {
    auto spec = models::berger_spectrum_invariant({eps});
    CHECK(std::abs(spec.smallest_coexact - 4 * eps * eps) < 1e-12);
    // The other invariant modes are the horizontal pair at 4 / eps^2.
    CHECK(spec.eigenvalues[1] == doctest::Approx(4 / (eps * eps)).epsilon(1e-12));
    CHECK(spec.eigenvalues[2] == doctest::Approx(4 / (eps * eps)).epsilon(1e-12));
  }
}

TEST_CASE("berger model bookkeeping matches d(alpha) = 2 pi^* Omega") {
  auto spec = models::berger_spectrum_invariant({0.3});
  // d of the vertical coframe element has coefficient 2 on the unit
  // horizontal area form and nothing else.
  CHECK((spec.d_of_vertical - Eigen::Vector3d(0, 0, 2)).norm() < 1e-15);
  CHECK(spec.fiber_length == doctest::Approx(2 * M_PI * 0.3));
  CHECK(spec.base_area == doctest::Approx(M_PI));
}

TEST_CASE("berger h1 bounds are (2 eps, pi)") {
  auto [ratio, area] = models::berger_h1_bounds({0.1});
  CHECK(ratio == doctest::Approx(0.2));
  CHECK(area == doctest::Approx(M_PI));
  auto [r1, a1] = models::berger_h1_bounds({1.0});
  CHECK(r1 == doctest::Approx(2.0));
  CHECK(a1 == doctest::Approx(M_PI));
}

TEST_CASE("600-cell mesh: closed orientable S^3 with a decagonal fiber loop") {
  auto bm = models::berger_mesh({1.0}, 0);
  CHECK(bm.complex->simplex_count(0) == 120);
  CHECK(bm.complex->simplex_count(3) == 600);
  CHECK(bm.complex->simplex_count(1) == 720);
  CHECK(bm.complex->simplex_count(2) == 1200);
  CHECK(bm.complex->euler_characteristic() == 0);
  CHECK(bm.complex->closed());
  CHECK(bm.complex->orientable());
  CHECK(bm.fiber_vertices.size() == 10);
  CHECK(bm.complex->boundary(bm.fiber_loop).empty());

  auto M = assemble_metric(bm.complex, bm.geometry);
  // Round S^3 volume 2 pi^2, approximated from below by the chordal mesh.
  CHECK(M.total_volume == doctest::Approx(2 * M_PI * M_PI).epsilon(0.12));
  double fiber_len = 0;
  for (auto& [e, c] : bm.fiber_loop.coeffs) fiber_len += std::abs(c) * M.edge_length[e];
  CHECK(fiber_len == doctest::Approx(2 * M_PI).epsilon(0.03));
}

TEST_CASE("berger mesh at eps = 1/2 scales fiber length and volume") {
  auto bm = models::berger_mesh({0.5}, 0);
  auto M = assemble_metric(bm.complex, bm.geometry);
  CHECK(M.total_volume == doctest::Approx(M_PI * M_PI).epsilon(0.12));
  double fiber_len = 0;
  for (auto& [e, c] : bm.fiber_loop.coeffs) fiber_len += std::abs(c) * M.edge_length[e];
  // The straight chart edges leak horizontal length on collapsed fibers;
  // the excess is O(h^2) and halves per refinement (checked below at 3%).
  CHECK(fiber_len == doctest::Approx(M_PI).epsilon(0.12));
}

TEST_CASE("refined berger mesh at eps = 1/2 tracks the collapsed fiber") {
  auto bm = models::berger_mesh({0.5}, 1);
  auto M = assemble_metric(bm.complex, bm.geometry);
  double fiber_len = 0;
  for (auto& [e, c] : bm.fiber_loop.coeffs) fiber_len += std::abs(c) * M.edge_length[e];
  CHECK(fiber_len == doctest::Approx(M_PI).epsilon(0.03));
}

TEST_CASE("refined 600-cell stays a closed orientable manifold") {
  auto bm = models::berger_mesh({1.0}, 1);
  CHECK(bm.complex->simplex_count(3) == 4800);
  CHECK(bm.complex->closed());
  CHECK(bm.complex->orientable());
  CHECK(bm.complex->euler_characteristic() == 0);
  CHECK(bm.fiber_vertices.size() == 20);
  auto M = assemble_metric(bm.complex, bm.geometry);
  CHECK(M.total_volume == doctest::Approx(2 * M_PI * M_PI).epsilon(0.035));
}

TEST_CASE("cusp interval eigenvalue: analytic value and FD convergence") {
  models::CuspModel cm{std::exp(-10.0)};
  auto r2048 = models::cusp_eigenvalue(cm, 2048);
  CHECK(r2048.analytic_value == doctest::Approx(std::pow(M_PI / 20, 2)).epsilon(1e-12));
  CHECK(std::abs(r2048.fd_value - r2048.analytic_value) < 1e-4);
  CHECK(r2048.rayleigh == doctest::Approx(r2048.fd_value).epsilon(1e-10));

  SUBCASE("second-order convergence under grid halving") {
    auto r256 = models::cusp_eigenvalue(cm, 256);
    auto r512 = models::cusp_eigenvalue(cm, 512);
    double e256 = std::abs(r256.fd_value - r256.analytic_value);
    double e512 = std::abs(r512.fd_value - r512.analytic_value);
    CHECK(e512 < e256 / 3.0);  // O(N^-2) shrinks by ~4
  }

  SUBCASE("eigenvalue collapses monotonically as eps decreases") {
    double prev = -1;
    for (double e : {std::exp(-10.0), std::exp(-5.0), std::exp(-2.0)}) {
      auto r = models::cusp_eigenvalue({e}, 256);
      CHECK(r.fd_value > prev);
      prev = r.fd_value;
    }
  }

  CHECK_THROWS_AS(models::cusp_eigenvalue(cm, 8), std::runtime_error);
}

TEST_CASE("cusp mesh is a closed orientable 3-sphere with sane volume") {
  models::CuspModel cm{std::exp(-1.0)};
  auto mesh = models::cusp_mesh(cm, 1, 8, 2);
  CHECK(mesh.complex->closed());
  CHECK(mesh.complex->orientable());
  CHECK(mesh.complex->euler_characteristic() == 0);
  auto H = homology_basis(*mesh.complex);
  CHECK(H.betti == std::array<long, 4>{1, 0, 0, 1});
  CHECK(mesh.complex->boundary(mesh.meridian).empty());

  auto M = assemble_metric(mesh.complex, mesh.geometry);
  double central = 0;
  for (Index t : mesh.central_cells) central += M.cells[t].volume;
  // Quadrature target: volume of the warped product region.
  double L = cm.half_length();
  double target = 0;
  int nq = 4000;
  for (int i = 0; i < nq; ++i) {
    double t = -L + 2 * L * (i + 0.5) / nq;
    double w = cm.epsilon * std::cosh(t);
    target += (2 * L / nq) * 4 * M_PI * w * w;
  }
  CHECK(central == doctest::Approx(target).epsilon(0.10));

  double mer_len = 0;
  for (auto& [e, c] : mesh.meridian.coeffs) mer_len += std::abs(c) * M.edge_length[e];
  // Equator of the t = 0 sphere of radius eps, chordal.
  CHECK(mer_len == doctest::Approx(2 * M_PI * cm.epsilon).epsilon(0.15));
}

TEST_CASE("cusp central volume converges at the documented resolution") {
  models::CuspModel cm{std::exp(-1.0)};
  auto mesh = models::cusp_mesh(cm, 3, 48, 3);
  auto M = assemble_metric(mesh.complex, mesh.geometry);
  double central = 0;
  for (Index t : mesh.central_cells) central += M.cells[t].volume;
  double L = cm.half_length();
  double target = 0;
  int nq = 20000;
  for (int i = 0; i < nq; ++i) {
    double t = -L + 2 * L * (i + 0.5) / nq;
    double w = cm.epsilon * std::cosh(t);
    target += (2 * L / nq) * 4 * M_PI * w * w;
  }
  CHECK(central == doctest::Approx(target).epsilon(0.01));
}
