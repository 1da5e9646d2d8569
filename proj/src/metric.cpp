#include "coex/metric.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace coex {

namespace {
constexpr double a4 = 0.5854101966249685;
constexpr double b4 = 0.1381966011250105;
}  // namespace

const std::array<Eigen::Vector4d, 4> kTetQuadPoints = {
    Eigen::Vector4d{a4, b4, b4, b4}, Eigen::Vector4d{b4, a4, b4, b4},
    Eigen::Vector4d{b4, b4, a4, b4}, Eigen::Vector4d{b4, b4, b4, a4}};

// --- pointwise algebra ------------------------------------------------------

FormValue star(const PointFrame& f, const FormValue& a) {
  const Eigen::Matrix3d& G = f.metric;
  const double sd = std::sqrt(G.determinant()) * f.orientation;
  switch (a.degree) {
    case 0: return FormValue::scalar(3, a.s * sd);
    case 1: return FormValue::two_form(sd * (G.inverse() * a.v));
    case 2: return FormValue::covector((G * a.v) / sd);
    case 3: return FormValue::scalar(0, a.s / sd);
    default: throw std::runtime_error("star: bad degree");
  }
}

FormValue wedge(const PointFrame& f, const FormValue& a, const FormValue& b) {
  (void)f;
  if (a.degree + b.degree > 3) throw std::runtime_error("wedge: degree overflow");
  if (a.degree == 0) {
    FormValue r = b;
    r.s *= a.s;
    r.v *= a.s;
    return r;
  }
  if (b.degree == 0) return wedge(f, b, a);
  if (a.degree == 1 && b.degree == 1) return FormValue::two_form(a.v.cross(b.v));
  if (a.degree == 1 && b.degree == 2) return FormValue::scalar(3, a.v.dot(b.v));
  if (a.degree == 2 && b.degree == 1) return FormValue::scalar(3, a.v.dot(b.v));
  throw std::runtime_error("wedge: unsupported degrees");
}

Eigen::Vector3d sharp(const PointFrame& f, const FormValue& a) {
  if (a.degree != 1) throw std::runtime_error("sharp expects a 1-form");
  return f.metric.inverse() * a.v;
}

FormValue sharp_as_form(const PointFrame& f, const FormValue& a) {
  return FormValue::covector(sharp(f, a));
}

FormValue flat(const PointFrame& f, const Eigen::Vector3d& y) {
  return FormValue::covector(f.metric * y);
}

double interior(const PointFrame& f, const Eigen::Vector3d& y, const FormValue& beta) {
  (void)f;
  if (beta.degree != 1) throw std::runtime_error("interior: expects a 1-form");
  return beta.v.dot(y);
}

double pointwise_norm(const PointFrame& f, const FormValue& a) {
  const Eigen::Matrix3d& G = f.metric;
  switch (a.degree) {
    case 0: return std::abs(a.s);
    case 1: return std::sqrt(a.v.dot(G.inverse() * a.v));
    case 2: return std::sqrt(a.v.dot(G * a.v) / G.determinant());
    case 3: return std::abs(a.s) / std::sqrt(G.determinant());
    default: throw std::runtime_error("norm: bad degree");
  }
}

double pointwise_mass(const PointFrame& f, const FormValue& a) {
  // In dimension 3 every 2-form is decomposable, so the comass of 1- and
  // 2-forms equals the pointwise norm; degrees 0 and 3 are scalars.
  return pointwise_norm(f, a);
}

// --- assembly ---------------------------------------------------------------

namespace {

// integral over the cell of lambda_i * lambda_j, divided by the volume
inline double bary_pair(int i, int j) { return (i == j) ? 0.1 : 0.05; }

}  // namespace

MetricData assemble_metric(std::shared_ptr<const SimplicialComplex> Xp,
                           const GeometrySpec& geometry) {
  const SimplicialComplex& X = *Xp;
  if (X.dimension() != 3)
    throw std::runtime_error("assemble_metric requires a tetrahedral complex");
  const Index nt = X.simplex_count(3);
  const Index nf = X.simplex_count(2);
  const Index ne = X.simplex_count(1);
  const Index nv = X.simplex_count(0);

  MetricData M;
  M.complex = std::move(Xp);
  M.cells.resize(nt);

  for (Index t = 0; t < nt; ++t) {
    auto& cell = M.cells[t];
    const auto& vs = X.tetrahedra()[t];
    if (!geometry.cells.empty()) {
      cell.chart = geometry.cells[t].chart;
      cell.G = geometry.cells[t].tensor;
    } else {
      for (int i = 0; i < 4; ++i) {
        const auto& p = geometry.embedding.at(vs[i]);
        cell.chart[i] = Eigen::Vector3d(p[0], p[1], p[2]);
      }
      cell.G.setIdentity();
    }

    Eigen::Matrix3d J;
    for (int i = 0; i < 3; ++i) J.col(i) = cell.chart[i + 1] - cell.chart[0];
    const double detJ = J.determinant();
    double scale = 0;
    for (int i = 0; i < 3; ++i) scale = std::max(scale, J.col(i).norm());
    if (std::abs(detJ) <= 1e-12 * scale * scale * scale)
      throw std::runtime_error("degenerate tetrahedron " + std::to_string(t));
    const double detG = cell.G.determinant();
    if (detG <= 0) throw std::runtime_error("non-SPD tensor on tetrahedron " + std::to_string(t));
    cell.Ginv = cell.G.inverse();
    cell.sqrt_det_g = std::sqrt(detG);
    cell.volume = cell.sqrt_det_g * std::abs(detJ) / 6.0;
    cell.orient = detJ > 0 ? 1 : -1;
    if (cell.orient != X.orientation(t))
      throw std::runtime_error("chart orientation contradicts complex orientation on cell " +
                               std::to_string(t));
    Eigen::Matrix3d Jinv = J.inverse();
    for (int i = 0; i < 3; ++i) cell.grad.row(i + 1) = Jinv.row(i);
    cell.grad.row(0) = -(cell.grad.row(1) + cell.grad.row(2) + cell.grad.row(3));
    M.total_volume += cell.volume;
  }

  // Whitney-Galerkin mass matrices.
  std::vector<Eigen::Triplet<double>> t0, t1, t2, t3;
  for (Index t = 0; t < nt; ++t) {
    const auto& cell = M.cells[t];
    const auto& vs = X.tetrahedra()[t];
    const double vol = cell.volume;
    Eigen::Matrix<double, 4, 3> gradH = cell.grad * cell.Ginv;
    Eigen::Matrix4d g = gradH * cell.grad.transpose();  // covector Gram of gradients

    // M0
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        t0.push_back({vs[i], vs[j], vol * bary_pair(i, j)});

    // M1: edges (i<j) of the cell, Whitney form lam_i dlam_j - lam_j dlam_i.
    std::array<std::pair<int, int>, 6> le = {{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};
    for (int a = 0; a < 6; ++a) {
      auto [i, j] = le[a];
      Index ea = X.edge_index(vs[i], vs[j]);
      for (int b = 0; b < 6; ++b) {
        auto [k, l] = le[b];
        Index eb = X.edge_index(vs[k], vs[l]);
        double val = bary_pair(i, k) * g(j, l) - bary_pair(i, l) * g(j, k) -
                     bary_pair(j, k) * g(i, l) + bary_pair(j, l) * g(i, k);
        t1.push_back({ea, eb, vol * val});
      }
    }

    // M2: faces (i<j<k), Whitney form
    //   2 (lam_i dlam_j^dlam_k - lam_j dlam_i^dlam_k + lam_k dlam_i^dlam_j).
    std::array<std::array<int, 3>, 4> lf = {{{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}}};
    auto g2 = [&](int v, int w, int vv, int ww) {
      return g(v, vv) * g(w, ww) - g(v, ww) * g(w, vv);
    };
    for (int a = 0; a < 4; ++a) {
      auto [i, j, k] = std::tuple{lf[a][0], lf[a][1], lf[a][2]};
      Index fa = X.triangle_index(vs[i], vs[j], vs[k]);
      std::array<std::array<int, 3>, 3> terms_a = {{{i, j, k}, {j, i, k}, {k, i, j}}};
      std::array<double, 3> sign_a = {2, -2, 2};
      for (int b = 0; b < 4; ++b) {
        auto [p, q, r] = std::tuple{lf[b][0], lf[b][1], lf[b][2]};
        Index fb = X.triangle_index(vs[p], vs[q], vs[r]);
        std::array<std::array<int, 3>, 3> terms_b = {{{p, q, r}, {q, p, r}, {r, p, q}}};
        std::array<double, 3> sign_b = {2, -2, 2};
        double val = 0;
        for (int m = 0; m < 3; ++m)
          for (int n = 0; n < 3; ++n)
            val += sign_a[m] * sign_b[n] * bary_pair(terms_a[m][0], terms_b[n][0]) *
                   g2(terms_a[m][1], terms_a[m][2], terms_b[n][1], terms_b[n][2]);
        t2.push_back({fa, fb, vol * val});
      }
    }

    // M3: one constant Whitney 3-form per cell with unit integral.
    t3.push_back({t, t, 1.0 / vol});
  }

  M.mass[0].resize(nv, nv);
  M.mass[0].setFromTriplets(t0.begin(), t0.end());
  M.mass[1].resize(ne, ne);
  M.mass[1].setFromTriplets(t1.begin(), t1.end());
  M.mass[2].resize(nf, nf);
  M.mass[2].setFromTriplets(t2.begin(), t2.end());
  M.mass[3].resize(nt, nt);
  M.mass[3].setFromTriplets(t3.begin(), t3.end());

  M.d0_ = SpMat(X.boundary_matrix(1).transpose());
  M.d1_ = SpMat(X.boundary_matrix(2).transpose());

  // Face areas and edge lengths, averaged over the tet cofaces whose charts
  // realize them (sampled tensors of neighboring cells can differ slightly).
  M.face_area.assign(nf, 0);
  M.edge_length.assign(ne, 0);
  {
    std::vector<int> fcount(nf, 0), ecount(ne, 0);
    for (Index t = 0; t < nt; ++t) {
      const auto& cell = M.cells[t];
      const auto& vs = X.tetrahedra()[t];
      auto local_of = [&](Index v) {
        for (int i = 0; i < 4; ++i)
          if (vs[i] == v) return i;
        throw std::logic_error("vertex not in cell");
      };
      for (size_t k = 0; k < 4; ++k) {
        std::array<Index, 3> fv{};
        size_t j = 0;
        for (size_t i = 0; i < 4; ++i)
          if (i != k) fv[j++] = vs[i];
        Index f = X.triangle_index(fv[0], fv[1], fv[2]);
        Eigen::Vector3d e1 = cell.chart[local_of(fv[1])] - cell.chart[local_of(fv[0])];
        Eigen::Vector3d e2 = cell.chart[local_of(fv[2])] - cell.chart[local_of(fv[0])];
        double g11 = e1.dot(cell.G * e1), g22 = e2.dot(cell.G * e2), g12 = e1.dot(cell.G * e2);
        M.face_area[f] += 0.5 * std::sqrt(std::max(0.0, g11 * g22 - g12 * g12));
        fcount[f]++;
      }
      for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) {
          Index e = X.edge_index(vs[i], vs[j]);
          Eigen::Vector3d d = cell.chart[j] - cell.chart[i];
          M.edge_length[e] += std::sqrt(d.dot(cell.G * d));
          ecount[e]++;
        }
    }
    for (Index f = 0; f < nf; ++f) M.face_area[f] /= std::max(1, fcount[f]);
    for (Index e = 0; e < ne; ++e) M.edge_length[e] /= std::max(1, ecount[e]);
  }
  return M;
}

// --- evaluation -------------------------------------------------------------

Eigen::Vector3d MetricData::position(Index tet, const Eigen::Vector4d& bary) const {
  const auto& cell = cells[tet];
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  for (int i = 0; i < 4; ++i) p += bary[i] * cell.chart[i];
  return p;
}

PointFrame MetricData::frame(Index tet, const Eigen::Vector4d& bary) const {
  // Cell charts are positively oriented realizations of the global
  // orientation (enforced at assembly), so the frame handedness is +1.
  return PointFrame{tet, bary, cells[tet].G, 1};
}

FormValue MetricData::whitney(int degree, const Vec& omega, Index tet,
                              const Eigen::Vector4d& bary) const {
  const SimplicialComplex& Xc = *complex;
  const auto& cell = cells[tet];
  const auto& vs = Xc.tetrahedra()[tet];
  switch (degree) {
    case 0: {
      double s = 0;
      for (int i = 0; i < 4; ++i) s += bary[i] * omega[vs[i]];
      return FormValue::scalar(0, s);
    }
    case 1: {
      Eigen::Vector3d a = Eigen::Vector3d::Zero();
      static const std::array<std::pair<int, int>, 6> le = {
          {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};
      for (auto [i, j] : le) {
        double w = omega[Xc.edge_index(vs[i], vs[j])];
        if (w == 0) continue;
        a += w * (bary[i] * cell.grad.row(j) - bary[j] * cell.grad.row(i)).transpose();
      }
      return FormValue::covector(a);
    }
    case 2: {
      Eigen::Vector3d m = Eigen::Vector3d::Zero();
      static const std::array<std::array<int, 3>, 4> lf = {
          {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}}};
      for (auto [i, j, k] : lf) {
        double w = omega[Xc.triangle_index(vs[i], vs[j], vs[k])];
        if (w == 0) continue;
        Eigen::Vector3d gi = cell.grad.row(i), gj = cell.grad.row(j), gk = cell.grad.row(k);
        m += 2 * w * (bary[i] * gj.cross(gk) - bary[j] * gi.cross(gk) + bary[k] * gi.cross(gj));
      }
      return FormValue::two_form(m);
    }
    case 3:
      return FormValue::scalar(3, omega[tet] / (cell.volume / cell.sqrt_det_g) / cell.orient);
    default:
      throw std::runtime_error("whitney: bad degree");
  }
}

double MetricData::line_integral(const Vec& omega, Index tet, const Eigen::Vector4d& from,
                                 const Eigen::Vector4d& to) const {
  // The Whitney 1-form is affine in position, so the midpoint rule is exact
  // along a straight chart segment; the pairing with the segment vector is
  // metric-free.
  const auto& cell = cells[tet];
  Eigen::Vector3d delta = position(tet, to) - position(tet, from);
  Eigen::Vector4d mid = 0.5 * (from + to);
  const auto& vs = complex->tetrahedra()[tet];
  static const std::array<std::pair<int, int>, 6> le = {
      {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};
  double s = 0;
  for (auto [i, j] : le) {
    double w = omega[complex->edge_index(vs[i], vs[j])];
    if (w == 0) continue;
    double gj = cell.grad.row(j).dot(delta);
    double gi = cell.grad.row(i).dot(delta);
    s += w * (mid[i] * gj - mid[j] * gi);
  }
  return s;
}

// --- cached factorizations --------------------------------------------------

const Eigen::SimplicialLLT<SpMat>& MetricData::llt_m1() const {
  std::call_once(cache_->m1_flag, [&] {
    auto f = std::make_shared<Eigen::SimplicialLLT<SpMat>>();
    f->compute(mass[1]);
    if (f->info() != Eigen::Success) throw std::runtime_error("M1 factorization failed");
    cache_->m1 = std::move(f);
  });
  return *cache_->m1;
}

const Eigen::SimplicialLLT<SpMat>& MetricData::llt_l0() const {
  std::call_once(cache_->l0_flag, [&] {
    SpMat L0 = d0_.transpose() * mass[1] * d0_;
    // Pin vertex 0 to remove the constant kernel.
    for (int k = 0; k < L0.outerSize(); ++k)
      for (SpMat::InnerIterator it(L0, k); it; ++it)
        if (it.row() == 0 || it.col() == 0) it.valueRef() = (it.row() == it.col()) ? 1.0 : 0.0;
    L0.prune(0.0);
    auto f = std::make_shared<Eigen::SimplicialLLT<SpMat>>();
    f->compute(L0);
    if (f->info() != Eigen::Success) throw std::runtime_error("L0 factorization failed");
    cache_->l0 = std::move(f);
  });
  return *cache_->l0;
}

// --- norms ------------------------------------------------------------------

Norms norms(const MetricData& M, const Vec& omega, int degree) {
  Norms out;
  out.L2 = std::sqrt(std::max(0.0, omega.dot(M.mass[degree] * omega)));
  const Index nt = M.X().simplex_count(3);
  double l1 = 0, linf = 0, mass_sup = 0;
  for (Index t = 0; t < nt; ++t) {
    const double vol = M.cells[t].volume;
    for (const auto& q : kTetQuadPoints) {
      FormValue val = M.whitney(degree, omega, t, q);
      PointFrame fr = M.frame(t, q);
      double n = pointwise_norm(fr, val);
      double cm = pointwise_mass(fr, val);
      l1 += kTetQuadWeight * vol * n;
      linf = std::max(linf, n);
      mass_sup = std::max(mass_sup, cm);
    }
  }
  out.L1 = l1;
  out.Linf = linf;
  out.mass = mass_sup;
  return out;
}

// --- Hodge decomposition ----------------------------------------------------

HodgeParts hodge_decompose(const MetricData& M, const Vec& omega, double tol, int max_iter) {
  const SpMat& D0 = M.d0();
  const SpMat& D1 = M.d1();
  const SpMat& M1 = M.mass[1];

  HodgeParts out;

  // Exact part: 0-form potential with vertex 0 pinned.
  Vec rhs0 = D0.transpose() * (M1 * omega);
  rhs0[0] = 0;
  Vec f = M.llt_l0().solve(rhs0);
  out.exact = D0 * f;

  // Coexact part: solve (D1 M1^-1 D1^T) w = D1 omega by CG. The operator is
  // PSD with a kernel (closed 2-cochain directions), but kernel components
  // of w do not reach the coexact part, so CG only has to be kept from
  // wandering once rounding stalls it: track the best iterate and stop on
  // stagnation or divergence.
  const auto& m1llt = M.llt_m1();
  Vec b = D1 * omega;
  const int nf = (int)b.size();
  auto apply = [&](const Vec& v) -> Vec { return D1 * m1llt.solve(D1.transpose() * v); };

  // Residuals are measured against the input scale, not ||b||: for an exact
  // input b is exactly zero and a relative-to-b criterion would chase noise.
  const double b_scale = std::max(std::sqrt((double)D1.nonZeros()) * omega.norm(), 1e-300);
  Vec w = Vec::Zero(nf);
  Vec r = b, p = r;
  double rr = r.squaredNorm();
  const double stop = std::pow(tol * b_scale, 2);
  if (max_iter <= 0) max_iter = 2 * (int)nf + 200;
  Vec best_w = w;
  double best_rr = rr;
  int it = 0, stale = 0;
  for (; it < max_iter && rr > stop; ++it) {
    Vec Ap = apply(p);
    double pap = p.dot(Ap);
    if (!(pap > 0)) break;  // search direction fell into the kernel
    double alpha = rr / pap;
    w += alpha * p;
    r -= alpha * Ap;
    double rr_new = r.squaredNorm();
    if (rr_new < best_rr) {
      best_rr = rr_new;
      best_w = w;
      stale = 0;
    } else if (++stale > 200 || rr_new > 1e8 * best_rr) {
      break;  // stagnated at the rounding floor
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  w = best_w;
  out.cg_iterations = it;
  out.cg_residual = std::sqrt((b - apply(w)).squaredNorm()) / b_scale;
  if (out.cg_residual > 100 * tol)
    throw std::runtime_error("hodge_decompose: CG did not converge, residual " +
                             std::to_string(out.cg_residual));
  out.coexact = m1llt.solve(D1.transpose() * w);
  out.harmonic = omega - out.exact - out.coexact;
  return out;
}

std::string export_matrix_coordinate(const SpMat& A) {
  std::ostringstream os;
  os << A.rows() << " " << A.cols() << " " << A.nonZeros() << "\n";
  char buf[80];
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it) {
      std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n", (long)it.row(), (long)it.col(),
                    it.value());
      os << buf;
    }
  return os.str();
}

}  // namespace coex
