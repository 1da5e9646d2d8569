#include "coex/models.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace coex::models {

namespace {

struct CellBuild {
  std::array<Index, 4> ids;
  std::array<Eigen::Vector3d, 4> pos;
  Eigen::Matrix3d G = Eigen::Matrix3d::Identity();
};

double chart_det(const std::array<Eigen::Vector3d, 4>& p) {
  return (p[1] - p[0]).cross(p[2] - p[0]).dot(p[3] - p[0]);
}

/// Build the complex from cell descriptions and attach id-sorted charts.
/// Charts whose handedness disagrees with the normalized complex
/// orientation are reflected in their first coordinate (with the tensor
/// conjugated accordingly), which changes nothing metric.
std::pair<std::shared_ptr<const SimplicialComplex>, GeometrySpec> build_mesh(
    Index nv, std::vector<CellBuild>& cells) {
  for (auto& c : cells) {
    // Jointly sort (id, position) ascending by id.
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j)
        if (c.ids[j] < c.ids[i]) {
          std::swap(c.ids[i], c.ids[j]);
          std::swap(c.pos[i], c.pos[j]);
        }
  }
  std::vector<std::array<Index, 4>> tets;
  tets.reserve(cells.size());
  for (auto& c : cells) {
    if (chart_det(c.pos) > 0)
      tets.push_back(c.ids);
    else
      tets.push_back({c.ids[0], c.ids[1], c.ids[3], c.ids[2]});
  }
  auto X = std::make_shared<SimplicialComplex>(SimplicialComplex::from_tetrahedra(nv, tets));
  GeometrySpec geo;
  geo.cells.resize(cells.size());
  for (auto& c : cells) {
    Index t = X->tet_index(c.ids[0], c.ids[1], c.ids[2], c.ids[3]);
    if (t < 0) throw std::logic_error("generated cell missing from complex");
    CellGeometry cg;
    cg.chart = c.pos;
    cg.tensor = c.G;
    int want = X->orientation(t);
    if ((chart_det(cg.chart) > 0 ? 1 : -1) != want) {
      for (auto& p : cg.chart) p.x() = -p.x();
      cg.tensor.row(0) *= -1;
      cg.tensor.col(0) *= -1;
    }
    geo.cells[t] = cg;
  }
  return {X, geo};
}

void add_path_edge(Chain& chain, const SimplicialComplex& X, Index from, Index to) {
  Index e = X.edge_index(from, to);
  if (e < 0) throw std::runtime_error("path step is not an edge");
  chain.add(e, from < to ? 1 : -1);
}

}  // namespace

// --- flat torus -------------------------------------------------------------

TorusMesh torus_mesh(int N) {
  // Below N = 3 the wrap identifies distinct cells of the 6-tet cube split
  // (and no closed complex on N^3 = 8 vertices can have 48 tets at all,
  // since closed forces F = 2T).
  if (N < 3) throw std::runtime_error("torus grid needs N >= 3");
  TorusMesh out;
  out.N = N;
  const double h = 1.0 / N;
  auto vid = [&](int i, int j, int k) {
    auto m = [&](int a) { return ((a % N) + N) % N; };
    return (Index)(m(i) + N * m(j) + N * N * m(k));
  };

  // Each cube splits into two vertical prisms over the base-square diagonal
  // through the lowest vertex id, and each prism into three tets with the
  // quad diagonals running from the larger bottom id to the smaller top id.
  // Both rules depend only on global ids, so neighboring cubes agree on
  // shared faces, including across the wrap.
  std::vector<CellBuild> cells;
  cells.reserve((size_t)6 * N * N * N);
  for (int k = 0; k < N; ++k)
    for (int j = 0; j < N; ++j)
      for (int i = 0; i < N; ++i) {
        std::array<std::array<int, 2>, 4> sq = {{{i, j}, {i + 1, j}, {i, j + 1}, {i + 1, j + 1}}};
        Index id00 = vid(i, j, k), id10 = vid(i + 1, j, k), id01 = vid(i, j + 1, k);
        Index id11 = vid(i + 1, j + 1, k);
        Index mn = std::min({id00, id10, id01, id11});
        std::array<std::array<int, 3>, 2> tris;  // indices into sq
        if (mn == id00 || mn == id11)
          tris = {{{0, 1, 3}, {0, 3, 2}}};
        else
          tris = {{{0, 1, 2}, {1, 3, 2}}};
        for (const auto& tri : tris) {
          std::array<std::pair<Index, std::array<int, 2>>, 3> col;
          for (int m = 0; m < 3; ++m)
            col[m] = {vid(sq[tri[m]][0], sq[tri[m]][1], k), sq[tri[m]]};
          std::sort(col.begin(), col.end());
          std::array<Index, 3> bot{}, top{};
          std::array<Eigen::Vector3d, 3> pb, pt;
          for (int m = 0; m < 3; ++m) {
            bot[m] = col[m].first;
            top[m] = vid(col[m].second[0], col[m].second[1], k + 1);
            pb[m] = h * Eigen::Vector3d(col[m].second[0], col[m].second[1], k);
            pt[m] = h * Eigen::Vector3d(col[m].second[0], col[m].second[1], k + 1);
          }
          cells.push_back({{bot[0], bot[1], bot[2], top[0]}, {pb[0], pb[1], pb[2], pt[0]}, {}});
          cells.push_back({{bot[1], bot[2], top[0], top[1]}, {pb[1], pb[2], pt[0], pt[1]}, {}});
          cells.push_back({{bot[2], top[0], top[1], top[2]}, {pb[2], pt[0], pt[1], pt[2]}, {}});
        }
      }
  for (auto& c : cells) c.G = Eigen::Matrix3d::Identity();
  auto [X, geo] = build_mesh((Index)(N * N * N), cells);
  out.complex = X;
  out.geometry = std::move(geo);

  {
    HomologyBasis H;
    H.rank = 3;
    H.r_universal = 1;
    H.betti = {1, 3, 3, 1};
    for (int axis = 0; axis < 3; ++axis) {
      Chain loop{1, {}};
      for (int s = 0; s < N; ++s) {
        std::array<int, 3> a{0, 0, 0}, b{0, 0, 0};
        a[axis] = s;
        b[axis] = s + 1;
        add_path_edge(loop, *X, vid(a[0], a[1], a[2]), vid(b[0], b[1], b[2]));
      }
      H.cycles.push_back(std::move(loop));
    }
    // Seam-crossing cocycles: +-1 on edges that wrap around in one axis.
    auto coord = [&](Index v, int axis) {
      int i = v % N, j = (v / N) % N, k = v / (N * N);
      return axis == 0 ? i : (axis == 1 ? j : k);
    };
    for (int axis = 0; axis < 3; ++axis) {
      Chain beta{1, {}};
      const auto& edges = X->edges();
      for (Index e = 0; e < (Index)edges.size(); ++e) {
        int xa = coord(edges[e][0], axis), xb = coord(edges[e][1], axis);
        if (xa - xb == N - 1) beta.add(e, 1);   // wraps forward when traversed a -> b
        if (xb - xa == N - 1) beta.add(e, -1);
      }
      H.dual_cocycles.push_back(std::move(beta));
    }
    validate_basis(*X, H);
    out.basis = std::move(H);
  }
  return out;
}

// --- Berger spheres -----------------------------------------------------

BergerInvariantSpectrum berger_spectrum_invariant(const BergerModel& model) {
  const double eps = model.epsilon;
  if (!(eps > 0 && eps <= 1)) throw std::runtime_error("berger epsilon out of (0,1]");
  const double c = model.structure_constant;

  // Invariant coframe (s1, s2, sv), orthonormal for the round metric, with
  // d s_i = c * s_j ^ s_k cyclically. Covector Gram matrices of the Berger
  // metric g_eps = g_h + eps^2 g_v:
  Eigen::Matrix3d G1 = Eigen::Vector3d(1, 1, 1 / (eps * eps)).asDiagonal();
  // 2-form basis (s2^sv, sv^s1, s1^s2):
  Eigen::Matrix3d G2 = Eigen::Vector3d(1 / (eps * eps), 1 / (eps * eps), 1).asDiagonal();
  Eigen::Matrix3d D = c * Eigen::Matrix3d::Identity();

  // All invariant 1-forms are coclosed, so Delta_1 = delta d on them; as a
  // generalized symmetric pencil, (D^T G2 D) x = lambda G1 x.
  Eigen::Matrix3d A = D.transpose() * G2 * D;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix3d> es(A, G1);

  BergerInvariantSpectrum out;
  out.eigenvalues = {es.eigenvalues()[0], es.eigenvalues()[1], es.eigenvalues()[2]};
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end());
  out.smallest_coexact = out.eigenvalues.front();
  out.d_of_vertical = D * Eigen::Vector3d(0, 0, 1);
  out.fiber_length = 2 * M_PI * eps;
  // vol(S^3, g_eps) = 2 pi^2 eps; dividing by the fiber length leaves the
  // base area pi, fixing the normalization of the pulled-back area form.
  out.base_area = (2 * M_PI * M_PI * eps) / out.fiber_length;
  return out;
}

std::pair<double, double> berger_h1_bounds(const BergerModel& model) {
  if (!(model.epsilon > 0 && model.epsilon <= 1))
    throw std::runtime_error("berger epsilon out of (0,1]");
  return {2 * model.epsilon, M_PI};
}

namespace {

using Vec4 = Eigen::Vector4d;

Vec4 quat_mul(const Vec4& a, const Vec4& b) {
  // (w, x, y, z) quaternion product.
  return Vec4(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
              a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
              a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
              a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);
}

std::array<long, 4> quantize(const Vec4& v) {
  std::array<long, 4> q{};
  for (int i = 0; i < 4; ++i) q[i] = (long)std::llround(v[i] * 1e9);
  return q;
}

std::vector<Vec4> cell600_vertices() {
  const double phi = (1 + std::sqrt(5.0)) / 2;
  std::vector<Vec4> vs;
  for (int i = 0; i < 4; ++i)
    for (int s = -1; s <= 1; s += 2) {
      Vec4 v = Vec4::Zero();
      v[i] = s;
      vs.push_back(v);
    }
  for (int m = 0; m < 16; ++m) {
    Vec4 v;
    for (int i = 0; i < 4; ++i) v[i] = (m >> i & 1) ? 0.5 : -0.5;
    vs.push_back(v);
  }
  // Even permutations of (+-phi/2, +-1/2, +-1/(2 phi), 0).
  static const std::array<std::array<int, 4>, 12> even = {{{0, 1, 2, 3},
                                                           {0, 2, 3, 1},
                                                           {0, 3, 1, 2},
                                                           {1, 0, 3, 2},
                                                           {1, 2, 0, 3},
                                                           {1, 3, 2, 0},
                                                           {2, 0, 1, 3},
                                                           {2, 1, 3, 0},
                                                           {2, 3, 0, 1},
                                                           {3, 0, 2, 1},
                                                           {3, 1, 0, 2},
                                                           {3, 2, 1, 0}}};
  const double base[4] = {phi / 2, 0.5, 1 / (2 * phi), 0.0};
  for (const auto& p : even)
    for (int m = 0; m < 8; ++m) {
      Vec4 v;
      double signs[3] = {(m & 1) ? -1.0 : 1.0, (m & 2) ? -1.0 : 1.0, (m & 4) ? -1.0 : 1.0};
      for (int i = 0; i < 4; ++i) {
        double b = base[p[i]];
        double s = p[i] < 3 ? signs[p[i]] : 1.0;
        v[i] = s * b;
      }
      vs.push_back(v);
    }
  if (vs.size() != 120) throw std::logic_error("600-cell vertex count");
  return vs;
}

struct Tet4 {
  std::array<Index, 4> v;
};

// Cells of the 600-cell as 4-cliques of the 36-degree adjacency graph.
std::vector<Tet4> cell600_tets(const std::vector<Vec4>& vs) {
  const double phi = (1 + std::sqrt(5.0)) / 2;
  const double edge_dot = phi / 2;
  const int n = (int)vs.size();
  std::vector<std::vector<Index>> adj(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::abs(vs[i].dot(vs[j]) - edge_dot) < 1e-9) {
        adj[i].push_back(j);
        adj[j].push_back(i);
      }
  auto adjacent = [&](Index a, Index b) {
    return std::abs(vs[a].dot(vs[b]) - edge_dot) < 1e-9;
  };
  std::vector<Tet4> tets;
  for (Index a = 0; a < n; ++a)
    for (Index b : adj[a]) {
      if (b <= a) continue;
      for (Index c : adj[a]) {
        if (c <= b || !adjacent(b, c)) continue;
        for (Index d : adj[a]) {
          if (d <= c || !adjacent(b, d) || !adjacent(c, d)) continue;
          tets.push_back({{a, b, c, d}});
        }
      }
    }
  if (tets.size() != 600) throw std::logic_error("600-cell tet count");
  return tets;
}

}  // namespace

BergerMesh berger_mesh(const BergerModel& model, int refine) {
  const double eps = model.epsilon;
  if (!(eps > 0 && eps <= 1)) throw std::runtime_error("berger epsilon out of (0,1]");
  BergerMesh out;
  out.model = model;
  out.refine = refine;

  auto verts = cell600_vertices();
  auto tets = cell600_tets(verts);

  // Hopf circle through the identity generated by an order-10 group element;
  // its imaginary direction generates the S^1 action whose Killing field the
  // Berger metric rescales.
  const double phi = (1 + std::sqrt(5.0)) / 2;
  Vec4 u0(phi / 2, 0.5, 1 / (2 * phi), 0.0);
  Vec4 axis(0, u0[1], u0[2], u0[3]);
  axis /= axis.norm();

  std::vector<Index> loop;
  {
    std::map<std::array<long, 4>, Index> lookup;
    for (Index i = 0; i < (Index)verts.size(); ++i) lookup[quantize(verts[i])] = i;
    Vec4 q(1, 0, 0, 0);
    for (int k = 0; k < 10; ++k) {
      auto it = lookup.find(quantize(q));
      if (it == lookup.end()) throw std::logic_error("fiber vertex missing");
      loop.push_back(it->second);
      q = quat_mul(u0, q);
    }
  }

  for (int level = 0; level < refine; ++level) {
    std::map<std::pair<Index, Index>, Index> mid;
    auto midpoint = [&](Index a, Index b) {
      auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      Vec4 m = (verts[a] + verts[b]).normalized();
      verts.push_back(m);
      Index id = (Index)verts.size() - 1;
      mid[key] = id;
      return id;
    };
    std::vector<Tet4> next;
    next.reserve(tets.size() * 8);
    for (const auto& T : tets) {
      auto [v0, v1, v2, v3] = std::tuple{T.v[0], T.v[1], T.v[2], T.v[3]};
      Index m01 = midpoint(v0, v1), m02 = midpoint(v0, v2), m03 = midpoint(v0, v3);
      Index m12 = midpoint(v1, v2), m13 = midpoint(v1, v3), m23 = midpoint(v2, v3);
      next.push_back({{v0, m01, m02, m03}});
      next.push_back({{v1, m01, m12, m13}});
      next.push_back({{v2, m02, m12, m23}});
      next.push_back({{v3, m03, m13, m23}});
      // Inner octahedron around its shortest diagonal.
      std::array<std::pair<Index, Index>, 3> diags = {{{m01, m23}, {m02, m13}, {m03, m12}}};
      int best = 0;
      double best_len = 1e300;
      for (int d = 0; d < 3; ++d) {
        double l = (verts[diags[d].first] - verts[diags[d].second]).norm();
        if (l < best_len - 1e-12) {
          best_len = l;
          best = d;
        }
      }
      auto [p, q] = diags[best];
      std::array<Index, 4> ring{};
      if (best == 0) ring = {m02, m12, m13, m03};
      if (best == 1) ring = {m01, m12, m23, m03};
      if (best == 2) ring = {m01, m13, m23, m02};
      for (int r = 0; r < 4; ++r)
        next.push_back({{p, q, ring[r], ring[(r + 1) % 4]}});
    }
    tets = std::move(next);
    // Refine the fiber loop through the new edge midpoints.
    std::vector<Index> next_loop;
    for (size_t i = 0; i < loop.size(); ++i) {
      Index a = loop[i], b = loop[(i + 1) % loop.size()];
      next_loop.push_back(a);
      auto it = mid.find(std::minmax(a, b));
      if (it == mid.end()) throw std::logic_error("fiber edge lost in refinement");
      next_loop.push_back(it->second);
    }
    loop = std::move(next_loop);
  }

  // Cell charts: gnomonic tangent chart at the barycenter, tensor sampled
  // from g_eps there.
  std::vector<CellBuild> cells;
  cells.reserve(tets.size());
  for (const auto& T : tets) {
    Vec4 bary = Vec4::Zero();
    for (Index v : T.v) bary += verts[v];
    bary.normalize();
    // Orthonormal tangent frame at bary, right-handed with the outward radial
    // direction first.
    std::array<Vec4, 3> t;
    {
      int found = 0;
      for (int i = 0; i < 4 && found < 3; ++i) {
        Vec4 c = Vec4::Unit(i) - bary[i] * bary;
        for (int j = 0; j < found; ++j) c -= c.dot(t[j]) * t[j];
        if (c.norm() > 0.3) t[found++] = c.normalized();
      }
      if (found < 3) throw std::logic_error("tangent frame construction failed");
      Eigen::Matrix4d Mo;
      Mo.col(0) = bary;
      for (int j = 0; j < 3; ++j) Mo.col(j + 1) = t[j];
      if (Mo.determinant() < 0) t[2] = -t[2];
    }
    CellBuild c;
    c.ids = T.v;
    for (int i = 0; i < 4; ++i) {
      // Exponential (normal-coordinate) chart at the barycenter.
      const Vec4& v = verts[T.v[i]];
      double ct = std::clamp(v.dot(bary), -1.0, 1.0);
      if (ct <= 0.1) throw std::logic_error("chart too wide");
      double theta = std::acos(ct);
      double scale = theta < 1e-12 ? 1.0 : theta / std::sin(theta);
      c.pos[i] = scale * Eigen::Vector3d(t[0].dot(v), t[1].dot(v), t[2].dot(v));
    }

    // Exact pullback of g_eps at a chart point: the round metric in normal
    // coordinates plus the rescaling along the Killing direction, pulled
    // back through the exponential map (radial split + parallel transport).
    auto pullback = [&](const Eigen::Vector3d& x) {
      const double r = x.norm();
      Eigen::Matrix3d A = Eigen::Matrix3d::Identity();
      Eigen::Vector3d vcomp;
      if (r < 1e-10) {
        Vec4 V = quat_mul(axis, bary);
        vcomp = Eigen::Vector3d(V.dot(t[0]), V.dot(t[1]), V.dot(t[2]));
      } else {
        const double s = std::pow(std::sin(r) / r, 2);
        Eigen::Vector3d u = x / r;
        A = s * Eigen::Matrix3d::Identity() + (1 - s) * (u * u.transpose());
        Vec4 uhat = u[0] * t[0] + u[1] * t[1] + u[2] * t[2];
        Vec4 q = std::cos(r) * bary + std::sin(r) * uhat;
        Vec4 gp = -std::sin(r) * bary + std::cos(r) * uhat;
        Vec4 V = quat_mul(axis, q);
        double a = V.dot(gp);
        Vec4 Vtan = V - a * gp;
        for (int i = 0; i < 3; ++i) {
          Vec4 Ti = t[i] + t[i].dot(uhat) * (gp - uhat);
          vcomp[i] = a * u[i] + (r / std::sin(r)) * Vtan.dot(Ti);
        }
      }
      Eigen::Vector3d w = A * vcomp;
      return Eigen::Matrix3d(A + (eps * eps - 1) * (w * w.transpose()));
    };
    Eigen::Matrix3d G = Eigen::Matrix3d::Zero();
    for (const auto& qp : kTetQuadPoints) {
      Eigen::Vector3d x = Eigen::Vector3d::Zero();
      for (int i = 0; i < 4; ++i) x += qp[i] * c.pos[i];
      G += kTetQuadWeight * pullback(x);
    }
    c.G = G;
    cells.push_back(c);
  }

  auto [X, geo] = build_mesh((Index)verts.size(), cells);
  out.complex = X;
  out.geometry = std::move(geo);
  out.fiber_vertices = loop;
  Chain fiber{1, {}};
  for (size_t i = 0; i < loop.size(); ++i)
    add_path_edge(fiber, *X, loop[i], loop[(i + 1) % loop.size()]);
  out.fiber_loop = std::move(fiber);
  return out;
}

HomologyBasis sphere_basis() {
  HomologyBasis H;
  H.betti = {1, 0, 0, 1};
  return H;
}

// --- cusp model ----------------------------------------------------------

double CuspModel::half_length() const { return std::log(1.0 / epsilon); }

CuspEigenvalue cusp_eigenvalue(const CuspModel& model, int N) {
  if (!(model.epsilon > 0 && model.epsilon < 1))
    throw std::runtime_error("cusp epsilon out of (0,1)");
  if (N < 16) throw std::runtime_error("cusp grid too small (N >= 16)");
  const double L = 2 * model.half_length();
  const double h = L / N;
  const int n = N - 1;

  // Inverse iteration with the tridiagonal (2, -1)/h^2 operator.
  Vec x = Vec::Zero(n);
  for (int i = 0; i < n; ++i) x[i] = std::sin(M_PI * (i + 1) / N);  // good start
  auto thomas_solve = [&](const Vec& b) {
    Vec c(n), d(n);
    double diag = 2.0 / (h * h), off = -1.0 / (h * h);
    c[0] = off / diag;
    d[0] = b[0] / diag;
    for (int i = 1; i < n; ++i) {
      double m = diag - off * c[i - 1];
      c[i] = off / m;
      d[i] = (b[i] - off * d[i - 1]) / m;
    }
    Vec y(n);
    y[n - 1] = d[n - 1];
    for (int i = n - 2; i >= 0; --i) y[i] = d[i] - c[i] * y[i + 1];
    return y;
  };
  auto apply = [&](const Vec& v) {
    Vec y(n);
    for (int i = 0; i < n; ++i) {
      double left = i > 0 ? v[i - 1] : 0.0, right = i + 1 < n ? v[i + 1] : 0.0;
      y[i] = (2 * v[i] - left - right) / (h * h);
    }
    return y;
  };
  double lambda = 0;
  for (int it = 0; it < 10000; ++it) {
    Vec y = thomas_solve(x);
    y /= y.norm();
    double next = y.dot(apply(y));
    if (std::abs(next - lambda) < 1e-15 * std::max(1.0, std::abs(next)) && it > 2) {
      lambda = next;
      x = y;
      break;
    }
    lambda = next;
    x = y;
  }

  CuspEigenvalue out;
  out.grid_size = N;
  out.fd_value = lambda;
  out.analytic_value = std::pow(M_PI / (2 * model.half_length()), 2);
  // Rayleigh quotient ||f'||^2 / ||f||^2 with one-sided differences to the
  // Dirichlet boundary.
  double num = 0, den = 0;
  for (int i = 0; i <= n; ++i) {
    double fi = i == 0 ? 0 : x[i - 1];
    double fn = i == n ? 0 : x[i];
    num += (fn - fi) * (fn - fi) / h;
    if (i < n) den += x[i] * x[i] * h;
  }
  out.rayleigh = num / den;
  return out;
}

SphereMesh octahedron_sphere(int refine) {
  SphereMesh s;
  s.positions = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  s.faces = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4}, {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
  s.equator = {0, 2, 1, 3};
  for (int level = 0; level < refine; ++level) {
    std::map<std::pair<Index, Index>, Index> mid;
    auto midpoint = [&](Index a, Index b) {
      auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      Eigen::Vector3d m = (s.positions[a] + s.positions[b]).normalized();
      s.positions.push_back(m);
      Index id = (Index)s.positions.size() - 1;
      mid[key] = id;
      return id;
    };
    std::vector<std::array<Index, 3>> next;
    next.reserve(s.faces.size() * 4);
    for (auto [a, b, c] : s.faces) {
      Index ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
      next.push_back({a, ab, ca});
      next.push_back({ab, b, bc});
      next.push_back({ca, bc, c});
      next.push_back({ab, bc, ca});
    }
    s.faces = std::move(next);
    std::vector<Index> eq;
    for (size_t i = 0; i < s.equator.size(); ++i) {
      Index a = s.equator[i], b = s.equator[(i + 1) % s.equator.size()];
      eq.push_back(a);
      eq.push_back(mid.at(std::minmax(a, b)));
    }
    s.equator = std::move(eq);
  }
  return s;
}

CuspMesh cusp_mesh(const CuspModel& model, int s2_refine, int t_slices, int cap_layers) {
  const double eps = model.epsilon;
  if (!(eps > 0 && eps < 1)) throw std::runtime_error("cusp epsilon out of (0,1)");
  if (t_slices % 2) ++t_slices;
  if (t_slices < 2 || cap_layers < 1) throw std::runtime_error("cusp resolution too small");

  CuspMesh out;
  out.model = model;
  SphereMesh s2 = octahedron_sphere(s2_refine);
  const Index V2 = (Index)s2.positions.size();
  const double L = model.half_length();
  const double boundary_radius = (1 + eps * eps) / 2;  // eps * cosh(ln(1/eps))

  // Vertex layout: left apex, left cap layers 1..cap_layers-1 (growing),
  // central slices 0..t_slices, right cap layers (shrinking), right apex.
  const int n_spheres = (cap_layers - 1) + (t_slices + 1) + (cap_layers - 1);
  auto sphere_base = [&](int s) { return (Index)(1 + (Index)s * V2); };
  const Index apex_left = 0;
  const Index apex_right = sphere_base(n_spheres);
  const Index nv = apex_right + 1;

  // Per-sphere geometric role: cap spheres carry a flat-ball radius, central
  // spheres a t-coordinate.
  struct SphereInfo {
    bool cap;       // flat cap chart
    double radius;  // cap: euclidean radius
    double t;       // central: warped coordinate
  };
  std::vector<SphereInfo> info(n_spheres);
  for (int l = 1; l < cap_layers; ++l)
    info[l - 1] = {true, boundary_radius * l / cap_layers, -L};
  for (int m = 0; m <= t_slices; ++m)
    info[cap_layers - 1 + m] = {false, boundary_radius, -L + 2 * L * m / t_slices};
  for (int l = cap_layers - 1; l >= 1; --l)
    info[cap_layers - 1 + t_slices + (cap_layers - l)] = {true, boundary_radius * l / cap_layers, L};

  std::vector<CellBuild> cells;
  std::vector<char> central_flag;

  // Apex cones. The innermost cap layer (or the boundary slice when
  // cap_layers == 1) is coned to the apex in a flat chart.
  auto cap_pos = [&](int sphere, Index v) { return info[sphere].radius * s2.positions[v]; };
  for (int side = 0; side < 2; ++side) {
    int sphere = side == 0 ? 0 : n_spheres - 1;
    Index apex = side == 0 ? apex_left : apex_right;
    for (auto [a, b, c] : s2.faces) {
      CellBuild cb;
      cb.ids = {apex, (Index)(sphere_base(sphere) + a), (Index)(sphere_base(sphere) + b),
                (Index)(sphere_base(sphere) + c)};
      cb.pos = {Eigen::Vector3d::Zero(), cap_pos(sphere, a), cap_pos(sphere, b), cap_pos(sphere, c)};
      cells.push_back(cb);
      central_flag.push_back(0);
    }
  }

  // Prism layers between consecutive spheres.
  for (int sp = 0; sp + 1 < n_spheres; ++sp) {
    const SphereInfo &lo = info[sp], &hi = info[sp + 1];
    bool central = !lo.cap && !hi.cap;
    for (auto face : s2.faces) {
      // Sort the three columns by the id on the lower sphere; the quad over
      // each vertical edge then gets the diagonal from the larger bottom id
      // to the smaller top id, consistently across neighboring prisms.
      std::array<Index, 3> col = face;
      std::sort(col.begin(), col.end());
      std::array<Index, 3> bot{}, top{};
      for (int i = 0; i < 3; ++i) {
        bot[i] = sphere_base(sp) + col[i];
        top[i] = sphere_base(sp + 1) + col[i];
      }

      std::array<Eigen::Vector3d, 3> pb, pt;
      bool warped = central;
      if (central) {
        // Warped-product chart (u1, u2, t) with the exponential sphere chart
        // at the face barycenter.
        Eigen::Vector3d n = (s2.positions[col[0]] + s2.positions[col[1]] + s2.positions[col[2]]).normalized();
        Eigen::Vector3d t1 = n.unitOrthogonal();
        Eigen::Vector3d t2 = n.cross(t1);
        for (int i = 0; i < 3; ++i) {
          const Eigen::Vector3d& v = s2.positions[col[i]];
          double theta = std::acos(std::clamp(v.dot(n), -1.0, 1.0));
          double scale = theta < 1e-12 ? 1.0 : theta / std::sin(theta);
          Eigen::Vector2d u(scale * t1.dot(v), scale * t2.dot(v));
          pb[i] = Eigen::Vector3d(u[0], u[1], lo.t);
          pt[i] = Eigen::Vector3d(u[0], u[1], hi.t);
        }
      } else {
        // Flat cap chart; at the glue sphere the radii agree with the warped
        // boundary sphere, so the induced face metrics match up to chords.
        for (int i = 0; i < 3; ++i) {
          pb[i] = lo.radius * s2.positions[col[i]];
          pt[i] = hi.radius * s2.positions[col[i]];
        }
      }

      // Exact warped tensor at a chart point, averaged by quadrature per tet.
      auto field = [&](const Eigen::Vector3d& x) {
        double rho = std::hypot(x[0], x[1]);
        double w = eps * std::cosh(x[2]);
        Eigen::Matrix2d A2 = Eigen::Matrix2d::Identity();
        if (rho > 1e-10) {
          double s = std::pow(std::sin(rho) / rho, 2);
          Eigen::Vector2d u(x[0] / rho, x[1] / rho);
          A2 = s * Eigen::Matrix2d::Identity() + (1 - s) * (u * u.transpose());
        }
        Eigen::Matrix3d G = Eigen::Matrix3d::Identity();
        G.topLeftCorner<2, 2>() = w * w * A2;
        return G;
      };
      auto push = [&](std::array<Index, 4> ids, std::array<Eigen::Vector3d, 4> pos) {
        CellBuild cb;
        cb.ids = ids;
        cb.pos = pos;
        if (warped) {
          Eigen::Matrix3d G = Eigen::Matrix3d::Zero();
          for (const auto& qp : kTetQuadPoints) {
            Eigen::Vector3d x = Eigen::Vector3d::Zero();
            for (int i = 0; i < 4; ++i) x += qp[i] * pos[i];
            G += kTetQuadWeight * field(x);
          }
          cb.G = G;
        }
        cells.push_back(cb);
        central_flag.push_back(central ? 1 : 0);
      };
      push({bot[0], bot[1], bot[2], top[0]}, {pb[0], pb[1], pb[2], pt[0]});
      push({bot[1], bot[2], top[0], top[1]}, {pb[1], pb[2], pt[0], pt[1]});
      push({bot[2], top[0], top[1], top[2]}, {pb[2], pt[0], pt[1], pt[2]});
    }
  }

  auto [X, geo] = build_mesh(nv, cells);
  out.complex = X;
  out.geometry = std::move(geo);
  for (size_t i = 0; i < cells.size(); ++i)
    if (central_flag[i])
      out.central_cells.push_back(X->tet_index(cells[i].ids[0], cells[i].ids[1],
                                               cells[i].ids[2], cells[i].ids[3]));
  std::sort(out.central_cells.begin(), out.central_cells.end());

  // Meridian: the equator of the t = 0 slice.
  int mid_sphere = cap_layers - 1 + t_slices / 2;
  Chain mer{1, {}};
  for (size_t i = 0; i < s2.equator.size(); ++i) {
    Index a = sphere_base(mid_sphere) + s2.equator[i];
    Index b = sphere_base(mid_sphere) + s2.equator[(i + 1) % s2.equator.size()];
    add_path_edge(mer, *X, a, b);
  }
  out.meridian = std::move(mer);
  return out;
}

}  // namespace coex::models
