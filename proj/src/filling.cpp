#include "coex/filling.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

namespace coex {

int dominant_local_vertex(const std::array<Index, 4>& cell_vertices,
                          const Eigen::Vector4d& bary) {
  int best = 0;
  for (int i = 1; i < 4; ++i) {
    if (bary[i] > bary[best] + 1e-12 ||
        (bary[i] > bary[best] - 1e-12 && cell_vertices[i] < cell_vertices[best]))
      best = i;
  }
  return best;
}

double chain_length(const MetricData& M, const Chain& gamma) {
  double l = 0;
  for (auto& [e, c] : gamma.coeffs) l += std::abs((double)c) * M.edge_length[e];
  return l;
}

double FillingResult::chain_area(const MetricData& M) const {
  double a = 0;
  for (int f = 0; f < chain.size(); ++f) a += std::abs(chain[f]) * M.face_area[f];
  return a;
}

FillingResult min_filling_area(const MetricData& M, const HomologyBasis& H,
                               const Chain& gamma, const FillingOptions& opts) {
  const SimplicialComplex& X = M.X();
  FillingResult out;
  out.chain = Vec::Zero(X.simplex_count(2));
  if (gamma.empty()) return out;  // zero cycle fills with the empty chain

  auto cls = classify_cycle(X, H, gamma);
  if (!cls.trivial || cls.r == 0)
    throw std::runtime_error("min_filling_area: cycle is not real homologically trivial");
  Coeff r = cls.r;
  if (opts.use_universal_r) r = H.r_universal;
  if (opts.r_override > 0) r = opts.r_override;
  out.r_used = r;

  const Index nf = X.simplex_count(2);
  const Index ne = X.simplex_count(1);
  LpProblem lp;
  lp.rows = ne;
  lp.cols.resize(2 * nf);
  lp.cost.resize(2 * nf);
  auto d2 = X.boundary_triplets(2);
  std::vector<std::vector<std::pair<int, double>>> cols(nf);
  for (auto& t : d2) cols[t[1]].push_back({(int)t[0], (double)t[2]});
  for (Index f = 0; f < nf; ++f) {
    lp.cols[f] = cols[f];
    lp.cost[f] = M.face_area[f];
    auto neg = cols[f];
    for (auto& [r_, v] : neg) v = -v;
    lp.cols[nf + f] = std::move(neg);
    lp.cost[nf + f] = M.face_area[f];
  }
  lp.rhs.assign(ne, 0.0);
  for (auto& [e, c] : gamma.coeffs) lp.rhs[e] = (double)(r * c);

  auto res = solve_lp(lp, opts.lp);
  out.lp_status = res.status;
  out.lp_iterations = res.iterations;
  if (res.status == LpStatus::Infeasible)
    throw std::runtime_error("min_filling_area: infeasible at r = " + std::to_string(r));
  if (res.status != LpStatus::Optimal)
    throw std::runtime_error("min_filling_area: LP " + to_string(res.status));
  for (Index f = 0; f < nf; ++f) out.chain[f] = res.x[f] - res.x[nf + f];
  out.area = res.objective / (double)r;
  out.residual = res.max_infeasibility;
  return out;
}

// --- skeleton projection ----------------------------------------------------

SkeletonProjection project_to_skeleton(const MetricData& M,
                                       const std::vector<CurveSegment>& poly,
                                       bool require_closed) {
  const SimplicialComplex& X = M.X();
  SkeletonProjection out;
  out.chain.degree = 1;
  if (poly.empty()) return out;

  if (require_closed) {
    // Endpoint of each segment must coincide with the start of the next
    // (cyclically) as a point of the complex.
    for (size_t s = 0; s < poly.size(); ++s) {
      const auto& cur = poly[s];
      const auto& nxt = poly[(s + 1) % poly.size()];
      Eigen::Vector3d pa = M.position(cur.tet, cur.to);
      Eigen::Vector3d pb = M.position(nxt.tet, nxt.from);
      if (cur.tet == nxt.tet && (pa - pb).norm() > 1e-7)
        throw std::runtime_error("project_to_skeleton: curve is not closed");
      // Across cells the charts differ; compare via shared-vertex weights.
      if (cur.tet != nxt.tet) {
        const auto& va = X.tetrahedra()[cur.tet];
        const auto& vb = X.tetrahedra()[nxt.tet];
        for (int i = 0; i < 4; ++i) {
          if (cur.to[i] < 1e-9) continue;
          bool found = false;
          for (int j = 0; j < 4; ++j)
            if (vb[j] == va[i] && std::abs(nxt.from[j] - cur.to[i]) < 1e-7) found = true;
          if (!found) throw std::runtime_error("project_to_skeleton: inconsistent cell trace");
        }
      }
    }
  }

  for (const auto& seg : poly) {
    const auto& cell = M.cells[seg.tet];
    const auto& vs = X.tetrahedra()[seg.tet];
    Eigen::Vector3d a = M.position(seg.tet, seg.from);
    Eigen::Vector3d b = M.position(seg.tet, seg.to);
    double seg_len = std::sqrt(std::max(0.0, (b - a).dot(cell.G * (b - a))));
    out.curve_length += seg_len;

    int la = dominant_local_vertex(vs, seg.from);
    int lb = dominant_local_vertex(vs, seg.to);
    Eigen::Vector3d xa = cell.chart[la], xb = cell.chart[lb];
    if (la != lb) {
      Index va = vs[la], vb = vs[lb];
      Index e = X.edge_index(va, vb);
      if (e < 0) throw std::runtime_error("project_to_skeleton: cell pair is not an edge");
      out.chain.add(e, va < vb ? 1 : -1);
    }
    // Cone triangles (a, b, xb) and (a, xb, xa) fill the homotopy between
    // the chord and the replacement path inside this cell.
    auto tri_area = [&](const Eigen::Vector3d& p, const Eigen::Vector3d& q,
                        const Eigen::Vector3d& s) {
      Eigen::Vector3d u = q - p, w = s - p;
      double g11 = u.dot(cell.G * u), g22 = w.dot(cell.G * w), g12 = u.dot(cell.G * w);
      return 0.5 * std::sqrt(std::max(0.0, g11 * g22 - g12 * g12));
    };
    double a1 = tri_area(a, b, xb), a2 = tri_area(a, xb, xa);
    if (a1 > 1e-14) {
      out.correction_area += a1;
      out.cone_triangles++;
    }
    if (a2 > 1e-14) {
      out.correction_area += a2;
      out.cone_triangles++;
    }
  }

  if (require_closed && !M.X().boundary(out.chain).empty())
    throw std::runtime_error("project_to_skeleton: projection failed to close");

  out.chain_length = chain_length(M, out.chain);
  if (out.curve_length > 0) {
    out.length_factor = out.chain_length / out.curve_length;
    out.area_factor = out.correction_area / out.curve_length;
  }
  return out;
}

// --- Cheeger estimate --------------------------------------------------

namespace {

/// Dijkstra shortest paths over the 1-skeleton with metric edge weights.
struct ShortestPaths {
  std::vector<double> dist;
  std::vector<Index> parent_edge;  // edge used to reach the vertex, -1 at source

  ShortestPaths(const MetricData& M, Index source, Index skip_edge = -1) {
    const SimplicialComplex& X = M.X();
    const Index nv = X.simplex_count(0);
    dist.assign(nv, std::numeric_limits<double>::infinity());
    parent_edge.assign(nv, -1);
    using Item = std::pair<double, Index>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[source] = 0;
    heap.push({0.0, source});
    while (!heap.empty()) {
      auto [d, v] = heap.top();
      heap.pop();
      if (d > dist[v] + 1e-15) continue;
      for (Index e : X.vertex_edges(v)) {
        if (e == skip_edge) continue;
        Index w = X.edges()[e][0] == v ? X.edges()[e][1] : X.edges()[e][0];
        double nd = d + M.edge_length[e];
        if (nd < dist[w] - 1e-15) {
          dist[w] = nd;
          parent_edge[w] = e;
          heap.push({nd, w});
        }
      }
    }
  }

  /// Oriented edge chain of the tree path source -> v.
  Chain path_chain(const SimplicialComplex& X, Index v) const {
    Chain c{1, {}};
    while (parent_edge[v] >= 0) {
      Index e = parent_edge[v];
      Index prev = (X.edges()[e][0] == v) ? X.edges()[e][1] : X.edges()[e][0];
      c.add(e, prev < v ? 1 : -1);  // edges are stored (min, max)
      v = prev;
    }
    return c;
  }
};

Chain canonical(const Chain& c) {
  if (c.coeffs.empty()) return c;
  return c.coeffs.begin()->second > 0 ? c : -c;
}

}  // namespace

CheegerEstimate cheeger_estimate(const MetricData& M, const HomologyBasis& H,
                                 const CheegerConfig& config) {
  const SimplicialComplex& X = M.X();
  if (!X.closed()) throw std::runtime_error("cheeger_estimate requires a closed complex");

  // Candidate trivial cycles, deduplicated by canonical form. Caller
  // cycles go first so a tight LP budget cannot starve them.
  std::vector<Chain> candidates;
  std::set<std::map<Index, Coeff>> seen;
  auto offer = [&](Chain c) {
    if (c.empty()) return;
    Chain cc = canonical(c);
    if (seen.insert(cc.coeffs).second) candidates.push_back(std::move(cc));
  };
  for (const auto& c : config.extra_cycles) offer(c);

  // Fundamental cycles of the shortest-path tree, shortest first.
  {
    ShortestPaths sp(M, 0);
    std::vector<std::pair<double, Index>> nontree;
    for (Index e = 0; e < X.simplex_count(1); ++e) {
      auto [a, b] = std::pair{X.edges()[e][0], X.edges()[e][1]};
      if (sp.parent_edge[a] == e || sp.parent_edge[b] == e) continue;
      nontree.push_back({sp.dist[a] + sp.dist[b] + M.edge_length[e], e});
    }
    std::sort(nontree.begin(), nontree.end());
    int taken = 0;
    for (auto& [len, e] : nontree) {
      if (taken >= config.tree_cycles) break;
      auto [a, b] = std::pair{X.edges()[e][0], X.edges()[e][1]};
      Chain c = sp.path_chain(X, a);
      c += Chain{1, {{e, a < b ? 1 : -1}}};
      Chain back = sp.path_chain(X, b);
      c += -back;
      offer(std::move(c));
      ++taken;
    }
  }

  // Shortest cycle through sampled edges.
  if (config.edge_cycles > 0) {
    const Index ne = X.simplex_count(1);
    Index stride = std::max<Index>(1, ne / config.edge_cycles);
    for (Index e = 0; e < ne; e += stride) {
      auto [a, b] = std::pair{X.edges()[e][0], X.edges()[e][1]};
      ShortestPaths sp(M, a, e);
      if (!std::isfinite(sp.dist[b])) continue;
      Chain c = sp.path_chain(X, b);
      c += Chain{1, {{e, b < a ? 1 : -1}}};
      if (!X.boundary(c).empty()) continue;
      offer(std::move(c));
    }
  }

  CheegerEstimate out;
  out.h1_upper = std::numeric_limits<double>::infinity();
  long lp_calls = 0;
  long id = 0;
  for (const auto& gamma : candidates) {
    if (lp_calls >= config.max_lp_calls) break;
    auto cls = classify_cycle(X, H, gamma);
    if (!cls.trivial || cls.r == 0) continue;
    ++lp_calls;
    auto fill = min_filling_area(M, H, gamma, config.filling);
    double len = chain_length(M, gamma);
    if (fill.area <= 0) continue;
    double ratio = len / fill.area;
    out.rows.push_back({id++, len, fill.r_used, fill.area, ratio});
    if (ratio < out.h1_upper) {
      out.h1_upper = ratio;
      out.witness = gamma;
      out.witness_filling = std::move(fill);
    }
  }
  out.cycles_examined = lp_calls;
  if (!std::isfinite(out.h1_upper))
    throw std::runtime_error(
        "cheeger_estimate: no homologically trivial cycles found; increase the budget");
  return out;
}

std::string CheegerEstimate::to_csv() const {
  std::ostringstream os;
  os << "cycle_id,length,r,area,ratio\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%lld,%.17g,%.17g\n", r.id, r.length,
                  (long long)r.r, r.area, r.ratio);
    os << buf;
  }
  return os.str();
}

}  // namespace coex
