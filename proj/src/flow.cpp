#include "coex/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <thread>

#include <nlohmann/json.hpp>

namespace coex {

namespace {

Vec dual_as_vec(const MetricData& M, const Chain& c) {
  Vec v = Vec::Zero(M.X().simplex_count(1));
  for (auto& [e, coeff] : c.coeffs) v[e] = (double)coeff;
  return v;
}

// SplitMix64; one independent, reproducible stream per trajectory.
struct Rng {
  unsigned long long s;
  explicit Rng(unsigned long long seed) : s(seed) {}
  unsigned long long next() {
    s += 0x9e3779b97f4a7c15ull;
    unsigned long long z = s;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() { return (next() >> 11) * 0x1.0p-53; }
};

}  // namespace

FieldResult build_vector_field(const MetricData& M, const Vec& alpha) {
  const SimplicialComplex& X = M.X();
  const Index nt = X.simplex_count(3);
  Vec w = M.d1() * alpha;

  FieldResult out;
  out.field.velocity.resize(nt);
  out.field.speed.resize(nt);

  double max_speed = 0;
  for (Index t = 0; t < nt; ++t) {
    const auto& cell = M.cells[t];
    const auto& vs = X.tetrahedra()[t];
    // Fluxes through the four oriented faces determine the constant vector;
    // the system is consistent because the signed fluxes telescope to zero.
    Eigen::Matrix3d AtA = Eigen::Matrix3d::Zero();
    Eigen::Vector3d Atb = Eigen::Vector3d::Zero();
    static const std::array<std::array<int, 3>, 4> lf = {
        {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}}};
    for (const auto& f : lf) {
      Eigen::Vector3d n = (cell.chart[f[1]] - cell.chart[f[0]])
                              .cross(cell.chart[f[2]] - cell.chart[f[0]]);
      double wf = w[X.triangle_index(vs[f[0]], vs[f[1]], vs[f[2]])];
      AtA += n * n.transpose();
      Atb += n * (2.0 * wf);
    }
    Eigen::Vector3d m = AtA.ldlt().solve(Atb);
    // i_X mu has axial vector sqrt(det G) X: the charts are positively
    // oriented by construction, so no orientation factor enters.
    Eigen::Vector3d Xv = m / cell.sqrt_det_g;
    out.field.velocity[t] = Xv;
    out.field.speed[t] = std::sqrt(std::max(0.0, Xv.dot(cell.G * Xv)));
    max_speed = std::max(max_speed, out.field.speed[t]);
    out.field.flux_l1 += cell.volume * out.field.speed[t];
  }

  // Exact divergence-free check: alternating flux sums per cell.
  Eigen::SparseMatrix<double> D2 = X.boundary_matrix(3).transpose();
  Vec div = D2 * w;
  out.field.max_divergence = div.size() ? div.cwiseAbs().maxCoeff() : 0.0;
  out.trivial = max_speed < 1e-12;
  return out;
}

CellField constant_field(const MetricData& M, const Eigen::Vector3d& v) {
  const Index nt = M.X().simplex_count(3);
  CellField f;
  f.velocity.assign(nt, v);
  f.speed.resize(nt);
  for (Index t = 0; t < nt; ++t) {
    f.speed[t] = std::sqrt(std::max(0.0, v.dot(M.cells[t].G * v)));
    f.flux_l1 += M.cells[t].volume * f.speed[t];
  }
  return f;
}

namespace {

struct WalkStats {
  long stalled = 0, jitter = 0, segments = 0;
};

/// Core cell walker: exact face-crossing integration of a per-cell constant
/// velocity for total time T.
template <typename Sink>
void walk(const MetricData& M, const CellField& field, Index tet, Eigen::Vector4d bary,
          double T, long max_segments, Sink&& sink, WalkStats& stats) {
  const SimplicialComplex& X = M.X();
  double max_speed = 0;
  for (double s : field.speed) max_speed = std::max(max_speed, s);
  const double stall_eps = 1e-13 * std::max(max_speed, 1e-300);
  double remaining = T;
  int entry_local = -1;  // coordinate that vanished when entering this cell
  int chatter = 0;       // consecutive near-zero-progress crossings

  while (remaining > 1e-15 * T && stats.segments < max_segments) {
    const auto& cell = M.cells[tet];
    const Eigen::Vector3d& v = field.velocity[tet];
    if (field.speed[tet] <= stall_eps) {
      sink(CurveSegment{tet, bary, bary}, remaining);
      stats.stalled++;
      stats.segments++;
      return;
    }
    Eigen::Vector4d rate = cell.grad * v;  // barycentric velocity
    double s_exit = std::numeric_limits<double>::infinity();
    int face = -1;
    for (int i = 0; i < 4; ++i)
      if (rate[i] < -1e-300) {
        // Grazing entries can leave the entry coordinate with a rounding-
        // negative rate; leaving through it again would loop forever at
        // zero progress, and flux continuity says it cannot really happen.
        if (i == entry_local && bary[i] <= 1e-11) continue;
        double s = bary[i] / (-rate[i]);
        if (s < s_exit) {
          s_exit = s;
          face = i;
        }
      }
    if (face < 0 || s_exit >= remaining) {
      Eigen::Vector4d to = bary + remaining * rate;
      to = to.cwiseMax(0.0);
      to /= to.sum();
      sink(CurveSegment{tet, bary, to}, remaining);
      stats.segments++;
      return;
    }

    // Chatter control: a trajectory can reach a singular edge or face of
    // the piecewise-constant field in finite time (transversally attracting
    // spiral) and then cycle its coface ring at vanishing time steps. Once
    // detected, switch to the sliding-mode limit: drift along the pinned
    // simplex with the ring-averaged barycentric rates (any convex
    // weighting agrees up to O(h) since the underlying field is continuous).
    double rate_scale = rate.cwiseAbs().maxCoeff();
    if (s_exit * rate_scale < 1e-9) {
      if (++chatter > 24) {
        chatter = 0;
        std::array<int, 4> nz{};
        int z = 0, live = 0;
        for (int i = 0; i < 4; ++i) {
          if (bary[i] < 1e-9)
            nz[z++] = i;
          else
            live++;
        }
        const auto& vs = X.tetrahedra()[tet];
        if (live == 2) {
          // Edge slide between the two live vertices.
          int la = -1, lb = -1;
          for (int i = 0; i < 4; ++i)
            if (bary[i] >= 1e-9) (la < 0 ? la : lb) = i;
          Index va = vs[la], vb = vs[lb];
          Index e = X.edge_index(va, vb);
          double rb = 0;
          const auto& ring = X.edge_tets(e);
          for (Index c : ring) {
            const auto& cvs = X.tetrahedra()[c];
            for (int i = 0; i < 4; ++i)
              if (cvs[i] == vb) rb += M.cells[c].grad.row(i).dot(field.velocity[c]) / ring.size();
          }
          if (std::abs(rb) * 1.0 < 1e-12) {
            sink(CurveSegment{tet, bary, bary}, remaining);  // elliptic pin: no drift
            stats.stalled++;
            stats.segments++;
            return;
          }
          double sB = bary[lb];
          double t_hit = rb > 0 ? (1 - sB) / rb : sB / (-rb);
          double dt = std::min(remaining, t_hit);
          Eigen::Vector4d from = Eigen::Vector4d::Zero(), to2 = Eigen::Vector4d::Zero();
          from[la] = 1 - sB;
          from[lb] = sB;
          double s1 = sB + rb * dt;
          to2[la] = 1 - s1;
          to2[lb] = s1;
          sink(CurveSegment{tet, from, to2}, dt);
          stats.segments++;
          stats.jitter++;
          remaining -= dt;
          if (remaining <= 1e-15 * T) return;
          // Reached a vertex; restart from it in the escape-friendliest cell.
          Index vtx = rb > 0 ? vb : va;
          Index best_cell = tet;
          double best_score = -std::numeric_limits<double>::infinity();
          for (Index c : X.edge_tets(e)) {
            const auto& cvs = X.tetrahedra()[c];
            double score = std::numeric_limits<double>::infinity();
            for (int i = 0; i < 4; ++i)
              if (cvs[i] != vtx)
                score = std::min(score, M.cells[c].grad.row(i).dot(field.velocity[c]));
            if (score > best_score) {
              best_score = score;
              best_cell = c;
            }
          }
          tet = best_cell;
          bary = Eigen::Vector4d::Zero();
          for (int i = 0; i < 4; ++i)
            if (X.tetrahedra()[tet][i] == vtx) bary[i] = 1;
          entry_local = -1;
          continue;
        }
        if (live == 3) {
          // Face slide: average the in-face rates of the two cofaces.
          std::array<Index, 3> fv{};
          std::array<int, 3> fl{};
          int j2 = 0;
          for (int i = 0; i < 4; ++i)
            if (bary[i] >= 1e-9) {
              fl[j2] = i;
              fv[j2++] = vs[i];
            }
          Index f = X.triangle_index(fv[0], fv[1], fv[2]);
          auto cof = X.triangle_tets(f);
          Eigen::Vector3d frate = Eigen::Vector3d::Zero();
          int ncof = 0;
          for (Index c : {cof[0], cof[1]}) {
            if (c < 0) continue;
            ++ncof;
            const auto& cvs = X.tetrahedra()[c];
            for (int m = 0; m < 3; ++m)
              for (int i = 0; i < 4; ++i)
                if (cvs[i] == fv[m]) frate[m] += M.cells[c].grad.row(i).dot(field.velocity[c]);
          }
          frate /= std::max(1, ncof);
          // Normalize to keep the weights on the face simplex.
          frate -= Eigen::Vector3d::Constant(frate.sum() / 3.0);
          Eigen::Vector3d w(bary[fl[0]], bary[fl[1]], bary[fl[2]]);
          w /= w.sum();
          double t_hit = std::numeric_limits<double>::infinity();
          for (int m = 0; m < 3; ++m)
            if (frate[m] < -1e-14) t_hit = std::min(t_hit, w[m] / (-frate[m]));
          if (!std::isfinite(t_hit) && frate.cwiseAbs().maxCoeff() < 1e-12) {
            sink(CurveSegment{tet, bary, bary}, remaining);
            stats.stalled++;
            stats.segments++;
            return;
          }
          double dt = std::min(remaining, t_hit);
          Eigen::Vector3d w1 = (w + dt * frate).cwiseMax(0.0);
          w1 /= w1.sum();
          Eigen::Vector4d from = Eigen::Vector4d::Zero(), to2 = Eigen::Vector4d::Zero();
          for (int m = 0; m < 3; ++m) {
            from[fl[m]] = w[m];
            to2[fl[m]] = w1[m];
          }
          sink(CurveSegment{tet, from, to2}, dt);
          stats.segments++;
          stats.jitter++;
          remaining -= dt;
          if (remaining <= 1e-15 * T) return;
          bary = to2;
          entry_local = -1;
          continue;
        }
        // Vertex pin (or stranger): no consistent drift direction.
        sink(CurveSegment{tet, bary, bary}, remaining);
        stats.stalled++;
        stats.segments++;
        return;
      }
    } else {
      chatter = 0;
    }
    Eigen::Vector4d to = bary + s_exit * rate;
    to[face] = 0;
    // Near a codimension-2 face the crossing is ambiguous; nudge by the
    // documented jitter and log it.
    for (int i = 0; i < 4; ++i)
      if (i != face && to[i] < 1e-12) {
        to[i] = 1e-12;
        stats.jitter++;
      }
    to[face] = 0;
    to /= to.sum();
    sink(CurveSegment{tet, bary, to}, s_exit);
    stats.segments++;
    remaining -= s_exit;

    // Cross into the neighboring cell through the shared face.
    const auto& vs = X.tetrahedra()[tet];
    std::array<Index, 3> fverts{};
    int j = 0;
    for (int i = 0; i < 4; ++i)
      if (i != face) fverts[j++] = vs[i];
    Index f = X.triangle_index(fverts[0], fverts[1], fverts[2]);
    auto cof = X.triangle_tets(f);
    Index t2 = (cof[0] == tet) ? cof[1] : cof[0];
    if (t2 < 0) throw std::runtime_error("trajectory left through a boundary face");
    const auto& vs2 = X.tetrahedra()[t2];
    Eigen::Vector4d b2 = Eigen::Vector4d::Zero();
    for (int i = 0; i < 4; ++i) {
      if (i == face) continue;
      for (int k = 0; k < 4; ++k)
        if (vs2[k] == vs[i]) b2[k] = to[i];
    }
    double sum = b2.sum();
    if (sum <= 0) throw std::runtime_error("face transfer degenerated");
    b2 /= sum;
    entry_local = -1;
    for (int i = 0; i < 4; ++i)
      if (b2[i] == 0) entry_local = i;
    tet = t2;
    bary = b2;
  }
  if (stats.segments >= max_segments)
    throw std::runtime_error("trajectory exceeded the segment budget");
}

}  // namespace

FlowCurve integrate_trajectory(const MetricData& M, const CellField& field, Index start_tet,
                               const Eigen::Vector4d& start_bary, const TraceOptions& opts) {
  FlowCurve out;
  out.start_tet = start_tet;
  out.start_bary = start_bary;
  out.total_time = opts.time;
  WalkStats stats;
  auto sink = [&](const CurveSegment& seg, double dt) {
    out.length += dt * field.speed[seg.tet];
    if (opts.sink) {
      opts.sink(seg, dt);
    } else {
      out.segments.push_back(seg);
      out.times.push_back(dt);
    }
  };
  walk(M, field, start_tet, start_bary, opts.time, opts.max_segments, sink, stats);
  out.stalled_cells = stats.stalled;
  out.jitter_events = stats.jitter;
  return out;
}

TrajectoryStats trace_with_pairings(const MetricData& M, const CellField& field,
                                    Index start_tet, const Eigen::Vector4d& start_bary,
                                    double T, const std::vector<Vec>& cochains) {
  const SimplicialComplex& X = M.X();
  TrajectoryStats st;
  st.beta_pairings.assign(cochains.size(), 0.0);
  st.projection.degree = 1;
  st.start_tet = start_tet;
  st.start_bary = start_bary;

  bool first = true;
  Index cur_tet = start_tet;
  Eigen::Vector4d cur_bary = start_bary;
  WalkStats ws;
  auto sink = [&](const CurveSegment& seg, double dt) {
    st.length += dt * field.speed[seg.tet];
    for (size_t c = 0; c < cochains.size(); ++c)
      st.beta_pairings[c] += M.line_integral(cochains[c], seg.tet, seg.from, seg.to);
    const auto& vs = X.tetrahedra()[seg.tet];
    int la = dominant_local_vertex(vs, seg.from);
    int lb = dominant_local_vertex(vs, seg.to);
    if (first) {
      st.snap_start = vs[la];
      Eigen::Vector3d p = M.position(seg.tet, seg.from);
      Eigen::Vector3d q = M.cells[seg.tet].chart[la];
      st.snap_chord_length +=
          std::sqrt(std::max(0.0, (p - q).dot(M.cells[seg.tet].G * (p - q))));
      first = false;
    }
    if (la != lb) {
      Index e = X.edge_index(vs[la], vs[lb]);
      st.projection.add(e, vs[la] < vs[lb] ? 1 : -1);
    }
    {
      const auto& cell = M.cells[seg.tet];
      Eigen::Vector3d a = M.position(seg.tet, seg.from);
      Eigen::Vector3d b = M.position(seg.tet, seg.to);
      Eigen::Vector3d xa = cell.chart[la], xb = cell.chart[lb];
      auto tri_area = [&](const Eigen::Vector3d& p, const Eigen::Vector3d& q,
                          const Eigen::Vector3d& r) {
        Eigen::Vector3d u = q - p, w = r - p;
        double g11 = u.dot(cell.G * u), g22 = w.dot(cell.G * w), g12 = u.dot(cell.G * w);
        return 0.5 * std::sqrt(std::max(0.0, g11 * g22 - g12 * g12));
      };
      st.projection_cone_area += tri_area(a, b, xb) + tri_area(a, xb, xa);
    }
    cur_tet = seg.tet;
    cur_bary = seg.to;
  };
  walk(M, field, start_tet, start_bary, T, 50'000'000, sink, ws);
  st.stalled = ws.stalled;
  st.jitter = ws.jitter;
  st.end_tet = cur_tet;
  st.end_bary = cur_bary;
  {
    const auto& vs = X.tetrahedra()[cur_tet];
    int lb = dominant_local_vertex(vs, cur_bary);
    st.snap_end = vs[lb];
    Eigen::Vector3d p = M.position(cur_tet, cur_bary);
    Eigen::Vector3d q = M.cells[cur_tet].chart[lb];
    st.snap_chord_length +=
        std::sqrt(std::max(0.0, (p - q).dot(M.cells[cur_tet].G * (p - q))));
  }
  return st;
}

// --- closing and unrolling ---------------------------------------------

namespace {

/// Dijkstra tree from one vertex, reused across connectors.
struct PathFinder {
  const MetricData& M;
  std::map<Index, std::pair<std::vector<double>, std::vector<Index>>> cache;

  explicit PathFinder(const MetricData& m) : M(m) {}

  const std::pair<std::vector<double>, std::vector<Index>>& tree(Index source) {
    auto it = cache.find(source);
    if (it != cache.end()) return it->second;
    const SimplicialComplex& X = M.X();
    std::vector<double> dist(X.simplex_count(0), std::numeric_limits<double>::infinity());
    std::vector<Index> parent(X.simplex_count(0), -1);
    using Item = std::pair<double, Index>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[source] = 0;
    heap.push({0, source});
    while (!heap.empty()) {
      auto [d, v] = heap.top();
      heap.pop();
      if (d > dist[v] + 1e-15) continue;
      for (Index e : X.vertex_edges(v)) {
        Index w = X.edges()[e][0] == v ? X.edges()[e][1] : X.edges()[e][0];
        double nd = d + M.edge_length[e];
        if (nd < dist[w] - 1e-15) {
          dist[w] = nd;
          parent[w] = e;
          heap.push({nd, w});
        }
      }
    }
    return cache.emplace(source, std::make_pair(std::move(dist), std::move(parent))).first->second;
  }

  /// Edge chain and length of the shortest path from -> to.
  std::pair<Chain, double> path(Index from, Index to) {
    const auto& [dist, parent] = tree(from);
    Chain c{1, {}};
    double len = dist[to];
    Index v = to;
    while (v != from) {
      Index e = parent[v];
      if (e < 0) throw std::runtime_error("skeleton is disconnected");
      Index prev = M.X().edges()[e][0] == v ? M.X().edges()[e][1] : M.X().edges()[e][0];
      c.add(e, prev < v ? 1 : -1);
      v = prev;
    }
    return {c, len};
  }
};

}  // namespace

ClosedConstruction close_and_unroll(const MetricData& M, const HomologyBasis& H,
                                    const std::vector<TrajectoryStats>& trajectories,
                                    double T, double rounding_limit,
                                    const std::vector<Vec>& passengers) {
  if (trajectories.empty()) throw std::runtime_error("close_and_unroll needs n >= 1");
  const size_t n = trajectories.size();
  const size_t k = H.dual_cocycles.size();
  const size_t np = passengers.size();
  for (const auto& tr : trajectories)
    if (tr.beta_pairings.size() < k + np)
      throw std::runtime_error("close_and_unroll: trajectories lack the required pairings");
  std::vector<Vec> duals;
  for (auto& d : H.dual_cocycles) duals.push_back(dual_as_vec(M, d));
  for (const auto& p : passengers) duals.push_back(p);

  ClosedConstruction out;
  out.n = (long)n;
  out.T = T;

  auto vertex_bary = [&](Index tet, Index vertex) {
    const auto& vs = M.X().tetrahedra()[tet];
    Eigen::Vector4d b = Eigen::Vector4d::Zero();
    for (int i = 0; i < 4; ++i)
      if (vs[i] == vertex) b[i] = 1;
    return b;
  };

  // gamma part: the raw trajectories (passenger columns ride along).
  std::vector<double> pairing(k + np, 0.0);
  for (const auto& tr : trajectories) {
    out.gamma_length += tr.length;
    out.projection_cone_area += tr.projection_cone_area;
    for (size_t j = 0; j < k + np; ++j) pairing[j] += tr.beta_pairings[j];
  }
  out.gamma_pairings.assign(pairing.begin(), pairing.begin() + k);

  // nu part: snap chords at both trajectory ends plus shortest edge paths
  // exit(i) -> start(i+1 cyclic). Chord pairings are exact Whitney line
  // integrals inside the end cells, path pairings exact integers.
  PathFinder pf(M);
  Chain skeleton{1, {}};
  for (const auto& tr : trajectories) skeleton += tr.projection;
  for (size_t i = 0; i < n; ++i) {
    const auto& cur = trajectories[i];
    const auto& nxt = trajectories[(i + 1) % n];
    out.nu_length += cur.snap_chord_length;
    for (size_t j = 0; j < k + np; ++j) {
      // end point -> its snap vertex, then (after the edge path) the snap
      // vertex of the next start -> the next start point.
      pairing[j] += M.line_integral(duals[j], cur.end_tet, cur.end_bary,
                                    vertex_bary(cur.end_tet, cur.snap_end));
      pairing[j] += M.line_integral(duals[j], nxt.start_tet,
                                    vertex_bary(nxt.start_tet, nxt.snap_start), nxt.start_bary);
    }
    auto [chain, len] = pf.path(cur.snap_end, nxt.snap_start);
    out.connector_length += len;
    out.nu_length += len;
    for (size_t j = 0; j < k; ++j) pairing[j] += (double)pair_chains(H.dual_cocycles[j], chain);
    for (size_t j = 0; j < np; ++j)
      for (auto& [e, c] : chain.coeffs) pairing[k + j] += duals[k + j][e] * (double)c;
    skeleton += chain;
  }

  // c_j and the unrolled cycle.
  out.unroll_coeffs.resize(k);
  for (size_t j = 0; j < k; ++j) {
    double c = pairing[j];
    Coeff cj = (Coeff)std::llround(c);
    out.unroll_coeffs[j] = cj;
    out.rounding_residual = std::max(out.rounding_residual, std::abs(c - (double)cj));
  }
  if (out.rounding_residual >= rounding_limit)
    throw std::runtime_error(
        "dual cocycle integration inaccurate, refine mesh or quadrature (residual " +
        std::to_string(out.rounding_residual) + ")");
  out.homology_residual = out.rounding_residual;

  // Passengers integrate over the unrolling loops too.
  out.passenger_pairings.assign(pairing.begin() + k, pairing.end());
  for (size_t j = 0; j < k; ++j) {
    if (out.unroll_coeffs[j] == 0) continue;
    for (size_t p = 0; p < np; ++p) {
      double loop_pairing = 0;
      for (auto& [e, c] : H.cycles[j].coeffs) loop_pairing += duals[k + p][e] * (double)c;
      out.passenger_pairings[p] -= (double)out.unroll_coeffs[j] * loop_pairing;
    }
    skeleton += H.cycles[j].scaled(-out.unroll_coeffs[j]);
    double lj = chain_length(M, H.cycles[j]);
    out.nu_length += std::abs((double)out.unroll_coeffs[j]) * lj;
    // Connection paths to the loop (out and back): pure length accounting,
    // the chain contributions cancel.
    Index base = trajectories[0].snap_start;
    Index anchor = H.cycles[j].coeffs.empty()
                       ? base
                       : M.X().edges()[H.cycles[j].coeffs.begin()->first][0];
    out.nu_length += 2 * pf.path(base, anchor).second;
  }

  if (!M.X().boundary(skeleton).empty())
    throw std::runtime_error("unrolled skeleton cycle failed to close");
  out.skeleton_cycle = std::move(skeleton);
  out.skeleton_length = chain_length(M, out.skeleton_cycle);
  return out;
}

// --- star cochain and primitive ---------------------------------------

Vec star_one_form_cochain(const MetricData& M, const Vec& alpha) {
  const SimplicialComplex& X = M.X();
  const Index nt = X.simplex_count(3);
  Vec b = Vec::Zero(X.simplex_count(2));
  static const std::array<std::array<int, 3>, 4> lf = {
      {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}}};
  for (Index t = 0; t < nt; ++t) {
    const auto& cell = M.cells[t];
    const auto& vs = X.tetrahedra()[t];
    const double det = cell.G.determinant();
    std::array<Eigen::Vector3d, 4> g;
    for (int i = 0; i < 4; ++i) g[i] = cell.grad.row(i).transpose();
    for (const auto& q : kTetQuadPoints) {
      FormValue a = M.whitney(1, alpha, t, q);
      Eigen::Vector3d star_a = cell.sqrt_det_g * (cell.Ginv * a.v);
      Eigen::Vector3d g_star = cell.G * star_a;
      for (const auto& f : lf) {
        auto [i, j, k] = std::tuple{f[0], f[1], f[2]};
        Eigen::Vector3d phi =
            2 * (q[i] * g[j].cross(g[k]) - q[j] * g[i].cross(g[k]) + q[k] * g[i].cross(g[j]));
        double ip = phi.dot(g_star) / det;
        b[X.triangle_index(vs[i], vs[j], vs[k])] += kTetQuadWeight * cell.volume * ip;
      }
    }
  }
  Eigen::SimplicialLLT<SpMat> m2llt(M.mass[2]);
  if (m2llt.info() != Eigen::Success) throw std::runtime_error("M2 factorization failed");
  return m2llt.solve(b);
}

std::pair<Vec, double> coexact_primitive(const MetricData& M, const Vec& alpha) {
  // The target cochain generally has a component outside im(D1) (pure
  // discretization), so solve the least-squares problem through the
  // up-stiffness normal equations, which are always consistent:
  //   (D1^T M2 D1) beta = D1^T M2 s.
  Vec s = star_one_form_cochain(M, alpha);
  const SpMat& D1 = M.d1();
  const SpMat& M2 = M.mass[2];
  Vec b = D1.transpose() * (M2 * s);
  auto apply = [&](const Vec& v) -> Vec { return D1.transpose() * (M2 * (D1 * v)); };

  Vec beta = Vec::Zero(b.size());
  Vec r = b, p = r;
  double rr = r.squaredNorm();
  const double bb = std::max(b.squaredNorm(), 1e-300);
  Vec best = beta;
  double best_rr = rr;
  int stale = 0;
  for (int it = 0; it < 8 * (int)b.size() + 200 && rr > 1e-24 * bb; ++it) {
    Vec Ap = apply(p);
    double pap = p.dot(Ap);
    if (!(pap > 0)) break;
    double a = rr / pap;
    beta += a * p;
    r -= a * Ap;
    double rr2 = r.squaredNorm();
    if (rr2 < best_rr) {
      best_rr = rr2;
      best = beta;
      stale = 0;
    } else if (++stale > 300 || rr2 > 1e8 * best_rr) {
      break;
    }
    p = r + (rr2 / rr) * p;
    rr = rr2;
  }
  beta = best;

  // Minimum-M1-norm representative: drop the exact kernel component (the
  // harmonic one is already absent since CG stays in the image of the
  // symmetric operator only up to rounding; remove what the potential
  // solve sees).
  Vec rhs0 = M.d0().transpose() * (M.mass[1] * beta);
  rhs0[0] = 0;
  beta -= M.d0() * M.llt_l0().solve(rhs0);

  Vec resid = D1 * beta - s;
  double rel = std::sqrt(resid.dot(M2 * resid) / std::max(s.dot(M2 * s), 1e-300));
  return {beta, rel};
}

// --- Monte Carlo --------------------------------------------------------

namespace {

struct McTargets {
  double length_target = 0;   // the flow L1 norm of d alpha
  double pairing_target = 0;  // flow average of i_X beta
  double alpha_l2sq = 0;      // quadrature L2^2 of alpha
  double dec_l1 = 0;          // Whitney quadrature L1 of d alpha
};

/// Shared driver: volume-weighted starts, independent per-trajectory random
/// streams (thread-count invariant), closing/unrolling and the report.
/// The tracer returns stats whose pairings hold the k dual integrals
/// followed by the primitive integral.
MonteCarloReport mc_run(const MetricData& M, const HomologyBasis& H,
                        const MonteCarloConfig& config, const McTargets& targets,
                        const std::function<TrajectoryStats(Index, const Eigen::Vector4d&)>& trace,
                        const std::vector<Vec>& passengers) {
  if (config.n < 1) throw std::runtime_error("monte carlo needs n >= 1");
  const Index nt = M.X().simplex_count(3);

  std::vector<double> cumvol(nt);
  double acc = 0;
  for (Index t = 0; t < nt; ++t) {
    acc += M.cells[t].volume;
    cumvol[t] = acc;
  }

  std::vector<TrajectoryStats> stats(config.n);
  auto run_range = [&](long lo, long hi) {
    for (long i = lo; i < hi; ++i) {
      Rng rng(config.seed * 0x9e3779b97f4a7c15ull + (unsigned long long)i * 2654435761ull + 1);
      double u = rng.uniform() * acc;
      Index tet = (Index)(std::lower_bound(cumvol.begin(), cumvol.end(), u) - cumvol.begin());
      if (tet >= nt) tet = nt - 1;
      Eigen::Vector4d bary;
      double sum = 0;
      for (int c = 0; c < 4; ++c) {
        bary[c] = -std::log(std::max(rng.uniform(), 1e-300));
        sum += bary[c];
      }
      bary /= sum;
      stats[i] = trace(tet, bary);
    }
  };
  int threads = std::max(1, config.threads);
  if (threads == 1) {
    run_range(0, config.n);
  } else {
    std::vector<std::thread> pool;
    long chunk = (config.n + threads - 1) / threads;
    for (int th = 0; th < threads; ++th) {
      long lo = th * chunk, hi = std::min<long>(config.n, lo + chunk);
      if (lo < hi) pool.emplace_back(run_range, lo, hi);
    }
    for (auto& t : pool) t.join();
  }

  // The last pairing column is the primitive integral over gamma.
  double primitive_sum = 0;
  for (auto& st : stats) primitive_sum += st.beta_pairings.back();

  auto construction =
      close_and_unroll(M, H, stats, config.T, config.rounding_limit, passengers);
  construction.primitive_pairing = primitive_sum / ((double)config.n * config.T);

  MonteCarloReport rep;
  rep.n = config.n;
  rep.T = config.T;
  rep.seed = config.seed;
  double nT = (double)config.n * config.T;
  rep.length_rate = construction.gamma_length / nT;
  rep.length_target = targets.length_target;
  rep.dec_length_target = targets.dec_l1;
  rep.nu_fraction = construction.nu_length / nT;
  rep.homology_residual = construction.homology_residual;
  rep.pairing_rate = construction.primitive_pairing;
  rep.pairing_target = targets.pairing_target;
  rep.alpha_l2sq = targets.alpha_l2sq;

  // Batch-means standard errors over 32 sequential batches.
  auto batch_stderr = [&](auto&& value_of) {
    const int B = (int)std::min<long>(32, config.n);
    std::vector<double> means(B, 0.0);
    std::vector<long> counts(B, 0);
    for (long i = 0; i < config.n; ++i) {
      int b = (int)(i * B / config.n);
      means[b] += value_of(stats[i]);
      counts[b]++;
    }
    double grand = 0;
    for (int b = 0; b < B; ++b) {
      means[b] /= std::max(1L, counts[b]);
      grand += means[b] / B;
    }
    double var = 0;
    for (int b = 0; b < B; ++b) var += (means[b] - grand) * (means[b] - grand) / std::max(1, B - 1);
    return std::sqrt(var / B);
  };
  rep.stderr_length = batch_stderr([&](const TrajectoryStats& s) { return s.length / config.T; });
  rep.stderr_pairing =
      batch_stderr([&](const TrajectoryStats& s) { return s.beta_pairings.back() / config.T; });
  rep.construction = std::move(construction);
  return rep;
}

}  // namespace

MonteCarloReport run_monte_carlo(const MetricData& M, const HomologyBasis& H,
                                 const Vec& alpha, const MonteCarloConfig& config) {
  const Index nt = M.X().simplex_count(3);
  auto fr = build_vector_field(M, alpha);
  CellField field = std::move(fr.field);
  auto [beta, beta_res] = coexact_primitive(M, alpha);
  if (beta_res > config.primitive_residual_limit)
    throw std::runtime_error("primitive solve residual too large: " + std::to_string(beta_res));

  McTargets targets;
  targets.length_target = field.flux_l1;
  // Flow average of i_X(W beta): exact per cell for the affine integrand.
  for (Index t = 0; t < nt; ++t) {
    FormValue wb = M.whitney(1, beta, t, Eigen::Vector4d::Constant(0.25));
    targets.pairing_target += M.cells[t].volume * wb.v.dot(field.velocity[t]);
  }
  targets.alpha_l2sq = alpha.dot(M.mass[1] * alpha);
  targets.dec_l1 = norms(M, Vec(M.d1() * alpha), 2).L1;

  std::vector<Vec> cochains;
  for (auto& d : H.dual_cocycles) cochains.push_back(dual_as_vec(M, d));
  cochains.push_back(beta);

  return mc_run(
      M, H, config, targets,
      [&](Index tet, const Eigen::Vector4d& bary) {
        return trace_with_pairings(M, field, tet, bary, config.T, cochains);
      },
      {cochains.back()});
}

MonteCarloReport run_monte_carlo_torus_analytic(const MetricData& M, const HomologyBasis& H,
                                                const MonteCarloConfig& config) {
  // alpha = sqrt(2) cos(2 pi z) dx, the L2-normalized first coexact
  // eigenform of the unit flat torus; X = -2 pi sqrt(2) sin(2 pi z) e_y and
  // beta = -(sqrt(2)/2pi) sin(2 pi z) dy, so lengths and primitive
  // integrals along trajectories are exact in closed form.
  const double A = std::sqrt(2.0);
  const Index nt = M.X().simplex_count(3);

  McTargets targets;
  targets.length_target = 4 * A;  // integral of |2 pi A sin|
  targets.pairing_target = A * A / 2;
  // Quadrature values over the actual mesh for the analytic integrands.
  for (Index t = 0; t < nt; ++t) {
    for (const auto& q : kTetQuadPoints) {
      double z = M.position(t, q).z();
      targets.alpha_l2sq +=
          kTetQuadWeight * M.cells[t].volume * A * A * std::cos(2 * M_PI * z) * std::cos(2 * M_PI * z);
      targets.dec_l1 +=
          kTetQuadWeight * M.cells[t].volume * 2 * M_PI * A * std::abs(std::sin(2 * M_PI * z));
    }
  }

  std::vector<Vec> duals;
  for (auto& d : H.dual_cocycles) duals.push_back(dual_as_vec(M, d));

  return mc_run(
      M, H, config, targets,
      [&](Index tet, const Eigen::Vector4d& bary) {
        double z0 = M.position(tet, bary).z();
        double speed = 2 * M_PI * A * std::sin(2 * M_PI * z0);
        CellField f = constant_field(M, Eigen::Vector3d(0, -speed, 0));
        auto st = trace_with_pairings(M, f, tet, bary, config.T, duals);
        st.beta_pairings.push_back(A * A * std::sin(2 * M_PI * z0) * std::sin(2 * M_PI * z0) *
                                   config.T);
        return st;
      },
      {});
}

std::string MonteCarloReport::to_json() const {
  nlohmann::json j;
  j["estimates"] = {{"dalpha_l1_via_length", length_rate},
                    {"alpha_l2sq_via_beta", pairing_rate},
                    {"nu_fraction", nu_fraction},
                    {"homology_residual", homology_residual}};
  j["targets"] = {{"dalpha_l1", length_target},
                  {"alpha_l2sq", alpha_l2sq},
                  {"nu_fraction", 0.0},
                  {"homology_residual", 0.0}};
  j["errors"] = {{"dalpha_l1", std::abs(length_rate - length_target)},
                 {"alpha_l2sq", std::abs(pairing_rate - alpha_l2sq)},
                 {"nu_fraction", nu_fraction},
                 {"homology_residual", homology_residual}};
  j["diagnostics"] = {{"dec_l1_norm", dec_length_target},
                      {"flow_pairing_target", pairing_target},
                      {"stderr_length", stderr_length},
                      {"stderr_pairing", stderr_pairing},
                      {"gamma_length", construction.gamma_length},
                      {"nu_length", construction.nu_length},
                      {"skeleton_length", construction.skeleton_length},
                      {"rounding_residual", construction.rounding_residual}};
  j["n"] = n;
  j["T"] = T;
  j["seed"] = seed;
  std::vector<long long> cj(construction.unroll_coeffs.begin(), construction.unroll_coeffs.end());
  j["unroll_coeffs"] = cj;
  return j.dump(2);
}

}  // namespace coex
