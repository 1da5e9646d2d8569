#include "coex/mesh.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace coex {

int sort_sign(std::vector<Index>& v) {
  int sign = 1;
  for (size_t i = 0; i + 1 < v.size(); ++i)
    for (size_t j = 0; j + 1 < v.size() - i; ++j)
      if (v[j] > v[j + 1]) {
        std::swap(v[j], v[j + 1]);
        sign = -sign;
      }
  for (size_t i = 0; i + 1 < v.size(); ++i)
    if (v[i] == v[i + 1]) return 0;
  return sign;
}

namespace {

template <size_t N>
std::array<Index, N - 1> drop(const std::array<Index, N>& s, size_t k) {
  std::array<Index, N - 1> r{};
  size_t j = 0;
  for (size_t i = 0; i < N; ++i)
    if (i != k) r[j++] = s[i];
  return r;
}

}  // namespace

SimplicialComplex SimplicialComplex::from_tetrahedra(
    Index vertex_count, const std::vector<std::array<Index, 4>>& tets,
    const BuildOptions& opts) {
  SimplicialComplex X;
  X.n_vertices_ = vertex_count;
  X.top_dim_ = 3;
  std::set<std::array<Index, 4>> seen;
  for (auto& t : tets) {
    std::vector<Index> v(t.begin(), t.end());
    for (Index i : v)
      if (i < 0 || i >= vertex_count)
        throw std::runtime_error("tetrahedron references unknown vertex " + std::to_string(i));
    int sign = sort_sign(v);
    if (sign == 0) throw std::runtime_error("tetrahedron with repeated vertex");
    std::array<Index, 4> key{v[0], v[1], v[2], v[3]};
    if (!seen.insert(key).second) throw std::runtime_error("duplicate tetrahedron");
    X.tets_.push_back(key);
    X.top_orientation_.push_back(sign);
  }
  std::sort(X.tets_.begin(), X.tets_.end());
  // Re-derive orientations after sorting: recompute per original entry.
  {
    std::map<std::array<Index, 4>, int> orient;
    for (auto& t : tets) {
      std::vector<Index> v(t.begin(), t.end());
      int sign = sort_sign(v);
      orient[{v[0], v[1], v[2], v[3]}] = sign;
    }
    X.top_orientation_.clear();
    for (auto& t : X.tets_) X.top_orientation_.push_back(orient.at(t));
  }
  X.finalize(opts);
  return X;
}

SimplicialComplex SimplicialComplex::from_triangles(
    Index vertex_count, const std::vector<std::array<Index, 3>>& tris,
    const BuildOptions& opts) {
  SimplicialComplex X;
  X.n_vertices_ = vertex_count;
  X.top_dim_ = 2;
  std::set<std::array<Index, 3>> seen;
  for (auto& t : tris) {
    std::vector<Index> v(t.begin(), t.end());
    for (Index i : v)
      if (i < 0 || i >= vertex_count)
        throw std::runtime_error("triangle references unknown vertex " + std::to_string(i));
    int sign = sort_sign(v);
    if (sign == 0) throw std::runtime_error("triangle with repeated vertex");
    std::array<Index, 3> key{v[0], v[1], v[2]};
    if (!seen.insert(key).second) throw std::runtime_error("duplicate triangle");
    X.triangles_.push_back(key);
    X.top_orientation_.push_back(sign);
  }
  std::sort(X.triangles_.begin(), X.triangles_.end());
  {
    std::map<std::array<Index, 3>, int> orient;
    for (auto& t : tris) {
      std::vector<Index> v(t.begin(), t.end());
      orient[{v[0], v[1], v[2]}] = sort_sign(v);
    }
    X.top_orientation_.clear();
    for (auto& t : X.triangles_) X.top_orientation_.push_back(orient.at(t));
  }
  X.finalize(opts);
  return X;
}

void SimplicialComplex::finalize(const BuildOptions& opts) {
  // Enumerate all faces of the top simplices.
  if (top_dim_ == 3) {
    std::set<std::array<Index, 3>> tris;
    for (auto& t : tets_)
      for (size_t k = 0; k < 4; ++k) tris.insert(drop(t, k));
    triangles_.assign(tris.begin(), tris.end());
  }
  {
    std::set<std::array<Index, 2>> es;
    for (auto& f : triangles_)
      for (size_t k = 0; k < 3; ++k) es.insert(drop(f, k));
    edges_.assign(es.begin(), es.end());
  }

  for (Index i = 0; i < (Index)edges_.size(); ++i) edge_lookup_[edges_[i]] = i;
  for (Index i = 0; i < (Index)triangles_.size(); ++i) tri_lookup_[triangles_[i]] = i;
  for (Index i = 0; i < (Index)tets_.size(); ++i) tet_lookup_[tets_[i]] = i;

  vertex_edges_.assign(n_vertices_, {});
  for (Index e = 0; e < (Index)edges_.size(); ++e) {
    vertex_edges_[edges_[e][0]].push_back(e);
    vertex_edges_[edges_[e][1]].push_back(e);
  }
  edge_cofaces_.assign(edges_.size(), {});
  for (Index f = 0; f < (Index)triangles_.size(); ++f)
    for (size_t k = 0; k < 3; ++k) {
      Index e = edge_lookup_.at(drop(triangles_[f], k));
      int sign = (k % 2 == 0) ? 1 : -1;
      edge_cofaces_[e].push_back({f, sign});
    }
  tri_cofaces_.assign(triangles_.size(), {});
  for (Index t = 0; t < (Index)tets_.size(); ++t)
    for (size_t k = 0; k < 4; ++k) {
      Index f = tri_lookup_.at(drop(tets_[t], k));
      int sign = (k % 2 == 0) ? 1 : -1;
      tri_cofaces_[f].push_back({t, sign});
    }
  edge_tets_.assign(edges_.size(), {});
  for (Index t = 0; t < (Index)tets_.size(); ++t) {
    auto& s = tets_[t];
    for (size_t i = 0; i < 4; ++i)
      for (size_t j = i + 1; j < 4; ++j)
        edge_tets_[edge_lookup_.at({s[i], s[j]})].push_back(t);
  }

  // Pseudomanifold / closedness checks on the top skeleton.
  const auto& facet_cofaces = (top_dim_ == 3) ? tri_cofaces_ : edge_cofaces_;
  size_t max_cof = 0, min_cof = SIZE_MAX;
  for (auto& cf : facet_cofaces) {
    max_cof = std::max(max_cof, cf.size());
    min_cof = std::min(min_cof, cf.size());
  }
  manifold_like_ = (max_cof <= 2);
  if (!manifold_like_ && !opts.allow_non_manifold)
    throw std::runtime_error("not a manifold: a facet has more than two cofaces");
  closed_ = manifold_like_ && (min_cof == 2) && !facet_cofaces.empty();

  // Orientability: propagate coherent orientations across shared facets.
  // A facet shared by two top simplices must be induced with opposite
  // signs, so with incidence signs s1, s2 (w.r.t. sorted order) a coherent
  // assignment o satisfies o1*s1 = -o2*s2. The seed of each connected
  // component keeps its user-supplied sign.
  orientable_ = manifold_like_;
  if (manifold_like_) {
    size_t n_top = (top_dim_ == 3) ? tets_.size() : triangles_.size();
    std::vector<int> coherent(n_top, 0);
    auto neighbors_of = [&](Index tt) {
      std::vector<std::pair<Index, int>> out;  // (neighbor, s_this * s_other)
      if (top_dim_ == 3) {
        for (size_t k = 0; k < 4; ++k) {
          Index f = tri_lookup_.at(drop(tets_[tt], k));
          int s1 = (k % 2 == 0) ? 1 : -1;
          for (auto& [t2, s2] : tri_cofaces_[f])
            if (t2 != tt) out.push_back({t2, s1 * s2});
        }
      } else {
        for (size_t k = 0; k < 3; ++k) {
          Index e = edge_lookup_.at(drop(triangles_[tt], k));
          int s1 = (k % 2 == 0) ? 1 : -1;
          for (auto& [t2, s2] : edge_cofaces_[e])
            if (t2 != tt) out.push_back({t2, s1 * s2});
        }
      }
      return out;
    };
    for (size_t seed = 0; seed < n_top && orientable_; ++seed) {
      if (coherent[seed] != 0) continue;
      coherent[seed] = top_orientation_[seed];
      std::deque<Index> queue{(Index)seed};
      while (!queue.empty() && orientable_) {
        Index t = queue.front();
        queue.pop_front();
        for (auto& [t2, sprod] : neighbors_of(t)) {
          int needed = -coherent[t] * sprod;
          if (coherent[t2] == 0) {
            coherent[t2] = needed;
            queue.push_back(t2);
          } else if (coherent[t2] != needed) {
            orientable_ = false;
            break;
          }
        }
      }
    }
    if (orientable_) top_orientation_ = coherent;
  }
  if (closed_ && !orientable_ && !opts.allow_non_orientable)
    throw std::runtime_error("closed complex is non-orientable");
}

Index SimplicialComplex::simplex_count(int k) const {
  switch (k) {
    case 0: return n_vertices_;
    case 1: return (Index)edges_.size();
    case 2: return (Index)triangles_.size();
    case 3: return (Index)tets_.size();
    default: return 0;
  }
}

Index SimplicialComplex::edge_index(Index a, Index b) const {
  if (a > b) std::swap(a, b);
  auto it = edge_lookup_.find({a, b});
  return it == edge_lookup_.end() ? -1 : it->second;
}

Index SimplicialComplex::triangle_index(Index a, Index b, Index c) const {
  std::vector<Index> v{a, b, c};
  if (sort_sign(v) == 0) return -1;
  auto it = tri_lookup_.find({v[0], v[1], v[2]});
  return it == tri_lookup_.end() ? -1 : it->second;
}

Index SimplicialComplex::tet_index(Index a, Index b, Index c, Index d) const {
  std::vector<Index> v{a, b, c, d};
  if (sort_sign(v) == 0) return -1;
  auto it = tet_lookup_.find({v[0], v[1], v[2], v[3]});
  return it == tet_lookup_.end() ? -1 : it->second;
}

std::array<Index, 2> SimplicialComplex::triangle_tets(Index f) const {
  std::array<Index, 2> r{-1, -1};
  size_t j = 0;
  for (auto& [t, s] : tri_cofaces_[f])
    if (j < 2) r[j++] = t;
  return r;
}

std::vector<std::array<Coeff, 3>> SimplicialComplex::boundary_triplets(int k) const {
  if (k < 1 || k > 3) throw std::runtime_error("boundary degree out of range");
  std::vector<std::array<Coeff, 3>> out;
  if (k == 1) {
    for (Index e = 0; e < (Index)edges_.size(); ++e) {
      out.push_back({edges_[e][1], e, 1});
      out.push_back({edges_[e][0], e, -1});
    }
  } else if (k == 2) {
    for (Index f = 0; f < (Index)triangles_.size(); ++f)
      for (size_t j = 0; j < 3; ++j)
        out.push_back({edge_lookup_.at(drop(triangles_[f], j)), f, (j % 2 == 0) ? 1 : -1});
  } else {
    for (Index t = 0; t < (Index)tets_.size(); ++t)
      for (size_t j = 0; j < 4; ++j)
        out.push_back({tri_lookup_.at(drop(tets_[t], j)), t, (j % 2 == 0) ? 1 : -1});
  }
  return out;
}

Eigen::SparseMatrix<double> SimplicialComplex::boundary_matrix(int k) const {
  Eigen::SparseMatrix<double> B(simplex_count(k - 1), simplex_count(k));
  std::vector<Eigen::Triplet<double>> trips;
  for (auto& t : boundary_triplets(k))
    trips.push_back({(int)t[0], (int)t[1], (double)t[2]});
  B.setFromTriplets(trips.begin(), trips.end());
  return B;
}

Chain SimplicialComplex::boundary(const Chain& c) const {
  Chain r{c.degree - 1, {}};
  if (c.degree < 1 || c.degree > 3) throw std::runtime_error("chain degree out of range");
  for (auto& [i, v] : c.coeffs) {
    if (c.degree == 1) {
      r.add(edges_[i][1], v);
      r.add(edges_[i][0], -v);
    } else if (c.degree == 2) {
      for (size_t j = 0; j < 3; ++j)
        r.add(edge_lookup_.at(drop(triangles_[i], j)), ((j % 2 == 0) ? 1 : -1) * v);
    } else {
      for (size_t j = 0; j < 4; ++j)
        r.add(tri_lookup_.at(drop(tets_[i], j)), ((j % 2 == 0) ? 1 : -1) * v);
    }
  }
  return r;
}

long SimplicialComplex::euler_characteristic() const {
  return (long)n_vertices_ - (long)edges_.size() + (long)triangles_.size() -
         (long)tets_.size();
}

// --- serialization ---------------------------------------------------------

std::string SimplicialComplex::to_json(
    const std::vector<std::array<double, 3>>& vertices) const {
  nlohmann::json j;
  j["vertices"] = vertices;
  if (top_dim_ == 3) {
    auto& cells = j["tets"] = nlohmann::json::array();
    for (Index t = 0; t < (Index)tets_.size(); ++t) {
      auto s = tets_[t];
      if (top_orientation_[t] < 0) std::swap(s[2], s[3]);
      cells.push_back(s);
    }
  } else {
    auto& cells = j["triangles"] = nlohmann::json::array();
    for (Index t = 0; t < (Index)triangles_.size(); ++t) {
      auto s = triangles_[t];
      if (top_orientation_[t] < 0) std::swap(s[1], s[2]);
      cells.push_back(s);
    }
  }
  return j.dump(2);
}

std::pair<SimplicialComplex, std::vector<std::array<double, 3>>>
SimplicialComplex::from_json(const std::string& text, const BuildOptions& opts) {
  auto j = nlohmann::json::parse(text);
  std::vector<std::array<double, 3>> vertices = j.at("vertices");
  if (j.contains("tets")) {
    std::vector<std::array<Index, 4>> tets = j.at("tets");
    return {from_tetrahedra((Index)vertices.size(), tets, opts), vertices};
  }
  std::vector<std::array<Index, 3>> tris = j.at("triangles");
  return {from_triangles((Index)vertices.size(), tris, opts), vertices};
}

std::string SimplicialComplex::to_off(
    const std::vector<std::array<double, 3>>& vertices) const {
  std::ostringstream os;
  size_t n_cells = (top_dim_ == 3) ? tets_.size() : triangles_.size();
  os << "OFF\n" << vertices.size() << " " << n_cells << " 0\n";
  char buf[96];
  for (auto& v : vertices) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", v[0], v[1], v[2]);
    os << buf;
  }
  if (top_dim_ == 3) {
    for (Index t = 0; t < (Index)tets_.size(); ++t) {
      auto s = tets_[t];
      if (top_orientation_[t] < 0) std::swap(s[2], s[3]);
      os << "4 " << s[0] << " " << s[1] << " " << s[2] << " " << s[3] << "\n";
    }
  } else {
    for (Index t = 0; t < (Index)triangles_.size(); ++t) {
      auto s = triangles_[t];
      if (top_orientation_[t] < 0) std::swap(s[1], s[2]);
      os << "3 " << s[0] << " " << s[1] << " " << s[2] << "\n";
    }
  }
  return os.str();
}

std::pair<SimplicialComplex, std::vector<std::array<double, 3>>>
SimplicialComplex::from_off(const std::string& text, const BuildOptions& opts) {
  std::istringstream is(text);
  std::string header;
  is >> header;
  if (header != "OFF") throw std::runtime_error("not an OFF file");
  size_t nv = 0, nc = 0, ne = 0;
  is >> nv >> nc >> ne;
  std::vector<std::array<double, 3>> vertices(nv);
  for (auto& v : vertices) is >> v[0] >> v[1] >> v[2];
  std::vector<std::array<Index, 4>> tets;
  std::vector<std::array<Index, 3>> tris;
  for (size_t c = 0; c < nc; ++c) {
    int k = 0;
    is >> k;
    if (k == 4) {
      std::array<Index, 4> s{};
      is >> s[0] >> s[1] >> s[2] >> s[3];
      tets.push_back(s);
    } else if (k == 3) {
      std::array<Index, 3> s{};
      is >> s[0] >> s[1] >> s[2];
      tris.push_back(s);
    } else {
      throw std::runtime_error("OFF cell with unsupported vertex count");
    }
  }
  if (!is) throw std::runtime_error("truncated OFF file");
  if (!tets.empty()) {
    if (!tris.empty()) throw std::runtime_error("mixed-dimension OFF input");
    return {from_tetrahedra((Index)nv, tets, opts), vertices};
  }
  return {from_triangles((Index)nv, tris, opts), vertices};
}

}  // namespace coex
