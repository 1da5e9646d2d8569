#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Sparse>

namespace coex {

using Index = std::int32_t;
using Coeff = std::int64_t;

/// Sparse integer chain of fixed degree: simplex index -> coefficient.
/// Zero coefficients are never stored.
struct Chain {
  int degree = 0;
  std::map<Index, Coeff> coeffs;

  void add(Index simplex, Coeff c) {
    if (c == 0) return;
    auto it = coeffs.find(simplex);
    if (it == coeffs.end()) {
      coeffs.emplace(simplex, c);
    } else {
      it->second += c;
      if (it->second == 0) coeffs.erase(it);
    }
  }
  bool empty() const { return coeffs.empty(); }
  Chain operator-() const {
    Chain r{degree, {}};
    for (auto& [i, c] : coeffs) r.coeffs.emplace(i, -c);
    return r;
  }
  Chain& operator+=(const Chain& o) {
    for (auto& [i, c] : o.coeffs) add(i, c);
    return *this;
  }
  Chain scaled(Coeff s) const {
    Chain r{degree, {}};
    if (s != 0)
      for (auto& [i, c] : coeffs) r.coeffs.emplace(i, s * c);
    return r;
  }
};

struct BuildOptions {
  // Accept complexes that fail the pseudomanifold test (needed for
  // torsion fixtures such as the projective plane).
  bool allow_non_manifold = false;
  // Accept a closed non-orientable top skeleton instead of raising.
  bool allow_non_orientable = false;
};

/// Oriented simplicial complex of dimension <= 3.
///
/// Simplices are stored with strictly increasing vertex indices; the
/// orientation of each top simplex is a separate sign relative to that
/// sorted order. All faces of stored simplices are enumerated, and
/// face-to-coface incidence is kept explicitly.
class SimplicialComplex {
 public:
  static SimplicialComplex from_tetrahedra(Index vertex_count,
                                           const std::vector<std::array<Index, 4>>& tets,
                                           const BuildOptions& opts = {});
  static SimplicialComplex from_triangles(Index vertex_count,
                                          const std::vector<std::array<Index, 3>>& tris,
                                          const BuildOptions& opts = {});

  Index vertex_count() const { return n_vertices_; }
  int dimension() const { return top_dim_; }
  Index simplex_count(int k) const;

  const std::vector<std::array<Index, 2>>& edges() const { return edges_; }
  const std::vector<std::array<Index, 3>>& triangles() const { return triangles_; }
  const std::vector<std::array<Index, 4>>& tetrahedra() const { return tets_; }

  /// Orientation sign of top simplex t relative to its sorted vertex order.
  int orientation(Index t) const { return top_orientation_[t]; }

  Index edge_index(Index a, Index b) const;          // -1 if absent
  Index triangle_index(Index a, Index b, Index c) const;
  Index tet_index(Index a, Index b, Index c, Index d) const;

  /// Cofaces of a k-simplex as (coface index, incidence sign) pairs; the
  /// sign is the corresponding entry of the boundary matrix of degree k+1.
  const std::vector<std::pair<Index, int>>& edge_cofaces(Index e) const {
    return edge_cofaces_[e];
  }
  const std::vector<std::pair<Index, int>>& triangle_cofaces(Index f) const {
    return tri_cofaces_[f];
  }
  const std::vector<Index>& vertex_edges(Index v) const { return vertex_edges_[v]; }
  /// Tetrahedra containing the given edge.
  const std::vector<Index>& edge_tets(Index e) const { return edge_tets_[e]; }

  /// The two tets adjacent to triangle f (closed complexes), or one for
  /// boundary triangles; missing slots are -1.
  std::array<Index, 2> triangle_tets(Index f) const;

  bool closed() const { return closed_; }
  bool manifold_like() const { return manifold_like_; }
  bool orientable() const { return orientable_; }

  /// Signed boundary operator of degree k (1 <= k <= 3) with the standard
  /// alternating-face rule; rows are (k-1)-simplices, columns k-simplices.
  /// Entries are exactly +-1.
  Eigen::SparseMatrix<double> boundary_matrix(int k) const;
  /// Same matrix with integer entries, as triplets (row, col, sign).
  std::vector<std::array<Coeff, 3>> boundary_triplets(int k) const;

  Chain boundary(const Chain& c) const;

  /// Alternating simplex count V - E + F - T.
  long euler_characteristic() const;

  // --- serialization -----------------------------------------------------
  // JSON schema: {"vertices": [[x,y,z],...], "tets": [[i,j,k,l],...]} and an
  // OFF variant where each cell line carries its vertex count (3 or 4).
  // Vertex positions travel with the complex only through these files; the
  // complex itself is purely combinatorial.
  std::string to_json(const std::vector<std::array<double, 3>>& vertices) const;
  static std::pair<SimplicialComplex, std::vector<std::array<double, 3>>> from_json(
      const std::string& text, const BuildOptions& opts = {});
  std::string to_off(const std::vector<std::array<double, 3>>& vertices) const;
  static std::pair<SimplicialComplex, std::vector<std::array<double, 3>>> from_off(
      const std::string& text, const BuildOptions& opts = {});

 private:
  Index n_vertices_ = 0;
  int top_dim_ = 0;
  std::vector<std::array<Index, 2>> edges_;
  std::vector<std::array<Index, 3>> triangles_;
  std::vector<std::array<Index, 4>> tets_;
  std::vector<int> top_orientation_;

  std::vector<std::vector<Index>> vertex_edges_;
  std::vector<std::vector<std::pair<Index, int>>> edge_cofaces_;  // edge -> triangles
  std::vector<std::vector<std::pair<Index, int>>> tri_cofaces_;   // triangle -> tets
  std::vector<std::vector<Index>> edge_tets_;

  std::map<std::array<Index, 2>, Index> edge_lookup_;
  std::map<std::array<Index, 3>, Index> tri_lookup_;
  std::map<std::array<Index, 4>, Index> tet_lookup_;

  bool closed_ = false;
  bool manifold_like_ = false;
  bool orientable_ = false;

  void finalize(const BuildOptions& opts);
};

/// Sign of the permutation sorting the tuple; 0 on repeated entries.
int sort_sign(std::vector<Index>& v);

}  // namespace coex
