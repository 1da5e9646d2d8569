#include "coex/fixtures.hpp"

namespace coex::fixtures {

SimplicialComplex sphere_s3() {
  // Faces of [0,1,2,3,4] with the alternating signs baked into vertex order.
  std::vector<std::array<Index, 4>> tets = {
      {1, 2, 3, 4}, {0, 2, 4, 3}, {0, 1, 3, 4}, {0, 1, 4, 2}, {0, 1, 2, 3}};
  return SimplicialComplex::from_tetrahedra(5, tets);
}

EmbeddedSurface octahedron_s2() {
  EmbeddedSurface out;
  out.positions = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  std::vector<std::array<Index, 3>> faces = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
                                             {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
  out.complex = SimplicialComplex::from_triangles(6, faces);
  Chain eq{1, {}};
  eq.add(out.complex.edge_index(0, 2), 1);
  eq.add(out.complex.edge_index(1, 2), -1);
  eq.add(out.complex.edge_index(1, 3), 1);
  eq.add(out.complex.edge_index(0, 3), -1);
  out.equator = eq;
  return out;
}

SimplicialComplex projective_plane(bool allow_non_orientable) {
  // The unique 6-vertex triangulation (antipodal icosahedron quotient).
  std::vector<std::array<Index, 3>> faces = {{0, 1, 3}, {0, 1, 4}, {0, 2, 3}, {0, 2, 5},
                                             {0, 4, 5}, {1, 2, 4}, {1, 2, 5}, {1, 3, 5},
                                             {2, 3, 4}, {3, 4, 5}};
  BuildOptions opts;
  opts.allow_non_orientable = allow_non_orientable;
  return SimplicialComplex::from_triangles(6, faces, opts);
}

Chain projective_plane_core_loop(const SimplicialComplex& rp2) {
  Chain loop{1, {}};
  loop.add(rp2.edge_index(0, 1), 1);
  loop.add(rp2.edge_index(1, 2), 1);
  loop.add(rp2.edge_index(0, 2), -1);
  return loop;
}

}  // namespace coex::fixtures
