#pragma once

#include <array>
#include <vector>

#include "coex/mesh.hpp"

namespace coex::fixtures {

/// Boundary of the 4-simplex: the minimal triangulation of S^3.
SimplicialComplex sphere_s3();

struct EmbeddedSurface {
  SimplicialComplex complex;
  std::vector<std::array<double, 3>> positions;
  Chain equator;  // oriented equatorial edge loop
};

/// Unit octahedron surface (8 equilateral faces), with its 4-edge equator.
EmbeddedSurface octahedron_s2();

/// The 6-vertex triangulation of the real projective plane with H_1 = Z/2,
/// and a representative of its order-2 core loop.
SimplicialComplex projective_plane(bool allow_non_orientable = true);
Chain projective_plane_core_loop(const SimplicialComplex& rp2);

}  // namespace coex::fixtures
