#pragma once

#include <vector>

#include <Eigen/Dense>

#include "coex/mesh.hpp"

namespace coex {

/// One straight piece of a piecewise-linear curve, inside a single cell,
/// endpoints in barycentric coordinates.
struct CurveSegment {
  Index tet = 0;
  Eigen::Vector4d from = Eigen::Vector4d::Zero();
  Eigen::Vector4d to = Eigen::Vector4d::Zero();
};

/// Barycentric-dominant vertex of a cell point: the local index with the
/// largest coordinate, ties to the smallest global id. Purely combinatorial,
/// so both cells sharing a face point agree on it.
int dominant_local_vertex(const std::array<Index, 4>& cell_vertices,
                          const Eigen::Vector4d& bary);

}  // namespace coex
