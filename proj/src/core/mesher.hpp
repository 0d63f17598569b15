// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>

#include "grid.hpp"
#include "mesh.hpp"

namespace nestedsurf {

// Isosurface of a sampled field. Vertices lie on grid edges at the linear
// interpolation of the field (rare saddle loops add one interior vertex); ambiguous faces are split by the asymptotic
// decider so neighbouring cells always agree, and the two-corner body-diagonal
// configurations are joined by a tube when the trilinear interior saddle says
// so. Corner values equal to `iso` are nudged by +1e-6 * min spacing. Shared
// edge vertices are welded and the output does not depend on thread count.
//
// Throws Domain if the field is non-finite or iso is not strictly inside its
// value range.
TriangleMesh marching_cubes(const VoxelGrid& field, double iso = 0.0);

namespace detail {

// Triangles for a single unit cell in local edge numbering, for tests.
// Corner c sits at (c & 1, (c >> 1) & 1, (c >> 2) & 1); edge e joins
// kCellEdges[e][0] -> kCellEdges[e][1]. Values are relative to the iso level
// (negative inside).
extern const std::array<std::array<int, 2>, 12> kCellEdges;
//
// Loops that cannot be split without a diagonal lying in a face the
// neighbouring cell may also use get an extra vertex at their centroid;
// index 12 + k refers to extra[k], in unit-cell coordinates.
struct CellTriangles {
  std::vector<std::array<int, 3>> tris;
  std::vector<std::array<double, 3>> extra;
};
CellTriangles triangulate_cell(const std::array<double, 8>& value);

// Trilinear body-saddle test: true if the region carrying the sign of
// corners (c, 7 - c) connects them through the cell interior.
bool interior_connects(const std::array<double, 8>& value, int corner);

}  // namespace detail

}  // namespace nestedsurf
