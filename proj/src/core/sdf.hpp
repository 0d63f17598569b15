// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "grid.hpp"

namespace nestedsurf {

// Exact squared Euclidean distance (mm^2) from every voxel center to the
// nearest center whose mask value equals `target` (1 = foreground). Voxels of
// the target class get 0; if the class is empty every entry is +inf.
// Separable lower-envelope transform, linear per axis, honours anisotropic
// spacing.
std::vector<double> squared_distance_to_class(const VoxelGrid& mask, bool target);

// phi(v) = d(v, foreground) - d(v, background), negative inside. The zero
// level under linear interpolation sits halfway between opposite-class
// neighbours. Throws Domain for an all-foreground or all-background mask.
VoxelGrid signed_distance_from_mask(const VoxelGrid& mask);

// Rebuilds a unit-gradient field with the same zero level set. The linearly
// interpolated zero level is triangulated; voxels within one cell of it get
// exact point-to-triangle distances, and fast sweeping in the 8 axis
// orderings carries each voxel's closest triangle outward from its 26
// neighbours, refined by a walk over adjacent triangles. Signs are kept.
// Throws Domain if the field has no sign change.
VoxelGrid reinitialize_sdf(const VoxelGrid& field);

// Number of face-adjacent voxel pairs with |phi(a) - phi(b)| > |a - b| + slack.
std::size_t count_lipschitz_violations(const VoxelGrid& field, double slack);

}  // namespace nestedsurf
