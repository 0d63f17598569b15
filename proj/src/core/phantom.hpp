// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "grid.hpp"
#include "nested.hpp"

namespace nestedsurf {

enum class PhantomKind { Sphere, Ellipsoid, Torus };

struct Corruption {
  double noise_amplitude = 0;  // i.i.d. uniform in [-a, a], mm
  std::size_t violation_count = 0;
  double violation_magnitude = 1.0;
  double slope_scale = 1.0;  // multiplies the sampled field
  std::uint64_t seed = 0;
};

struct PhantomSpec {
  PhantomKind kind = PhantomKind::Sphere;
  // One entry per layer, inner to outer: sphere uses x as the radius,
  // ellipsoid uses all three semi-axes. One layer gives a single volume,
  // three layers give pia / arachnoid / epidural.
  std::vector<Vec3> layers;
  double major_radius = 0;  // torus
  double minor_radius = 0;  // torus
  Vec3 center{};
  Index3 dims{64, 64, 64};
  Vec3 spacing{1, 1, 1};
  std::optional<Vec3> origin;  // default: grid centered on `center`
  Corruption corruption;

  // Throws InvalidArgument for non-increasing layers and Domain when a
  // surface comes within two voxels of the grid boundary.
  void validate() const;
  VoxelGrid empty_grid() const;
};

PhantomSpec read_phantom_spec(const std::filesystem::path& path);

struct PhantomVolumes {
  std::optional<LayerTriple> layers;  // three-layer phantoms
  std::optional<VoxelGrid> single;    // one-layer sphere/ellipsoid and torus
};

PhantomVolumes generate(const PhantomSpec& spec);

// Exact analytic signed distances.
double sphere_distance(Vec3 p, Vec3 center, double radius);
double torus_distance(Vec3 p, Vec3 center, double major, double minor);
// Point-to-ellipsoid distance by bisection on the normal-foot parameter,
// signed negative inside. Accurate to ~1e-12 relative.
double ellipsoid_distance(Vec3 p, Vec3 center, Vec3 semi_axes);

VoxelGrid sample_sphere(const VoxelGrid& geometry, Vec3 center, double radius);
VoxelGrid sample_ellipsoid(const VoxelGrid& geometry, Vec3 center, Vec3 semi_axes);
VoxelGrid sample_torus(const VoxelGrid& geometry, Vec3 center, double major, double minor);

// Counter-based uniform draw in [0, 1) keyed by (seed, stream, counter).
double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

void add_noise(VoxelGrid& field, double amplitude, std::uint64_t seed, std::uint64_t stream);

// Raises an outer layer above its inner neighbour by `magnitude` at `count`
// distinct seeded-random voxels, one violated pair per voxel.
LayerTriple inject_violations(const NestedSdfSet& set, std::size_t count, double magnitude, std::uint64_t seed);
LayerTriple inject_violations(LayerTriple layers, std::size_t count, double magnitude, std::uint64_t seed);

}  // namespace nestedsurf
