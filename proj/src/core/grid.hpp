// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vec3.hpp"

namespace nestedsurf {

enum class ElementKind { BinaryMask, RealField };

using Index3 = std::array<int, 3>;

// Axis-aligned scalar volume. Voxel (0,0,0) is centered at `origin`, values are
// stored x-fastest: index = x + nx * (y + ny * z). Lengths are millimeters.
class VoxelGrid {
 public:
  VoxelGrid() = default;
  VoxelGrid(Index3 dims, Vec3 spacing, Vec3 origin, ElementKind kind);
  VoxelGrid(Index3 dims, Vec3 spacing, Vec3 origin, ElementKind kind, std::vector<float> data);

  const Index3& dims() const noexcept { return dims_; }
  const Vec3& spacing() const noexcept { return spacing_; }
  const Vec3& origin() const noexcept { return origin_; }
  ElementKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  std::size_t linear(int x, int y, int z) const noexcept {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(z));
  }
  Index3 unlinear(std::size_t i) const noexcept {
    const auto nx = static_cast<std::size_t>(dims_[0]), ny = static_cast<std::size_t>(dims_[1]);
    return {static_cast<int>(i % nx), static_cast<int>((i / nx) % ny), static_cast<int>(i / (nx * ny))};
  }
  float at(int x, int y, int z) const noexcept { return data_[linear(x, y, z)]; }
  float& at(int x, int y, int z) noexcept { return data_[linear(x, y, z)]; }

  bool contains(Index3 i) const noexcept;

  // World position (mm) of a voxel center; throws on out-of-range index.
  Vec3 world_of_voxel(Index3 index) const;
  // Nearest voxel to a world position (no range check).
  Index3 voxel_of_world(Vec3 p) const noexcept;

  // Same dims, spacing and origin (exact comparison).
  bool same_geometry(const VoxelGrid& other) const noexcept;

  // Copy with identical geometry and the given kind, zero-filled.
  VoxelGrid like(ElementKind kind) const { return VoxelGrid(dims_, spacing_, origin_, kind); }

 private:
  Index3 dims_{0, 0, 0};
  Vec3 spacing_{1, 1, 1};
  Vec3 origin_{0, 0, 0};
  ElementKind kind_ = ElementKind::RealField;
  std::vector<float> data_;
};

// MetaImage-compatible header + little-endian raw. Masks are stored as
// MET_UCHAR, real fields as MET_FLOAT.
VoxelGrid read_volume(const std::filesystem::path& header);
void write_volume(const VoxelGrid& grid, const std::filesystem::path& header);

// Shortest decimal text that parses back to the same double, always with a
// decimal point ("1.0", "0.8").
std::string format_real(double v);

}  // namespace nestedsurf
