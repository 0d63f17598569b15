// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string_view>

#include "grid.hpp"

namespace nestedsurf {

enum class Layer { Pia = 0, Arachnoid = 1, Epidural = 2 };

constexpr std::array<std::string_view, 3> kLayerNames{"pia", "arachnoid", "epidural"};

// Three signed distance volumes (inner to outer) on one grid geometry. No
// ordering is implied; see NestedSdfSet.
struct LayerTriple {
  VoxelGrid pia;
  VoxelGrid arachnoid;
  VoxelGrid epidural;

  const VoxelGrid& operator[](Layer l) const;
  VoxelGrid& operator[](Layer l);
  // Throws Geometry if the three grids do not share dims, spacing and origin.
  void require_shared_geometry() const;
};

struct NestingReport {
  double max_pia_arachnoid = 0;       // max(phi_ara - phi_pia)
  double max_arachnoid_epidural = 0;  // max(phi_epi - phi_ara)
  std::size_t count_pia_arachnoid = 0;
  std::size_t count_arachnoid_epidural = 0;
  std::size_t violating_voxels = 0;  // voxels with at least one violation

  std::size_t total() const noexcept { return count_pia_arachnoid + count_arachnoid_epidural; }
};

NestingReport check_nesting(const LayerTriple& layers);

// Layers satisfying phi_pia >= phi_ara >= phi_epi at every voxel, exactly.
class NestedSdfSet {
 public:
  // Validates the ordering; throws Geometry on any violation.
  static NestedSdfSet adopt(LayerTriple layers);

  const LayerTriple& layers() const noexcept { return layers_; }
  const VoxelGrid& operator[](Layer l) const { return layers_[l]; }

 private:
  explicit NestedSdfSet(LayerTriple layers) : layers_(std::move(layers)) {}
  friend NestedSdfSet enforce_nesting(LayerTriple layers);
  LayerTriple layers_;
};

// Non-negative difference-map reconstruction with pia as the reference:
//   d1 = max(0, pia - ara),  ara' = pia - d1
//   d2 = max(0, ara' - epi), epi' = ara' - d2
// evaluated as ara' = min(ara, pia), epi' = min(epi, ara') so ordered voxels
// keep their exact stored values.
NestedSdfSet enforce_nesting(LayerTriple layers);

// Manifest: "pia = <file>", "arachnoid = <file>", "epidural = <file>", paths
// relative to the manifest's directory.
LayerTriple read_layers(const std::filesystem::path& manifest);
void write_layers(const LayerTriple& layers, const std::filesystem::path& out_dir,
                  const std::string& manifest_name = "nested.manifest");

}  // namespace nestedsurf
