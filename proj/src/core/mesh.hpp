// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "vec3.hpp"

namespace nestedsurf {

using Triangle = std::array<std::uint32_t, 3>;

// Indexed triangle surface in world millimeters. Right-hand-rule normals point
// toward increasing field values (outward for a closed surface).
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;

  bool empty() const noexcept { return triangles.empty(); }
};

struct MeshDiagnostics {
  std::size_t vertices = 0;
  std::size_t edges = 0;
  std::size_t faces = 0;
  long long euler = 0;  // V - E + F
  std::size_t boundary_edges = 0;
  std::size_t nonmanifold_edges = 0;  // shared by more than two triangles
  double min_triangle_area = 0;

  bool watertight() const noexcept { return boundary_edges == 0 && nonmanifold_edges == 0; }
};

MeshDiagnostics mesh_diagnostics(const TriangleMesh& mesh);

double triangle_area(const TriangleMesh& mesh, const Triangle& t);

// ASCII OBJ: "v x y z" and 1-based "f i j k".
void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path);
// Binary little-endian PLY: float32 x,y,z; uchar count + int32 indices.
void write_ply(const TriangleMesh& mesh, const std::filesystem::path& path);
// Dispatches on extension (.obj / .ply). The PLY reader accepts what
// write_ply emits plus ASCII PLY with the same element layout.
TriangleMesh read_mesh(const std::filesystem::path& path);
void write_mesh(const TriangleMesh& mesh, const std::filesystem::path& path);

}  // namespace nestedsurf
