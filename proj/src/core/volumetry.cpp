// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0
#include "volumetry.hpp"

#include <fmt/format.h>

#include "error.hpp"
#include "mesher.hpp"

namespace nestedsurf {

double signed_volume(const TriangleMesh& mesh) {
  double sum = 0;
  for (const auto& t : mesh.triangles) {
    const Vec3 a = mesh.vertices[t[0]], b = mesh.vertices[t[1]], c = mesh.vertices[t[2]];
    sum += dot(a, cross(b, c));
  }
  return sum / 6.0;
}

double enclosed_volume(const TriangleMesh& mesh) {
  const auto diag = mesh_diagnostics(mesh);
  if (mesh.triangles.empty() || !diag.watertight())
    throw Error(ErrorKind::Geometry, fmt::format("mesh is not closed ({} boundary edges, {} non-manifold edges)",
                                                 diag.boundary_edges, diag.nonmanifold_edges));
  // Translate to the vertex centroid first; the result is the same but far
  // from the origin the tetrahedra cancel with less rounding.
  Vec3 c{};
  for (const auto& v : mesh.vertices) c = c + v;
  c = (1.0 / static_cast<double>(mesh.vertices.size())) * c;
  double sum = 0;
  for (const auto& t : mesh.triangles) {
    const Vec3 a = mesh.vertices[t[0]] - c, b = mesh.vertices[t[1]] - c, d = mesh.vertices[t[2]] - c;
    sum += dot(a, cross(b, d));
  }
  const double v = sum / 6.0;
  if (v < 0) throw Error(ErrorKind::Geometry, "mesh orientation is inverted (negative signed volume)");
  return v;
}

VolumeReport make_volume_report(const std::array<double, 3>& layer_mm3, IcvSurface icv) {
  VolumeReport r;
  for (int i = 0; i < 3; ++i) r.layer_cm3[i] = layer_mm3[i] / 1000.0;
  r.sas_cm3 = r.layer_cm3[1] - r.layer_cm3[0];
  r.icv_cm3 = icv == IcvSurface::Epidural ? r.layer_cm3[2] : r.layer_cm3[1];
  return r;
}

VolumeReport measure_nested(const NestedSdfSet& set, double iso, IcvSurface icv) {
  std::array<double, 3> mm3{};
  for (Layer l : {Layer::Pia, Layer::Arachnoid, Layer::Epidural}) {
    const auto mesh = marching_cubes(set[l], iso);
    try {
      mm3[static_cast<int>(l)] = enclosed_volume(mesh);
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(kLayerNames[static_cast<int>(l)]) + " surface: " + e.what());
    }
  }
  return make_volume_report(mm3, icv);
}

std::string volume_csv_row(const VisitInfo& visit, const VolumeReport& r) {
  return fmt::format("{},{},{},{},{},{:.3f},{:.3f},{:.3f},{:.3f},{:.3f}", visit.subject_id, visit.visit_index,
                     visit.interval_years, visit.sex, visit.baseline_age, r.icv_cm3, r.sas_cm3, r.layer_cm3[0],
                     r.layer_cm3[1], r.layer_cm3[2]);
}

}  // namespace nestedsurf
