// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "grid.hpp"
#include "mesh.hpp"

namespace nestedsurf {

// Per-vertex discrete curvature. Boundary vertices carry `boundary = true`
// and are left out of every summary statistic.
struct CurvatureField {
  std::vector<double> deficit;     // K = 2*pi - sum of incident angles (rad)
  std::vector<double> density;     // K / (one third of incident area), 1/mm^2
  std::vector<double> gradient;    // |grad K_density| area-averaged, 1/mm^3
  std::vector<char> boundary;

  std::size_t size() const noexcept { return deficit.size(); }
};

// Angle-deficit curvature. Throws Geometry for a vertex with no incident
// triangle.
CurvatureField gaussian_curvature(const TriangleMesh& mesh);

// Fills field.gradient from field.density. Per triangle the gradient of the
// linear interpolant is J^{-T} applied to the parametric derivatives; each
// vertex averages the magnitudes of its triangles weighted by area.
// Triangles touching a boundary vertex are skipped. Throws Geometry on a
// zero-area triangle.
void curvature_gradient(const TriangleMesh& mesh, CurvatureField& field);

// Surface gradient of a piecewise-linear field on one triangle.
Vec3 triangle_gradient(Vec3 p0, Vec3 p1, Vec3 p2, double f0, double f1, double f2);

struct CurvatureSummary {
  std::size_t interior_vertices = 0;
  double deficit_sum = 0;      // Gauss-Bonnet check: 2*pi*chi on closed meshes
  double mean_density = 0;     // plain mean of K_density over interior vertices
  double area_weighted_density = 0;  // sum K / sum barycentric area
  double median_gradient = 0;  // "median CG"
};

CurvatureSummary summarize(const TriangleMesh& mesh, const CurvatureField& field);

double median(std::vector<double> values);

struct SurfacePoint {
  std::string id;
  Vec3 position;
};

// "id,x,y,z" header, millimeters.
std::vector<SurfacePoint> read_points_csv(const std::filesystem::path& path);

// Exact closest point on a triangle (vertex, edge and interior regions).
Vec3 closest_point_on_triangle(Vec3 p, Vec3 a, Vec3 b, Vec3 c);

// Median-split bounding volume hierarchy over triangles (leaf size 4).
class TriangleBvh {
 public:
  explicit TriangleBvh(const TriangleMesh& mesh);
  ~TriangleBvh();
  TriangleBvh(TriangleBvh&&) noexcept;
  TriangleBvh& operator=(TriangleBvh&&) noexcept;

  double distance(Vec3 p) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct DistanceSummary {
  double mean = 0;
  double stddev = 0;  // sample standard deviation (n - 1)
  double max = 0;
};

// Minimum Euclidean distance from each point to the mesh. Throws
// InvalidArgument on an empty mesh or empty point list.
std::vector<double> surface_distance(const std::vector<Vec3>& points, const TriangleMesh& mesh);
std::vector<double> surface_distance_brute_force(const std::vector<Vec3>& points, const TriangleMesh& mesh);
DistanceSummary summarize_distances(const std::vector<double>& d);

// (1/N) sum |a_i - b_i|; Geometry error when the grids differ.
double mean_absolute_error(const VoxelGrid& a, const VoxelGrid& b);

// "vertex,K,K_density,CG"
void write_curvature_csv(const CurvatureField& field, const std::filesystem::path& path);
// "id,distance_mm"
void write_distance_csv(const std::vector<SurfacePoint>& points, const std::vector<double>& d,
                        const std::filesystem::path& path);
// One line: "median_cg=<v>,sd_mm=<mean>+/-<std>" (SD omitted without points).
std::string format_metric_summary(const CurvatureSummary& c, const DistanceSummary* d);

}  // namespace nestedsurf
