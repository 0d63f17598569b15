// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0

#include "nestedsurf/nestedsurf.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "error.hpp"
#include "grid.hpp"
#include "lme.hpp"
#include "mesh.hpp"
#include "mesher.hpp"
#include "metrics.hpp"
#include "nested.hpp"
#include "parallel.hpp"
#include "phantom.hpp"
#include "sdf.hpp"
#include "volumetry.hpp"

struct ns_volume {
  nestedsurf::VoxelGrid grid;
};
struct ns_layers {
  nestedsurf::LayerTriple triple;
};
struct ns_mesh {
  nestedsurf::TriangleMesh mesh;
};
struct ns_cohort {
  nestedsurf::CohortTable table;
};
struct ns_lme_fit {
  nestedsurf::LmeFit fit;
};

namespace {

using namespace nestedsurf;

thread_local std::string g_last_error;

ns_status code_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return NS_ERR_INVALID_ARGUMENT;
    case ErrorKind::Io: return NS_ERR_IO;
    case ErrorKind::Format: return NS_ERR_FORMAT;
    case ErrorKind::Geometry: return NS_ERR_GEOMETRY;
    case ErrorKind::Domain: return NS_ERR_DOMAIN;
    case ErrorKind::Convergence: return NS_ERR_CONVERGENCE;
  }
  return NS_ERR_INTERNAL;
}

template <class F>
ns_status guarded(F&& body) {
  try {
    body();
    return NS_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return code_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return NS_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return NS_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorKind::InvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void write_string(const std::string& s, char* buf, size_t capacity, size_t* needed) {
  if (needed) *needed = s.size();
  if (!buf) return;
  require(capacity > s.size(), "buffer too small");
  std::memcpy(buf, s.c_str(), s.size() + 1);
}

VoxelGrid as_field(const VoxelGrid& g) {
  return g.kind() == ElementKind::BinaryMask ? signed_distance_from_mask(g) : g;
}

ns_volume_report to_c(const VolumeReport& r) {
  return {r.icv_cm3, r.sas_cm3, r.layer_cm3[0], r.layer_cm3[1], r.layer_cm3[2]};
}

IcvSurface to_icv(ns_icv_surface s) {
  return s == NS_ICV_ARACHNOID ? IcvSurface::Arachnoid : IcvSurface::Epidural;
}

Response to_response(ns_response r) { return r == NS_RESPONSE_SAS ? Response::Sas : Response::Icv; }

}  // namespace

extern "C" {

const char* ns_last_error(void) { return g_last_error.c_str(); }

const char* ns_version(void) { return "0.1.0"; }

const char* ns_status_name(ns_status status) {
  switch (status) {
    case NS_OK: return "ok";
    case NS_ERR_INVALID_ARGUMENT: return "invalid argument";
    case NS_ERR_IO: return "i/o error";
    case NS_ERR_FORMAT: return "format error";
    case NS_ERR_GEOMETRY: return "geometry error";
    case NS_ERR_DOMAIN: return "domain error";
    case NS_ERR_CONVERGENCE: return "convergence failure";
    case NS_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void ns_set_threads(int threads) { set_thread_count(threads < 0 ? 0 : threads); }

// ---------------------------------------------------------------- volumes

ns_status ns_volume_create(const int dims[3], const double spacing[3], const double origin[3], ns_element_kind kind,
                           const float* data, ns_volume** out) {
  return guarded([&] {
    require(dims && spacing && origin && out, "null argument");
    VoxelGrid g({dims[0], dims[1], dims[2]}, {spacing[0], spacing[1], spacing[2]}, {origin[0], origin[1], origin[2]},
                kind == NS_MASK ? ElementKind::BinaryMask : ElementKind::RealField);
    if (data) {
      // Re-run the constructor so mask values are validated.
      g = VoxelGrid(g.dims(), g.spacing(), g.origin(), g.kind(), std::vector<float>(data, data + g.size()));
    }
    *out = new ns_volume{std::move(g)};
  });
}

ns_status ns_volume_read(const char* header_path, ns_volume** out) {
  return guarded([&] {
    require(header_path && out, "null argument");
    *out = new ns_volume{read_volume(header_path)};
  });
}

ns_status ns_volume_write(const ns_volume* volume, const char* header_path) {
  return guarded([&] {
    require(volume && header_path, "null argument");
    write_volume(volume->grid, header_path);
  });
}

void ns_volume_free(ns_volume* volume) { delete volume; }

ns_status ns_volume_info(const ns_volume* volume, int dims[3], double spacing[3], double origin[3],
                         ns_element_kind* kind) {
  return guarded([&] {
    require(volume, "null volume");
    const auto& g = volume->grid;
    for (int a = 0; a < 3; ++a) {
      if (dims) dims[a] = g.dims()[a];
      if (spacing) spacing[a] = g.spacing()[a];
      if (origin) origin[a] = g.origin()[a];
    }
    if (kind) *kind = g.kind() == ElementKind::BinaryMask ? NS_MASK : NS_FIELD;
  });
}

ns_status ns_volume_copy_data(const ns_volume* volume, float* out, size_t capacity) {
  return guarded([&] {
    require(volume && out, "null argument");
    const auto data = volume->grid.data();
    require(capacity >= data.size(), "buffer too small");
    std::copy(data.begin(), data.end(), out);
  });
}

ns_status ns_volume_world_of_voxel(const ns_volume* volume, const int index[3], double world[3]) {
  return guarded([&] {
    require(volume && index && world, "null argument");
    const Vec3 p = volume->grid.world_of_voxel({index[0], index[1], index[2]});
    world[0] = p.x;
    world[1] = p.y;
    world[2] = p.z;
  });
}

ns_status ns_volume_mean_abs_error(const ns_volume* a, const ns_volume* b, double* out) {
  return guarded([&] {
    require(a && b && out, "null argument");
    *out = mean_absolute_error(a->grid, b->grid);
  });
}

// ------------------------------------------------------ signed distances

ns_status ns_sdf_from_mask(const ns_volume* mask, ns_volume** out) {
  return guarded([&] {
    require(mask && out, "null argument");
    require(mask->grid.kind() == ElementKind::BinaryMask, "volume is not a binary mask");
    *out = new ns_volume{signed_distance_from_mask(mask->grid)};
  });
}

ns_status ns_sdf_reinitialize(const ns_volume* field, ns_volume** out) {
  return guarded([&] {
    require(field && out, "null argument");
    *out = new ns_volume{reinitialize_sdf(as_field(field->grid))};
  });
}

// --------------------------------------------------------- nested layers

ns_status ns_layers_create(const ns_volume* pia, const ns_volume* arachnoid, const ns_volume* epidural,
                           ns_layers** out) {
  return guarded([&] {
    require(pia && arachnoid && epidural && out, "null argument");
    LayerTriple t{as_field(pia->grid), as_field(arachnoid->grid), as_field(epidural->grid)};
    t.require_shared_geometry();
    *out = new ns_layers{std::move(t)};
  });
}

ns_status ns_layers_read(const char* manifest_path, ns_layers** out) {
  return guarded([&] {
    require(manifest_path && out, "null argument");
    LayerTriple t = read_layers(manifest_path);
    for (Layer l : {Layer::Pia, Layer::Arachnoid, Layer::Epidural}) t[l] = as_field(t[l]);
    *out = new ns_layers{std::move(t)};
  });
}

ns_status ns_layers_write(const ns_layers* layers, const char* out_dir, const char* manifest_name) {
  return guarded([&] {
    require(layers && out_dir, "null argument");
    write_layers(layers->triple, out_dir, manifest_name ? manifest_name : "nested.manifest");
  });
}

void ns_layers_free(ns_layers* layers) { delete layers; }

ns_status ns_layers_get(const ns_layers* layers, ns_layer which, ns_volume** out) {
  return guarded([&] {
    require(layers && out, "null argument");
    require(which >= NS_PIA && which <= NS_EPIDURAL, "unknown layer");
    *out = new ns_volume{layers->triple[static_cast<Layer>(which)]};
  });
}

ns_status ns_layers_check(const ns_layers* layers, ns_nesting_report* report) {
  return guarded([&] {
    require(layers && report, "null argument");
    const NestingReport r = check_nesting(layers->triple);
    *report = {r.max_pia_arachnoid, r.max_arachnoid_epidural, r.count_pia_arachnoid, r.count_arachnoid_epidural,
               r.violating_voxels};
  });
}

ns_status ns_layers_enforce(const ns_layers* layers, ns_layers** out) {
  return guarded([&] {
    require(layers && out, "null argument");
    *out = new ns_layers{enforce_nesting(layers->triple).layers()};
  });
}

ns_status ns_layers_reinitialize(const ns_layers* layers, ns_layers** out) {
  return guarded([&] {
    require(layers && out, "null argument");
    LayerTriple t;
    for (Layer l : {Layer::Pia, Layer::Arachnoid, Layer::Epidural}) t[l] = reinitialize_sdf(layers->triple[l]);
    *out = new ns_layers{enforce_nesting(std::move(t)).layers()};
  });
}

ns_status ns_layers_inject_violations(const ns_layers* layers, uint64_t count, double magnitude, uint64_t seed,
                                      ns_layers** out) {
  return guarded([&] {
    require(layers && out, "null argument");
    *out = new ns_layers{inject_violations(layers->triple, count, magnitude, seed)};
  });
}

// --------------------------------------------------------------- phantom

ns_status ns_phantom_generate(const char* spec_path, const uint64_t* seed, ns_layers** layers_out,
                              ns_volume** single_out) {
  return guarded([&] {
    require(spec_path && layers_out && single_out, "null argument");
    PhantomSpec spec = read_phantom_spec(spec_path);
    if (seed) spec.corruption.seed = *seed;
    PhantomVolumes v = generate(spec);
    *layers_out = v.layers ? new ns_layers{std::move(*v.layers)} : nullptr;
    *single_out = v.single ? new ns_volume{std::move(*v.single)} : nullptr;
  });
}

// ------------------------------------------------------------------ mesh

ns_status ns_marching_cubes(const ns_volume* field, double iso, ns_mesh** out) {
  return guarded([&] {
    require(field && out, "null argument");
    *out = new ns_mesh{marching_cubes(as_field(field->grid), iso)};
  });
}

ns_status ns_mesh_read(const char* path, ns_mesh** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new ns_mesh{read_mesh(path)};
  });
}

ns_status ns_mesh_write(const ns_mesh* mesh, const char* path) {
  return guarded([&] {
    require(mesh && path, "null argument");
    write_mesh(mesh->mesh, path);
  });
}

void ns_mesh_free(ns_mesh* mesh) { delete mesh; }

ns_status ns_mesh_diagnostics(const ns_mesh* mesh, ns_mesh_report* report) {
  return guarded([&] {
    require(mesh && report, "null argument");
    const MeshDiagnostics d = mesh_diagnostics(mesh->mesh);
    *report = {d.vertices, d.edges, d.faces, d.euler, d.boundary_edges, d.nonmanifold_edges, d.min_triangle_area};
  });
}

ns_status ns_mesh_counts(const ns_mesh* mesh, size_t* vertices, size_t* triangles) {
  return guarded([&] {
    require(mesh, "null mesh");
    if (vertices) *vertices = mesh->mesh.vertices.size();
    if (triangles) *triangles = mesh->mesh.triangles.size();
  });
}

ns_status ns_mesh_enclosed_volume(const ns_mesh* mesh, double* mm3) {
  return guarded([&] {
    require(mesh && mm3, "null argument");
    *mm3 = enclosed_volume(mesh->mesh);
  });
}

// -------------------------------------------------------------- metrics

namespace {

CurvatureField curvature_of(const TriangleMesh& mesh, ns_curvature_summary* summary) {
  CurvatureField field = gaussian_curvature(mesh);
  curvature_gradient(mesh, field);
  if (summary) {
    const CurvatureSummary s = summarize(mesh, field);
    *summary = {s.interior_vertices, s.deficit_sum, s.mean_density, s.area_weighted_density, s.median_gradient};
  }
  return field;
}

}  // namespace

ns_status ns_mesh_curvature(const ns_mesh* mesh, double* deficit, double* density, double* gradient,
                            ns_curvature_summary* summary) {
  return guarded([&] {
    require(mesh, "null mesh");
    const CurvatureField field = curvature_of(mesh->mesh, summary);
    if (deficit) std::copy(field.deficit.begin(), field.deficit.end(), deficit);
    if (density) std::copy(field.density.begin(), field.density.end(), density);
    if (gradient) std::copy(field.gradient.begin(), field.gradient.end(), gradient);
  });
}

ns_status ns_mesh_write_curvature_csv(const ns_mesh* mesh, const char* csv_path, ns_curvature_summary* summary) {
  return guarded([&] {
    require(mesh && csv_path, "null argument");
    write_curvature_csv(curvature_of(mesh->mesh, summary), csv_path);
  });
}

ns_status ns_surface_distance(const ns_mesh* mesh, const double* points, size_t n, double* distances) {
  return guarded([&] {
    require(mesh && points && distances, "null argument");
    std::vector<Vec3> p(n);
    for (size_t i = 0; i < n; ++i) p[i] = {points[3 * i], points[3 * i + 1], points[3 * i + 2]};
    const auto d = surface_distance(p, mesh->mesh);
    std::copy(d.begin(), d.end(), distances);
  });
}

ns_status ns_surface_distance_csv(const ns_mesh* mesh, const char* points_csv, const char* out_csv,
                                  ns_distance_summary* summary) {
  return guarded([&] {
    require(mesh && points_csv && out_csv, "null argument");
    const auto points = read_points_csv(points_csv);
    std::vector<Vec3> p;
    p.reserve(points.size());
    for (const auto& sp : points) p.push_back(sp.position);
    const auto d = surface_distance(p, mesh->mesh);
    write_distance_csv(points, d, out_csv);
    if (summary) {
      const DistanceSummary s = summarize_distances(d);
      *summary = {s.mean, s.stddev, s.max};
    }
  });
}

// ------------------------------------------------------------ volumetry

ns_status ns_measure_layers(const ns_layers* layers, double iso, ns_icv_surface icv, ns_volume_report* report) {
  return guarded([&] {
    require(layers && report, "null argument");
    *report = to_c(measure_nested(NestedSdfSet::adopt(layers->triple), iso, to_icv(icv)));
  });
}

ns_status ns_volume_report_from_mm3(const double layer_mm3[3], ns_icv_surface icv, ns_volume_report* report) {
  return guarded([&] {
    require(layer_mm3 && report, "null argument");
    *report = to_c(make_volume_report({layer_mm3[0], layer_mm3[1], layer_mm3[2]}, to_icv(icv)));
  });
}

ns_status ns_volume_csv_header(char* buf, size_t capacity, size_t* needed) {
  return guarded([&] { write_string(kVolumeCsvHeader, buf, capacity, needed); });
}

ns_status ns_volume_csv_row(const ns_visit_info* visit, const ns_volume_report* report, char* buf, size_t capacity,
                            size_t* needed) {
  return guarded([&] {
    require(visit && report, "null argument");
    VisitInfo v;
    if (visit->subject_id) v.subject_id = visit->subject_id;
    v.visit_index = visit->visit_index;
    v.interval_years = visit->interval_years;
    v.sex = visit->sex;
    v.baseline_age = visit->baseline_age;
    VolumeReport r;
    r.icv_cm3 = report->icv_cm3;
    r.sas_cm3 = report->sas_cm3;
    r.layer_cm3 = {report->pia_cm3, report->arachnoid_cm3, report->epidural_cm3};
    write_string(volume_csv_row(v, r), buf, capacity, needed);
  });
}

// ------------------------------------------------------------------ LME

ns_status ns_cohort_read(const char* csv_path, ns_cohort** out) {
  return guarded([&] {
    require(csv_path && out, "null argument");
    CohortTable t = read_cohort_csv(csv_path);
    t.validate();
    *out = new ns_cohort{std::move(t)};
  });
}

void ns_cohort_free(ns_cohort* cohort) { delete cohort; }

ns_status ns_cohort_size(const ns_cohort* cohort, size_t* rows) {
  return guarded([&] {
    require(cohort && rows, "null argument");
    *rows = cohort->table.rows.size();
  });
}

ns_status ns_lme_fit_cohort(const ns_cohort* cohort, ns_response response, ns_criterion criterion, ns_lme_fit** out) {
  return guarded([&] {
    require(cohort && out, "null argument");
    LmeOptions opt;
    opt.criterion = criterion == NS_ML ? Criterion::Ml : Criterion::Reml;
    *out = new ns_lme_fit{fit_lme(cohort->table, to_response(response), opt)};
  });
}

void ns_lme_fit_free(ns_lme_fit* fit) { delete fit; }

ns_status ns_lme_coefficient_count(const ns_lme_fit* fit, size_t* count) {
  return guarded([&] {
    require(fit && count, "null argument");
    *count = fit->fit.names.size();
  });
}

ns_status ns_lme_coefficient(const ns_lme_fit* fit, size_t index, const char** name, double* beta, double* se,
                             double* p) {
  return guarded([&] {
    require(fit, "null fit");
    const LmeFit& f = fit->fit;
    require(index < f.names.size(), "coefficient index out of range");
    const auto i = static_cast<Eigen::Index>(index);
    if (name) *name = f.names[index].c_str();
    if (beta) *beta = f.beta(i);
    if (se) *se = f.se(i);
    if (p) *p = f.p(i);
  });
}

ns_status ns_lme_variance(const ns_lme_fit* fit, double* var_intercept, double* var_slope,
                          double* cov_intercept_slope, double* residual, double* log_likelihood) {
  return guarded([&] {
    require(fit, "null fit");
    const LmeFit& f = fit->fit;
    if (var_intercept) *var_intercept = f.var_intercept;
    if (var_slope) *var_slope = f.var_slope;
    if (cov_intercept_slope) *cov_intercept_slope = f.cov_intercept_slope;
    if (residual) *residual = f.residual_variance;
    if (log_likelihood) *log_likelihood = f.log_likelihood;
  });
}

ns_status ns_lme_report_text(const ns_lme_fit* icv, const ns_lme_fit* sas, double alpha, char** out) {
  return guarded([&] {
    require(icv && sas && out, "null argument");
    *out = dup_string(format_report_text(icv->fit, sas->fit, alpha));
  });
}

ns_status ns_lme_report_csv(const ns_lme_fit* icv, const ns_lme_fit* sas, double alpha, char** out) {
  return guarded([&] {
    require(icv && sas && out, "null argument");
    *out = dup_string(format_report_csv(icv->fit, sas->fit, alpha));
  });
}

ns_status ns_lme_trajectory_csv(const ns_cohort* cohort, const ns_lme_fit* fit, ns_response response, char** out) {
  return guarded([&] {
    require(cohort && fit && out, "null argument");
    *out = dup_string(format_trajectory_csv(cohort->table, fit->fit, to_response(response)));
  });
}

void ns_string_free(char* s) { std::free(s); }

}  // extern "C"
