// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0

// C interface to the nested meningeal surface library.
//
// Every function returns an ns_status. On failure the message for the calling
// thread is available from ns_last_error() until the next failing call.
// Objects are opaque handles owned by the caller and released with the
// matching *_free function; *_free accepts NULL. Output handles are only
// written on success.

#ifndef NESTEDSURF_H
#define NESTEDSURF_H

#include <stddef.h>
#include <stdint.h>

#if defined(NESTEDSURF_BUILDING)
#define NS_API __attribute__((visibility("default")))
#else
#define NS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ns_status {
  NS_OK = 0,
  NS_ERR_INVALID_ARGUMENT = 1,
  NS_ERR_IO = 2,
  NS_ERR_FORMAT = 3,
  NS_ERR_GEOMETRY = 4,
  NS_ERR_DOMAIN = 5,
  NS_ERR_CONVERGENCE = 6,
  NS_ERR_INTERNAL = 7
} ns_status;

typedef enum ns_element_kind { NS_MASK = 0, NS_FIELD = 1 } ns_element_kind;
typedef enum ns_layer { NS_PIA = 0, NS_ARACHNOID = 1, NS_EPIDURAL = 2 } ns_layer;
typedef enum ns_icv_surface { NS_ICV_EPIDURAL = 0, NS_ICV_ARACHNOID = 1 } ns_icv_surface;
typedef enum ns_response { NS_RESPONSE_ICV = 0, NS_RESPONSE_SAS = 1 } ns_response;
typedef enum ns_criterion { NS_REML = 0, NS_ML = 1 } ns_criterion;

typedef struct ns_volume ns_volume;
typedef struct ns_layers ns_layers;  // three SDFs, ordering not guaranteed
typedef struct ns_mesh ns_mesh;
typedef struct ns_cohort ns_cohort;
typedef struct ns_lme_fit ns_lme_fit;

NS_API const char* ns_last_error(void);
NS_API const char* ns_version(void);
NS_API const char* ns_status_name(ns_status status);

// 0 selects all hardware threads. Outputs never depend on this setting.
NS_API void ns_set_threads(int threads);

// ---------------------------------------------------------------- volumes

NS_API ns_status ns_volume_create(const int dims[3], const double spacing[3], const double origin[3],
                                  ns_element_kind kind, const float* data, ns_volume** out);
NS_API ns_status ns_volume_read(const char* header_path, ns_volume** out);
NS_API ns_status ns_volume_write(const ns_volume* volume, const char* header_path);
NS_API void ns_volume_free(ns_volume* volume);

NS_API ns_status ns_volume_info(const ns_volume* volume, int dims[3], double spacing[3], double origin[3],
                                ns_element_kind* kind);
// Copies nx*ny*nz values (x fastest) into `out`, which holds `capacity` floats.
NS_API ns_status ns_volume_copy_data(const ns_volume* volume, float* out, size_t capacity);
NS_API ns_status ns_volume_world_of_voxel(const ns_volume* volume, const int index[3], double world[3]);

// L1 difference (1/N) sum |a - b| in mm.
NS_API ns_status ns_volume_mean_abs_error(const ns_volume* a, const ns_volume* b, double* out);

// ------------------------------------------------------ signed distances

NS_API ns_status ns_sdf_from_mask(const ns_volume* mask, ns_volume** out);
NS_API ns_status ns_sdf_reinitialize(const ns_volume* field, ns_volume** out);

// --------------------------------------------------------- nested layers

typedef struct ns_nesting_report {
  double max_pia_arachnoid;       // max(phi_ara - phi_pia)
  double max_arachnoid_epidural;  // max(phi_epi - phi_ara)
  uint64_t count_pia_arachnoid;
  uint64_t count_arachnoid_epidural;
  uint64_t violating_voxels;
} ns_nesting_report;

// Copies the three volumes. Masks are converted to signed distances.
NS_API ns_status ns_layers_create(const ns_volume* pia, const ns_volume* arachnoid, const ns_volume* epidural,
                                  ns_layers** out);
// Reads a manifest ("pia = ...", "arachnoid = ...", "epidural = ..."); mask
// volumes are converted to signed distances.
NS_API ns_status ns_layers_read(const char* manifest_path, ns_layers** out);
NS_API ns_status ns_layers_write(const ns_layers* layers, const char* out_dir, const char* manifest_name);
NS_API void ns_layers_free(ns_layers* layers);
NS_API ns_status ns_layers_get(const ns_layers* layers, ns_layer which, ns_volume** out);

NS_API ns_status ns_layers_check(const ns_layers* layers, ns_nesting_report* report);
// phi_ara' = min(phi_ara, phi_pia), phi_epi' = min(phi_epi, phi_ara').
NS_API ns_status ns_layers_enforce(const ns_layers* layers, ns_layers** out);
// Re-distances every layer, then restores the ordering with the same clamp.
NS_API ns_status ns_layers_reinitialize(const ns_layers* layers, ns_layers** out);
NS_API ns_status ns_layers_inject_violations(const ns_layers* layers, uint64_t count, double magnitude, uint64_t seed,
                                             ns_layers** out);

// --------------------------------------------------------------- phantom

// Reads a key=value phantom description. Three-layer phantoms fill
// *layers_out and leave *single_out NULL; one-layer and torus phantoms do the
// reverse. A non-NULL seed replaces the corruption seed from the file.
NS_API ns_status ns_phantom_generate(const char* spec_path, const uint64_t* seed, ns_layers** layers_out,
                                     ns_volume** single_out);

// ------------------------------------------------------------------ mesh

typedef struct ns_mesh_report {
  uint64_t vertices;
  uint64_t edges;
  uint64_t faces;
  int64_t euler;
  uint64_t boundary_edges;
  uint64_t nonmanifold_edges;
  double min_triangle_area;
} ns_mesh_report;

NS_API ns_status ns_marching_cubes(const ns_volume* field, double iso, ns_mesh** out);
NS_API ns_status ns_mesh_read(const char* path, ns_mesh** out);
// Format chosen by extension: .obj (ASCII) or .ply (binary little endian).
NS_API ns_status ns_mesh_write(const ns_mesh* mesh, const char* path);
NS_API void ns_mesh_free(ns_mesh* mesh);
NS_API ns_status ns_mesh_diagnostics(const ns_mesh* mesh, ns_mesh_report* report);
NS_API ns_status ns_mesh_counts(const ns_mesh* mesh, size_t* vertices, size_t* triangles);
// Enclosed volume of a closed, outward-oriented mesh in mm^3.
NS_API ns_status ns_mesh_enclosed_volume(const ns_mesh* mesh, double* mm3);

// -------------------------------------------------------------- metrics

typedef struct ns_curvature_summary {
  uint64_t interior_vertices;
  double deficit_sum;
  double mean_density;
  double area_weighted_density;
  double median_gradient;
} ns_curvature_summary;

typedef struct ns_distance_summary {
  double mean;
  double stddev;
  double max;
} ns_distance_summary;

// Per-vertex arrays may be NULL; otherwise they hold vertex-count doubles.
NS_API ns_status ns_mesh_curvature(const ns_mesh* mesh, double* deficit, double* density, double* gradient,
                                   ns_curvature_summary* summary);
NS_API ns_status ns_mesh_write_curvature_csv(const ns_mesh* mesh, const char* csv_path,
                                             ns_curvature_summary* summary);
// points: n x 3 doubles (mm). distances: n doubles.
NS_API ns_status ns_surface_distance(const ns_mesh* mesh, const double* points, size_t n, double* distances);
// Reads "id,x,y,z", writes "id,distance_mm".
NS_API ns_status ns_surface_distance_csv(const ns_mesh* mesh, const char* points_csv, const char* out_csv,
                                         ns_distance_summary* summary);

// ------------------------------------------------------------ volumetry

typedef struct ns_volume_report {
  double icv_cm3;
  double sas_cm3;
  double pia_cm3;
  double arachnoid_cm3;
  double epidural_cm3;
} ns_volume_report;

typedef struct ns_visit_info {
  const char* subject_id;
  int visit_index;
  double interval_years;
  int sex;  // 0 female, 1 male
  double baseline_age;
} ns_visit_info;

// Requires a nested input; meshes each layer at `iso`.
NS_API ns_status ns_measure_layers(const ns_layers* layers, double iso, ns_icv_surface icv, ns_volume_report* report);
// Builds a report from per-layer volumes (mm^3, pia / arachnoid / epidural).
NS_API ns_status ns_volume_report_from_mm3(const double layer_mm3[3], ns_icv_surface icv, ns_volume_report* report);
// Writes the CSV header or one row (no trailing newline) into buf. `needed`
// receives the length excluding the terminator.
NS_API ns_status ns_volume_csv_header(char* buf, size_t capacity, size_t* needed);
NS_API ns_status ns_volume_csv_row(const ns_visit_info* visit, const ns_volume_report* report, char* buf,
                                   size_t capacity, size_t* needed);

// ------------------------------------------------------------------ LME

NS_API ns_status ns_cohort_read(const char* csv_path, ns_cohort** out);
NS_API void ns_cohort_free(ns_cohort* cohort);
NS_API ns_status ns_cohort_size(const ns_cohort* cohort, size_t* rows);

NS_API ns_status ns_lme_fit_cohort(const ns_cohort* cohort, ns_response response, ns_criterion criterion,
                                   ns_lme_fit** out);
NS_API void ns_lme_fit_free(ns_lme_fit* fit);
NS_API ns_status ns_lme_coefficient_count(const ns_lme_fit* fit, size_t* count);
// name receives a pointer owned by the fit.
NS_API ns_status ns_lme_coefficient(const ns_lme_fit* fit, size_t index, const char** name, double* beta,
                                    double* se, double* p);
NS_API ns_status ns_lme_variance(const ns_lme_fit* fit, double* var_intercept, double* var_slope,
                                 double* cov_intercept_slope, double* residual, double* log_likelihood);

// Strings returned here are released with ns_string_free.
NS_API ns_status ns_lme_report_text(const ns_lme_fit* icv, const ns_lme_fit* sas, double alpha, char** out);
NS_API ns_status ns_lme_report_csv(const ns_lme_fit* icv, const ns_lme_fit* sas, double alpha, char** out);
NS_API ns_status ns_lme_trajectory_csv(const ns_cohort* cohort, const ns_lme_fit* fit, ns_response response,
                                       char** out);
NS_API void ns_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif  // NESTEDSURF_H
