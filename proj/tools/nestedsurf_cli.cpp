// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0

// nestedsurf-cli: file-passing front end over the C API.

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nestedsurf/nestedsurf.h"

namespace fs = std::filesystem;

namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

struct DataError {
  std::string message;
};

void check(ns_status s, const std::string& context) {
  if (s != NS_OK) throw DataError{context + ": " + ns_last_error()};
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Volume = std::unique_ptr<ns_volume, Deleter<ns_volume, ns_volume_free>>;
using Layers = std::unique_ptr<ns_layers, Deleter<ns_layers, ns_layers_free>>;
using Mesh = std::unique_ptr<ns_mesh, Deleter<ns_mesh, ns_mesh_free>>;
using Cohort = std::unique_ptr<ns_cohort, Deleter<ns_cohort, ns_cohort_free>>;
using Fit = std::unique_ptr<ns_lme_fit, Deleter<ns_lme_fit, ns_lme_fit_free>>;

struct CString {
  char* p = nullptr;
  ~CString() { ns_string_free(p); }
};

std::string real(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError{"cannot write " + path.string()};
  out << text;
  if (!out) throw DataError{"cannot write " + path.string()};
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError{"cannot create " + dir.string() + ": " + ec.message()};
}

const char* const kLayerFile[3] = {"pia", "arachnoid", "epidural"};

Volume read_volume(const std::string& path) {
  ns_volume* v = nullptr;
  check(ns_volume_read(path.c_str(), &v), path);
  return Volume(v);
}

Layers read_layers(const std::string& manifest) {
  ns_layers* l = nullptr;
  check(ns_layers_read(manifest.c_str(), &l), manifest);
  return Layers(l);
}

Layers enforce(const ns_layers* in, ns_nesting_report* before) {
  check(ns_layers_check(in, before), "nesting check");
  ns_layers* out = nullptr;
  check(ns_layers_enforce(in, &out), "enforce nesting");
  return Layers(out);
}

Layers reinitialize(const ns_layers* in) {
  ns_layers* out = nullptr;
  check(ns_layers_reinitialize(in, &out), "reinitialize");
  return Layers(out);
}

Mesh mesh_of(const ns_volume* field, double iso, const std::string& what) {
  ns_mesh* m = nullptr;
  check(ns_marching_cubes(field, iso, &m), what);
  return Mesh(m);
}

Volume layer(const ns_layers* l, int i) {
  ns_volume* v = nullptr;
  check(ns_layers_get(l, static_cast<ns_layer>(i), &v), kLayerFile[i]);
  return Volume(v);
}

std::string nesting_text(const char* stage, const ns_nesting_report& r) {
  return std::string(stage) + "_violations=" + std::to_string(r.count_pia_arachnoid + r.count_arachnoid_epidural) +
         "\n" + stage + "_pia_arachnoid=" + std::to_string(r.count_pia_arachnoid) + "\n" + stage +
         "_arachnoid_epidural=" + std::to_string(r.count_arachnoid_epidural) + "\n" + stage +
         "_violating_voxels=" + std::to_string(r.violating_voxels) + "\n" + stage +
         "_max_pia_arachnoid=" + real(r.max_pia_arachnoid) + "\n" + stage +
         "_max_arachnoid_epidural=" + real(r.max_arachnoid_epidural) + "\n";
}

struct Visit {
  std::string subject = "subject";
  int index = 0;
  double interval = 0;
  int sex = 0;
  double age = 0;

  void add_options(CLI::App* app) {
    app->add_option("--subject", subject, "subject id");
    app->add_option("--visit", index, "visit index");
    app->add_option("--interval", interval, "years since first visit");
    app->add_option("--sex", sex, "0 female, 1 male")->check(CLI::Range(0, 1));
    app->add_option("--age", age, "baseline age (years)");
  }
};

std::string csv_line(ns_status (*fill)(char*, size_t, size_t*)) {
  size_t n = 0;
  check(fill(nullptr, 0, &n), "csv");
  std::string s(n + 1, '\0');
  check(fill(s.data(), s.size(), &n), "csv");
  s.resize(n);
  return s;
}

std::string volume_csv(const Visit& v, const ns_volume_report& r) {
  const ns_visit_info info{v.subject.c_str(), v.index, v.interval, v.sex, v.age};
  size_t n = 0;
  check(ns_volume_csv_row(&info, &r, nullptr, 0, &n), "csv");
  std::string row(n + 1, '\0');
  check(ns_volume_csv_row(&info, &r, row.data(), row.size(), &n), "csv");
  row.resize(n);
  return csv_line(ns_volume_csv_header) + "\n" + row + "\n";
}

void emit_volume_csv(const std::string& csv, const std::string& out) {
  if (out.empty() || out == "-")
    std::cout << csv;
  else
    write_text(out, csv);
}

double enclosed(const ns_mesh* m, const std::string& what) {
  double v = 0;
  check(ns_mesh_enclosed_volume(m, &v), what);
  return v;
}

ns_volume_report report_from(const double mm3[3], ns_icv_surface icv) {
  ns_volume_report r{};
  check(ns_volume_report_from_mm3(mm3, icv, &r), "volume report");
  return r;
}

void print_mesh_diagnostics(const std::string& name, const ns_mesh* m) {
  ns_mesh_report d{};
  check(ns_mesh_diagnostics(m, &d), name);
  std::cerr << name << ": " << d.vertices << " vertices, " << d.faces << " triangles, euler " << d.euler
            << ", boundary edges " << d.boundary_edges << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nested meningeal surfaces: signed distances, nesting, meshing, metrics, volumetry, LME"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(ns_version()));

  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = all cores)")
      ->envname("NESTEDSURF_THREADS")
      ->check(CLI::NonNegativeNumber);

  double iso = 0;
  bool reinit = false;
  std::string icv_name = "epidural";
  const std::map<std::string, ns_icv_surface> icv_map{{"epidural", NS_ICV_EPIDURAL}, {"arachnoid", NS_ICV_ARACHNOID}};
  auto add_iso = [&](CLI::App* sub) { sub->add_option("--iso", iso, "iso level (mm)"); };
  auto add_reinit = [&](CLI::App* sub) { sub->add_flag("--reinit", reinit, "re-distance fields before use"); };
  auto add_icv = [&](CLI::App* sub) {
    sub->add_option("--icv-surface", icv_name, "surface bounding ICV")
        ->check(CLI::IsMember({"epidural", "arachnoid"}));
  };

  // phantom
  auto* phantom = app.add_subcommand("phantom", "generate analytic phantom volumes");
  std::string spec_path, out_dir;
  std::optional<std::uint64_t> seed;
  phantom->add_option("--spec", spec_path, "phantom description")->required();
  phantom->add_option("--out-dir", out_dir, "output directory")->required();
  phantom->add_option("--seed", seed, "corruption seed (overrides the spec)");

  // sdf
  auto* sdf = app.add_subcommand("sdf", "binary mask to signed distance volume");
  std::string in_path, out_path;
  sdf->add_option("--in", in_path, "mask (or field with --reinit)")->required();
  sdf->add_option("--out", out_path, "output volume header")->required();
  add_reinit(sdf);

  // nest
  auto* nest = app.add_subcommand("nest", "enforce pia >= arachnoid >= epidural ordering");
  std::string manifest, pia_path, ara_path, epi_path, report_path;
  std::uint64_t inject = 0;
  double magnitude = 1.0;
  auto* nest_manifest = nest->add_option("--manifest", manifest, "input layer manifest");
  auto* nest_pia = nest->add_option("--pia", pia_path, "pia volume");
  auto* nest_ara = nest->add_option("--arachnoid", ara_path, "arachnoid volume");
  auto* nest_epi = nest->add_option("--epidural", epi_path, "epidural volume");
  nest_pia->needs(nest_ara, nest_epi)->excludes(nest_manifest);
  nest_ara->needs(nest_pia);
  nest_epi->needs(nest_pia);
  nest->add_option("--out-dir", out_dir, "output directory")->required();
  nest->add_option("--report", report_path, "write the violation report here as well");
  nest->add_option("--inject", inject, "inject this many violations before enforcing");
  nest->add_option("--magnitude", magnitude, "injected violation size (mm)")->check(CLI::PositiveNumber);
  nest->add_option("--seed", seed, "injection seed");
  add_reinit(nest);

  // mesh
  auto* mesh = app.add_subcommand("mesh", "extract an isosurface (OBJ or PLY)");
  mesh->add_option("--in", in_path, "signed distance volume (masks are converted)")->required();
  mesh->add_option("--out", out_path, "output .obj or .ply")->required();
  add_iso(mesh);
  add_reinit(mesh);

  // metrics
  auto* metrics = app.add_subcommand("metrics", "curvature and surface-distance metrics");
  std::string mesh_path, points_path;
  metrics->add_option("--mesh", mesh_path, "input mesh")->required();
  metrics->add_option("--points", points_path, "CSV of reference points (id,x,y,z)");
  metrics->add_option("--out-dir", out_dir, "output directory")->required();

  // volume
  auto* volume = app.add_subcommand("volume", "ICV / SAS volume CSV");
  std::string pia_mesh, ara_mesh, epi_mesh, csv_out;
  Visit visit;
  auto* vol_manifest = volume->add_option("--manifest", manifest, "nested layer manifest");
  auto* vol_pia = volume->add_option("--pia-mesh", pia_mesh, "pia mesh");
  auto* vol_ara = volume->add_option("--arachnoid-mesh", ara_mesh, "arachnoid mesh");
  auto* vol_epi = volume->add_option("--epidural-mesh", epi_mesh, "epidural mesh");
  vol_pia->needs(vol_ara, vol_epi)->excludes(vol_manifest);
  vol_ara->needs(vol_pia);
  vol_epi->needs(vol_pia);
  volume->add_option("--out", csv_out, "output CSV (default standard output)");
  visit.add_options(volume);
  add_iso(volume);
  add_icv(volume);

  // lme
  auto* lme = app.add_subcommand("lme", "longitudinal mixed-effects analysis of a volume cohort");
  std::string cohort_path, criterion_name = "reml";
  double alpha = 0.05;
  lme->add_option("--cohort", cohort_path, "cohort CSV")->required();
  lme->add_option("--out-dir", out_dir, "output directory")->required();
  lme->add_option("--criterion", criterion_name, "reml or ml")->check(CLI::IsMember({"reml", "ml"}));
  lme->add_option("--alpha", alpha, "significance level")->check(CLI::Range(0.0, 1.0));

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "nest, mesh and measure a layer manifest in one pass");
  pipeline->add_option("--manifest", manifest, "layer manifest (masks or signed distances)")->required();
  pipeline->add_option("--out-dir", out_dir, "output directory")->required();
  visit.add_options(pipeline);
  add_iso(pipeline);
  add_icv(pipeline);
  add_reinit(pipeline);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageError;
  }
  if ((nest->parsed() && manifest.empty() && pia_path.empty()) ||
      (volume->parsed() && manifest.empty() && pia_mesh.empty())) {
    std::cerr << "error: give either --manifest or all three layer inputs\n";
    return kUsageError;
  }

  ns_set_threads(threads);
  const ns_icv_surface icv = icv_map.at(icv_name);

  try {
    if (phantom->parsed()) {
      ns_layers* l = nullptr;
      ns_volume* v = nullptr;
      const std::uint64_t seed_value = seed.value_or(0);
      check(ns_phantom_generate(spec_path.c_str(), seed ? &seed_value : nullptr, &l, &v), spec_path);
      Layers layers(l);
      Volume single(v);
      ensure_dir(out_dir);
      if (layers) {
        check(ns_layers_write(layers.get(), out_dir.c_str(), "nested.manifest"), out_dir);
      } else {
        const auto path = (fs::path(out_dir) / "phantom.mhd").string();
        check(ns_volume_write(single.get(), path.c_str()), path);
      }
    } else if (sdf->parsed()) {
      Volume in = read_volume(in_path);
      ns_element_kind kind{};
      check(ns_volume_info(in.get(), nullptr, nullptr, nullptr, &kind), in_path);
      ns_volume* out = nullptr;
      if (kind == NS_MASK) {
        check(ns_sdf_from_mask(in.get(), &out), in_path);
        in.reset(out);
      } else if (!reinit) {
        throw DataError{in_path + ": not a binary mask (use --reinit to re-distance a field)"};
      }
      if (reinit) {
        check(ns_sdf_reinitialize(in.get(), &out), in_path);
        in.reset(out);
      }
      check(ns_volume_write(in.get(), out_path.c_str()), out_path);
    } else if (nest->parsed()) {
      Layers layers;
      if (!manifest.empty()) {
        layers = read_layers(manifest);
      } else {
        Volume p = read_volume(pia_path), a = read_volume(ara_path), e = read_volume(epi_path);
        ns_layers* l = nullptr;
        check(ns_layers_create(p.get(), a.get(), e.get(), &l), "layers");
        layers.reset(l);
      }
      if (inject > 0) {
        ns_layers* l = nullptr;
        check(ns_layers_inject_violations(layers.get(), inject, magnitude, seed.value_or(0), &l), "inject");
        layers.reset(l);
      }
      ns_nesting_report before{}, after{};
      Layers nested = enforce(layers.get(), &before);
      if (reinit) nested = reinitialize(nested.get());
      check(ns_layers_check(nested.get(), &after), "nesting check");
      ensure_dir(out_dir);
      check(ns_layers_write(nested.get(), out_dir.c_str(), "nested.manifest"), out_dir);
      const std::string report = nesting_text("before", before) + nesting_text("after", after);
      std::cout << report;
      if (!report_path.empty()) write_text(report_path, report);
    } else if (mesh->parsed()) {
      Volume field = read_volume(in_path);
      if (reinit) {
        ns_volume* out = nullptr;
        check(ns_sdf_reinitialize(field.get(), &out), in_path);
        field.reset(out);
      }
      Mesh m = mesh_of(field.get(), iso, in_path);
      check(ns_mesh_write(m.get(), out_path.c_str()), out_path);
      print_mesh_diagnostics(out_path, m.get());
    } else if (metrics->parsed()) {
      Mesh m;
      {
        ns_mesh* p = nullptr;
        check(ns_mesh_read(mesh_path.c_str(), &p), mesh_path);
        m.reset(p);
      }
      ensure_dir(out_dir);
      ns_curvature_summary cs{};
      const auto curv = (fs::path(out_dir) / "curvature.csv").string();
      check(ns_mesh_write_curvature_csv(m.get(), curv.c_str(), &cs), mesh_path);
      std::string line = "median_cg=" + real(cs.median_gradient) + ",mean_k_density=" + real(cs.mean_density) +
                         ",surface_mean_k_density=" + real(cs.area_weighted_density) +
                         ",deficit_sum=" + real(cs.deficit_sum);
      if (!points_path.empty()) {
        ns_distance_summary ds{};
        const auto dist = (fs::path(out_dir) / "distance.csv").string();
        check(ns_surface_distance_csv(m.get(), points_path.c_str(), dist.c_str(), &ds), points_path);
        line += ",sd_mean_mm=" + real(ds.mean) + ",sd_std_mm=" + real(ds.stddev) + ",sd_max_mm=" + real(ds.max);
      }
      line += "\n";
      std::cout << line;
      write_text(fs::path(out_dir) / "summary.txt", line);
    } else if (volume->parsed()) {
      ns_volume_report r{};
      if (!manifest.empty()) {
        Layers layers = read_layers(manifest);
        check(ns_measure_layers(layers.get(), iso, icv, &r), manifest);
      } else {
        double mm3[3];
        const std::string* paths[3] = {&pia_mesh, &ara_mesh, &epi_mesh};
        for (int i = 0; i < 3; ++i) {
          ns_mesh* p = nullptr;
          check(ns_mesh_read(paths[i]->c_str(), &p), *paths[i]);
          Mesh m(p);
          mm3[i] = enclosed(m.get(), *paths[i]);
        }
        r = report_from(mm3, icv);
      }
      emit_volume_csv(volume_csv(visit, r), csv_out);
    } else if (lme->parsed()) {
      Cohort cohort;
      {
        ns_cohort* c = nullptr;
        check(ns_cohort_read(cohort_path.c_str(), &c), cohort_path);
        cohort.reset(c);
      }
      const ns_criterion criterion = criterion_name == "ml" ? NS_ML : NS_REML;
      ns_lme_fit *fi = nullptr, *fs_ = nullptr;
      check(ns_lme_fit_cohort(cohort.get(), NS_RESPONSE_ICV, criterion, &fi), "ICV model");
      Fit icv_fit(fi);
      check(ns_lme_fit_cohort(cohort.get(), NS_RESPONSE_SAS, criterion, &fs_), "SAS model");
      Fit sas_fit(fs_);
      ensure_dir(out_dir);
      CString text, csv, tri, trs;
      check(ns_lme_report_text(icv_fit.get(), sas_fit.get(), alpha, &text.p), "report");
      check(ns_lme_report_csv(icv_fit.get(), sas_fit.get(), alpha, &csv.p), "report");
      check(ns_lme_trajectory_csv(cohort.get(), icv_fit.get(), NS_RESPONSE_ICV, &tri.p), "trajectory");
      check(ns_lme_trajectory_csv(cohort.get(), sas_fit.get(), NS_RESPONSE_SAS, &trs.p), "trajectory");
      const fs::path dir(out_dir);
      write_text(dir / "lme_report.txt", text.p);
      write_text(dir / "lme_report.csv", csv.p);
      write_text(dir / "trajectory_icv.csv", tri.p);
      write_text(dir / "trajectory_sas.csv", trs.p);
      std::cout << text.p;
    } else if (pipeline->parsed()) {
      Layers layers = read_layers(manifest);
      ns_nesting_report before{};
      Layers nested = enforce(layers.get(), &before);
      if (before.count_pia_arachnoid + before.count_arachnoid_epidural > 0)
        std::cerr << "nesting: corrected " << before.violating_voxels << " voxels\n";
      if (reinit) nested = reinitialize(nested.get());
      ensure_dir(out_dir);
      double mm3[3];
      for (int i = 0; i < 3; ++i) {
        Volume field = layer(nested.get(), i);
        Mesh m = mesh_of(field.get(), iso, kLayerFile[i]);
        const auto path = (fs::path(out_dir) / (std::string(kLayerFile[i]) + ".obj")).string();
        check(ns_mesh_write(m.get(), path.c_str()), path);
        mm3[i] = enclosed(m.get(), std::string(kLayerFile[i]) + " surface");
      }
      write_text(fs::path(out_dir) / "volumes.csv", volume_csv(visit, report_from(mm3, icv)));
    }
  } catch (const DataError& e) {
    std::cerr << "error: " << e.message << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return 0;
}
