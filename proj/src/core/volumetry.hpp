// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>

#include "mesh.hpp"
#include "nested.hpp"

namespace nestedsurf {

// Signed sum of origin tetrahedra, (1/6) sum det(v1, v2, v3), in mm^3.
double signed_volume(const TriangleMesh& mesh);

// Volume of a closed, outward-oriented mesh (mm^3). Throws Geometry for an
// open mesh or a negative signed sum (inverted orientation).
double enclosed_volume(const TriangleMesh& mesh);

enum class IcvSurface { Epidural, Arachnoid };

struct VolumeReport {
  double icv_cm3 = 0;
  double sas_cm3 = 0;
  std::array<double, 3> layer_cm3{};  // pia, arachnoid, epidural
};

// Builds the report from per-layer volumes in mm^3.
VolumeReport make_volume_report(const std::array<double, 3>& layer_mm3, IcvSurface icv = IcvSurface::Epidural);

// Meshes every layer at `iso` and measures it.
VolumeReport measure_nested(const NestedSdfSet& set, double iso = 0.0, IcvSurface icv = IcvSurface::Epidural);

struct VisitInfo {
  std::string subject_id = "subject";
  int visit_index = 0;
  double interval_years = 0;
  int sex = 0;  // 0 female, 1 male
  double baseline_age = 0;
};

inline constexpr const char* kVolumeCsvHeader =
    "subject_id,visit_index,interval_years,sex,baseline_age,icv_cm3,sas_cm3,pia_cm3,ara_cm3,epi_cm3";

// One CSV row (no newline); volumes with three decimals.
std::string volume_csv_row(const VisitInfo& visit, const VolumeReport& report);

}  // namespace nestedsurf
