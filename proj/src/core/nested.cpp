// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0
#include "nested.hpp"

#include <algorithm>
#include <fstream>

#include "error.hpp"
#include "keyvalue.hpp"
#include "parallel.hpp"

namespace nestedsurf {

const VoxelGrid& LayerTriple::operator[](Layer l) const {
  switch (l) {
    case Layer::Pia: return pia;
    case Layer::Arachnoid: return arachnoid;
    default: return epidural;
  }
}

VoxelGrid& LayerTriple::operator[](Layer l) {
  return const_cast<VoxelGrid&>(static_cast<const LayerTriple&>(*this)[l]);
}

void LayerTriple::require_shared_geometry() const {
  if (!pia.same_geometry(arachnoid) || !pia.same_geometry(epidural))
    throw Error(ErrorKind::Geometry, "layer grids differ in dims, spacing or origin");
}

NestingReport check_nesting(const LayerTriple& layers) {
  layers.require_shared_geometry();
  const auto p = layers.pia.data(), a = layers.arachnoid.data(), e = layers.epidural.data();
  NestingReport r;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double g1 = static_cast<double>(a[i]) - p[i];
    const double g2 = static_cast<double>(e[i]) - a[i];
    bool bad = false;
    if (g1 > 0) {
      ++r.count_pia_arachnoid;
      r.max_pia_arachnoid = std::max(r.max_pia_arachnoid, g1);
      bad = true;
    }
    if (g2 > 0) {
      ++r.count_arachnoid_epidural;
      r.max_arachnoid_epidural = std::max(r.max_arachnoid_epidural, g2);
      bad = true;
    }
    if (bad) ++r.violating_voxels;
  }
  return r;
}

NestedSdfSet NestedSdfSet::adopt(LayerTriple layers) {
  const auto r = check_nesting(layers);
  if (r.total() != 0)
    throw Error(ErrorKind::Geometry,
                "layers violate nesting at " + std::to_string(r.violating_voxels) + " voxels");
  return NestedSdfSet(std::move(layers));
}

NestedSdfSet enforce_nesting(LayerTriple layers) {
  layers.require_shared_geometry();
  for (Layer l : {Layer::Pia, Layer::Arachnoid, Layer::Epidural})
    if (layers[l].kind() != ElementKind::RealField)
      throw Error(ErrorKind::InvalidArgument, "nesting needs signed distance fields, got a mask");
  const auto p = layers.pia.data();
  auto a = layers.arachnoid.data();
  auto e = layers.epidural.data();
  parallel_for(p.size(), [&](std::size_t b, std::size_t end) {
    for (std::size_t i = b; i < end; ++i) {
      a[i] = std::min(a[i], p[i]);
      e[i] = std::min(e[i], a[i]);
    }
  });
  return NestedSdfSet(std::move(layers));
}

LayerTriple read_layers(const std::filesystem::path& manifest) {
  const auto kv = KeyValueFile::load(manifest);
  const auto dir = manifest.parent_path();
  LayerTriple t{read_volume(dir / kv.require("pia")), read_volume(dir / kv.require("arachnoid")),
                read_volume(dir / kv.require("epidural"))};
  t.require_shared_geometry();
  return t;
}

void write_layers(const LayerTriple& layers, const std::filesystem::path& out_dir, const std::string& manifest_name) {
  layers.require_shared_geometry();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  std::string text;
  for (Layer l : {Layer::Pia, Layer::Arachnoid, Layer::Epidural}) {
    const std::string name{kLayerNames[static_cast<int>(l)]};
    write_volume(layers[l], out_dir / (name + ".mhd"));
    text += name + " = " + name + ".mhd\n";
  }
  std::ofstream out(out_dir / manifest_name, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write manifest in '" + out_dir.string() + "'");
  out << text;
}

}  // namespace nestedsurf
