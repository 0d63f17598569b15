// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0
#include "grid.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "error.hpp"
#include "keyvalue.hpp"

namespace nestedsurf {

namespace {

std::size_t voxel_count(const Index3& d) {
  return static_cast<std::size_t>(d[0]) * static_cast<std::size_t>(d[1]) * static_cast<std::size_t>(d[2]);
}

void validate(const Index3& dims, const Vec3& spacing) {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] <= 0) throw Error(ErrorKind::InvalidArgument, "grid dimensions must be positive");
    if (!(spacing[a] > 0) || !std::isfinite(spacing[a]))
      throw Error(ErrorKind::InvalidArgument, "grid spacing must be strictly positive");
  }
}

std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

}  // namespace

VoxelGrid::VoxelGrid(Index3 dims, Vec3 spacing, Vec3 origin, ElementKind kind)
    : dims_(dims), spacing_(spacing), origin_(origin), kind_(kind) {
  validate(dims, spacing);
  data_.assign(voxel_count(dims), 0.0f);
}

VoxelGrid::VoxelGrid(Index3 dims, Vec3 spacing, Vec3 origin, ElementKind kind, std::vector<float> data)
    : dims_(dims), spacing_(spacing), origin_(origin), kind_(kind), data_(std::move(data)) {
  validate(dims, spacing);
  if (data_.size() != voxel_count(dims))
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("grid data length {} does not match dims {}x{}x{}", data_.size(), dims[0], dims[1], dims[2]));
  if (kind == ElementKind::BinaryMask &&
      std::any_of(data_.begin(), data_.end(), [](float v) { return v != 0.0f && v != 1.0f; }))
    throw Error(ErrorKind::InvalidArgument, "binary mask contains values other than 0 and 1");
}

bool VoxelGrid::contains(Index3 i) const noexcept {
  for (int a = 0; a < 3; ++a)
    if (i[a] < 0 || i[a] >= dims_[a]) return false;
  return true;
}

Vec3 VoxelGrid::world_of_voxel(Index3 index) const {
  if (!contains(index))
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("voxel index ({}, {}, {}) outside grid", index[0], index[1], index[2]));
  return {origin_.x + index[0] * spacing_.x, origin_.y + index[1] * spacing_.y, origin_.z + index[2] * spacing_.z};
}

Index3 VoxelGrid::voxel_of_world(Vec3 p) const noexcept {
  Index3 out;
  for (int a = 0; a < 3; ++a) out[a] = static_cast<int>(std::lround((p[a] - origin_[a]) / spacing_[a]));
  return out;
}

bool VoxelGrid::same_geometry(const VoxelGrid& other) const noexcept {
  return dims_ == other.dims_ && spacing_ == other.spacing_ && origin_ == other.origin_;
}

std::string format_real(double v) {
  std::string s = fmt::format("{}", v);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

VoxelGrid read_volume(const std::filesystem::path& header) {
  const KeyValueFile kv = KeyValueFile::load(header);
  const std::string src = header.string();

  if (kv.has("NDims") && kv.integer("NDims") != 3) throw Error(ErrorKind::Format, src + ": only NDims = 3 is supported");

  auto triple = [&](const char* key) {
    auto v = kv.reals(key);
    if (v.size() != 3) throw Error(ErrorKind::Format, src + ": field '" + key + "' needs three values");
    return v;
  };
  const auto d = triple("DimSize");
  Index3 dims{};
  for (int a = 0; a < 3; ++a) {
    if (d[a] != std::floor(d[a]) || d[a] < 1 || d[a] > 1 << 20)
      throw Error(ErrorKind::Format, src + ": DimSize must hold positive integers");
    dims[a] = static_cast<int>(d[a]);
  }
  const auto s = triple("ElementSpacing");
  const Vec3 spacing{s[0], s[1], s[2]};
  if (!(spacing.x > 0 && spacing.y > 0 && spacing.z > 0))
    throw Error(ErrorKind::Format, src + ": ElementSpacing must be strictly positive");
  Vec3 origin{};
  if (kv.has("Offset")) {
    const auto o = triple("Offset");
    origin = {o[0], o[1], o[2]};
  } else if (kv.has("Origin")) {
    const auto o = triple("Origin");
    origin = {o[0], o[1], o[2]};
  } else {
    throw Error(ErrorKind::Format, src + ": missing field 'Offset'");
  }

  const std::string type = kv.require("ElementType");
  ElementKind kind;
  std::size_t elem_size;
  if (type == "MET_UCHAR") {
    kind = ElementKind::BinaryMask;
    elem_size = 1;
  } else if (type == "MET_FLOAT") {
    kind = ElementKind::RealField;
    elem_size = 4;
  } else {
    throw Error(ErrorKind::Format, src + ": unsupported ElementType '" + type + "'");
  }
  bool msb = false;
  if (auto order = kv.get("BinaryDataByteOrderMSB")) msb = (*order == "True" || *order == "true");
  if (auto order = kv.get("ElementByteOrderMSB")) msb = (*order == "True" || *order == "true");

  const std::string data_file = kv.require("ElementDataFile");
  if (data_file == "LOCAL" || data_file == "LIST")
    throw Error(ErrorKind::Format, src + ": ElementDataFile must name a separate raw file");
  const auto raw_path = header.parent_path() / data_file;

  std::ifstream in(raw_path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open raw file '" + raw_path.string() + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t n = voxel_count(dims);
  if (bytes.size() != n * elem_size)
    throw Error(ErrorKind::Format, fmt::format("{}: raw size mismatch, expected {} bytes for {}x{}x{} but found {}",
                                               raw_path.string(), n * elem_size, dims[0], dims[1], dims[2],
                                               bytes.size()));

  std::vector<float> data(n);
  if (kind == ElementKind::BinaryMask) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto b = static_cast<unsigned char>(bytes[i]);
      if (b > 1) throw Error(ErrorKind::Format, src + ": MET_UCHAR mask holds values other than 0 and 1");
      data[i] = static_cast<float>(b);
    }
  } else {
    const bool swap = msb == (std::endian::native == std::endian::little);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t w;
      std::memcpy(&w, bytes.data() + 4 * i, 4);
      if (swap) w = byteswap32(w);
      data[i] = std::bit_cast<float>(w);
    }
  }
  return VoxelGrid(dims, spacing, origin, kind, std::move(data));
}

void write_volume(const VoxelGrid& grid, const std::filesystem::path& header) {
  const bool mask = grid.kind() == ElementKind::BinaryMask;
  auto raw_name = header.stem().string() + ".raw";
  const auto raw_path = header.parent_path() / raw_name;

  const auto& d = grid.dims();
  const auto& s = grid.spacing();
  const auto& o = grid.origin();
  std::string text;
  text += "ObjectType = Image\n";
  text += "NDims = 3\n";
  text += "BinaryData = True\n";
  text += "BinaryDataByteOrderMSB = False\n";
  text += fmt::format("DimSize = {} {} {}\n", d[0], d[1], d[2]);
  text += fmt::format("ElementSpacing = {} {} {}\n", format_real(s.x), format_real(s.y), format_real(s.z));
  text += fmt::format("Offset = {} {} {}\n", format_real(o.x), format_real(o.y), format_real(o.z));
  text += fmt::format("ElementType = {}\n", mask ? "MET_UCHAR" : "MET_FLOAT");
  text += fmt::format("ElementDataFile = {}\n", raw_name);

  std::vector<char> bytes;
  const auto values = grid.data();
  if (mask) {
    bytes.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) bytes[i] = static_cast<char>(values[i] != 0.0f ? 1 : 0);
  } else {
    bytes.resize(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
      auto w = std::bit_cast<std::uint32_t>(values[i]);
      if constexpr (std::endian::native == std::endian::big) w = byteswap32(w);
      std::memcpy(bytes.data() + 4 * i, &w, 4);
    }
  }

  std::ofstream hdr(header, std::ios::binary | std::ios::trunc);
  if (!hdr) throw Error(ErrorKind::Io, "cannot write '" + header.string() + "'");
  hdr << text;
  std::ofstream raw(raw_path, std::ios::binary | std::ios::trunc);
  if (!raw) throw Error(ErrorKind::Io, "cannot write '" + raw_path.string() + "'");
  raw.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!hdr || !raw) throw Error(ErrorKind::Io, "write failed for '" + header.string() + "'");
}

}  // namespace nestedsurf
