// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0
#include "mesh.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "error.hpp"
#include "keyvalue.hpp"

namespace nestedsurf {

double triangle_area(const TriangleMesh& mesh, const Triangle& t) {
  const Vec3 a = mesh.vertices[t[0]], b = mesh.vertices[t[1]], c = mesh.vertices[t[2]];
  return 0.5 * norm(cross(b - a, c - a));
}

MeshDiagnostics mesh_diagnostics(const TriangleMesh& mesh) {
  MeshDiagnostics d;
  d.vertices = mesh.vertices.size();
  d.faces = mesh.triangles.size();

  std::vector<std::uint64_t> edges;
  edges.reserve(3 * mesh.triangles.size());
  double min_area = std::numeric_limits<double>::infinity();
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      std::uint64_t a = t[k], b = t[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      edges.push_back((a << 32) | b);
    }
    min_area = std::min(min_area, triangle_area(mesh, t));
  }
  std::sort(edges.begin(), edges.end());
  for (std::size_t i = 0; i < edges.size();) {
    std::size_t j = i;
    while (j < edges.size() && edges[j] == edges[i]) ++j;
    ++d.edges;
    if (j - i == 1) ++d.boundary_edges;
    if (j - i > 2) ++d.nonmanifold_edges;
    i = j;
  }
  d.euler = static_cast<long long>(d.vertices) - static_cast<long long>(d.edges) + static_cast<long long>(d.faces);
  d.min_triangle_area = mesh.triangles.empty() ? 0.0 : min_area;
  return d;
}

void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::string out;
  out.reserve(mesh.vertices.size() * 40 + mesh.triangles.size() * 24);
  for (const auto& v : mesh.vertices) fmt::format_to(std::back_inserter(out), "v {} {} {}\n", v.x, v.y, v.z);
  for (const auto& t : mesh.triangles)
    fmt::format_to(std::back_inserter(out), "f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

namespace {

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts need byte swapping here");
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get_le(const char*& p, const char* end, const std::string& src) {
  if (end - p < static_cast<std::ptrdiff_t>(sizeof(T))) throw Error(ErrorKind::Format, src + ": truncated PLY body");
  T v;
  std::memcpy(&v, p, sizeof(T));
  p += sizeof(T);
  return v;
}

void check_indices(const TriangleMesh& m, const std::string& src) {
  for (const auto& t : m.triangles)
    for (auto i : t)
      if (i >= m.vertices.size()) throw Error(ErrorKind::Format, src + ": face index out of range");
}

TriangleMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  TriangleMesh m;
  std::string line;
  const std::string src = path.string();
  while (std::getline(in, line)) {
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks[0] == "v") {
      if (toks.size() < 4) throw Error(ErrorKind::Format, src + ": vertex needs three coordinates");
      m.vertices.push_back({parse_real(toks[1], src), parse_real(toks[2], src), parse_real(toks[3], src)});
    } else if (toks[0] == "f") {
      if (toks.size() != 4) throw Error(ErrorKind::Format, src + ": only triangular faces are supported");
      Triangle t;
      for (int k = 0; k < 3; ++k) {
        // "i", "i/t", "i/t/n"
        const auto idx = parse_integer(toks[k + 1].substr(0, toks[k + 1].find('/')), src);
        if (idx < 1) throw Error(ErrorKind::Format, src + ": face indices are 1-based positive integers");
        t[k] = static_cast<std::uint32_t>(idx - 1);
      }
      m.triangles.push_back(t);
    }
  }
  check_indices(m, src);
  return m;
}

TriangleMesh read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  const std::string src = path.string();
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto end_hdr = bytes.find("end_header\n");
  if (bytes.rfind("ply", 0) != 0 || end_hdr == std::string::npos)
    throw Error(ErrorKind::Format, src + ": not a PLY file");

  std::istringstream hdr(bytes.substr(0, end_hdr));
  std::string line, format;
  std::size_t nv = 0, nf = 0;
  while (std::getline(hdr, line)) {
    auto toks = split_ws(line);
    if (toks.size() >= 2 && toks[0] == "format") format = toks[1];
    if (toks.size() == 3 && toks[0] == "element" && toks[1] == "vertex")
      nv = static_cast<std::size_t>(parse_integer(toks[2], src));
    if (toks.size() == 3 && toks[0] == "element" && toks[1] == "face")
      nf = static_cast<std::size_t>(parse_integer(toks[2], src));
  }
  TriangleMesh m;
  m.vertices.reserve(nv);
  m.triangles.reserve(nf);
  const std::size_t body = end_hdr + std::string("end_header\n").size();
  if (format == "binary_little_endian") {
    const char* p = bytes.data() + body;
    const char* end = bytes.data() + bytes.size();
    for (std::size_t i = 0; i < nv; ++i) {
      const float x = get_le<float>(p, end, src), y = get_le<float>(p, end, src), z = get_le<float>(p, end, src);
      m.vertices.push_back({x, y, z});
    }
    for (std::size_t i = 0; i < nf; ++i) {
      if (get_le<std::uint8_t>(p, end, src) != 3) throw Error(ErrorKind::Format, src + ": non-triangular face");
      Triangle t;
      for (auto& idx : t) {
        const auto v = get_le<std::int32_t>(p, end, src);
        if (v < 0) throw Error(ErrorKind::Format, src + ": negative face index");
        idx = static_cast<std::uint32_t>(v);
      }
      m.triangles.push_back(t);
    }
  } else if (format == "ascii") {
    std::istringstream rest(bytes.substr(body));
    for (std::size_t i = 0; i < nv; ++i) {
      Vec3 v;
      if (!(rest >> v.x >> v.y >> v.z)) throw Error(ErrorKind::Format, src + ": truncated vertex list");
      m.vertices.push_back(v);
    }
    for (std::size_t i = 0; i < nf; ++i) {
      int n = 0;
      long long a, b, c;
      if (!(rest >> n >> a >> b >> c) || n != 3 || a < 0 || b < 0 || c < 0)
        throw Error(ErrorKind::Format, src + ": malformed face list");
      m.triangles.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(c)});
    }
  } else {
    throw Error(ErrorKind::Format, src + ": unsupported PLY format '" + format + "'");
  }
  check_indices(m, src);
  return m;
}

std::string lower_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

}  // namespace

void write_ply(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::string out = fmt::format(
      "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n"
      "element face {}\nproperty list uchar int vertex_indices\nend_header\n",
      mesh.vertices.size(), mesh.triangles.size());
  out.reserve(out.size() + mesh.vertices.size() * 12 + mesh.triangles.size() * 13);
  for (const auto& v : mesh.vertices) {
    put_le(out, static_cast<float>(v.x));
    put_le(out, static_cast<float>(v.y));
    put_le(out, static_cast<float>(v.z));
  }
  for (const auto& t : mesh.triangles) {
    put_le(out, std::uint8_t{3});
    for (auto i : t) put_le(out, static_cast<std::int32_t>(i));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

TriangleMesh read_mesh(const std::filesystem::path& path) {
  const auto ext = lower_extension(path);
  if (ext == ".obj") return read_obj(path);
  if (ext == ".ply") return read_ply(path);
  throw Error(ErrorKind::InvalidArgument, "unknown mesh extension '" + ext + "' (expected .obj or .ply)");
}

void write_mesh(const TriangleMesh& mesh, const std::filesystem::path& path) {
  const auto ext = lower_extension(path);
  if (ext == ".obj") return write_obj(mesh, path);
  if (ext == ".ply") return write_ply(mesh, path);
  throw Error(ErrorKind::InvalidArgument, "unknown mesh extension '" + ext + "' (expected .obj or .ply)");
}

}  // namespace nestedsurf
