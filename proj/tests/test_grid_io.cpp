// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "error.hpp"
#include "grid.hpp"
#include "test_support.hpp"

using namespace nestedsurf;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

std::string header_222(const char* type) {
  return std::string("ObjectType = Image\nNDims = 3\nDimSize = 2 2 2\nElementSpacing = 1 1 1\n"
                     "Offset = 0 0 0\nElementType = ") +
         type + "\nElementDataFile = v.raw\n";
}

}  // namespace

TEST_CASE("eight float ones read back") {
  const auto dir = testing::scratch_dir("grid_ones");
  write_file(dir / "v.mhd", header_222("MET_FLOAT"));
  std::string raw;
  for (int i = 0; i < 8; ++i) {
    const float one = 1.0f;
    raw.append(reinterpret_cast<const char*>(&one), 4);
  }
  write_file(dir / "v.raw", raw);
  const VoxelGrid g = read_volume(dir / "v.mhd");
  CHECK(g.dims() == Index3{2, 2, 2});
  CHECK(g.kind() == ElementKind::RealField);
  for (float v : g.data()) CHECK(v == 1.0f);
}

TEST_CASE("short raw file is a size mismatch") {
  const auto dir = testing::scratch_dir("grid_short");
  write_file(dir / "v.mhd", header_222("MET_FLOAT"));
  write_file(dir / "v.raw", std::string(16, '\0'));
  CHECK_THROWS_WITH_AS(read_volume(dir / "v.mhd"), doctest::Contains("size"), Error);
}

TEST_CASE("missing header and malformed fields") {
  const auto dir = testing::scratch_dir("grid_bad");
  CHECK_THROWS_AS(read_volume(dir / "absent.mhd"), Error);
  write_file(dir / "v.mhd", "NDims = 3\nDimSize = 2 2\nElementType = MET_FLOAT\nElementDataFile = v.raw\n");
  CHECK_THROWS_AS(read_volume(dir / "v.mhd"), Error);
  write_file(dir / "w.mhd", header_222("MET_DOUBLE"));
  CHECK_THROWS_AS(read_volume(dir / "w.mhd"), Error);
}

TEST_CASE("unknown header keys are ignored") {
  const auto dir = testing::scratch_dir("grid_unknown");
  write_file(dir / "v.mhd", "Comment = hello\n" + header_222("MET_UCHAR") + "AnatomicalOrientation = RAI\n");
  write_file(dir / "v.raw", std::string("\1\0\0\0\0\0\0\1", 8));
  const VoxelGrid g = read_volume(dir / "v.mhd");
  CHECK(g.kind() == ElementKind::BinaryMask);
  CHECK(g.at(0, 0, 0) == 1.0f);
  CHECK(g.at(1, 1, 1) == 1.0f);
  CHECK(g.at(1, 0, 0) == 0.0f);
}

TEST_CASE("single zero voxel writes four zero bytes") {
  const auto dir = testing::scratch_dir("grid_one");
  write_volume(VoxelGrid({1, 1, 1}, {1, 1, 1}, {0, 0, 0}, ElementKind::RealField), dir / "z.mhd");
  CHECK(slurp(dir / "z.raw") == std::string(4, '\0'));
}

TEST_CASE("spacing line formatting") {
  const auto dir = testing::scratch_dir("grid_spacing");
  write_volume(VoxelGrid({2, 2, 2}, {0.8, 0.8, 1.0}, {0, 0, 0}, ElementKind::RealField), dir / "s.mhd");
  CHECK(slurp(dir / "s.mhd").find("ElementSpacing = 0.8 0.8 1.0\n") != std::string::npos);
}

TEST_CASE("random float grid round-trips bit for bit") {
  const auto dir = testing::scratch_dir("grid_roundtrip");
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<float> u(-1e3f, 1e3f);
  std::uniform_real_distribution<double> geo(0.1, 3.0);
  std::vector<float> data(16 * 16 * 16);
  for (auto& v : data) v = u(rng);
  data[5] = -0.0f;
  data[6] = 1e-40f;  // subnormal
  const Vec3 spacing{geo(rng), geo(rng), geo(rng)};
  const Vec3 origin{-geo(rng) * 7, geo(rng) / 3, 1e-17};
  const VoxelGrid g({16, 16, 16}, spacing, origin, ElementKind::RealField, data);
  write_volume(g, dir / "r.mhd");
  const VoxelGrid back = read_volume(dir / "r.mhd");
  CHECK(back.same_geometry(g));
  REQUIRE(back.size() == g.size());
  CHECK(std::memcmp(back.data().data(), g.data().data(), g.size() * sizeof(float)) == 0);
}

TEST_CASE("mask round-trip") {
  const auto dir = testing::scratch_dir("grid_mask");
  std::mt19937 rng(3);
  std::vector<float> data(32 * 32 * 32);
  for (auto& v : data) v = static_cast<float>(rng() & 1u);
  const VoxelGrid g({32, 32, 32}, {1, 1, 2}, {3, 4, 5}, ElementKind::BinaryMask, data);
  write_volume(g, dir / "m.mhd");
  CHECK(slurp(dir / "m.mhd").find("MET_UCHAR") != std::string::npos);
  CHECK(slurp(dir / "m.raw").size() == data.size());
  const VoxelGrid back = read_volume(dir / "m.mhd");
  CHECK(back.kind() == ElementKind::BinaryMask);
  CHECK(std::equal(back.data().begin(), back.data().end(), data.begin()));
}

TEST_CASE("invariants are enforced at construction") {
  CHECK_THROWS_AS(VoxelGrid({0, 1, 1}, {1, 1, 1}, {0, 0, 0}, ElementKind::RealField), Error);
  CHECK_THROWS_AS(VoxelGrid({1, 1, 1}, {1, 0, 1}, {0, 0, 0}, ElementKind::RealField), Error);
  CHECK_THROWS_AS(VoxelGrid({2, 1, 1}, {1, 1, 1}, {0, 0, 0}, ElementKind::RealField, {1.0f}), Error);
  CHECK_THROWS_AS(VoxelGrid({2, 1, 1}, {1, 1, 1}, {0, 0, 0}, ElementKind::BinaryMask, {1.0f, 0.5f}), Error);
}

TEST_CASE("world_of_voxel") {
  const VoxelGrid a({4, 4, 4}, {1, 1, 1}, {0, 0, 0}, ElementKind::RealField);
  CHECK(a.world_of_voxel({3, 0, 0}) == Vec3{3, 0, 0});
  const VoxelGrid b({21, 21, 21}, {0.5, 0.5, 0.5}, {-5, -5, -5}, ElementKind::RealField);
  CHECK(b.world_of_voxel({10, 10, 10}) == Vec3{0, 0, 0});
  CHECK_THROWS_AS(a.world_of_voxel({4, 0, 0}), Error);
  CHECK_THROWS_AS(a.world_of_voxel({0, -1, 0}), Error);
}

TEST_CASE("world_of_voxel inverts and is affine") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> s(0.2, 2.5), o(-50, 50);
  for (int trial = 0; trial < 20; ++trial) {
    const VoxelGrid g({9, 7, 5}, {s(rng), s(rng), s(rng)}, {o(rng), o(rng), o(rng)}, ElementKind::RealField);
    for (int z = 0; z < 5; ++z)
      for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 9; ++x) {
          const Vec3 w = g.world_of_voxel({x, y, z});
          CHECK(g.voxel_of_world(w) == Index3{x, y, z});
          const Vec3 step = g.world_of_voxel({0, 0, 0}) + Vec3{x * g.spacing().x, y * g.spacing().y, z * g.spacing().z};
          CHECK(w.x == doctest::Approx(step.x).epsilon(1e-12).scale(0));
          CHECK(w.y == doctest::Approx(step.y).epsilon(1e-12).scale(0));
          CHECK(w.z == doctest::Approx(step.z).epsilon(1e-12).scale(0));
        }
  }
}

TEST_CASE("format_real") {
  CHECK(format_real(1.0) == "1.0");
  CHECK(format_real(0.8) == "0.8");
  CHECK(format_real(-3) == "-3.0");
  CHECK(format_real(0.1 + 0.2) == "0.30000000000000004");
}
