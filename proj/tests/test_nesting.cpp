// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <random>

#include "doctest.h"
#include "error.hpp"
#include "nested.hpp"
#include "phantom.hpp"
#include "test_support.hpp"

using namespace nestedsurf;

namespace {

VoxelGrid field(Index3 dims, std::vector<float> v) {
  return VoxelGrid(dims, {1, 1, 1}, {0, 0, 0}, ElementKind::RealField, std::move(v));
}

LayerTriple random_triple(std::uint64_t seed, Index3 dims) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-5.0f, 5.0f);
  const auto n = static_cast<std::size_t>(dims[0] * dims[1] * dims[2]);
  LayerTriple t;
  for (Layer l : {Layer::Pia, Layer::Arachnoid, Layer::Epidural}) {
    std::vector<float> v(n);
    for (auto& x : v) x = u(rng);
    t[l] = field(dims, std::move(v));
  }
  return t;
}

LayerTriple three_spheres() {
  PhantomSpec spec;
  spec.layers = {{10, 10, 10}, {15, 15, 15}, {20, 20, 20}};
  spec.dims = {48, 48, 48};
  return *generate(spec).layers;
}

bool ordered(const LayerTriple& t, std::size_t i) {
  return t.pia.data()[i] >= t.arachnoid.data()[i] && t.arachnoid.data()[i] >= t.epidural.data()[i];
}

}  // namespace

TEST_CASE("ordered inputs pass through unchanged") {
  const LayerTriple t = three_spheres();
  REQUIRE(check_nesting(t).total() == 0);
  const NestedSdfSet set = enforce_nesting(t);
  for (Layer l : {Layer::Pia, Layer::Arachnoid, Layer::Epidural})
    CHECK(std::equal(set[l].data().begin(), set[l].data().end(), t[l].data().begin()));
}

TEST_CASE("single voxel clamp") {
  LayerTriple t{field({1, 1, 1}, {1}), field({1, 1, 1}, {2}), field({1, 1, 1}, {0})};
  const NestedSdfSet set = enforce_nesting(t);
  CHECK(set[Layer::Pia].data()[0] == 1.0f);
  CHECK(set[Layer::Arachnoid].data()[0] == 1.0f);
  CHECK(set[Layer::Epidural].data()[0] == 0.0f);
}

TEST_CASE("random fields match the difference-map reconstruction") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const LayerTriple in = random_triple(seed, {8, 8, 8});
    const NestedSdfSet out = enforce_nesting(in);
    const auto& o = out.layers();
    CHECK(check_nesting(o).total() == 0);
    for (std::size_t i = 0; i < in.pia.size(); ++i) {
      const double p = in.pia.data()[i], a = in.arachnoid.data()[i], e = in.epidural.data()[i];
      const double d1 = std::max(0.0, p - a);
      const double a2 = p - d1;
      const double d2 = std::max(0.0, a2 - e);
      const double e2 = a2 - d2;
      REQUIRE(o.pia.data()[i] == p);
      REQUIRE(o.arachnoid.data()[i] == a2);
      REQUIRE(o.epidural.data()[i] == e2);
      if (ordered(in, i)) {
        REQUIRE(o.arachnoid.data()[i] == a);
        REQUIRE(o.epidural.data()[i] == e);
      }
      REQUIRE(o.arachnoid.data()[i] <= a);
      REQUIRE(o.epidural.data()[i] <= e);
    }
  }
}

TEST_CASE("enforcement is idempotent") {
  const NestedSdfSet once = enforce_nesting(random_triple(77, {9, 5, 4}));
  const NestedSdfSet twice = enforce_nesting(once.layers());
  for (Layer l : {Layer::Pia, Layer::Arachnoid, Layer::Epidural})
    CHECK(std::equal(once[l].data().begin(), once[l].data().end(), twice[l].data().begin()));
}

TEST_CASE("geometry mismatch is rejected") {
  LayerTriple t = random_triple(3, {4, 4, 4});
  t.epidural = VoxelGrid({4, 4, 4}, {1, 1, 2}, {0, 0, 0}, ElementKind::RealField);
  CHECK_THROWS_AS(enforce_nesting(t), Error);
  CHECK_THROWS_AS(check_nesting(t), Error);
}

TEST_CASE("check_nesting on a hand-built violation") {
  LayerTriple t{field({2, 1, 1}, {3, 3}), field({2, 1, 1}, {2, 3.75f}), field({2, 1, 1}, {1, 1})};
  const NestingReport r = check_nesting(t);
  CHECK(r.count_pia_arachnoid == 1);
  CHECK(r.count_arachnoid_epidural == 0);
  CHECK(r.violating_voxels == 1);
  CHECK(r.max_pia_arachnoid == 0.75);
}

TEST_CASE("swapping pia and epidural violates wherever they differ") {
  LayerTriple t = three_spheres();
  std::swap(t.pia, t.epidural);
  std::size_t differ = 0;
  for (std::size_t i = 0; i < t.pia.size(); ++i) differ += t.pia.data()[i] != t.epidural.data()[i];
  CHECK(check_nesting(t).violating_voxels == differ);
  CHECK_THROWS_AS(NestedSdfSet::adopt(t), Error);
}

TEST_CASE("injected violations are counted and removed") {
  const NestedSdfSet clean = NestedSdfSet::adopt(three_spheres());
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const LayerTriple bad = inject_violations(clean, 400, 0.5, seed);
    const NestingReport r = check_nesting(bad);
    CHECK(r.violating_voxels == 400);
    CHECK(r.total() == 400);
    CHECK(check_nesting(enforce_nesting(bad).layers()).total() == 0);
  }
}

TEST_CASE("masks are not accepted as fields") {
  LayerTriple t = random_triple(4, {3, 3, 3});
  t.pia = VoxelGrid({3, 3, 3}, {1, 1, 1}, {0, 0, 0}, ElementKind::BinaryMask);
  CHECK_THROWS_AS(enforce_nesting(t), Error);
}

TEST_CASE("manifest round-trip") {
  const auto dir = testing::scratch_dir("nesting_manifest");
  const LayerTriple t = random_triple(5, {6, 5, 4});
  write_layers(t, dir / "out");
  const LayerTriple back = read_layers(dir / "out" / "nested.manifest");
  for (Layer l : {Layer::Pia, Layer::Arachnoid, Layer::Epidural}) {
    CHECK(back[l].same_geometry(t[l]));
    CHECK(std::equal(back[l].data().begin(), back[l].data().end(), t[l].data().begin()));
  }
  CHECK_THROWS_AS(read_layers(dir / "missing.manifest"), Error);
}
