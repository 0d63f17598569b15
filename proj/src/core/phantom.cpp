// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0
#include "phantom.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "error.hpp"
#include "keyvalue.hpp"
#include "parallel.hpp"

namespace nestedsurf {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Bisection for the root of sum (n_i / (s + r_i))^2 - 1 = 0; iterates until
// the bracket stops shrinking in double precision.
template <std::size_t N>
double bisect_root(const std::array<double, N>& r, const std::array<double, N>& n, double s0, double s1) {
  double s = s0;
  for (int it = 0; it < 2200; ++it) {
    s = 0.5 * (s0 + s1);
    if (s == s0 || s == s1) break;
    double g = -1;
    for (std::size_t i = 0; i < N; ++i) {
      const double ratio = n[i] / (s + r[i]);
      g += ratio * ratio;
    }
    if (g > 0) {
      s0 = s;
    } else if (g < 0) {
      s1 = s;
    } else {
      break;
    }
  }
  return s;
}

// Closest-point distance from (y0, y1), both >= 0, to the ellipse with
// semi-axes e0 >= e1.
double ellipse_distance(double e0, double e1, double y0, double y1) {
  if (y1 > 0) {
    if (y0 > 0) {
      const double z0 = y0 / e0, z1 = y1 / e1;
      const double g = z0 * z0 + z1 * z1 - 1;
      if (g == 0) return 0;
      const double r0 = (e0 / e1) * (e0 / e1);
      const double s = bisect_root<2>({r0, 1.0}, {r0 * z0, z1}, z1 - 1, g < 0 ? 0.0 : std::hypot(r0 * z0, z1) - 1);
      const double x0 = r0 * y0 / (s + r0), x1 = y1 / (s + 1);
      return std::hypot(x0 - y0, x1 - y1);
    }
    return std::abs(y1 - e1);
  }
  const double numer0 = e0 * y0, denom0 = e0 * e0 - e1 * e1;
  if (numer0 < denom0) {
    const double xde0 = numer0 / denom0;
    const double x0 = e0 * xde0, x1 = e1 * std::sqrt(std::max(0.0, 1 - xde0 * xde0));
    return std::hypot(x0 - y0, x1);
  }
  return std::abs(y0 - e0);
}

// Same for the ellipsoid with e0 >= e1 >= e2 and y >= 0 componentwise.
double ellipsoid_distance_sorted(double e0, double e1, double e2, double y0, double y1, double y2) {
  if (y2 > 0) {
    if (y1 > 0) {
      if (y0 > 0) {
        const double z0 = y0 / e0, z1 = y1 / e1, z2 = y2 / e2;
        const double g = z0 * z0 + z1 * z1 + z2 * z2 - 1;
        if (g == 0) return 0;
        const double r0 = (e0 / e2) * (e0 / e2), r1 = (e1 / e2) * (e1 / e2);
        const double hi = g < 0 ? 0.0 : std::sqrt((r0 * z0) * (r0 * z0) + (r1 * z1) * (r1 * z1) + z2 * z2) - 1;
        const double s = bisect_root<3>({r0, r1, 1.0}, {r0 * z0, r1 * z1, z2}, z2 - 1, hi);
        const double x0 = r0 * y0 / (s + r0), x1 = r1 * y1 / (s + r1), x2 = y2 / (s + 1);
        return std::sqrt((x0 - y0) * (x0 - y0) + (x1 - y1) * (x1 - y1) + (x2 - y2) * (x2 - y2));
      }
      return ellipse_distance(e1, e2, y1, y2);
    }
    if (y0 > 0) return ellipse_distance(e0, e2, y0, y2);
    return std::abs(y2 - e2);
  }
  const double denom0 = e0 * e0 - e2 * e2, denom1 = e1 * e1 - e2 * e2;
  const double numer0 = e0 * y0, numer1 = e1 * y1;
  if (numer0 < denom0 && numer1 < denom1) {
    const double xde0 = numer0 / denom0, xde1 = numer1 / denom1;
    const double discr = 1 - xde0 * xde0 - xde1 * xde1;
    if (discr > 0) {
      const double x0 = e0 * xde0, x1 = e1 * xde1, x2 = e2 * std::sqrt(discr);
      return std::sqrt((x0 - y0) * (x0 - y0) + (x1 - y1) * (x1 - y1) + x2 * x2);
    }
  }
  return ellipse_distance(e0, e1, y0, y1);
}

template <typename Fn>
VoxelGrid sample(const VoxelGrid& geometry, Fn&& phi) {
  VoxelGrid out = geometry.like(ElementKind::RealField);
  auto data = out.data();
  parallel_for(data.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) data[i] = static_cast<float>(phi(out.world_of_voxel(out.unlinear(i))));
  });
  return out;
}

}  // namespace

double sphere_distance(Vec3 p, Vec3 center, double radius) { return norm(p - center) - radius; }

double torus_distance(Vec3 p, Vec3 center, double major, double minor) {
  const Vec3 q = p - center;
  return std::hypot(std::hypot(q.x, q.y) - major, q.z) - minor;
}

double ellipsoid_distance(Vec3 p, Vec3 center, Vec3 semi_axes) {
  const Vec3 q = p - center;
  std::array<std::pair<double, double>, 3> ax{{{semi_axes.x, std::abs(q.x)},
                                               {semi_axes.y, std::abs(q.y)},
                                               {semi_axes.z, std::abs(q.z)}}};
  std::sort(ax.begin(), ax.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  const double d = ellipsoid_distance_sorted(ax[0].first, ax[1].first, ax[2].first, ax[0].second, ax[1].second,
                                             ax[2].second);
  double level = 0;
  for (const auto& [e, y] : ax) level += (y / e) * (y / e);
  return level < 1 ? -d : d;
}

VoxelGrid sample_sphere(const VoxelGrid& geometry, Vec3 center, double radius) {
  return sample(geometry, [&](Vec3 p) { return sphere_distance(p, center, radius); });
}

VoxelGrid sample_ellipsoid(const VoxelGrid& geometry, Vec3 center, Vec3 semi_axes) {
  return sample(geometry, [&](Vec3 p) { return ellipsoid_distance(p, center, semi_axes); });
}

VoxelGrid sample_torus(const VoxelGrid& geometry, Vec3 center, double major, double minor) {
  return sample(geometry, [&](Vec3 p) { return torus_distance(p, center, major, minor); });
}

double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  const std::uint64_t h = splitmix64(splitmix64(seed ^ splitmix64(stream)) + counter);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

void add_noise(VoxelGrid& field, double amplitude, std::uint64_t seed, std::uint64_t stream) {
  if (amplitude == 0) return;
  auto data = field.data();
  parallel_for(data.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i)
      data[i] = static_cast<float>(data[i] + amplitude * (2.0 * counter_uniform(seed, stream, i) - 1.0));
  });
}

LayerTriple inject_violations(LayerTriple layers, std::size_t count, double magnitude, std::uint64_t seed) {
  layers.require_shared_geometry();
  const std::size_t n = layers.pia.size();
  if (count > n) throw Error(ErrorKind::InvalidArgument, fmt::format("cannot corrupt {} of {} voxels", count, n));
  if (count > 0 && !(magnitude > 0)) throw Error(ErrorKind::InvalidArgument, "violation magnitude must be positive");
  std::unordered_set<std::size_t> picked;
  auto p = layers.pia.data();
  auto a = layers.arachnoid.data();
  auto e = layers.epidural.data();
  for (std::uint64_t draw = 0; picked.size() < count; ++draw) {
    const auto voxel = static_cast<std::size_t>(counter_uniform(seed, 101, draw) * static_cast<double>(n));
    if (!picked.insert(voxel).second) continue;
    if (counter_uniform(seed, 102, draw) < 0.5) {
      a[voxel] = static_cast<float>(p[voxel] + magnitude);
    } else {
      e[voxel] = static_cast<float>(a[voxel] + magnitude);
    }
  }
  return layers;
}

LayerTriple inject_violations(const NestedSdfSet& set, std::size_t count, double magnitude, std::uint64_t seed) {
  return inject_violations(set.layers(), count, magnitude, seed);
}

void PhantomSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] <= 0) throw Error(ErrorKind::InvalidArgument, "phantom dims must be positive");
    if (!(spacing[a] > 0)) throw Error(ErrorKind::InvalidArgument, "phantom spacing must be positive");
  }
  Vec3 extent{};
  if (kind == PhantomKind::Torus) {
    if (!(minor_radius > 0) || !(major_radius > minor_radius))
      throw Error(ErrorKind::InvalidArgument, "torus needs major_radius > minor_radius > 0");
    extent = {major_radius + minor_radius, major_radius + minor_radius, minor_radius};
  } else {
    if (layers.size() != 1 && layers.size() != 3)
      throw Error(ErrorKind::InvalidArgument, "phantom needs one or three layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const Vec3 s = kind == PhantomKind::Sphere ? Vec3{layers[l].x, layers[l].x, layers[l].x} : layers[l];
      for (int a = 0; a < 3; ++a) {
        if (!(s[a] > 0)) throw Error(ErrorKind::InvalidArgument, "layer radii must be positive");
        if (l > 0) {
          const double prev = kind == PhantomKind::Sphere ? layers[l - 1].x : layers[l - 1][a];
          if (!(s[a] > prev)) throw Error(ErrorKind::InvalidArgument, "layer extents must increase strictly outward");
        }
      }
      extent = s;
    }
  }
  const VoxelGrid g = empty_grid();
  for (int a = 0; a < 3; ++a) {
    const double lo = g.origin()[a], hi = lo + (dims[a] - 1) * spacing[a];
    if (center[a] - extent[a] < lo + 2 * spacing[a] || center[a] + extent[a] > hi - 2 * spacing[a])
      throw Error(ErrorKind::Domain, "phantom surface too close to the grid boundary");
  }
}

VoxelGrid PhantomSpec::empty_grid() const {
  Vec3 o;
  if (origin) {
    o = *origin;
  } else {
    for (int a = 0; a < 3; ++a) o[a] = center[a] - 0.5 * (dims[a] - 1) * spacing[a];
  }
  return VoxelGrid(dims, spacing, o, ElementKind::RealField);
}

PhantomVolumes generate(const PhantomSpec& spec) {
  spec.validate();
  const VoxelGrid geometry = spec.empty_grid();
  const auto& c = spec.corruption;

  std::vector<VoxelGrid> fields;
  if (spec.kind == PhantomKind::Torus) {
    fields.push_back(sample_torus(geometry, spec.center, spec.major_radius, spec.minor_radius));
  } else {
    for (const Vec3& l : spec.layers)
      fields.push_back(spec.kind == PhantomKind::Sphere ? sample_sphere(geometry, spec.center, l.x)
                                                        : sample_ellipsoid(geometry, spec.center, l));
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (c.slope_scale != 1.0)
      for (float& v : fields[i].data()) v = static_cast<float>(v * c.slope_scale);
    add_noise(fields[i], c.noise_amplitude, c.seed, i);
  }

  PhantomVolumes out;
  if (fields.size() == 1) {
    if (c.violation_count > 0) throw Error(ErrorKind::InvalidArgument, "nesting violations need a three-layer phantom");
    out.single = std::move(fields[0]);
    return out;
  }
  LayerTriple t{std::move(fields[0]), std::move(fields[1]), std::move(fields[2])};
  if (c.violation_count > 0) t = inject_violations(std::move(t), c.violation_count, c.violation_magnitude, c.seed);
  out.layers = std::move(t);
  return out;
}

PhantomSpec read_phantom_spec(const std::filesystem::path& path) {
  const auto kv = KeyValueFile::load(path);
  const std::string src = path.string();
  PhantomSpec s;
  const std::string kind = kv.require("kind");
  if (kind == "sphere") s.kind = PhantomKind::Sphere;
  else if (kind == "ellipsoid") s.kind = PhantomKind::Ellipsoid;
  else if (kind == "torus") s.kind = PhantomKind::Torus;
  else throw Error(ErrorKind::Format, src + ": unknown phantom kind '" + kind + "'");

  auto triple = [&](const std::string& key) {
    const auto v = kv.reals(key);
    if (v.size() != 3) throw Error(ErrorKind::Format, src + ": field '" + key + "' needs three values");
    return Vec3{v[0], v[1], v[2]};
  };
  if (kv.has("dims")) {
    const Vec3 d = triple("dims");
    for (int a = 0; a < 3; ++a) {
      if (d[a] != std::floor(d[a]) || d[a] < 1) throw Error(ErrorKind::Format, src + ": dims must be positive integers");
      s.dims[a] = static_cast<int>(d[a]);
    }
  }
  if (kv.has("spacing")) s.spacing = triple("spacing");
  if (kv.has("center")) s.center = triple("center");
  if (kv.has("origin")) s.origin = triple("origin");

  switch (s.kind) {
    case PhantomKind::Sphere:
      for (double r : kv.reals("radii")) s.layers.push_back({r, r, r});
      break;
    case PhantomKind::Ellipsoid:
      if (kv.has("semi_axes")) {
        s.layers.push_back(triple("semi_axes"));
      } else {
        for (auto name : kLayerNames) s.layers.push_back(triple("semi_axes_" + std::string(name)));
      }
      break;
    case PhantomKind::Torus:
      s.major_radius = kv.real("major_radius");
      s.minor_radius = kv.real("minor_radius");
      break;
  }

  if (kv.has("noise")) s.corruption.noise_amplitude = kv.real("noise");
  if (kv.has("violations")) {
    const auto n = kv.integer("violations");
    if (n < 0) throw Error(ErrorKind::Format, src + ": violations must be non-negative");
    s.corruption.violation_count = static_cast<std::size_t>(n);
  }
  if (kv.has("violation_magnitude")) s.corruption.violation_magnitude = kv.real("violation_magnitude");
  if (kv.has("slope_scale")) s.corruption.slope_scale = kv.real("slope_scale");
  if (kv.has("seed")) s.corruption.seed = static_cast<std::uint64_t>(kv.integer("seed"));
  return s;
}

}  // namespace nestedsurf
