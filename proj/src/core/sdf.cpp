// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0
#include "sdf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "error.hpp"
#include "mesher.hpp"
#include "metrics.hpp"
#include "parallel.hpp"

namespace nestedsurf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One-dimensional squared distance transform of a sampled function under the
// metric (w * (q - p))^2. `f` is read and overwritten through a strided view.
// Scratch buffers are provided by the caller to avoid per-line allocation.
void edt_1d(double* f, std::size_t n, std::size_t stride, double w, std::vector<double>& g,
            std::vector<int>& v, std::vector<double>& z) {
  g.resize(n);
  v.resize(n);
  z.resize(n + 1);
  for (std::size_t i = 0; i < n; ++i) g[i] = f[i * stride];

  const double w2 = w * w;
  int k = -1;
  for (int q = 0; q < static_cast<int>(n); ++q) {
    if (g[q] == kInf) continue;
    const double fq = g[q] + w2 * q * q;
    while (k >= 0) {
      const int p = v[k];
      const double s = (fq - (g[p] + w2 * p * p)) / (2.0 * w2 * (q - p));
      if (s <= z[k]) {
        --k;
      } else {
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
        break;
      }
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
    }
  }
  if (k < 0) return;  // nothing finite on this line

  int j = 0;
  for (int q = 0; q < static_cast<int>(n); ++q) {
    while (z[j + 1] < q) ++j;
    const double d = w * (q - v[j]);
    double best = d * d + g[v[j]];
    // Guard against rounding in the envelope breakpoints: a neighbouring
    // parabola that ties within rounding is also evaluated.
    if (j + 1 <= k) {
      const double d1 = w * (q - v[j + 1]);
      best = std::min(best, d1 * d1 + g[v[j + 1]]);
    }
    if (j > 0) {
      const double d0 = w * (q - v[j - 1]);
      best = std::min(best, d0 * d0 + g[v[j - 1]]);
    }
    f[q * stride] = best;
  }
}

}  // namespace

std::vector<double> squared_distance_to_class(const VoxelGrid& mask, bool target) {
  const auto [nx, ny, nz] = mask.dims();
  const auto& sp = mask.spacing();
  const auto values = mask.data();
  std::vector<double> f(values.size());
  const float want = target ? 1.0f : 0.0f;
  for (std::size_t i = 0; i < values.size(); ++i) f[i] = values[i] == want ? 0.0 : kInf;

  const std::size_t sx = 1, sy = static_cast<std::size_t>(nx), sz = static_cast<std::size_t>(nx) * ny;
  // x lines: one per (y, z)
  parallel_for(static_cast<std::size_t>(ny) * nz, [&](std::size_t b, std::size_t e) {
    std::vector<double> g, z;
    std::vector<int> v;
    for (std::size_t line = b; line < e; ++line) edt_1d(f.data() + line * sy, nx, sx, sp.x, g, v, z);
  });
  // y lines: one per (x, z)
  parallel_for(static_cast<std::size_t>(nx) * nz, [&](std::size_t b, std::size_t e) {
    std::vector<double> g, z;
    std::vector<int> v;
    for (std::size_t line = b; line < e; ++line) {
      const std::size_t x = line % nx, zz = line / nx;
      edt_1d(f.data() + x + zz * sz, ny, sy, sp.y, g, v, z);
    }
  });
  // z lines: one per (x, y)
  parallel_for(static_cast<std::size_t>(nx) * ny, [&](std::size_t b, std::size_t e) {
    std::vector<double> g, z;
    std::vector<int> v;
    for (std::size_t line = b; line < e; ++line) edt_1d(f.data() + line, nz, sz, sp.z, g, v, z);
  });
  return f;
}

VoxelGrid signed_distance_from_mask(const VoxelGrid& mask) {
  if (mask.kind() != ElementKind::BinaryMask)
    throw Error(ErrorKind::InvalidArgument, "signed distance requires a binary mask");
  const auto values = mask.data();
  const auto fg = std::count(values.begin(), values.end(), 1.0f);
  if (fg == 0) throw Error(ErrorKind::Domain, "mask has no foreground voxel");
  if (static_cast<std::size_t>(fg) == values.size()) throw Error(ErrorKind::Domain, "mask has no background voxel");

  const auto to_fg = squared_distance_to_class(mask, true);
  const auto to_bg = squared_distance_to_class(mask, false);
  VoxelGrid out = mask.like(ElementKind::RealField);
  auto phi = out.data();
  parallel_for(phi.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) phi[i] = static_cast<float>(std::sqrt(to_fg[i]) - std::sqrt(to_bg[i]));
  });
  return out;
}

VoxelGrid reinitialize_sdf(const VoxelGrid& field) {
  const auto [nx, ny, nz] = field.dims();
  const auto phi = field.data();
  const std::size_t n = phi.size();

  bool has_neg = false, has_pos = false;
  for (float v : phi) {
    if (!std::isfinite(v)) throw Error(ErrorKind::Domain, "field holds non-finite values");
    (v < 0 ? has_neg : has_pos) = true;
  }
  if (!has_neg || !has_pos) throw Error(ErrorKind::Domain, "field has no sign change");

  // The interface is the linearly interpolated zero level, triangulated.
  const TriangleMesh interface = marching_cubes(field, 0.0);
  const Index3 dims = field.dims();
  const auto& sp = field.spacing();
  const auto& org = field.origin();

  std::vector<double> dist(n, kInf);
  std::vector<std::uint32_t> closest(n, 0);
  auto distance_at = [&](Vec3 p, std::uint32_t tri) {
    const auto& t = interface.triangles[tri];
    const Vec3 q = closest_point_on_triangle(p, interface.vertices[t[0]], interface.vertices[t[1]],
                                             interface.vertices[t[2]]);
    return norm(p - q);
  };

  // Triangles around each vertex, for the local descent below.
  std::vector<std::uint32_t> ring_start(interface.vertices.size() + 1, 0), ring;
  for (const auto& t : interface.triangles)
    for (auto v : t) ++ring_start[v + 1];
  for (std::size_t v = 0; v < interface.vertices.size(); ++v) ring_start[v + 1] += ring_start[v];
  ring.resize(ring_start.back());
  {
    auto fill = ring_start;
    for (std::uint32_t ti = 0; ti < interface.triangles.size(); ++ti)
      for (auto v : interface.triangles[ti]) ring[fill[v]++] = ti;
  }
  // Greedy walk over vertex-adjacent triangles while the distance drops.
  auto descend = [&](Vec3 p, std::uint32_t tri, double d) {
    for (bool improved = true; improved;) {
      improved = false;
      const auto t = interface.triangles[tri];
      for (auto v : t)
        for (auto k = ring_start[v]; k < ring_start[v + 1]; ++k) {
          const double dk = distance_at(p, ring[k]);
          if (dk < d) {
            d = dk;
            tri = ring[k];
            improved = true;
          }
        }
    }
    return std::pair{tri, d};
  };

  // Exact band: voxels within one cell of each triangle's bounding box.
  for (std::uint32_t ti = 0; ti < interface.triangles.size(); ++ti) {
    Index3 lo{dims[0], dims[1], dims[2]}, hi{-1, -1, -1};
    for (auto v : interface.triangles[ti]) {
      for (int a = 0; a < 3; ++a) {
        const double g = (interface.vertices[v][a] - org[a]) / sp[a];
        lo[a] = std::min(lo[a], static_cast<int>(std::floor(g)) - 1);
        hi[a] = std::max(hi[a], static_cast<int>(std::ceil(g)) + 1);
      }
    }
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::max(lo[a], 0);
      hi[a] = std::min(hi[a], dims[a] - 1);
    }
    for (int z = lo[2]; z <= hi[2]; ++z)
      for (int y = lo[1]; y <= hi[1]; ++y)
        for (int x = lo[0]; x <= hi[0]; ++x) {
          const std::size_t i = field.linear(x, y, z);
          const double d = distance_at(field.world_of_voxel({x, y, z}), ti);
          if (d < dist[i]) {
            dist[i] = d;
            closest[i] = ti;
          }
        }
  }

  // Fast sweeping: in each of the 8 axis orderings every voxel tests the
  // closest triangles of its 26 neighbours (refined by the local walk), until
  // stable.
  // A voxel is revisited only when a neighbour changed since its last visit.
  std::uint64_t clock = 1;
  std::vector<std::uint64_t> updated(n, 0), visited(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    if (dist[i] < kInf) updated[i] = clock;
  for (int round = 0; round < 64; ++round) {
    bool changed = false;
    for (int dir = 0; dir < 8; ++dir) {
      const int sxd = (dir & 1) ? -1 : 1, syd = (dir & 2) ? -1 : 1, szd = (dir & 4) ? -1 : 1;
      for (int zi = 0; zi < nz; ++zi) {
        const int z = szd > 0 ? zi : nz - 1 - zi;
        for (int yi = 0; yi < ny; ++yi) {
          const int y = syd > 0 ? yi : ny - 1 - yi;
          for (int xi = 0; xi < nx; ++xi) {
            const int x = sxd > 0 ? xi : nx - 1 - xi;
            const std::size_t i = field.linear(x, y, z);
            const int x0 = std::max(x - 1, 0), x1 = std::min(x + 1, nx - 1);
            const int y0 = std::max(y - 1, 0), y1 = std::min(y + 1, ny - 1);
            const int z0 = std::max(z - 1, 0), z1 = std::min(z + 1, nz - 1);
            std::uint64_t newest = 0;
            for (int c = z0; c <= z1; ++c)
              for (int b = y0; b <= y1; ++b)
                for (int a = x0; a <= x1; ++a) newest = std::max(newest, updated[field.linear(a, b, c)]);
            if (newest <= visited[i]) continue;
            visited[i] = ++clock;
            const Vec3 p = field.world_of_voxel({x, y, z});
            std::array<std::uint32_t, 26> tried;
            int n_tried = 0;
            for (int c = z0; c <= z1; ++c) {
              for (int b = y0; b <= y1; ++b) {
                for (int a = x0; a <= x1; ++a) {
                  const std::size_t j = field.linear(a, b, c);
                  if (j == i || dist[j] == kInf || (closest[j] == closest[i] && dist[i] < kInf)) continue;
                  const std::uint32_t cand = closest[j];
                  if (std::find(tried.begin(), tried.begin() + n_tried, cand) != tried.begin() + n_tried) continue;
                  tried[static_cast<std::size_t>(n_tried++)] = cand;
                  const double d = distance_at(p, cand);
                  if (d < dist[i]) {
                    const auto [tri, dd] = descend(p, cand, d);
                    dist[i] = dd;
                    closest[i] = tri;
                    updated[i] = ++clock;
                    changed = true;
                  }
                }
              }
            }
          }
        }
      }
    }
    if (!changed) break;
  }

  VoxelGrid out = field.like(ElementKind::RealField);
  auto o = out.data();
  parallel_for(n, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) o[i] = static_cast<float>(phi[i] < 0 ? -dist[i] : dist[i]);
  });
  return out;
}

std::size_t count_lipschitz_violations(const VoxelGrid& field, double slack) {
  const auto [nx, ny, nz] = field.dims();
  const auto& sp = field.spacing();
  std::size_t count = 0;
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        const double v = field.at(x, y, z);
        if (x + 1 < nx && std::abs(v - field.at(x + 1, y, z)) > sp.x + slack) ++count;
        if (y + 1 < ny && std::abs(v - field.at(x, y + 1, z)) > sp.y + slack) ++count;
        if (z + 1 < nz && std::abs(v - field.at(x, y, z + 1)) > sp.z + slack) ++count;
      }
  return count;
}

}  // namespace nestedsurf
