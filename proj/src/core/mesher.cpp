// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0
#include "mesher.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "error.hpp"
#include "parallel.hpp"

namespace nestedsurf {

namespace detail {

const std::array<std::array<int, 2>, 12> kCellEdges{{
    {0, 1}, {2, 3}, {4, 5}, {6, 7},  // along x
    {0, 2}, {1, 3}, {4, 6}, {5, 7},  // along y
    {0, 4}, {1, 5}, {2, 6}, {3, 7},  // along z
}};

namespace {

// Face corners in counter-clockwise order seen from outside the cell.
constexpr std::array<std::array<int, 4>, 6> kFaces{{
    {0, 4, 6, 2},  // -x
    {1, 3, 7, 5},  // +x
    {0, 1, 5, 4},  // -y
    {2, 6, 7, 3},  // +y
    {0, 2, 3, 1},  // -z
    {4, 5, 7, 6},  // +z
}};

constexpr int edge_between(int a, int b) {
  for (int e = 0; e < 12; ++e)
    if ((kCellEdges[e][0] == a && kCellEdges[e][1] == b) || (kCellEdges[e][0] == b && kCellEdges[e][1] == a))
      return e;
  return -1;
}

bool is_inside(double v) { return v < 0; }

// Directed contour segments on one face: each runs from the crossing where a
// counter-clockwise walk enters the inside region to the one where it leaves,
// which keeps the outside on the segment's left.
void face_segments(const std::array<double, 8>& value, const std::array<int, 4>& q, std::array<int, 12>& next) {
  std::array<bool, 4> in;
  for (int k = 0; k < 4; ++k) in[k] = is_inside(value[q[k]]);
  int crossings = 0;
  for (int k = 0; k < 4; ++k) crossings += in[k] != in[(k + 1) % 4];
  if (crossings == 0) return;

  auto edge = [&](int k) { return edge_between(q[k], q[(k + 1) % 4]); };
  if (crossings == 2) {
    int entry = -1, exit = -1;
    for (int k = 0; k < 4; ++k) {
      if (in[k] == in[(k + 1) % 4]) continue;
      (in[k] ? exit : entry) = edge(k);
    }
    next[entry] = exit;
    return;
  }

  // Four crossings: corners alternate. Asymptotic decider on the bilinear
  // saddle: the diagonal whose corner product dominates is connected; ties
  // connect the outside diagonal.
  const double p02 = value[q[0]] * value[q[2]];
  const double p13 = value[q[1]] * value[q[3]];
  bool connect02;
  if (p02 != p13) {
    connect02 = p02 > p13;
  } else {
    connect02 = !in[0];
  }
  // Cut off the two corners of the unconnected diagonal. Around corner k the
  // contour joins edges k-1 (into k) and k (out of k).
  const int first = connect02 ? 1 : 0;
  for (int k : {first, first + 2}) {
    const int e_in = edge((k + 3) % 4);
    const int e_out = edge(k);
    if (in[k]) {
      // walk enters the inside region on e_in and leaves on e_out
      next[e_in] = e_out;
    } else {
      next[e_out] = e_in;
    }
  }
}

// Bit f set when edge e lies on face f of kFaces.
int face_mask(int e) {
  int mask = 0;
  for (int f = 0; f < 6; ++f) {
    int hits = 0;
    for (int c : kFaces[f]) hits += c == kCellEdges[e][0] || c == kCellEdges[e][1];
    if (hits == 2) mask |= 1 << f;
  }
  return mask;
}

std::array<double, 3> edge_point(const std::array<double, 8>& value, int e) {
  const int a = kCellEdges[e][0], b = kCellEdges[e][1];
  const double t = value[a] / (value[a] - value[b]);
  std::array<double, 3> p;
  for (int ax = 0; ax < 3; ++ax) p[ax] = ((a >> ax) & 1) + t * (((b >> ax) & 1) - ((a >> ax) & 1));
  return p;
}

// Minimum total diagonal length triangulation of one contour loop. A diagonal
// between two edges of one cell face lies in that face, where the
// neighbouring cell might pick the same segment. Such diagonals are avoided,
// and never placed on a -x/-y/-z face, so two cells cannot both use one; a
// loop that needs one there is fanned around its centroid instead.
void triangulate_loop(const std::array<double, 8>& value, const std::vector<int>& loop, CellTriangles& out) {
  const int n = static_cast<int>(loop.size());
  if (n == 3) {
    out.tris.push_back({loop[0], loop[1], loop[2]});
    return;
  }
  std::vector<std::array<double, 3>> p(n);
  std::vector<int> mask(n);
  for (int i = 0; i < n; ++i) {
    p[i] = edge_point(value, loop[i]);
    mask[i] = face_mask(loop[i]);
  }
  constexpr int kLowFaces = 0b010101;  // -x, -y, -z in kFaces order
  constexpr double kLowFacePenalty = 1e6;
  auto length = [&](int i, int j) {
    if (j - i == 1 || (i == 0 && j == n - 1)) return 0.0;
    double d = 0;
    for (int ax = 0; ax < 3; ++ax) d += (p[i][ax] - p[j][ax]) * (p[i][ax] - p[j][ax]);
    const int shared = mask[i] & mask[j];
    return std::sqrt(d) + ((shared & kLowFaces) ? kLowFacePenalty : 0.0) + (shared ? 1e3 : 0.0);
  };
  std::vector<double> cost(static_cast<std::size_t>(n * n), 0.0);
  std::vector<int> split(static_cast<std::size_t>(n * n), -1);
  for (int span = 2; span < n; ++span)
    for (int i = 0; i + span < n; ++i) {
      const int j = i + span;
      double best = std::numeric_limits<double>::infinity();
      for (int k = i + 1; k < j; ++k) {
        const double c = cost[i * n + k] + cost[k * n + j] + length(i, k) + length(k, j);
        if (c < best) {
          best = c;
          split[i * n + j] = k;
        }
      }
      cost[i * n + j] = best;
    }
  if (cost[n - 1] >= kLowFacePenalty) {
    std::array<double, 3> c{};
    for (const auto& q : p)
      for (int ax = 0; ax < 3; ++ax) c[ax] += q[ax] / n;
    const int center = 12 + static_cast<int>(out.extra.size());
    out.extra.push_back(c);
    for (int i = 0; i < n; ++i) out.tris.push_back({center, loop[i], loop[(i + 1) % n]});
    return;
  }
  std::vector<std::array<int, 2>> stack{{0, n - 1}};
  while (!stack.empty()) {
    const auto [i, j] = stack.back();
    stack.pop_back();
    if (j - i < 2) continue;
    const int k = split[i * n + j];
    out.tris.push_back({loop[i], loop[k], loop[j]});
    stack.push_back({i, k});
    stack.push_back({k, j});
  }
}

}  // namespace

bool interior_connects(const std::array<double, 8>& v, int corner) {
  const double a = v[0];
  const double b = v[1] - v[0];
  const double c = v[2] - v[0];
  const double d = v[4] - v[0];
  const double e = v[3] - v[1] - v[2] + v[0];
  const double f = v[5] - v[1] - v[4] + v[0];
  const double g = v[6] - v[2] - v[4] + v[0];
  const double h = v[7] - v[3] - v[5] - v[6] + v[1] + v[2] + v[4] - v[0];
  const bool want_inside = is_inside(v[corner]);
  auto at = [&](double x, double y, double z) {
    return a + b * x + c * y + d * z + e * x * y + f * x * z + g * y * z + h * x * y * z;
  };
  auto in_cell = [](double x, double y, double z) {
    return x >= 0 && x <= 1 && y >= 0 && y <= 1 && z >= 0 && z <= 1;
  };

  double scale = 0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  if (std::abs(h) <= 1e-9 * scale) {
    // No cubic term: the single critical point solves
    // [0 e f; e 0 g; f g 0] (x, y, z) = -(b, c, d).
    const double det = 2 * e * f * g;
    if (det == 0) return false;
    const double x = (g * g * b - f * g * c - e * g * d) / det;
    const double y = (-f * g * b + f * f * c - e * f * d) / det;
    const double z = (-e * g * b - e * f * c + e * e * d) / det;
    return in_cell(x, y, z) && is_inside(at(x, y, z)) == want_inside;
  }

  const double p = b - e * f / h;
  const double q = c - e * g / h;
  const double r = d - f * g / h;
  const double w2 = -p * q * r / (h * h * h);
  if (!(w2 > 0) || p == 0 || q == 0 || r == 0) return false;

  const double x0 = -g / h, y0 = -f / h, z0 = -e / h;
  const double k0 = at(x0, y0, z0);
  for (double w : {std::sqrt(w2), -std::sqrt(w2)}) {
    const double x = x0 - h * w / p, y = y0 - h * w / q, z = z0 - h * w / r;
    if (!in_cell(x, y, z)) continue;
    const double saddle = k0 - 2 * h * w;
    if (is_inside(saddle) == want_inside) return true;
  }
  return false;
}

CellTriangles triangulate_cell(const std::array<double, 8>& value) {
  CellTriangles out;
  auto& tris = out.tris;
  int inside_count = 0;
  for (double v : value) inside_count += is_inside(v);
  if (inside_count == 0 || inside_count == 8) return out;

  std::array<int, 12> next;
  next.fill(-1);
  for (const auto& face : kFaces) face_segments(value, face, next);

  std::vector<std::vector<int>> loops;
  std::array<bool, 12> used{};
  for (int start = 0; start < 12; ++start) {
    if (next[start] < 0 || used[start]) continue;
    std::vector<int> loop;
    for (int e = start; !used[e]; e = next[e]) {
      used[e] = true;
      loop.push_back(e);
    }
    loops.push_back(std::move(loop));
  }

  // Body-diagonal pair (one sign held by exactly two opposite corners): may
  // be a tube instead of two caps.
  if (loops.size() == 2 && loops[0].size() == 3 && loops[1].size() == 3 && (inside_count == 2 || inside_count == 6)) {
    const bool minority_inside = inside_count == 2;
    int corner = -1;
    for (int k = 0; k < 8; ++k)
      if (is_inside(value[k]) == minority_inside) {
        corner = k;
        break;
      }
    if (is_inside(value[7 - corner]) == minority_inside && interior_connects(value, corner)) {
      const auto& la = loops[0];
      const auto& lb = loops[1];
      // Pair a[i] with b[m - i] so the band keeps both loop orientations;
      // choose the rotation with the shortest rungs (edge midpoints as proxy).
      auto mid = [](int e) {
        std::array<double, 3> p{};
        for (int s : {0, 1})
          for (int ax = 0; ax < 3; ++ax) p[ax] += 0.5 * ((kCellEdges[e][s] >> ax) & 1);
        return p;
      };
      int best_m = 0;
      double best_len = std::numeric_limits<double>::infinity();
      for (int m = 0; m < 3; ++m) {
        double len = 0;
        for (int i = 0; i < 3; ++i) {
          const auto pa = mid(la[i]), pb = mid(lb[((m - i) % 3 + 3) % 3]);
          for (int ax = 0; ax < 3; ++ax) len += (pa[ax] - pb[ax]) * (pa[ax] - pb[ax]);
        }
        if (len < best_len) {
          best_len = len;
          best_m = m;
        }
      }
      for (int i = 0; i < 3; ++i) {
        const int a0 = la[i], a1 = la[(i + 1) % 3];
        const int b0 = lb[((best_m - i) % 3 + 3) % 3], b1 = lb[((best_m - i + 1) % 3 + 3) % 3];
        tris.push_back({a0, a1, b0});
        tris.push_back({a0, b0, b1});
      }
      return out;
    }
  }

  for (const auto& loop : loops) triangulate_loop(value, loop, out);
  return out;
}

}  // namespace detail

namespace {

// Triangle corners hold edge keys, or kExtraTag | index into Slab::extra.
constexpr std::uint64_t kExtraTag = std::uint64_t{1} << 63;

struct Slab {
  std::vector<std::uint64_t> keys;
  std::vector<Vec3> points;
  std::vector<Vec3> extra;
  std::vector<std::array<std::uint64_t, 3>> tris;
};

}  // namespace

TriangleMesh marching_cubes(const VoxelGrid& field, double iso) {
  const auto [nx, ny, nz] = field.dims();
  const auto& sp = field.spacing();
  const auto raw = field.data();

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (float v : raw) {
    if (!std::isfinite(v)) throw Error(ErrorKind::Domain, "field holds non-finite values");
    lo = std::min<double>(lo, v);
    hi = std::max<double>(hi, v);
  }
  if (!(iso > lo && iso < hi)) throw Error(ErrorKind::Domain, "iso outside value range");

  // Values relative to iso; exact hits are nudged to the outside.
  const double nudge = 1e-6 * std::min({sp.x, sp.y, sp.z});
  std::vector<double> val(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double d = static_cast<double>(raw[i]) - iso;
    val[i] = d == 0 ? nudge : d;
  }

  const std::size_t sx = 1, sy = static_cast<std::size_t>(nx), sz = static_cast<std::size_t>(nx) * ny;
  const std::array<std::size_t, 3> stride{sx, sy, sz};
  const std::array<int, 3> dims{nx, ny, nz};
  constexpr double kMinT = 1e-6;

  // Pass 1: crossing edges per z-plane, in increasing key order.
  std::vector<Slab> slabs(static_cast<std::size_t>(nz));
  parallel_for(static_cast<std::size_t>(nz), [&](std::size_t b, std::size_t e) {
    for (std::size_t z = b; z < e; ++z) {
      auto& slab = slabs[z];
      for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
          const std::array<int, 3> c{x, y, static_cast<int>(z)};
          const std::size_t i = field.linear(x, y, static_cast<int>(z));
          for (int ax = 0; ax < 3; ++ax) {
            if (c[ax] + 1 >= dims[ax]) continue;
            const double va = val[i], vb = val[i + stride[ax]];
            if ((va < 0) == (vb < 0)) continue;
            const double t = std::clamp(va / (va - vb), kMinT, 1.0 - kMinT);
            Vec3 p = field.world_of_voxel({x, y, static_cast<int>(z)});
            p[ax] += t * sp[ax];
            slab.keys.push_back(3 * static_cast<std::uint64_t>(i) + static_cast<std::uint64_t>(ax));
            slab.points.push_back(p);
          }
        }
    }
  });

  TriangleMesh mesh;
  std::vector<std::uint64_t> keys;
  for (auto& s : slabs) {
    keys.insert(keys.end(), s.keys.begin(), s.keys.end());
    mesh.vertices.insert(mesh.vertices.end(), s.points.begin(), s.points.end());
    s.keys = {};
    s.points = {};
  }

  // Pass 2: cells per z-slab.
  const std::size_t cell_slabs = nz > 1 ? static_cast<std::size_t>(nz - 1) : 0;
  parallel_for(cell_slabs, [&](std::size_t b, std::size_t e) {
    std::array<double, 8> corner;
    for (std::size_t z = b; z < e; ++z) {
      auto& slab = slabs[z];
      for (int y = 0; y + 1 < ny; ++y)
        for (int x = 0; x + 1 < nx; ++x) {
          const std::size_t base = field.linear(x, y, static_cast<int>(z));
          int inside = 0;
          for (int k = 0; k < 8; ++k) {
            corner[k] = val[base + (k & 1) * sx + ((k >> 1) & 1) * sy + ((k >> 2) & 1) * sz];
            inside += corner[k] < 0;
          }
          if (inside == 0 || inside == 8) continue;
          const auto cell = detail::triangulate_cell(corner);
          const std::size_t extra_base = slab.extra.size();
          if (!cell.extra.empty()) {
            const Vec3 origin = field.world_of_voxel({x, y, static_cast<int>(z)});
            for (const auto& q : cell.extra)
              slab.extra.push_back({origin.x + q[0] * sp.x, origin.y + q[1] * sp.y, origin.z + q[2] * sp.z});
          }
          for (const auto& tri : cell.tris) {
            std::array<std::uint64_t, 3> key;
            for (int k = 0; k < 3; ++k) {
              if (tri[k] >= 12) {
                key[k] = kExtraTag | (extra_base + static_cast<std::size_t>(tri[k] - 12));
                continue;
              }
              const auto& ed = detail::kCellEdges[tri[k]];
              const int lower = std::min(ed[0], ed[1]);
              const int axis = (ed[0] ^ ed[1]) == 1 ? 0 : ((ed[0] ^ ed[1]) == 2 ? 1 : 2);
              const std::size_t gp = base + (lower & 1) * sx + ((lower >> 1) & 1) * sy + ((lower >> 2) & 1) * sz;
              key[k] = 3 * static_cast<std::uint64_t>(gp) + static_cast<std::uint64_t>(axis);
            }
            slab.tris.push_back(key);
          }
        }
    }
  });

  for (const auto& s : slabs) {
    const auto extra_base = static_cast<std::uint32_t>(mesh.vertices.size());
    mesh.vertices.insert(mesh.vertices.end(), s.extra.begin(), s.extra.end());
    for (const auto& tk : s.tris) {
      Triangle t;
      for (int k = 0; k < 3; ++k) {
        if (tk[k] & kExtraTag) {
          t[k] = extra_base + static_cast<std::uint32_t>(tk[k] & ~kExtraTag);
          continue;
        }
        const auto it = std::lower_bound(keys.begin(), keys.end(), tk[k]);
        t[k] = static_cast<std::uint32_t>(it - keys.begin());
      }
      mesh.triangles.push_back(t);
    }
  }
  return mesh;
}

}  // namespace nestedsurf
