// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0
#include "metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

#include "error.hpp"
#include "keyvalue.hpp"
#include "parallel.hpp"

namespace nestedsurf {

namespace {

double angle_between(Vec3 u, Vec3 v) { return std::atan2(norm(cross(u, v)), dot(u, v)); }

std::vector<char> boundary_vertices(const TriangleMesh& mesh) {
  std::vector<std::uint64_t> edges;
  edges.reserve(3 * mesh.triangles.size());
  for (const auto& t : mesh.triangles)
    for (int k = 0; k < 3; ++k) {
      std::uint64_t a = t[k], b = t[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      edges.push_back((a << 32) | b);
    }
  std::sort(edges.begin(), edges.end());
  std::vector<char> boundary(mesh.vertices.size(), 0);
  for (std::size_t i = 0; i < edges.size();) {
    std::size_t j = i;
    while (j < edges.size() && edges[j] == edges[i]) ++j;
    if (j - i == 1) {
      boundary[edges[i] >> 32] = 1;
      boundary[edges[i] & 0xffffffffu] = 1;
    }
    i = j;
  }
  return boundary;
}

}  // namespace

CurvatureField gaussian_curvature(const TriangleMesh& mesh) {
  const std::size_t nv = mesh.vertices.size();
  CurvatureField field;
  field.deficit.assign(nv, 2 * std::numbers::pi);
  field.density.assign(nv, 0.0);
  field.gradient.assign(nv, 0.0);
  field.boundary = boundary_vertices(mesh);

  std::vector<double> area(nv, 0.0);
  std::vector<int> incident(nv, 0);
  for (const auto& t : mesh.triangles) {
    const Vec3 p[3] = {mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]};
    const double a = triangle_area(mesh, t);
    for (int k = 0; k < 3; ++k) {
      field.deficit[t[k]] -= angle_between(p[(k + 1) % 3] - p[k], p[(k + 2) % 3] - p[k]);
      area[t[k]] += a / 3.0;
      ++incident[t[k]];
    }
  }
  for (std::size_t v = 0; v < nv; ++v) {
    if (incident[v] == 0) throw Error(ErrorKind::Geometry, fmt::format("vertex {} has no incident triangle", v));
    if (field.boundary[v]) {
      field.deficit[v] = 0;
      continue;
    }
    field.density[v] = area[v] > 0 ? field.deficit[v] / area[v] : 0.0;
  }
  return field;
}

Vec3 triangle_gradient(Vec3 p0, Vec3 p1, Vec3 p2, double f0, double f1, double f2) {
  // Reference map x(r) = p0 + r1 (p1 - p0) + r2 (p2 - p0), Jacobian J = [e1 e2].
  const Vec3 e1 = p1 - p0, e2 = p2 - p0;
  const double g11 = dot(e1, e1), g12 = dot(e1, e2), g22 = dot(e2, e2);
  const double det = g11 * g22 - g12 * g12;
  if (!(det > 0)) throw Error(ErrorKind::Geometry, "zero-area triangle in curvature gradient");
  const double d1 = f1 - f0, d2 = f2 - f0;  // dK/dr_j
  // grad = J (J^T J)^{-1} dK/dr
  const double c1 = (g22 * d1 - g12 * d2) / det;
  const double c2 = (-g12 * d1 + g11 * d2) / det;
  return c1 * e1 + c2 * e2;
}

void curvature_gradient(const TriangleMesh& mesh, CurvatureField& field) {
  const std::size_t nv = mesh.vertices.size();
  if (field.density.size() != nv) throw Error(ErrorKind::InvalidArgument, "curvature field does not match mesh");
  std::vector<double> weighted(nv, 0.0), weight(nv, 0.0);
  for (const auto& t : mesh.triangles) {
    if (field.boundary[t[0]] || field.boundary[t[1]] || field.boundary[t[2]]) continue;
    const Vec3 g = triangle_gradient(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]],
                                     field.density[t[0]], field.density[t[1]], field.density[t[2]]);
    const double a = triangle_area(mesh, t);
    const double mag = norm(g);
    for (auto v : t) {
      weighted[v] += a * mag;
      weight[v] += a;
    }
  }
  field.gradient.assign(nv, 0.0);
  for (std::size_t v = 0; v < nv; ++v)
    if (weight[v] > 0) field.gradient[v] = weighted[v] / weight[v];
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const auto mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  double m = values[mid];
  if (values.size() % 2 == 0) {
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    m = 0.5 * (m + lower);
  }
  return m;
}

CurvatureSummary summarize(const TriangleMesh& mesh, const CurvatureField& field) {
  CurvatureSummary s;
  std::vector<double> area(mesh.vertices.size(), 0.0);
  for (const auto& t : mesh.triangles) {
    const double a = triangle_area(mesh, t) / 3.0;
    for (auto v : t) area[v] += a;
  }
  std::vector<double> grads;
  double density_sum = 0, area_sum = 0;
  for (std::size_t v = 0; v < field.size(); ++v) {
    if (field.boundary[v]) continue;
    ++s.interior_vertices;
    s.deficit_sum += field.deficit[v];
    density_sum += field.density[v];
    area_sum += area[v];
    grads.push_back(field.gradient[v]);
  }
  if (s.interior_vertices > 0) {
    s.mean_density = density_sum / static_cast<double>(s.interior_vertices);
    s.area_weighted_density = area_sum > 0 ? s.deficit_sum / area_sum : 0.0;
  }
  s.median_gradient = median(std::move(grads));
  return s;
}

std::vector<SurfacePoint> read_points_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  const std::string src = path.string();
  std::string line;
  if (!std::getline(in, line) || trim(line) != "id,x,y,z")
    throw Error(ErrorKind::Format, src + ": expected header 'id,x,y,z'");
  std::vector<SurfacePoint> pts;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (std::size_t pos; (pos = line.find(',', start)) != std::string::npos; start = pos + 1)
      cols.push_back(trim(line.substr(start, pos - start)));
    cols.push_back(trim(line.substr(start)));
    if (cols.size() != 4) throw Error(ErrorKind::Format, src + ": expected 4 columns in '" + line + "'");
    SurfacePoint p{cols[0], {parse_real(cols[1], src), parse_real(cols[2], src), parse_real(cols[3], src)}};
    if (!std::isfinite(p.position.x) || !std::isfinite(p.position.y) || !std::isfinite(p.position.z))
      throw Error(ErrorKind::Format, src + ": non-finite coordinate for point '" + p.id + "'");
    pts.push_back(std::move(p));
  }
  return pts;
}

// Region-based closest point (Ericson, Real-Time Collision Detection 5.1.5).
Vec3 closest_point_on_triangle(Vec3 p, Vec3 a, Vec3 b, Vec3 c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0 && d2 <= 0) return a;

  const Vec3 bp = p - b;
  const double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

  const double denom = 1.0 / (va + vb + vc);
  return a + (vb * denom) * ab + (vc * denom) * ac;
}

struct TriangleBvh::Impl {
  struct Box {
    Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity()};
    void grow(Vec3 p) {
      for (int a = 0; a < 3; ++a) {
        lo[a] = std::min(lo[a], p[a]);
        hi[a] = std::max(hi[a], p[a]);
      }
    }
    void grow(const Box& b) {
      grow(b.lo);
      grow(b.hi);
    }
    double distance2(Vec3 p) const {
      double d2 = 0;
      for (int a = 0; a < 3; ++a) {
        const double d = std::max({lo[a] - p[a], 0.0, p[a] - hi[a]});
        d2 += d * d;
      }
      return d2;
    }
  };
  struct Node {
    Box box;
    std::uint32_t left = 0, right = 0;  // children when count == 0
    std::uint32_t first = 0, count = 0;
  };

  const TriangleMesh* mesh = nullptr;
  std::vector<Node> nodes;
  std::vector<std::uint32_t> order;
  std::vector<Box> tri_box;
  std::vector<Vec3> centroid;

  static constexpr std::uint32_t kLeafSize = 4;

  std::uint32_t build(std::uint32_t first, std::uint32_t count) {
    Node node;
    Box cbox;
    for (std::uint32_t i = first; i < first + count; ++i) {
      node.box.grow(tri_box[order[i]]);
      cbox.grow(centroid[order[i]]);
    }
    const auto index = static_cast<std::uint32_t>(nodes.size());
    nodes.push_back(node);
    if (count <= kLeafSize) {
      nodes[index].first = first;
      nodes[index].count = count;
      return index;
    }
    int axis = 0;
    for (int a = 1; a < 3; ++a)
      if (cbox.hi[a] - cbox.lo[a] > cbox.hi[axis] - cbox.lo[axis]) axis = a;
    const std::uint32_t mid = first + count / 2;
    std::nth_element(order.begin() + first, order.begin() + mid, order.begin() + first + count,
                     [&](std::uint32_t a, std::uint32_t b) {
                       if (centroid[a][axis] != centroid[b][axis]) return centroid[a][axis] < centroid[b][axis];
                       return a < b;
                     });
    const auto left = build(first, mid - first);
    const auto right = build(mid, first + count - mid);
    nodes[index].left = left;
    nodes[index].right = right;
    return index;
  }

  double query(Vec3 p) const {
    double best2 = std::numeric_limits<double>::infinity();
    std::vector<std::uint32_t> stack{0};
    while (!stack.empty()) {
      const Node& n = nodes[stack.back()];
      stack.pop_back();
      if (n.box.distance2(p) >= best2) continue;
      if (n.count > 0) {
        for (std::uint32_t i = n.first; i < n.first + n.count; ++i) {
          const auto& t = mesh->triangles[order[i]];
          const Vec3 q = closest_point_on_triangle(p, mesh->vertices[t[0]], mesh->vertices[t[1]], mesh->vertices[t[2]]);
          best2 = std::min(best2, norm2(p - q));
        }
        continue;
      }
      const double dl = nodes[n.left].box.distance2(p), dr = nodes[n.right].box.distance2(p);
      // Push the farther child first so the nearer one is visited next.
      if (dl < dr) {
        stack.push_back(n.right);
        stack.push_back(n.left);
      } else {
        stack.push_back(n.left);
        stack.push_back(n.right);
      }
    }
    return std::sqrt(best2);
  }
};

TriangleBvh::TriangleBvh(const TriangleMesh& mesh) : impl_(std::make_unique<Impl>()) {
  if (mesh.triangles.empty()) throw Error(ErrorKind::InvalidArgument, "surface distance needs a non-empty mesh");
  impl_->mesh = &mesh;
  const auto n = static_cast<std::uint32_t>(mesh.triangles.size());
  impl_->order.resize(n);
  std::iota(impl_->order.begin(), impl_->order.end(), 0u);
  impl_->tri_box.resize(n);
  impl_->centroid.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto& t = mesh.triangles[i];
    for (auto v : t) impl_->tri_box[i].grow(mesh.vertices[v]);
    impl_->centroid[i] = (1.0 / 3.0) * (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]);
  }
  impl_->nodes.reserve(2 * n / Impl::kLeafSize + 2);
  impl_->build(0, n);
}

TriangleBvh::~TriangleBvh() = default;
TriangleBvh::TriangleBvh(TriangleBvh&&) noexcept = default;
TriangleBvh& TriangleBvh::operator=(TriangleBvh&&) noexcept = default;

double TriangleBvh::distance(Vec3 p) const { return impl_->query(p); }

std::vector<double> surface_distance(const std::vector<Vec3>& points, const TriangleMesh& mesh) {
  if (points.empty()) throw Error(ErrorKind::InvalidArgument, "surface distance needs at least one point");
  const TriangleBvh bvh(mesh);
  std::vector<double> out(points.size());
  parallel_for(points.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) out[i] = bvh.distance(points[i]);
  });
  return out;
}

std::vector<double> surface_distance_brute_force(const std::vector<Vec3>& points, const TriangleMesh& mesh) {
  if (mesh.triangles.empty()) throw Error(ErrorKind::InvalidArgument, "surface distance needs a non-empty mesh");
  std::vector<double> out;
  out.reserve(points.size());
  for (const Vec3& p : points) {
    double best2 = std::numeric_limits<double>::infinity();
    for (const auto& t : mesh.triangles) {
      const Vec3 q = closest_point_on_triangle(p, mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
      best2 = std::min(best2, norm2(p - q));
    }
    out.push_back(std::sqrt(best2));
  }
  return out;
}

DistanceSummary summarize_distances(const std::vector<double>& d) {
  DistanceSummary s;
  if (d.empty()) return s;
  s.mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  double ss = 0;
  for (double v : d) ss += (v - s.mean) * (v - s.mean);
  s.stddev = d.size() > 1 ? std::sqrt(ss / static_cast<double>(d.size() - 1)) : 0.0;
  s.max = *std::max_element(d.begin(), d.end());
  return s;
}

double mean_absolute_error(const VoxelGrid& a, const VoxelGrid& b) {
  if (!a.same_geometry(b)) throw Error(ErrorKind::Geometry, "volumes differ in dims, spacing or origin");
  const auto x = a.data(), y = b.data();
  double sum = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += std::abs(static_cast<double>(x[i]) - static_cast<double>(y[i]));
  return sum / static_cast<double>(x.size());
}

void write_curvature_csv(const CurvatureField& field, const std::filesystem::path& path) {
  std::string out = "vertex,K,K_density,CG\n";
  for (std::size_t v = 0; v < field.size(); ++v)
    fmt::format_to(std::back_inserter(out), "{},{},{},{}\n", v, field.deficit[v], field.density[v], field.gradient[v]);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  f << out;
}

void write_distance_csv(const std::vector<SurfacePoint>& points, const std::vector<double>& d,
                        const std::filesystem::path& path) {
  std::string out = "id,distance_mm\n";
  for (std::size_t i = 0; i < points.size(); ++i) fmt::format_to(std::back_inserter(out), "{},{}\n", points[i].id, d[i]);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  f << out;
}

std::string format_metric_summary(const CurvatureSummary& c, const DistanceSummary* d) {
  std::string s = fmt::format("median_cg={:.6g}", c.median_gradient);
  if (d) s += fmt::format(",sd_mm={:.3f}+/-{:.3f}", d->mean, d->stddev);
  return s;
}

}  // namespace nestedsurf
