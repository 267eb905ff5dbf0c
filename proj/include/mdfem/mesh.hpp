#pragma once

// Conforming triangulations of the unit square and the disk centred at
// (0.5, 0.5) with radius 0.5, plus a plain-text exchange format.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mdfem/error.hpp"
#include "mdfem/geometry.hpp"

namespace mdfem {

using Triangle = std::array<std::size_t, 3>;
using Edge = std::array<std::size_t, 2>;

struct BoundaryEdge {
  Edge vertices{};
  std::size_t triangle = 0;
  Vec2 normal;  // outward unit normal
};

struct Mesh {
  std::vector<Vec2> vertices;
  std::vector<Triangle> triangles;  // counterclockwise
  std::vector<BoundaryEdge> boundary_edges;
};

struct MeshStats {
  double h_max = 0.0;
  double h_min = 0.0;
  double total_area = 0.0;
  double quality = 0.0;  // min over triangles of inradius / circumradius
};

namespace detail {

inline Edge sorted_edge(std::size_t a, std::size_t b) {
  return a < b ? Edge{a, b} : Edge{b, a};
}

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Unique edges of the mesh, each stored as (lo, hi), in lexicographic order.
inline std::vector<Edge> mesh_edges(const Mesh& mesh) {
  std::vector<Edge> edges;
  edges.reserve(3 * mesh.triangles.size());
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) edges.push_back(detail::sorted_edge(t[k], t[(k + 1) % 3]));
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

/// Recomputes boundary_edges from the triangle list.
inline void build_boundary(Mesh& mesh) {
  std::map<Edge, std::vector<std::size_t>> owners;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) owners[detail::sorted_edge(tri[k], tri[(k + 1) % 3])].push_back(t);
  }
  mesh.boundary_edges.clear();
  for (const auto& [edge, tris] : owners) {
    if (tris.size() != 1) continue;
    const Vec2 a = mesh.vertices[edge[0]];
    const Vec2 b = mesh.vertices[edge[1]];
    const Vec2 d = b - a;
    Vec2 n{d.y, -d.x};
    n *= 1.0 / norm(n);
    const auto& tri = mesh.triangles[tris.front()];
    const Vec2 centroid = (1.0 / 3.0) * (mesh.vertices[tri[0]] + mesh.vertices[tri[1]] + mesh.vertices[tri[2]]);
    if (dot(n, centroid - 0.5 * (a + b)) > 0.0) n = -n;
    mesh.boundary_edges.push_back({edge, tris.front(), n});
  }
}

/// Throws ParameterError when any structural invariant is violated.
inline void validate_mesh(const Mesh& mesh) {
  const std::size_t nv = mesh.vertices.size();
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (auto v : tri) {
      if (v >= nv) throw ParameterError("triangle " + std::to_string(t) + " references a missing vertex");
    }
    if (!(orient(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]) > 0.0)) {
      throw ParameterError("triangle " + std::to_string(t) + " has non-positive signed area");
    }
  }
  std::map<Edge, int> count;
  for (const auto& tri : mesh.triangles) {
    for (int k = 0; k < 3; ++k) ++count[detail::sorted_edge(tri[k], tri[(k + 1) % 3])];
  }
  std::size_t boundary = 0;
  for (const auto& [edge, c] : count) {
    if (c > 2) throw ParameterError("edge shared by more than two triangles");
    if (c == 1) ++boundary;
  }
  if (boundary != mesh.boundary_edges.size()) throw ParameterError("boundary edge list is inconsistent");
  for (const auto& be : mesh.boundary_edges) {
    if (count.find(detail::sorted_edge(be.vertices[0], be.vertices[1])) == count.end() ||
        std::abs(norm(be.normal) - 1.0) > 1e-12) {
      throw ParameterError("invalid boundary edge record");
    }
  }
}

/// Uniform (M+1)x(M+1) grid on the unit square, every cell split along its
/// lower-left to upper-right diagonal.
inline Mesh generate_square_mesh(int M) {
  if (M < 1) throw ParameterError("square mesh requires M >= 1, got " + std::to_string(M));
  Mesh mesh;
  const auto n = static_cast<std::size_t>(M) + 1;
  mesh.vertices.reserve(n * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      mesh.vertices.push_back({static_cast<double>(i) / M, static_cast<double>(j) / M});
    }
  }
  mesh.triangles.reserve(2 * static_cast<std::size_t>(M) * M);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const std::size_t v00 = j * n + i;
      const std::size_t v10 = v00 + 1;
      const std::size_t v01 = v00 + n;
      const std::size_t v11 = v01 + 1;
      mesh.triangles.push_back({v00, v10, v11});
      mesh.triangles.push_back({v00, v11, v01});
    }
  }
  build_boundary(mesh);
  return mesh;
}

inline constexpr Vec2 kDiskCenter{0.5, 0.5};
inline constexpr double kDiskRadius = 0.5;

/// Ring mesh of the disk with exactly M equally spaced boundary vertices.
///
/// L = round(M / 2pi) concentric rings; ring j has radius 0.5 j / L and
/// round(M j / L) vertices, all starting at angle 0.
/// Neighbouring rings are zipped together by always adding the shorter of
/// the two candidate spokes.
inline Mesh generate_disk_mesh(int M) {
  if (M < 8) throw ParameterError("disk mesh requires M >= 8, got " + std::to_string(M));
  const double two_pi = 2.0 * std::numbers::pi;
  const int L = std::max(1, static_cast<int>(std::lround(M / two_pi)));

  Mesh mesh;
  mesh.vertices.push_back(kDiskCenter);
  std::vector<std::size_t> ring_start{0};
  std::vector<std::size_t> ring_size{1};
  for (int j = 1; j <= L; ++j) {
    const auto count = static_cast<std::size_t>(j == L ? M : std::lround(static_cast<double>(M) * j / L));
    const double radius = kDiskRadius * j / L;
    ring_start.push_back(mesh.vertices.size());
    ring_size.push_back(count);
    for (std::size_t k = 0; k < count; ++k) {
      const double theta = two_pi * static_cast<double>(k) / count;
      mesh.vertices.push_back({kDiskCenter.x + radius * std::cos(theta), kDiskCenter.y + radius * std::sin(theta)});
    }
  }

  auto add = [&mesh](std::size_t a, std::size_t b, std::size_t c) {
    if (orient(mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]) < 0.0) std::swap(b, c);
    mesh.triangles.push_back({a, b, c});
  };

  for (std::size_t k = 0; k < ring_size[1]; ++k) {
    add(0, ring_start[1] + k, ring_start[1] + (k + 1) % ring_size[1]);
  }
  for (int j = 2; j <= L; ++j) {
    const std::size_t na = ring_size[j - 1];
    const std::size_t nb = ring_size[j];
    auto inner = [&](std::size_t i) { return ring_start[j - 1] + i % na; };
    auto outer = [&](std::size_t k) { return ring_start[j] + k % nb; };
    std::size_t i = 0;
    std::size_t k = 0;
    while (i < na || k < nb) {
      bool advance_inner;
      if (i == na) {
        advance_inner = false;
      } else if (k == nb) {
        advance_inner = true;
      } else {
        const double spoke_inner = norm(mesh.vertices[inner(i + 1)] - mesh.vertices[outer(k)]);
        const double spoke_outer = norm(mesh.vertices[inner(i)] - mesh.vertices[outer(k + 1)]);
        advance_inner = spoke_inner < spoke_outer;
      }
      if (advance_inner) {
        add(inner(i), inner(i + 1), outer(k));
        ++i;
      } else {
        add(inner(i), outer(k + 1), outer(k));
        ++k;
      }
    }
  }
  build_boundary(mesh);
  return mesh;
}

inline MeshStats mesh_stats(const Mesh& mesh) {
  MeshStats s;
  s.h_min = std::numeric_limits<double>::infinity();
  s.quality = std::numeric_limits<double>::infinity();
  for (const auto& tri : mesh.triangles) {
    const Vec2 a = mesh.vertices[tri[0]];
    const Vec2 b = mesh.vertices[tri[1]];
    const Vec2 c = mesh.vertices[tri[2]];
    const double la = norm(b - c);
    const double lb = norm(c - a);
    const double lc = norm(a - b);
    const double area = 0.5 * orient(a, b, c);
    s.total_area += area;
    s.h_max = std::max({s.h_max, la, lb, lc});
    s.h_min = std::min({s.h_min, la, lb, lc});
    const double inradius = 2.0 * area / (la + lb + lc);
    const double circumradius = la * lb * lc / (4.0 * area);
    s.quality = std::min(s.quality, inradius / circumradius);
  }
  return s;
}

/// Writes `vertices N triangles T boundary B` followed by one record per line.
inline void write_mesh(std::ostream& os, const Mesh& mesh) {
  os << "vertices " << mesh.vertices.size() << " triangles " << mesh.triangles.size() << " boundary "
     << mesh.boundary_edges.size() << '\n';
  for (const auto& v : mesh.vertices) os << detail::fmt17(v.x) << ' ' << detail::fmt17(v.y) << '\n';
  for (const auto& t : mesh.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (const auto& e : mesh.boundary_edges) {
    os << e.vertices[0] << ' ' << e.vertices[1] << ' ' << e.triangle << ' ' << detail::fmt17(e.normal.x) << ' '
       << detail::fmt17(e.normal.y) << '\n';
  }
}

inline Mesh read_mesh(std::istream& is) {
  std::string kw_v, kw_t, kw_b;
  std::size_t nv = 0, nt = 0, nb = 0;
  if (!(is >> kw_v >> nv >> kw_t >> nt >> kw_b >> nb) || kw_v != "vertices" || kw_t != "triangles" ||
      kw_b != "boundary") {
    throw FormatError("mesh header must read 'vertices N triangles T boundary B'");
  }
  // operator>> on double goes through strtod, which round-trips %.17g exactly.
  Mesh mesh;
  mesh.vertices.resize(nv);
  for (auto& v : mesh.vertices) {
    if (!(is >> v.x >> v.y)) throw FormatError("truncated vertex section");
  }
  mesh.triangles.resize(nt);
  for (auto& t : mesh.triangles) {
    if (!(is >> t[0] >> t[1] >> t[2])) throw FormatError("truncated triangle section");
  }
  mesh.boundary_edges.resize(nb);
  for (auto& e : mesh.boundary_edges) {
    if (!(is >> e.vertices[0] >> e.vertices[1] >> e.triangle >> e.normal.x >> e.normal.y)) {
      throw FormatError("truncated boundary section");
    }
  }
  validate_mesh(mesh);
  return mesh;
}

}  // namespace mdfem
