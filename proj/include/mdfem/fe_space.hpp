#pragma once

// Lagrange P1/P2 spaces on a triangulation, Lagrangian interpolation and
// pointwise evaluation of finite element functions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mdfem/error.hpp"
#include "mdfem/geometry.hpp"
#include "mdfem/mesh.hpp"
#include "mdfem/quadrature.hpp"

namespace mdfem {

inline constexpr std::size_t kMaxLocalDofs = 6;

/// Affine data of one triangle: area and the (constant) barycentric gradients.
struct ElementGeometry {
  std::array<Vec2, 3> vertices;
  double area = 0.0;
  std::array<Vec2, 3> grad_lambda;

  Vec2 point(const Barycentric& l) const {
    return l[0] * vertices[0] + l[1] * vertices[1] + l[2] * vertices[2];
  }
};

inline ElementGeometry element_geometry(const Mesh& mesh, std::size_t t) {
  ElementGeometry g;
  for (int k = 0; k < 3; ++k) g.vertices[k] = mesh.vertices[mesh.triangles[t][k]];
  const double twice_area = orient(g.vertices[0], g.vertices[1], g.vertices[2]);
  g.area = 0.5 * twice_area;
  for (int i = 0; i < 3; ++i) {
    const Vec2 e = g.vertices[(i + 2) % 3] - g.vertices[(i + 1) % 3];
    g.grad_lambda[i] = {-e.y / twice_area, e.x / twice_area};
  }
  return g;
}

/// Values and gradients of the local basis at one point of one element.
struct LocalBasis {
  std::size_t size = 0;
  std::array<double, kMaxLocalDofs> value{};
  std::array<Vec2, kMaxLocalDofs> grad{};
};

/// Local ordering: vertices 0,1,2, then (P2) midpoints of edges 01, 12, 20.
inline LocalBasis local_basis(int degree, const ElementGeometry& g, const Barycentric& l) {
  LocalBasis b;
  const auto& dl = g.grad_lambda;
  if (degree == 1) {
    b.size = 3;
    for (int i = 0; i < 3; ++i) {
      b.value[i] = l[i];
      b.grad[i] = dl[i];
    }
    return b;
  }
  b.size = 6;
  for (int i = 0; i < 3; ++i) {
    b.value[i] = l[i] * (2.0 * l[i] - 1.0);
    b.grad[i] = (4.0 * l[i] - 1.0) * dl[i];
  }
  for (int e = 0; e < 3; ++e) {
    const int i = e;
    const int j = (e + 1) % 3;
    b.value[3 + e] = 4.0 * l[i] * l[j];
    b.grad[3 + e] = 4.0 * (l[i] * dl[j] + l[j] * dl[i]);
  }
  return b;
}

/// Compressed-row sparsity of the Galerkin coupling graph, with the slot of
/// every element-local (a, b) pair precomputed.
struct SparsityPattern {
  std::vector<std::size_t> row_ptr;
  std::vector<std::size_t> cols;
  std::vector<std::size_t> element_slots;  // [t * n_local * n_local + a * n_local + b]
};

/// Boundary edge with the element-local indices of the dofs lying on it.
struct BoundaryDofs {
  std::size_t triangle = 0;
  std::array<std::size_t, 2> local_vertices{};  // local indices of the edge endpoints
  std::optional<std::size_t> local_midpoint;    // P2 only
  Vec2 normal;
};

class FeSpace {
 public:
  FeSpace(std::shared_ptr<const Mesh> mesh, int degree) : mesh_(std::move(mesh)), degree_(degree) {
    if (!mesh_) throw ParameterError("finite element space needs a mesh");
    if (degree_ != 1 && degree_ != 2) {
      throw ParameterError("polynomial degree must be 1 or 2, got " + std::to_string(degree_));
    }
    build_dofs();
    build_pattern();
    build_boundary();
  }

  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
  int degree() const { return degree_; }
  std::size_t local_size() const { return degree_ == 1 ? 3 : 6; }
  std::size_t size() const { return dof_coords_.size(); }
  std::size_t num_elements() const { return mesh_->triangles.size(); }

  std::span<const Vec2> dof_coords() const { return dof_coords_; }
  std::span<const std::size_t> element_dofs(std::size_t t) const {
    return {element_dofs_.data() + t * local_size(), local_size()};
  }
  const ElementGeometry& geometry(std::size_t t) const { return geometry_[t]; }
  const SparsityPattern& pattern() const { return pattern_; }
  std::span<const BoundaryDofs> boundary() const { return boundary_; }

  LocalBasis basis(std::size_t t, const Barycentric& l) const { return local_basis(degree_, geometry_[t], l); }

 private:
  void build_dofs() {
    const Mesh& m = *mesh_;
    const std::size_t n_local = local_size();
    dof_coords_ = m.vertices;
    element_dofs_.resize(m.triangles.size() * n_local);
    geometry_.reserve(m.triangles.size());
    std::vector<Edge> edges;
    if (degree_ == 2) {
      edges = mesh_edges(m);
      for (const auto& e : edges) dof_coords_.push_back(0.5 * (m.vertices[e[0]] + m.vertices[e[1]]));
    }
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
      const auto& tri = m.triangles[t];
      geometry_.push_back(element_geometry(m, t));
      for (int k = 0; k < 3; ++k) element_dofs_[t * n_local + k] = tri[k];
      if (degree_ == 2) {
        for (int k = 0; k < 3; ++k) {
          const Edge key = detail::sorted_edge(tri[k], tri[(k + 1) % 3]);
          const auto it = std::lower_bound(edges.begin(), edges.end(), key);
          element_dofs_[t * n_local + 3 + k] = m.vertices.size() + static_cast<std::size_t>(it - edges.begin());
        }
      }
    }
  }

  void build_pattern() {
    const std::size_t n = size();
    const std::size_t n_local = local_size();
    std::vector<std::vector<std::size_t>> rows(n);
    for (std::size_t t = 0; t < num_elements(); ++t) {
      const auto dofs = element_dofs(t);
      for (auto i : dofs) rows[i].insert(rows[i].end(), dofs.begin(), dofs.end());
    }
    pattern_.row_ptr.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& r = rows[i];
      std::sort(r.begin(), r.end());
      r.erase(std::unique(r.begin(), r.end()), r.end());
      pattern_.row_ptr[i + 1] = pattern_.row_ptr[i] + r.size();
    }
    pattern_.cols.reserve(pattern_.row_ptr[n]);
    for (const auto& r : rows) pattern_.cols.insert(pattern_.cols.end(), r.begin(), r.end());
    pattern_.element_slots.resize(num_elements() * n_local * n_local);
    for (std::size_t t = 0; t < num_elements(); ++t) {
      const auto dofs = element_dofs(t);
      for (std::size_t a = 0; a < n_local; ++a) {
        const auto first = pattern_.cols.begin() + static_cast<std::ptrdiff_t>(pattern_.row_ptr[dofs[a]]);
        const auto last = pattern_.cols.begin() + static_cast<std::ptrdiff_t>(pattern_.row_ptr[dofs[a] + 1]);
        for (std::size_t b = 0; b < n_local; ++b) {
          pattern_.element_slots[(t * n_local + a) * n_local + b] =
              static_cast<std::size_t>(std::lower_bound(first, last, dofs[b]) - pattern_.cols.begin());
        }
      }
    }
  }

  void build_boundary() {
    for (const auto& be : mesh_->boundary_edges) {
      const auto& tri = mesh_->triangles[be.triangle];
      BoundaryDofs bd;
      bd.triangle = be.triangle;
      bd.normal = be.normal;
      for (int v = 0; v < 2; ++v) {
        bd.local_vertices[v] = static_cast<std::size_t>(std::find(tri.begin(), tri.end(), be.vertices[v]) - tri.begin());
      }
      if (degree_ == 2) {
        for (std::size_t k = 0; k < 3; ++k) {
          const std::size_t i = bd.local_vertices[0];
          const std::size_t j = bd.local_vertices[1];
          if ((i == k && j == (k + 1) % 3) || (j == k && i == (k + 1) % 3)) bd.local_midpoint = 3 + k;
        }
      }
      boundary_.push_back(bd);
    }
  }

  std::shared_ptr<const Mesh> mesh_;
  int degree_;
  std::vector<Vec2> dof_coords_;
  std::vector<std::size_t> element_dofs_;
  std::vector<ElementGeometry> geometry_;
  SparsityPattern pattern_;
  std::vector<BoundaryDofs> boundary_;
};

using SpacePtr = std::shared_ptr<const FeSpace>;

/// Degree-r Lagrange space; dofs are the mesh vertices in order, followed
/// (for r = 2) by the edge midpoints in sorted edge order.
inline SpacePtr build_space(std::shared_ptr<const Mesh> mesh, int degree) {
  return std::make_shared<const FeSpace>(std::move(mesh), degree);
}

using ScalarField = std::function<double(Vec2, double)>;
using VectorField = std::function<Vec2(Vec2, double)>;

struct PointValue {
  double value = 0.0;
  Vec2 gradient;
};

/// A point inside a located triangle.
struct ElementPoint {
  std::size_t triangle = 0;
  Barycentric bary{};
  Vec2 x;
};

/// Brute-force scan; the first triangle whose barycentric coordinates are all
/// >= -1e-12 wins.
inline std::optional<ElementPoint> locate(const FeSpace& space, Vec2 p) {
  constexpr double tol = 1e-12;
  for (std::size_t t = 0; t < space.num_elements(); ++t) {
    const auto& g = space.geometry(t);
    Barycentric l;
    for (int i = 0; i < 3; ++i) l[i] = 1.0 + dot(g.grad_lambda[i], p - g.vertices[i]);
    if (l[0] >= -tol && l[1] >= -tol && l[2] >= -tol) return ElementPoint{t, l, p};
  }
  return std::nullopt;
}

class FeFunction {
 public:
  FeFunction() = default;
  explicit FeFunction(SpacePtr space) : space_(std::move(space)), coeffs_(space_->size(), 0.0) {}
  FeFunction(SpacePtr space, std::vector<double> coeffs) : space_(std::move(space)), coeffs_(std::move(coeffs)) {
    if (coeffs_.size() != space_->size()) {
      throw ParameterError("coefficient vector length " + std::to_string(coeffs_.size()) +
                           " does not match dof count " + std::to_string(space_->size()));
    }
  }

  const FeSpace& space() const { return *space_; }
  const SpacePtr& space_ptr() const { return space_; }
  std::span<const double> coeffs() const { return coeffs_; }
  std::vector<double>& mutable_coeffs() { return coeffs_; }

  double value_on(std::size_t t, const Barycentric& l) const {
    const auto b = space_->basis(t, l);
    const auto dofs = space_->element_dofs(t);
    double v = 0.0;
    for (std::size_t a = 0; a < b.size; ++a) v += coeffs_[dofs[a]] * b.value[a];
    return v;
  }

  PointValue eval_on(std::size_t t, const Barycentric& l) const {
    const auto b = space_->basis(t, l);
    const auto dofs = space_->element_dofs(t);
    PointValue pv;
    for (std::size_t a = 0; a < b.size; ++a) {
      pv.value += coeffs_[dofs[a]] * b.value[a];
      pv.gradient += coeffs_[dofs[a]] * b.grad[a];
    }
    return pv;
  }

 private:
  SpacePtr space_;
  std::vector<double> coeffs_;
};

/// Lagrangian interpolation: coefficient i is field(dof_coords[i], t).
inline FeFunction interpolate(const SpacePtr& space, const ScalarField& field, double t) {
  std::vector<double> c(space->size());
  const auto xs = space->dof_coords();
  for (std::size_t i = 0; i < c.size(); ++i) {
    c[i] = field(xs[i], t);
    if (!std::isfinite(c[i])) {
      throw EvaluationError("field is not finite at dof " + std::to_string(i) + " (" + detail::fmt17(xs[i].x) + ", " +
                            detail::fmt17(xs[i].y) + ")");
    }
  }
  return FeFunction(space, std::move(c));
}

/// Value and gradient at an arbitrary point; on shared edges the gradient of
/// the first located triangle is returned.
inline PointValue evaluate(const FeFunction& f, Vec2 p) {
  const auto where = locate(f.space(), p);
  if (!where) {
    throw LocationError("point (" + detail::fmt17(p.x) + ", " + detail::fmt17(p.y) + ") lies outside the mesh");
  }
  return f.eval_on(where->triangle, where->bary);
}

/// CSV with columns dof_index,x,y,value; a leading time column when given.
inline void write_function_csv(std::ostream& os, const FeFunction& f, std::optional<double> time = std::nullopt,
                               bool header = true) {
  if (header) os << (time ? "time," : "") << "dof_index,x,y,value\n";
  const auto xs = f.space().dof_coords();
  const auto c = f.coeffs();
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (time) os << detail::fmt17(*time) << ',';
    os << i << ',' << detail::fmt17(xs[i].x) << ',' << detail::fmt17(xs[i].y) << ',' << detail::fmt17(c[i]) << '\n';
  }
}

}  // namespace mdfem
