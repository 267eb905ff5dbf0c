#pragma once

// Galerkin assembly of mass, stiffness and convection forms and load
// vectors, plus the discrete operators built on them: the L2 projection,
// the zeroth-order-augmented Ritz projection and the discrete elliptic
// operator A_h(t) = M^{-1} (K_A(t) + M).

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <type_traits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mdfem/dispersion.hpp"
#include "mdfem/error.hpp"
#include "mdfem/fe_space.hpp"
#include "mdfem/quadrature.hpp"
#include "mdfem/solvers.hpp"
#include "mdfem/sparse.hpp"

namespace mdfem {

inline constexpr int kAssemblyOrder = 4;
inline constexpr int kDataOrder = 6;

/// Velocity evaluated at a point of a known element; lets discontinuous
/// fields such as -(k / mu(c_h)) grad P_h be sampled element by element.
using PointVelocity = std::function<Vec2(const ElementPoint&, double)>;

/// g(x, n, t) on the boundary, n the outward unit normal of the edge.
using BoundaryField = std::function<double(Vec2, Vec2, double)>;

struct ScalarCoefficient {
  ScalarField value;
};

struct TensorCoefficient {
  std::function<SymMatrix2(Vec2, double)> value;
};

/// D(u) with u sampled pointwise from a velocity field.
struct DispersionCoefficient {
  DispersionParams params;
  PointVelocity velocity;
};

using CoefficientField = std::variant<ScalarCoefficient, TensorCoefficient, DispersionCoefficient>;

struct AnalyticField {
  ScalarField value;
  VectorField gradient;
};

inline PointVelocity analytic_velocity(VectorField u) {
  return [u = std::move(u)](const ElementPoint& p, double t) { return u(p.x, t); };
}

/// Velocity represented by one finite element function per component.
inline PointVelocity velocity_from_components(FeFunction ux, FeFunction uy) {
  return [ux = std::move(ux), uy = std::move(uy)](const ElementPoint& p, double) {
    return Vec2{ux.value_on(p.triangle, p.bary), uy.value_on(p.triangle, p.bary)};
  };
}

namespace detail {

inline std::string describe(const ElementPoint& p) {
  return "quadrature point (" + fmt17(p.x.x) + ", " + fmt17(p.x.y) + ") of triangle " + std::to_string(p.triangle);
}

/// Evaluates the coefficient and checks positivity / ellipticity.
inline SymMatrix2 coefficient_at(const CoefficientField& coef, const ElementPoint& p, double t) {
  return std::visit(
      [&](const auto& c) -> SymMatrix2 {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, ScalarCoefficient>) {
          const double a = c.value(p.x, t);
          if (!(a > 0.0) || !std::isfinite(a)) throw AssemblyError("coefficient not positive at " + describe(p));
          return SymMatrix2::scaled_identity(a);
        } else if constexpr (std::is_same_v<C, TensorCoefficient>) {
          const SymMatrix2 a = c.value(p.x, t);
          const auto [lo, hi] = a.eigenvalues();
          if (!(lo > 0.0) || !std::isfinite(hi)) throw AssemblyError("tensor not elliptic at " + describe(p));
          return a;
        } else {
          const Vec2 u = c.velocity(p, t);
          if (!is_finite(u)) throw AssemblyError("velocity not finite at " + describe(p));
          const SymMatrix2 d = bear_scheidegger(u, c.params);
          const auto [lo, hi] = d.eigenvalues();
          const auto [k_lo, k_hi] = ellipticity_bounds(c.params, norm(u));
          const double slack = 1e-12 * std::max(1.0, k_hi);
          if (lo < k_lo - slack || hi > k_hi + slack) {
            throw AssemblyError("dispersion tensor outside ellipticity bounds at " + describe(p));
          }
          return d;
        }
      },
      coef);
}

/// Accumulates element matrices into the space's precomputed pattern.
class PatternAccumulator {
 public:
  explicit PatternAccumulator(const FeSpace& space)
      : space_(space), values_(space.pattern().cols.size(), 0.0), n_local_(space.local_size()) {}

  void add(std::size_t t, std::size_t a, std::size_t b, double v) {
    values_[space_.pattern().element_slots[(t * n_local_ + a) * n_local_ + b]] += v;
  }

  SparseMatrix finish() && {
    const auto& p = space_.pattern();
    return {space_.size(), space_.size(), p.row_ptr, p.cols, std::move(values_)};
  }

 private:
  const FeSpace& space_;
  std::vector<double> values_;
  std::size_t n_local_;
};

template <typename Fn>
void for_each_quadrature_point(const FeSpace& space, int order, Fn&& fn) {
  const QuadRule rule = quadrature_rule(order);
  for (std::size_t t = 0; t < space.num_elements(); ++t) {
    const auto& g = space.geometry(t);
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const ElementPoint p{t, rule.points[q], g.point(rule.points[q])};
      fn(p, rule.weights[q] * g.area, space.basis(t, rule.points[q]));
    }
  }
}

}  // namespace detail

/// M[i][j] = int weight psi_i psi_j. The weight must be positive.
inline SparseMatrix assemble_mass(const FeSpace& space, const ScalarField& weight, double t,
                                  int order = kAssemblyOrder) {
  detail::PatternAccumulator acc(space);
  detail::for_each_quadrature_point(space, order, [&](const ElementPoint& p, double w, const LocalBasis& b) {
    const double c = weight ? weight(p.x, t) : 1.0;
    if (!(c > 0.0) || !std::isfinite(c)) throw AssemblyError("mass weight not positive at " + detail::describe(p));
    for (std::size_t a = 0; a < b.size; ++a) {
      for (std::size_t k = 0; k < b.size; ++k) acc.add(p.triangle, a, k, w * c * b.value[a] * b.value[k]);
    }
  });
  return std::move(acc).finish();
}

inline SparseMatrix assemble_mass(const FeSpace& space) { return assemble_mass(space, ScalarField{}, 0.0); }

/// K[i][j] = int (A grad psi_j) . grad psi_i.
inline SparseMatrix assemble_stiffness(const FeSpace& space, const CoefficientField& coef, double t,
                                       int order = kAssemblyOrder) {
  detail::PatternAccumulator acc(space);
  if (space.degree() == 1) {
    // Gradients are constant per element: only the integrated tensor matters.
    const QuadRule rule = quadrature_rule(order);
    const auto* scalar = std::get_if<ScalarCoefficient>(&coef);
    for (std::size_t t_idx = 0; t_idx < space.num_elements(); ++t_idx) {
      const auto& g = space.geometry(t_idx);
      SymMatrix2 integral;
      if (scalar) {
        double sum = 0.0;
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
          const double a = scalar->value(g.point(rule.points[q]), t);
          if (!(a > 0.0) || !std::isfinite(a)) {
            throw AssemblyError("coefficient not positive at " +
                                detail::describe({t_idx, rule.points[q], g.point(rule.points[q])}));
          }
          sum += rule.weights[q] * a;
        }
        integral = SymMatrix2::scaled_identity(sum * g.area);
      } else {
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
          const ElementPoint p{t_idx, rule.points[q], g.point(rule.points[q])};
          const SymMatrix2 a = detail::coefficient_at(coef, p, t);
          const double w = rule.weights[q] * g.area;
          integral.a11 += w * a.a11;
          integral.a12 += w * a.a12;
          integral.a22 += w * a.a22;
        }
      }
      for (std::size_t k = 0; k < 3; ++k) {
        const Vec2 flux = integral * g.grad_lambda[k];
        for (std::size_t i = 0; i < 3; ++i) acc.add(t_idx, i, k, dot(flux, g.grad_lambda[i]));
      }
    }
    return std::move(acc).finish();
  }
  detail::for_each_quadrature_point(space, order, [&](const ElementPoint& p, double w, const LocalBasis& b) {
    const SymMatrix2 a = detail::coefficient_at(coef, p, t);
    for (std::size_t k = 0; k < b.size; ++k) {
      const Vec2 flux = w * (a * b.grad[k]);
      for (std::size_t i = 0; i < b.size; ++i) acc.add(p.triangle, i, k, dot(flux, b.grad[i]));
    }
  });
  return std::move(acc).finish();
}

/// C[i][j] = int (u . grad psi_j) psi_i.
inline SparseMatrix assemble_convection(const FeSpace& space, const PointVelocity& velocity, double t,
                                        int order = kAssemblyOrder) {
  detail::PatternAccumulator acc(space);
  detail::for_each_quadrature_point(space, order, [&](const ElementPoint& p, double w, const LocalBasis& b) {
    const Vec2 u = velocity(p, t);
    if (!is_finite(u)) throw EvaluationError("velocity not finite at " + detail::describe(p));
    for (std::size_t k = 0; k < b.size; ++k) {
      const double adv = w * dot(u, b.grad[k]);
      for (std::size_t i = 0; i < b.size; ++i) acc.add(p.triangle, i, k, adv * b.value[i]);
    }
  });
  return std::move(acc).finish();
}

/// b[i] = int f psi_i.
inline std::vector<double> assemble_load(const FeSpace& space, const ScalarField& f, double t,
                                         int order = kAssemblyOrder) {
  std::vector<double> b(space.size(), 0.0);
  detail::for_each_quadrature_point(space, order, [&](const ElementPoint& p, double w, const LocalBasis& lb) {
    const double v = w * f(p.x, t);
    const auto dofs = space.element_dofs(p.triangle);
    for (std::size_t a = 0; a < lb.size; ++a) b[dofs[a]] += v * lb.value[a];
  });
  return b;
}

/// b[i] = int g . grad psi_i, the weak form of -div g.
inline std::vector<double> assemble_gradient_load(const FeSpace& space, const VectorField& g, double t,
                                                  int order = kAssemblyOrder) {
  std::vector<double> b(space.size(), 0.0);
  detail::for_each_quadrature_point(space, order, [&](const ElementPoint& p, double w, const LocalBasis& lb) {
    const Vec2 v = w * g(p.x, t);
    const auto dofs = space.element_dofs(p.triangle);
    for (std::size_t a = 0; a < lb.size; ++a) b[dofs[a]] += dot(v, lb.grad[a]);
  });
  return b;
}

/// b[i] = boundary integral of g psi_i, three-point Gauss on every boundary edge.
inline std::vector<double> assemble_boundary_load(const FeSpace& space, const BoundaryField& g, double t) {
  std::vector<double> b(space.size(), 0.0);
  const LineRule rule = gauss3_line();
  for (const auto& bd : space.boundary()) {
    const auto& geo = space.geometry(bd.triangle);
    const auto dofs = space.element_dofs(bd.triangle);
    const Vec2 xa = geo.vertices[bd.local_vertices[0]];
    const Vec2 xb = geo.vertices[bd.local_vertices[1]];
    const double length = norm(xb - xa);
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const double s = rule.points[q];
      Barycentric l{0.0, 0.0, 0.0};
      l[bd.local_vertices[0]] = 1.0 - s;
      l[bd.local_vertices[1]] = s;
      const Vec2 x = geo.point(l);
      const double v = rule.weights[q] * length * g(x, bd.normal, t);
      const auto basis = space.basis(bd.triangle, l);
      for (std::size_t a = 0; a < basis.size; ++a) b[dofs[a]] += v * basis.value[a];
    }
  }
  return b;
}

/// Diagonal matrix of row sums, stored in the pattern of M.
inline SparseMatrix lump_rows(const SparseMatrix& m) {
  std::vector<double> vals(m.nnz(), 0.0);
  const auto ptr = m.row_ptr();
  const auto cols = m.col_index();
  const auto v = m.values();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    std::size_t diag = ptr[i];
    for (std::size_t k = ptr[i]; k < ptr[i + 1]; ++k) {
      s += v[k];
      if (cols[k] == i) diag = k;
    }
    vals[diag] = s;
  }
  return {m.rows(), m.cols(), {ptr.begin(), ptr.end()}, {cols.begin(), cols.end()}, std::move(vals)};
}

namespace detail {

inline std::vector<double> solve_checked(const SparseMatrix& a, std::span<const double> b, const char* what,
                                         double tol = 1e-10) {
  auto [x, rep] = solve_spd(a, b, {.tol = tol});
  if (!rep.converged) {
    throw SolverError(std::string(what) + ": CG stopped at relative residual " + fmt17(rep.residual_norm));
  }
  return std::move(x);
}

}  // namespace detail

/// P_h: (field - P_h field, v_h) = 0 for all v_h.
inline FeFunction l2_project(const SpacePtr& space, const ScalarField& field, double t) {
  const auto m = assemble_mass(*space);
  const auto b = assemble_load(*space, field, t, kDataOrder);
  return FeFunction(space, detail::solve_checked(m, b, "L2 projection"));
}

/// R_h(t): (A grad(phi - R_h phi), grad v_h) + (phi - R_h phi, v_h) = 0 for all v_h.
inline FeFunction ritz_project(const SpacePtr& space, const AnalyticField& field, const CoefficientField& coef,
                               double t) {
  // Same quadrature on both sides so that members of the space are reproduced.
  const auto k = assemble_stiffness(*space, coef, t, kDataOrder);
  const auto m = assemble_mass(*space);
  std::vector<double> rhs(space->size(), 0.0);
  detail::for_each_quadrature_point(*space, kDataOrder, [&](const ElementPoint& p, double w, const LocalBasis& b) {
    const Vec2 flux = w * (detail::coefficient_at(coef, p, t) * field.gradient(p.x, t));
    const double v = w * field.value(p.x, t);
    const auto dofs = space->element_dofs(p.triangle);
    for (std::size_t a = 0; a < b.size; ++a) rhs[dofs[a]] += dot(flux, b.grad[a]) + v * b.value[a];
  });
  return FeFunction(space, detail::solve_checked(combine(1.0, k, 1.0, m), rhs, "Ritz projection"));
}

/// The FE function representing A_h(t) f, i.e. M^{-1} (K_A(t) + M) f.
inline FeFunction apply_Ah(const FeFunction& f, const CoefficientField& coef, double t) {
  const auto& space = f.space();
  const auto k = assemble_stiffness(space, coef, t);
  const auto m = assemble_mass(space);
  const auto rhs = combine(1.0, k, 1.0, m) * f.coeffs();
  return FeFunction(f.space_ptr(), detail::solve_checked(m, rhs, "A_h application"));
}

}  // namespace mdfem
