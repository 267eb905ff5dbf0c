#pragma once

// Closed-form exact solutions, derived forcing and boundary data, and error
// norms for the parabolic benchmark on the unit square and the coupled
// pressure-concentration benchmark on the disk.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <utility>

#include "mdfem/assembly.hpp"
#include "mdfem/dispersion.hpp"
#include "mdfem/fe_space.hpp"
#include "mdfem/geometry.hpp"

namespace mdfem {

struct ExactSolution {
  ScalarField value;
  VectorField gradient;
  ScalarField time_derivative;

  AnalyticField analytic() const { return {value, gradient}; }
};

// ---------------------------------------------------------------------------
// Coupled benchmark: p = 100 (x - t)^2 e^{-t}, c = 0.5 + 0.2 e^{-t} cos x sin y,
// mu(c) = 1 + c, u = -(2 / mu) grad p, D(u) = (1 + 0.1 |u|) I.

inline constexpr double kMobility52 = 2.0;
inline constexpr DispersionParams kDispersion52{1.0, 1.0, 0.1, 0.1};

inline double viscosity52(double c) { return 1.0 + c; }

struct Exact52 {
  double p = 0.0;
  Vec2 grad_p;
  double c = 0.0;
  Vec2 grad_c;
  double dc_dt = 0.0;
  Vec2 u;
  double speed = 0.0;
};

inline Exact52 exact52(Vec2 x, double t) {
  const double e = std::exp(-t);
  const double s = x.x - t;
  Exact52 r;
  r.p = 100.0 * s * s * e;
  r.grad_p = {200.0 * s * e, 0.0};
  const double cs = std::cos(x.x) * std::sin(x.y);
  r.c = 0.5 + 0.2 * e * cs;
  r.grad_c = {-0.2 * e * std::sin(x.x) * std::sin(x.y), 0.2 * e * std::cos(x.x) * std::cos(x.y)};
  r.dc_dt = -0.2 * e * cs;
  r.u = (-kMobility52 / viscosity52(r.c)) * r.grad_p;
  r.speed = norm(r.u);
  return r;
}

struct Forcing52 {
  double f = 0.0;         // pressure source: -div((1/mu(c)) grad p)
  double g = 0.0;         // concentration source: c_t - div(D(u) grad c) + u . grad c
  double psi = 0.0;       // normal velocity u . n
  double flux = 0.0;      // dispersive flux D(u) grad c . n
};

/// Forcing and boundary data for the coupled benchmark; n is the outward
/// normal used for the two boundary quantities.
inline Forcing52 forcing52(Vec2 x, double t, Vec2 n = {}) {
  const Exact52 ex = exact52(x, t);
  const double e = std::exp(-t);
  const double s = x.x - t;
  const double mu = viscosity52(ex.c);
  const double cx = ex.grad_c.x;

  Forcing52 out;
  // d/dx [200 s e / mu] with mu_x = c_x.
  out.f = -200.0 * e * (1.0 / mu - s * cx / (mu * mu));

  // |u| = 400 |s| e / mu; the gradient uses sign(0) = 0 on the kink.
  const double sgn = (s > 0.0) - (s < 0.0);
  const Vec2 grad_speed = 400.0 * e * (Vec2{sgn / mu, 0.0} - (std::abs(s) / (mu * mu)) * ex.grad_c);
  const double d = 1.0 + 0.1 * ex.speed;
  const double laplace_c = -0.4 * e * std::cos(x.x) * std::sin(x.y);
  const double div_flux = d * laplace_c + 0.1 * dot(grad_speed, ex.grad_c);
  out.g = ex.dc_dt - div_flux + dot(ex.u, ex.grad_c);

  out.psi = dot(ex.u, n);
  out.flux = d * dot(ex.grad_c, n);
  return out;
}

inline ExactSolution exact52_concentration() {
  return {[](Vec2 x, double t) { return exact52(x, t).c; }, [](Vec2 x, double t) { return exact52(x, t).grad_c; },
          [](Vec2 x, double t) { return exact52(x, t).dc_dt; }};
}

inline ExactSolution exact52_pressure() {
  return {[](Vec2 x, double t) { return exact52(x, t).p; }, [](Vec2 x, double t) { return exact52(x, t).grad_p; },
          [](Vec2 x, double t) {
            const double s = x.x - t;
            return -100.0 * std::exp(-t) * (2.0 * s + s * s);
          }};
}

inline Vec2 exact52_velocity(Vec2 x, double t) { return exact52(x, t).u; }

// ---------------------------------------------------------------------------
// Parabolic benchmark on the unit square: A = example51_coefficient,
// f = e^t sin(pi x), phi0 = cos(pi x) cos(pi y), homogeneous Neumann data.

inline double forcing51(Vec2 x, double t) { return std::exp(t) * std::sin(std::numbers::pi * x.x); }

inline double initial51(Vec2 x) { return std::cos(std::numbers::pi * x.x) * std::cos(std::numbers::pi * x.y); }

// ---------------------------------------------------------------------------
// Smooth solution for the projection lab: phi = e^{-t} cos(pi x) cos(pi y)
// solving phi_t - div(A grad phi) + phi = f with A = example51_coefficient.
// grad phi . n = 0 on the unit square, so the flux datum vanishes.

inline ExactSolution exact_lab() {
  constexpr double pi = std::numbers::pi;
  return {[](Vec2 x, double t) { return std::exp(-t) * std::cos(pi * x.x) * std::cos(pi * x.y); },
          [](Vec2 x, double t) {
            const double e = std::exp(-t);
            return Vec2{-pi * e * std::sin(pi * x.x) * std::cos(pi * x.y), -pi * e * std::cos(pi * x.x) * std::sin(pi * x.y)};
          },
          [](Vec2 x, double t) { return -std::exp(-t) * std::cos(pi * x.x) * std::cos(pi * x.y); }};
}

inline double forcing_lab(Vec2 x, double t) {
  constexpr double pi = std::numbers::pi;
  const double e = std::exp(-t);
  const double phi = e * std::cos(pi * x.x) * std::cos(pi * x.y);
  const Vec2 grad{-pi * e * std::sin(pi * x.x) * std::cos(pi * x.y), -pi * e * std::cos(pi * x.x) * std::sin(pi * x.y)};
  const double a = example51_coefficient(x, t);
  const double a_s = example51_coefficient_ds(x, t);
  // phi_t + phi = 0; -div(A grad phi) = -A lap(phi) - grad A . grad phi.
  return 2.0 * pi * pi * a * phi - a_s * (grad.x + grad.y);
}

// ---------------------------------------------------------------------------
// Error norms.

enum class NormKind { Linf, L2, H1Semi };

inline std::string to_string(NormKind k) {
  switch (k) {
    case NormKind::Linf:
      return "Linf";
    case NormKind::L2:
      return "L2";
    case NormKind::H1Semi:
      return "H1semi";
  }
  return "?";
}

struct ErrorReport {
  NormKind kind = NormKind::Linf;
  double value = 0.0;
  std::string sampling;
};

namespace detail {

inline constexpr char kLinfSampling[] = "element vertices and order-4 quadrature points";
inline constexpr char kIntegralSampling[] = "order-6 quadrature";

/// Calls fn(point) at every element vertex and order-4 quadrature point.
template <typename Fn>
void for_each_linf_sample(const FeSpace& space, Fn&& fn) {
  const QuadRule rule = quadrature_rule(4);
  std::vector<Barycentric> pts{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}};
  pts.insert(pts.end(), rule.points.begin(), rule.points.end());
  for (std::size_t t = 0; t < space.num_elements(); ++t) {
    const auto& g = space.geometry(t);
    for (const auto& l : pts) fn(ElementPoint{t, l, g.point(l)});
  }
}

}  // namespace detail

/// Distance between a finite element function and a closed-form field.
inline ErrorReport error_norm(const FeFunction& fe, const ExactSolution& exact, double t, NormKind kind) {
  const auto& space = fe.space();
  ErrorReport rep{kind, 0.0, kind == NormKind::Linf ? detail::kLinfSampling : detail::kIntegralSampling};
  if (kind == NormKind::Linf) {
    detail::for_each_linf_sample(space, [&](const ElementPoint& p) {
      rep.value = std::max(rep.value, std::abs(fe.value_on(p.triangle, p.bary) - exact.value(p.x, t)));
    });
    return rep;
  }
  double sum = 0.0;
  detail::for_each_quadrature_point(space, kDataOrder, [&](const ElementPoint& p, double w, const LocalBasis&) {
    const auto pv = fe.eval_on(p.triangle, p.bary);
    if (kind == NormKind::L2) {
      const double d = pv.value - exact.value(p.x, t);
      sum += w * d * d;
    } else {
      const Vec2 d = pv.gradient - exact.gradient(p.x, t);
      sum += w * dot(d, d);
    }
  });
  rep.value = std::sqrt(sum);
  return rep;
}

/// Pointwise Euclidean distance between two velocity fields on the space's mesh.
inline ErrorReport error_norm(const FeSpace& space, const PointVelocity& uh, const VectorField& exact, double t,
                              NormKind kind) {
  if (kind == NormKind::H1Semi) throw ParameterError("H1 seminorm is not defined for pointwise velocity fields");
  ErrorReport rep{kind, 0.0, kind == NormKind::Linf ? detail::kLinfSampling : detail::kIntegralSampling};
  if (kind == NormKind::Linf) {
    detail::for_each_linf_sample(space, [&](const ElementPoint& p) {
      rep.value = std::max(rep.value, norm(uh(p, t) - exact(p.x, t)));
    });
    return rep;
  }
  double sum = 0.0;
  detail::for_each_quadrature_point(space, kDataOrder, [&](const ElementPoint& p, double w, const LocalBasis&) {
    const Vec2 d = uh(p, t) - exact(p.x, t);
    sum += w * dot(d, d);
  });
  rep.value = std::sqrt(sum);
  return rep;
}

/// max over vertices of the coarse mesh of |coarse - fine|, for nested meshes
/// whose shared vertices carry bit-identical coordinates.
inline ErrorReport vertex_difference(const FeFunction& coarse, const FeFunction& fine) {
  std::map<std::pair<double, double>, std::size_t> fine_index;
  const auto& fv = fine.space().mesh().vertices;
  for (std::size_t i = 0; i < fv.size(); ++i) fine_index.emplace(std::pair{fv[i].x, fv[i].y}, i);
  ErrorReport rep{NormKind::Linf, 0.0, "coarse-mesh vertices"};
  const auto& cv = coarse.space().mesh().vertices;
  for (std::size_t i = 0; i < cv.size(); ++i) {
    const auto it = fine_index.find({cv[i].x, cv[i].y});
    if (it == fine_index.end()) throw ParameterError("meshes are not nested at vertex " + std::to_string(i));
    // Vertex dofs come first in both spaces.
    rep.value = std::max(rep.value, std::abs(coarse.coeffs()[i] - fine.coeffs()[it->second]));
  }
  return rep;
}

/// (int |f|^q)^{1/q} for a finite element function, order-6 quadrature.
inline double lq_norm(const FeFunction& f, double q) {
  double sum = 0.0;
  detail::for_each_quadrature_point(f.space(), kDataOrder, [&](const ElementPoint& p, double w, const LocalBasis&) {
    sum += w * std::pow(std::abs(f.value_on(p.triangle, p.bary)), q);
  });
  return std::pow(sum, 1.0 / q);
}

/// (int |f|^q + |grad f|^q)^{1/q}.
inline double w1q_norm(const FeFunction& f, double q) {
  double sum = 0.0;
  detail::for_each_quadrature_point(f.space(), kDataOrder, [&](const ElementPoint& p, double w, const LocalBasis&) {
    const auto pv = f.eval_on(p.triangle, p.bary);
    sum += w * (std::pow(std::abs(pv.value), q) + std::pow(norm(pv.gradient), q));
  });
  return std::pow(sum, 1.0 / q);
}

/// (int |f(., t)|^q)^{1/q} over the mesh of a space, order-6 quadrature.
inline double lq_norm(const FeSpace& space, const ScalarField& f, double t, double q) {
  double sum = 0.0;
  detail::for_each_quadrature_point(space, kDataOrder, [&](const ElementPoint& p, double w, const LocalBasis&) {
    sum += w * std::pow(std::abs(f(p.x, t)), q);
  });
  return std::pow(sum, 1.0 / q);
}

}  // namespace mdfem
