#pragma once

// Left-hand sides of the coupled benchmark PDEs evaluated by nested
// fourth-order central differences of the exact p and c values only.

#include <cmath>
#include <functional>

#include "mdfem/manufactured.hpp"

namespace mdfem::testing {

struct Residuals {
  double pressure = 0.0;       // -div((1 / mu(c)) grad p)
  double concentration = 0.0;  // c_t - div(D(u) grad c) + u . grad c
};

/// d/ds of g at s with the 5-point stencil.
inline double central_diff(const std::function<double(double)>& g, double s, double h) {
  return (g(s - 2 * h) - 8 * g(s - h) + 8 * g(s + h) - g(s + 2 * h)) / (12 * h);
}

inline Residuals finite_difference_residuals(Vec2 x, double t, double h = 1e-3) {
  auto p = [t](Vec2 y) { return exact52(y, t).p; };
  auto c = [t](Vec2 y) { return exact52(y, t).c; };
  auto grad = [h](const std::function<double(Vec2)>& f, Vec2 y) {
    return Vec2{central_diff([&](double s) { return f({s, y.y}); }, y.x, h),
                central_diff([&](double s) { return f({y.x, s}); }, y.y, h)};
  };
  auto mu = [&](Vec2 y) { return 1.0 + c(y); };
  auto velocity = [&](Vec2 y) { return (-2.0 / mu(y)) * grad(p, y); };
  auto divergence = [h](const std::function<Vec2(Vec2)>& F, Vec2 y) {
    return central_diff([&](double s) { return F({s, y.y}).x; }, y.x, h) +
           central_diff([&](double s) { return F({y.x, s}).y; }, y.y, h);
  };

  Residuals r;
  r.pressure = -divergence([&](Vec2 y) { return (1.0 / mu(y)) * grad(p, y); }, x);
  const double c_t = central_diff([&](double s) { return exact52(x, s).c; }, t, h);
  const double dispersion = divergence([&](Vec2 y) { return (1.0 + 0.1 * norm(velocity(y))) * grad(c, y); }, x);
  r.concentration = c_t - dispersion + dot(velocity(x), grad(c, x));
  return r;
}

}  // namespace mdfem::testing
