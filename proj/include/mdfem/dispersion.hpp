#pragma once

// Bear-Scheidegger diffusion-dispersion tensor and numerical probes of its
// regularity: Lipschitz continuity in u, and the unbounded mixed x/t
// derivative of D(u(x, t)) across the set where |u| vanishes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mdfem/error.hpp"
#include "mdfem/geometry.hpp"
#include "mdfem/mesh.hpp"

namespace mdfem {

struct DispersionParams {
  double porosity = 1.0;
  double molecular_diffusion = 1.0;
  double alpha_l = 0.0;
  double alpha_t = 0.0;

  double floor() const { return porosity * molecular_diffusion; }

  void validate() const {
    if (!(porosity > 0.0 && porosity <= 1.0)) throw ParameterError("porosity must lie in (0, 1]");
    if (!(molecular_diffusion > 0.0)) throw ParameterError("molecular diffusion must be positive");
    if (!(alpha_l >= 0.0 && alpha_t >= 0.0)) throw ParameterError("dispersivities must be non-negative");
  }
};

/// Symmetric 2x2 matrix [[a11, a12], [a12, a22]].
struct SymMatrix2 {
  double a11 = 0.0;
  double a12 = 0.0;
  double a22 = 0.0;

  static SymMatrix2 scaled_identity(double s) { return {s, 0.0, s}; }

  Vec2 operator*(Vec2 v) const { return {a11 * v.x + a12 * v.y, a12 * v.x + a22 * v.y}; }

  /// Eigenvalues in ascending order.
  std::pair<double, double> eigenvalues() const {
    const double mean = 0.5 * (a11 + a22);
    const double rad = std::hypot(0.5 * (a11 - a22), a12);
    return {mean - rad, mean + rad};
  }

  double frobenius() const { return std::sqrt(a11 * a11 + 2.0 * a12 * a12 + a22 * a22); }

  friend SymMatrix2 operator-(const SymMatrix2& a, const SymMatrix2& b) {
    return {a.a11 - b.a11, a.a12 - b.a12, a.a22 - b.a22};
  }
  friend SymMatrix2 operator*(double s, const SymMatrix2& a) { return {s * a.a11, s * a.a12, s * a.a22}; }
  friend bool operator==(const SymMatrix2&, const SymMatrix2&) = default;
};

/// D(u) = Phi d_m I + |u| (alpha_T I + (alpha_L - alpha_T) u (x) u / |u|^2),
/// continuously extended by Phi d_m I at u = 0.
inline SymMatrix2 bear_scheidegger(Vec2 u, const DispersionParams& p) {
  if (!is_finite(u)) throw EvaluationError("velocity is not finite");
  const double speed = norm(u);
  const double base = p.floor() + p.alpha_t * speed;
  if (speed == 0.0) return SymMatrix2::scaled_identity(base);
  const double k = (p.alpha_l - p.alpha_t) / speed;
  const double off = k * u.x * u.y;
  return {base + k * u.x * u.x, off, base + k * u.y * u.y};
}

/// Bounds on the spectrum of D(u) over |u| <= u_max.
inline std::pair<double, double> ellipticity_bounds(const DispersionParams& p, double u_max) {
  if (u_max < 0.0) throw ParameterError("speed bound must be non-negative");
  return {p.floor(), p.floor() + std::max(p.alpha_l, p.alpha_t) * u_max};
}

namespace detail {

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline Vec2 sample_disk(std::mt19937_64& rng, double radius) {
  const double r = radius * std::sqrt(unit_uniform(rng));
  const double th = 2.0 * 3.141592653589793 * unit_uniform(rng);
  return {r * std::cos(th), r * std::sin(th)};
}

}  // namespace detail

/// Largest sampled ||D(u) - D(v)||_F / |u - v| over |u|, |v| <= speed_cap.
/// Half of the pairs are independent, the other half are local perturbations
/// v = u + delta e with delta log-uniform in [1e-3, 1] * speed_cap.
inline double lipschitz_probe(const DispersionParams& params, std::size_t n_samples, double speed_cap,
                              std::uint64_t seed) {
  if (n_samples < 10000) throw ParameterError("lipschitz_probe needs at least 1e4 samples");
  std::mt19937_64 rng(seed);
  double best = 0.0;
  for (std::size_t k = 0; k < n_samples; ++k) {
    const Vec2 u = detail::sample_disk(rng, speed_cap);
    Vec2 v;
    if (k % 2 == 0) {
      v = detail::sample_disk(rng, speed_cap);
    } else {
      const double delta = speed_cap * std::pow(10.0, -3.0 * detail::unit_uniform(rng));
      const double th = 2.0 * 3.141592653589793 * detail::unit_uniform(rng);
      v = u + delta * Vec2{std::cos(th), std::sin(th)};
      const double nv = norm(v);
      if (nv > speed_cap) v *= speed_cap / nv;
    }
    const double dist = norm(u - v);
    if (dist == 0.0) continue;
    best = std::max(best, (bear_scheidegger(u, params) - bear_scheidegger(v, params)).frobenius() / dist);
  }
  return best;
}

struct MixedDerivativeRow {
  double eps = 0.0;
  double first_diff_max = 0.0;
  double second_diff_max = 0.0;
};

/// Isotropic parameters used by the mixed-derivative probe.
inline constexpr DispersionParams kProbeParams{1.0, 1.0, 0.1, 0.1};

/// D(u(x, t)) for u = (x1 - x2 - t, 0); a scalar multiple of I, returned as its diagonal entry.
inline double kink_dispersion(Vec2 x, double t) {
  return bear_scheidegger({x.x - x.y - t, 0.0}, kProbeParams).a11;
}

/// |D(x + eps e1, t + eps) - D(x + eps e1, t) - D(x, t + eps) + D(x, t)| / eps^2.
inline double mixed_second_difference(Vec2 x, double t, double eps) {
  const Vec2 xe{x.x + eps, x.y};
  return std::abs(kink_dispersion(xe, t + eps) - kink_dispersion(xe, t) - kink_dispersion(x, t + eps) +
                  kink_dispersion(x, t)) /
         (eps * eps);
}

/// |D(x + eps e1, t) - D(x, t)| / eps.
inline double first_difference(Vec2 x, double t, double eps) {
  return std::abs(kink_dispersion({x.x + eps, x.y}, t) - kink_dispersion(x, t)) / eps;
}

/// Maxima of the first and mixed second differences over a dyadic grid
/// straddling the line x1 - x2 = t, for each step in eps_list.
inline std::vector<MixedDerivativeRow> mixed_derivative_probe(std::span<const double> eps_list) {
  for (std::size_t k = 0; k < eps_list.size(); ++k) {
    if (!(eps_list[k] > 0.0) || (k > 0 && !(eps_list[k] < eps_list[k - 1]))) {
      throw ParameterError("eps_list must be positive and strictly decreasing");
    }
  }
  std::vector<MixedDerivativeRow> rows;
  for (double eps : eps_list) {
    MixedDerivativeRow row{eps, 0.0, 0.0};
    for (double t : {0.0, 0.25, 0.5}) {
      for (double x2 : {0.25, 0.5}) {
        for (int k = -128; k <= 128; ++k) {
          const Vec2 x{x2 + t + k * 0x1.0p-7, x2};
          row.first_diff_max = std::max(row.first_diff_max, first_difference(x, t, eps));
          row.second_diff_max = std::max(row.second_diff_max, mixed_second_difference(x, t, eps));
        }
      }
    }
    rows.push_back(row);
  }
  return rows;
}

inline void write_probe_csv(std::ostream& os, std::span<const MixedDerivativeRow> rows) {
  os << "eps,first_diff_max,second_diff_max\n";
  for (const auto& r : rows) {
    os << detail::fmt17(r.eps) << ',' << detail::fmt17(r.first_diff_max) << ',' << detail::fmt17(r.second_diff_max)
       << '\n';
  }
}

/// A(x, t) = 3 + 0.1 s^3 sin(1 / s^2), s = x + y - t, with A = 3 for |s| < 1e-8.
inline double example51_coefficient(Vec2 x, double t) {
  const double s = x.x + x.y - t;
  if (std::abs(s) < 1e-8) return 3.0;
  return 3.0 + 0.1 * s * s * s * std::sin(1.0 / (s * s));
}

/// dA/ds = 0.1 (3 s^2 sin(1/s^2) - 2 cos(1/s^2)); the spatial gradient is (dA/ds, dA/ds).
/// Taken as zero where the coefficient itself is guarded.
inline double example51_coefficient_ds(Vec2 x, double t) {
  const double s = x.x + x.y - t;
  if (std::abs(s) < 1e-8) return 0.0;
  const double w = 1.0 / (s * s);
  return 0.1 * (3.0 * s * s * std::sin(w) - 2.0 * std::cos(w));
}

}  // namespace mdfem
