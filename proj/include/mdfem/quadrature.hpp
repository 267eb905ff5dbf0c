#pragma once

#include <array>
#include <string>
#include <vector>

#include "mdfem/error.hpp"

namespace mdfem {

using Barycentric = std::array<double, 3>;

/// Symmetric rule on a triangle. Weights sum to one: the integral over a
/// triangle T is |T| * sum_q w_q f(x_q).
struct QuadRule {
  std::vector<Barycentric> points;
  std::vector<double> weights;
  int order = 0;
};

namespace detail {

inline void add_orbit3(QuadRule& rule, double a, double w) {
  const double b = 1.0 - 2.0 * a;
  rule.points.push_back({b, a, a});
  rule.points.push_back({a, b, a});
  rule.points.push_back({a, a, b});
  for (int k = 0; k < 3; ++k) rule.weights.push_back(w);
}

inline void add_orbit6(QuadRule& rule, double a, double b, double w) {
  const double c = 1.0 - a - b;
  for (const auto& p : {Barycentric{a, b, c}, Barycentric{a, c, b}, Barycentric{b, a, c}, Barycentric{b, c, a},
                        Barycentric{c, a, b}, Barycentric{c, b, a}}) {
    rule.points.push_back(p);
    rule.weights.push_back(w);
  }
}

}  // namespace detail

/// Positive-weight symmetric rules exact for total degree <= order, order in 1..6.
inline QuadRule quadrature_rule(int order) {
  QuadRule rule;
  rule.order = order;
  switch (order) {
    case 1:
      rule.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
      rule.weights.push_back(1.0);
      break;
    case 2:
      detail::add_orbit3(rule, 1.0 / 6.0, 1.0 / 3.0);
      break;
    case 3:
      // Strang-Fix six point rule.
      detail::add_orbit6(rule, 0.65902762237409221518, 0.2319333685530305725, 1.0 / 6.0);
      break;
    case 4:
      detail::add_orbit3(rule, 0.44594849091596488632, 0.2233815896780114657);
      detail::add_orbit3(rule, 0.09157621350977074346, 0.10995174365532186764);
      break;
    case 5:
      rule.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
      rule.weights.push_back(0.225);
      detail::add_orbit3(rule, 0.47014206410511508977, 0.13239415278850618074);
      detail::add_orbit3(rule, 0.1012865073234563388, 0.1259391805448271526);
      break;
    case 6:
      detail::add_orbit3(rule, 0.24928674517091042129, 0.11678627572637936603);
      detail::add_orbit3(rule, 0.06308901449150222834, 0.050844906370206816921);
      detail::add_orbit6(rule, 0.053145049844816947353, 0.31035245103378440542, 0.082851075618373575194);
      break;
    default:
      throw ParameterError("unsupported quadrature order " + std::to_string(order) + " (expected 1..6)");
  }
  return rule;
}

/// Gauss-Legendre nodes on [0, 1] with weights summing to one.
struct LineRule {
  std::vector<double> points;
  std::vector<double> weights;
};

inline LineRule gauss3_line() {
  const double d = 0.5 * 0.7745966692414834;
  return {{0.5 - d, 0.5, 0.5 + d}, {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0}};
}

}  // namespace mdfem
