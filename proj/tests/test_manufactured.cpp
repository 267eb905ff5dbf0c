#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mdfem/manufactured.hpp"
#include "mdfem/mesh.hpp"
#include "residual_oracle.hpp"

using namespace mdfem;

namespace {

constexpr double pi = std::numbers::pi;

SpacePtr square_space(int M, int r = 1) {
  return build_space(std::make_shared<const Mesh>(generate_square_mesh(M)), r);
}

}  // namespace

TEST(Exact52, ClosedFormValues) {
  const auto e = exact52({0.5, 0.5}, 0.0);
  EXPECT_NEAR(e.c, 0.5 + 0.2 * std::cos(0.5) * std::sin(0.5), 1e-15);
  EXPECT_NEAR(e.c, 0.58414709848, 1e-11);
  EXPECT_NEAR(e.p, 25.0, 1e-13);
  EXPECT_NEAR(e.u.x, -2.0 * 100.0 / (1.0 + e.c), 1e-12);
  EXPECT_EQ(e.u.y, 0.0);
  EXPECT_EQ(exact52({0.3, 0.9}, 0.3).p, 0.0);
}

TEST(Exact52, NormalVelocityOnTheBoundary) {
  const Vec2 x{1.0, 0.5};
  const Vec2 n{1.0, 0.0};
  const auto e = exact52(x, 0.0);
  EXPECT_NEAR(forcing52(x, 0.0, n).psi, -400.0 / (1.0 + e.c), 1e-12);
  EXPECT_NEAR(forcing52(x, 0.0, n).psi, -400.0 / (1.5 + 0.2 * std::cos(1.0) * std::sin(0.5)), 1e-12);
}

TEST(Forcing52, MatchesFiniteDifferenceResiduals) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> r(0.0, 0.5), theta(0.0, 2.0 * pi), time(0.0, 1.0);
  int checked = 0;
  while (checked < 200) {
    const double rad = r(rng), th = theta(rng), t = time(rng);
    const Vec2 x{0.5 + rad * std::cos(th), 0.5 + rad * std::sin(th)};
    if (std::abs(x.x - t) < 1e-2) continue;  // stay off the kink of |u|
    const auto oracle = mdfem::testing::finite_difference_residuals(x, t);
    const auto f = forcing52(x, t);
    EXPECT_LE(std::abs(f.f - oracle.pressure), 1e-6 * std::max(1.0, std::abs(oracle.pressure))) << x.x << ' ' << x.y << ' ' << t;
    EXPECT_LE(std::abs(f.g - oracle.concentration), 1e-6 * std::max(1.0, std::abs(oracle.concentration)))
        << x.x << ' ' << x.y << ' ' << t;
    ++checked;
  }
}

TEST(Forcing52, BoundaryDataMatchExactFields) {
  for (double th : {0.1, 1.3, 2.9, 4.4}) {
    const Vec2 n{std::cos(th), std::sin(th)};
    const Vec2 x = kDiskCenter + 0.5 * n;
    const auto e = exact52(x, 0.4);
    const auto f = forcing52(x, 0.4, n);
    EXPECT_NEAR(f.psi, dot(e.u, n), 1e-12);
    EXPECT_NEAR(f.flux, (1.0 + 0.1 * e.speed) * dot(e.grad_c, n), 1e-12);
  }
}

TEST(Exact52, AnalyticDerivativesMatchDifferences) {
  const auto c = exact52_concentration();
  const auto p = exact52_pressure();
  const double h = 1e-6;
  for (const Vec2 x : {Vec2{0.2, 0.7}, Vec2{0.6, 0.3}}) {
    for (double t : {0.0, 0.5}) {
      for (const auto* s : {&c, &p}) {
        const double gx = (s->value({x.x + h, x.y}, t) - s->value({x.x - h, x.y}, t)) / (2 * h);
        const double gy = (s->value({x.x, x.y + h}, t) - s->value({x.x, x.y - h}, t)) / (2 * h);
        const double gt = (s->value(x, t + h) - s->value(x, t - h)) / (2 * h);
        const double scale = std::max(1.0, std::abs(s->value(x, t)));
        EXPECT_NEAR(s->gradient(x, t).x, gx, 1e-6 * scale);
        EXPECT_NEAR(s->gradient(x, t).y, gy, 1e-6 * scale);
        EXPECT_NEAR(s->time_derivative(x, t), gt, 1e-6 * scale);
      }
    }
  }
}

TEST(Example51Data, Values) {
  EXPECT_NEAR(forcing51({0.5, 0.2}, 0.0), 1.0, 1e-15);
  EXPECT_NEAR(forcing51({0.5, 0.2}, 1.0), std::exp(1.0), 1e-14);
  EXPECT_NEAR(initial51({0.0, 0.0}), 1.0, 1e-15);
  EXPECT_NEAR(initial51({1.0, 0.0}), -1.0, 1e-15);
}

TEST(LabSolution, ForcingMatchesResidual) {
  const auto ex = exact_lab();
  const double h = 1e-5;
  for (const Vec2 x : {Vec2{0.2, 0.7}, Vec2{0.6, 0.3}, Vec2{0.9, 0.1}}) {
    const double t = 0.3;
    // -div(A grad phi) by central differences of the flux.
    auto flux = [&](Vec2 y) { return example51_coefficient(y, t) * ex.gradient(y, t); };
    const double div = (flux({x.x + h, x.y}).x - flux({x.x - h, x.y}).x) / (2 * h) +
                       (flux({x.x, x.y + h}).y - flux({x.x, x.y - h}).y) / (2 * h);
    const double residual = ex.time_derivative(x, t) - div + ex.value(x, t);
    EXPECT_NEAR(forcing_lab(x, t), residual, 1e-6 * std::max(1.0, std::abs(residual)));
  }
  // Homogeneous Neumann data on the square.
  EXPECT_NEAR(ex.gradient({0.0, 0.4}, 0.2).x, 0.0, 1e-15);
  EXPECT_NEAR(ex.gradient({0.4, 1.0}, 0.2).y, 0.0, 1e-14);
}

TEST(ErrorNorm, InterpolatedQuadratic) {
  // The interpolant of x^2 on M = 8 differs from x^2 by at most h^2 / 4.
  const ExactSolution sq{[](Vec2 x, double) { return x.x * x.x; }, [](Vec2 x, double) { return Vec2{2.0 * x.x, 0.0}; }, {}};
  const auto f = interpolate(square_space(8), sq.value, 0.0);
  const auto linf = error_norm(f, sq, 0.0, NormKind::Linf);
  EXPECT_NEAR(linf.value, 1.0 / 256.0, 1.0 / 256.0 * 0.05);
  EXPECT_LE(linf.value, 1.0 / 256.0 + 1e-15);
  EXPECT_EQ(linf.sampling, "element vertices and order-4 quadrature points");
  // The error is x (h - x) within each column of cells, so its L2 norm is h^2 / sqrt(30).
  EXPECT_NEAR(error_norm(f, sq, 0.0, NormKind::L2).value, 1.0 / 64.0 / std::sqrt(30.0), 1e-12);
}

TEST(ErrorNorm, ZeroForExactMembers) {
  const ExactSolution lin{[](Vec2 x, double) { return 1.0 + x.x - x.y; }, [](Vec2, double) { return Vec2{1.0, -1.0}; }, {}};
  const auto f = interpolate(square_space(4), lin.value, 0.0);
  for (auto k : {NormKind::Linf, NormKind::L2, NormKind::H1Semi}) EXPECT_LT(error_norm(f, lin, 0.0, k).value, 1e-14);
}

TEST(ErrorNorm, SeminormIgnoresConstantsAndScales) {
  const ExactSolution zero{[](Vec2, double) { return 0.0; }, [](Vec2, double) { return Vec2{}; }, {}};
  const auto space = square_space(8, 2);
  const auto f = interpolate(space, [](Vec2 x, double) { return std::sin(pi * x.x) * x.y; }, 0.0);
  const auto g = interpolate(space, [](Vec2 x, double) { return std::sin(pi * x.x) * x.y + 3.0; }, 0.0);
  const auto f2 = interpolate(space, [](Vec2 x, double) { return 2.0 * std::sin(pi * x.x) * x.y; }, 0.0);
  const double a = error_norm(f, zero, 0.0, NormKind::H1Semi).value;
  EXPECT_NEAR(error_norm(g, zero, 0.0, NormKind::H1Semi).value, a, 1e-12);
  EXPECT_NEAR(error_norm(f2, zero, 0.0, NormKind::H1Semi).value, 2.0 * a, 1e-12);
}

TEST(ErrorNorm, VelocityFields) {
  const auto space = square_space(4);
  const VectorField u = [](Vec2 x, double) { return Vec2{x.x, 1.0}; };
  EXPECT_EQ(error_norm(*space, analytic_velocity(u), u, 0.0, NormKind::Linf).value, 0.0);
  const auto shifted = analytic_velocity([](Vec2 x, double) { return Vec2{x.x + 3.0, 5.0}; });
  EXPECT_NEAR(error_norm(*space, shifted, u, 0.0, NormKind::Linf).value, 5.0, 1e-14);
  EXPECT_NEAR(error_norm(*space, shifted, u, 0.0, NormKind::L2).value, 5.0, 1e-12);
  EXPECT_THROW(error_norm(*space, shifted, u, 0.0, NormKind::H1Semi), ParameterError);
}

TEST(VertexDifference, NestedAndNonNested) {
  const auto coarse = interpolate(square_space(4), [](Vec2 x, double) { return x.x; }, 0.0);
  const auto fine = interpolate(square_space(8), [](Vec2 x, double) { return x.x + (x.y == 0.5 ? 0.25 : 0.0); }, 0.0);
  EXPECT_EQ(vertex_difference(coarse, fine).value, 0.25);
  const auto other = interpolate(square_space(6), [](Vec2 x, double) { return x.x; }, 0.0);
  EXPECT_THROW(vertex_difference(coarse, other), ParameterError);
}

TEST(LqNorms, ConstantsAndLinearity) {
  const auto space = square_space(4);
  const auto two = interpolate(space, [](Vec2, double) { return 2.0; }, 0.0);
  EXPECT_NEAR(lq_norm(two, 5.0), 2.0, 1e-13);
  EXPECT_NEAR(w1q_norm(two, 3.0), 2.0, 1e-13);
  const auto x = interpolate(space, [](Vec2 p, double) { return p.x; }, 0.0);
  EXPECT_NEAR(lq_norm(x, 2.0), 1.0 / std::sqrt(3.0), 1e-13);
  EXPECT_NEAR(lq_norm(*space, [](Vec2 p, double t) { return t * p.x; }, 2.0, 2.0), 2.0 / std::sqrt(3.0), 1e-13);
}
