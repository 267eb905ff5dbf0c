#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mdfem/harness.hpp"
#include "mdfem/manufactured.hpp"
#include "mdfem/mesh.hpp"
#include "mdfem/time_integrators.hpp"
#include "oracle.hpp"

using namespace mdfem;
using mdfem::testing::dense_solve;
using mdfem::testing::max_abs_diff;

namespace {

SpacePtr square_space(int M) { return build_space(std::make_shared<const Mesh>(generate_square_mesh(M)), 1); }

double mass_weighted_sum(const SparseMatrix& m, const FeFunction& f) {
  const auto mf = m * f.coeffs();
  return std::accumulate(mf.begin(), mf.end(), 0.0);
}

double mass_norm(const SparseMatrix& m, const FeFunction& f) {
  const auto mf = m * f.coeffs();
  return std::sqrt(std::inner_product(mf.begin(), mf.end(), f.coeffs().begin(), 0.0));
}

LinearParabolicProblem homogeneous_problem(ScalarField initial, double final_time) {
  LinearParabolicProblem p;
  p.coefficient = ScalarCoefficient{example51_coefficient};
  p.source = [](Vec2, double) { return 0.0; };
  p.initial = std::move(initial);
  p.final_time = final_time;
  return p;
}

/// Coupled problem with no forcing, a constant velocity field on the boundary
/// and constant viscosity, so constants are steady.
CoupledProblem quiet_coupled_problem() {
  CoupledProblem p;
  p.viscosity = [](double) { return 1.0; };
  p.dispersion = {1.0, 1.0, 0.1, 0.1};
  p.pressure_source = [](Vec2, double) { return 0.0; };
  p.transport_source = [](Vec2, double) { return 0.0; };
  p.normal_velocity = [](Vec2, Vec2 n, double) { return dot(Vec2{1.0, 0.5}, n); };
  p.initial_concentration = [](Vec2, double) { return 0.7; };
  p.final_time = 0.125;
  return p;
}

}  // namespace

TEST(StepCount, RejectsNonDividingStep) {
  EXPECT_THROW(backward_euler_solve(homogeneous_problem([](Vec2, double) { return 0.0; }, 1.0), square_space(2), 0.3),
               ParameterError);
  EXPECT_THROW(backward_euler_solve(homogeneous_problem([](Vec2, double) { return 0.0; }, 1.0), square_space(2), -0.5),
               ParameterError);
}

TEST(BackwardEuler, ConstantIsSteady) {
  const auto traj = backward_euler_solve(homogeneous_problem([](Vec2, double) { return 2.0; }, 0.25), square_space(6), 1.0 / 64);
  for (double v : traj.final_state.coeffs()) EXPECT_NEAR(v, 2.0, 1e-10);
}

TEST(BackwardEuler, FirstStepMatchesDenseSolve) {
  const auto space = square_space(4);
  LinearParabolicProblem p;
  p.coefficient = ScalarCoefficient{example51_coefficient};
  p.source = [](Vec2 x, double t) { return std::cos(x.y + t) * x.x; };
  p.initial = [](Vec2 x, double) { return initial51(x); };
  const double dt = 1.0 / 8;
  p.final_time = dt;
  const auto traj = backward_euler_solve(p, space, dt, {.tol = 1e-13});

  const auto m = assemble_mass(*space);
  const auto system = combine(1.0, m, dt, assemble_stiffness(*space, p.coefficient, dt));
  auto rhs = m * interpolate(space, p.initial, 0.0).coeffs();
  const auto load = assemble_load(*space, p.source, dt);
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += dt * load[i];
  EXPECT_LT(max_abs_diff(traj.final_state.coeffs(), dense_solve(system, rhs)), 1e-10);
}

TEST(BackwardEuler, SeparableSourceMatchesGenericPath) {
  const auto space = square_space(6);
  auto separable = problem51(0.125);
  auto generic = separable;
  generic.source_time_profile = nullptr;
  const auto a = backward_euler_solve(separable, space, 1.0 / 64);
  const auto b = backward_euler_solve(generic, space, 1.0 / 64);
  EXPECT_LT(max_abs_diff(a.final_state.coeffs(), b.final_state.coeffs()), 1e-9);
}

TEST(BackwardEuler, SeparableSourceRejectsZeroProfileAtStart) {
  auto p = problem51(0.125);
  p.source_time_profile = [](double t) { return t; };
  EXPECT_THROW(backward_euler_solve(p, square_space(2), 1.0 / 8), ParameterError);
}

TEST(BackwardEuler, BenchmarkSolutionStaysBounded) {
  const int M = 16;
  const auto traj = backward_euler_solve(problem51(), square_space(M), 0.5 / (M * M));
  for (double v : traj.final_state.coeffs()) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_LT(std::abs(v), 10.0);
  }
}

TEST(BackwardEuler, ConservesMassWithoutSources) {
  const auto space = square_space(8);
  const auto m = assemble_mass(*space);
  const auto p = homogeneous_problem([](Vec2 x, double) { return initial51(x) + x.x; }, 0.25);
  const double start = mass_weighted_sum(m, interpolate(space, p.initial, 0.0));
  for (bool lumped : {false, true}) {
    const auto traj = backward_euler_solve(p, space, 1.0 / 64, {.lumped_mass = lumped});
    EXPECT_NEAR(mass_weighted_sum(m, traj.final_state), start, 1e-9) << lumped;
  }
}

TEST(BackwardEuler, EnergyIsNonIncreasing) {
  const auto space = square_space(8);
  const auto m = assemble_mass(*space);
  const auto p = homogeneous_problem([](Vec2 x, double) { return initial51(x); }, 0.25);
  double last = mass_norm(m, interpolate(space, p.initial, 0.0));
  std::size_t calls = 0;
  backward_euler_solve(p, space, 1.0 / 128, {.observer = [&](std::size_t, double, const FeFunction& s) {
                         const double e = mass_norm(m, s);
                         EXPECT_LE(e, last + 1e-12);
                         last = e;
                         ++calls;
                       }});
  EXPECT_EQ(calls, 32u);
}

TEST(BackwardEuler, SnapshotsAndCsv) {
  const auto traj = backward_euler_solve(homogeneous_problem([](Vec2, double) { return 1.0; }, 0.5), square_space(1), 0.125,
                                         {.snapshot_stride = 2});
  EXPECT_EQ(traj.times, (std::vector<double>{0.0, 0.25, 0.5}));
  std::ostringstream os;
  write_trajectory_csv(os, traj);
  const std::string csv = os.str();
  EXPECT_EQ(csv.rfind("time,dof_index,x,y,value\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 3 * 4);
}

TEST(BackwardEuler, Deterministic) {
  const auto space = square_space(8);
  const auto a = backward_euler_solve(problem51(0.0625), space, 1.0 / 128);
  const auto b = backward_euler_solve(problem51(0.0625), space, 1.0 / 128);
  ASSERT_EQ(a.final_state.coeffs().size(), b.final_state.coeffs().size());
  for (std::size_t i = 0; i < a.final_state.coeffs().size(); ++i) EXPECT_EQ(a.final_state.coeffs()[i], b.final_state.coeffs()[i]);
}

TEST(PressureSolve, ZeroDataGivesZeroPressure) {
  auto p = quiet_coupled_problem();
  p.normal_velocity = nullptr;
  const auto mesh = std::make_shared<const Mesh>(generate_disk_mesh(16));
  const auto c = interpolate(build_space(mesh, 1), p.initial_concentration, 0.0);
  const auto sol = pressure_solve(build_space(mesh, 2), c, p, 0.0);
  for (double v : sol.pressure.coeffs()) EXPECT_NEAR(v, 0.0, 1e-14);
}

TEST(PressureSolve, RecoversAffinePressure) {
  auto p = quiet_coupled_problem();
  p.normal_velocity = [](Vec2, Vec2 n, double) { return -n.x; };  // P = x, u = (-1, 0)
  const auto mesh = std::make_shared<const Mesh>(generate_disk_mesh(24));
  const auto c = interpolate(build_space(mesh, 1), p.initial_concentration, 0.0);
  const auto sol = pressure_solve(build_space(mesh, 2), c, p, 0.0);
  const auto& space = sol.pressure.space();
  for (std::size_t t = 0; t < space.num_elements(); t += 7) {
    const Barycentric l{0.2, 0.5, 0.3};
    const ElementPoint ep{t, l, space.geometry(t).point(l)};
    EXPECT_NEAR(sol.velocity(ep, 0.0).x, -1.0, 1e-7);
    EXPECT_NEAR(sol.velocity(ep, 0.0).y, 0.0, 1e-7);
  }
  const auto weights = assemble_load(space, [](Vec2, double) { return 1.0; }, 0.0);
  EXPECT_NEAR(std::inner_product(weights.begin(), weights.end(), sol.pressure.coeffs().begin(), 0.0), 0.0, 1e-10);
}

TEST(PressureSolve, IncompatibleDataIsRejected) {
  auto p = quiet_coupled_problem();
  p.normal_velocity = nullptr;
  p.pressure_source = [](Vec2, double) { return 1.0; };
  const auto mesh = std::make_shared<const Mesh>(generate_disk_mesh(16));
  const auto c = interpolate(build_space(mesh, 1), p.initial_concentration, 0.0);
  EXPECT_THROW(pressure_solve(build_space(mesh, 2), c, p, 0.0), SolverError);
}

TEST(PressureSolve, RejectsMismatchedMeshes) {
  const auto p = quiet_coupled_problem();
  const auto c = interpolate(build_space(std::make_shared<const Mesh>(generate_disk_mesh(16)), 1), p.initial_concentration, 0.0);
  const auto other = build_space(std::make_shared<const Mesh>(generate_disk_mesh(16)), 2);
  EXPECT_THROW(pressure_solve(other, c, p, 0.0), ParameterError);
}

TEST(PressureSolve, BenchmarkVelocityAtInitialTime) {
  const auto p = problem52();
  const auto mesh = std::make_shared<const Mesh>(generate_disk_mesh(32));
  const auto c = interpolate(build_space(mesh, 1), p.initial_concentration, 0.0);
  const auto sol = pressure_solve(build_space(mesh, 2), c, p, 0.0);
  EXPECT_LT(std::abs(sol.compatibility_defect), 1e-8);
  const double err = error_norm(c.space(), sol.velocity, exact52_velocity, 0.0, NormKind::Linf).value;
  EXPECT_LT(err, 10.0 * 1.734e-2);
}

TEST(CnTransportStep, ConstantIsSteady) {
  const auto p = quiet_coupled_problem();
  const auto space = build_space(std::make_shared<const Mesh>(generate_disk_mesh(16)), 1);
  const auto c = interpolate(space, p.initial_concentration, 0.0);
  const auto step = cn_transport_step(c, analytic_velocity([](Vec2 x, double) { return Vec2{x.y, 1.0}; }), p, 0.0, 0.05);
  for (double v : step.next.coeffs()) EXPECT_NEAR(v, 0.7, 1e-10);
}

TEST(CnTransportStep, MatchesDenseSolve) {
  const auto p = problem52();
  const auto space = build_space(std::make_shared<const Mesh>(generate_disk_mesh(8)), 1);
  const auto c = interpolate(space, p.initial_concentration, 0.0);
  const auto u = analytic_velocity(exact52_velocity);
  const double dt = 1.0 / 16, th = 0.5 * dt;
  const auto step = cn_transport_step(c, u, p, 0.0, dt);

  const auto m = assemble_mass(*space);
  const auto op = combine(1.0, assemble_stiffness(*space, DispersionCoefficient{p.dispersion, u}, th), 1.0,
                          assemble_convection(*space, u, th));
  auto rhs = combine(1.0, m, -0.5 * dt, op) * c.coeffs();
  const auto g = assemble_load(*space, p.transport_source, th);
  const auto b = assemble_boundary_load(*space, p.dispersive_flux, th);
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += dt * (g[i] + b[i]);
  EXPECT_LT(max_abs_diff(step.next.coeffs(), dense_solve(combine(1.0, m, 0.5 * dt, op), rhs)), 1e-8);
}

TEST(CnTransportStep, RejectsNonPositiveStep) {
  const auto p = quiet_coupled_problem();
  const auto c = interpolate(build_space(std::make_shared<const Mesh>(generate_disk_mesh(8)), 1), p.initial_concentration, 0.0);
  EXPECT_THROW(cn_transport_step(c, analytic_velocity([](Vec2, double) { return Vec2{}; }), p, 0.0, 0.0), ParameterError);
}

TEST(RunCoupled, ConstantConcentrationIsSteady) {
  const auto mesh = std::make_shared<const Mesh>(generate_disk_mesh(16));
  const auto r = run_coupled(quiet_coupled_problem(), mesh, 1, 1.0 / 32);
  for (double v : r.concentration.coeffs()) EXPECT_NEAR(v, 0.7, 1e-9);
  EXPECT_EQ(r.stats.steps, 4u);
  EXPECT_EQ(r.stats.clamp_events, 0u);
}

TEST(RunCoupled, OneStepIsPressureThenTransport) {
  auto p = problem52(1.0 / 16);
  const auto mesh = std::make_shared<const Mesh>(generate_disk_mesh(16));
  const auto r = run_coupled(p, mesh, 1, 1.0 / 16);
  const auto c0 = interpolate(build_space(mesh, 1), p.initial_concentration, 0.0);
  const auto pressure = pressure_solve(build_space(mesh, 2), c0, p, 1.0 / 32);
  const auto step = cn_transport_step(c0, pressure.velocity, p, 0.0, 1.0 / 16);
  EXPECT_LT(max_abs_diff(r.concentration.coeffs(), step.next.coeffs()), 1e-8);
}

TEST(RunCoupled, BenchmarkConcentrationStaysInRange) {
  const auto r = run_coupled(problem52(), std::make_shared<const Mesh>(generate_disk_mesh(16)), 1, 1.0 / 64);
  const auto [lo, hi] = std::minmax_element(r.concentration.coeffs().begin(), r.concentration.coeffs().end());
  EXPECT_GE(*lo, 0.2);
  EXPECT_LE(*hi, 0.8);
  EXPECT_EQ(r.stats.clamp_events, 0u);
}

TEST(RunCoupled, SecondOrderInTime) {
  // Successive differences on a fixed mesh shrink by about 4 per halving of dt
  // when the data are smooth in time.
  const auto mesh = std::make_shared<const Mesh>(generate_disk_mesh(16));
  auto p = quiet_coupled_problem();
  p.viscosity = viscosity52;
  p.initial_concentration = [](Vec2 x, double) { return exact52(x, 0.0).c; };
  p.final_time = 0.25;
  std::vector<FeFunction> finals;
  for (double dt : {1.0 / 16, 1.0 / 32, 1.0 / 64}) finals.push_back(run_coupled(p, mesh, 1, dt).concentration);
  const double d1 = max_abs_diff(finals[0].coeffs(), finals[1].coeffs());
  const double d2 = max_abs_diff(finals[1].coeffs(), finals[2].coeffs());
  EXPECT_GE(d1 / d2, 3.4);
  EXPECT_LE(d1 / d2, 4.6);
}

TEST(RunCoupled, Deterministic) {
  const auto mesh = std::make_shared<const Mesh>(generate_disk_mesh(16));
  const auto a = run_coupled(problem52(0.125), mesh, 1, 1.0 / 32);
  const auto b = run_coupled(problem52(0.125), mesh, 1, 1.0 / 32);
  for (std::size_t i = 0; i < a.concentration.coeffs().size(); ++i) {
    EXPECT_EQ(a.concentration.coeffs()[i], b.concentration.coeffs()[i]);
  }
  for (std::size_t i = 0; i < a.pressure.coeffs().size(); ++i) EXPECT_EQ(a.pressure.coeffs()[i], b.pressure.coeffs()[i]);
}
