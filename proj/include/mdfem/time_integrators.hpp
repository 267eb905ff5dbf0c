#pragma once

// Backward Euler for linear parabolic problems and the coupled
// pressure/concentration driver (pressure in S_h^{r+1}, concentration in
// S_h^r) with a linearized semi-implicit Crank-Nicolson transport step.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "mdfem/assembly.hpp"
#include "mdfem/dispersion.hpp"
#include "mdfem/error.hpp"
#include "mdfem/fe_space.hpp"
#include "mdfem/solvers.hpp"

namespace mdfem {

/// phi_t - div(A grad phi) [+ phi] = f - div g, A grad phi . n = g . n.
struct LinearParabolicProblem {
  CoefficientField coefficient;
  ScalarField source;
  // Optional: when set, f(x, t) = source_time_profile(t) * source(x, 0), so the
  // load vector is assembled once and rescaled every step.
  std::function<double(double)> source_time_profile;
  VectorField flux;  // optional
  ScalarField initial;
  double final_time = 1.0;
  bool zeroth_order = false;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<FeFunction> snapshots;
  FeFunction final_state;
  std::size_t solver_iterations = 0;
};

/// Called after every accepted step with (step index, time, state).
using StepObserver = std::function<void(std::size_t, double, const FeFunction&)>;

struct BackwardEulerOptions {
  std::size_t snapshot_stride = 0;  // 0 keeps only the initial and final states
  bool lumped_mass = false;
  double tol = 1e-10;
  StepObserver observer;
};

namespace detail {

inline std::size_t step_count(double final_time, double dt) {
  if (!(dt > 0.0) || !(final_time > 0.0)) throw ParameterError("time step and final time must be positive");
  const double n = std::round(final_time / dt);
  if (n < 1.0 || std::abs(n * dt - final_time) > 1e-12 * std::max(1.0, final_time)) {
    throw ParameterError("time step " + fmt17(dt) + " does not divide final time " + fmt17(final_time));
  }
  return static_cast<std::size_t>(n);
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

}  // namespace detail

/// Solves (M + dt K(t_{n+1}) [+ dt M]) c^{n+1} = M c^n + dt (F(t_{n+1}) + G(t_{n+1}))
/// from c^0 = Pi_h phi_0.
inline Trajectory backward_euler_solve(const LinearParabolicProblem& problem, const SpacePtr& space, double dt,
                                       const BackwardEulerOptions& opt = {}) {
  const std::size_t n_steps = detail::step_count(problem.final_time, dt);
  const SparseMatrix mass_full = assemble_mass(*space);
  const SparseMatrix mass = opt.lumped_mass ? lump_rows(mass_full) : mass_full;

  Trajectory traj;
  FeFunction state = interpolate(space, problem.initial, 0.0);
  traj.times.push_back(0.0);
  traj.snapshots.push_back(state);

  std::vector<double> fixed_load;
  if (problem.source_time_profile) {
    fixed_load = assemble_load(*space, problem.source, 0.0);
    const double scale = problem.source_time_profile(0.0);
    if (!(scale != 0.0) || !std::isfinite(scale)) throw ParameterError("source time profile must be nonzero at t = 0");
    for (auto& v : fixed_load) v /= scale;
  }

  std::vector<double> rhs(space->size());
  std::vector<double> guess;
  std::vector<double> previous;
  for (std::size_t n = 0; n < n_steps; ++n) {
    const double t_next = problem.final_time * static_cast<double>(n + 1) / static_cast<double>(n_steps);
    const SparseMatrix k = assemble_stiffness(*space, problem.coefficient, t_next);
    const SparseMatrix system = combine(problem.zeroth_order ? 1.0 + dt : 1.0, mass, dt, k);

    mass.multiply(state.coeffs(), rhs);
    if (problem.source_time_profile) {
      detail::axpy(dt * problem.source_time_profile(t_next), fixed_load, rhs);
    } else {
      detail::axpy(dt, assemble_load(*space, problem.source, t_next), rhs);
    }
    if (problem.flux) detail::axpy(dt, assemble_gradient_load(*space, problem.flux, t_next), rhs);

    // Linear extrapolation of the last two states as the starting guess.
    guess.assign(state.coeffs().begin(), state.coeffs().end());
    if (n > 0) {
      for (std::size_t i = 0; i < guess.size(); ++i) guess[i] = 2.0 * guess[i] - previous[i];
    }
    auto [x, rep] = solve_spd(system, rhs, {.tol = opt.tol, .initial_guess = guess});
    if (!rep.converged) {
      throw SolverError("backward Euler step " + std::to_string(n + 1) + " did not converge (residual " +
                        detail::fmt17(rep.residual_norm) + ")");
    }
    traj.solver_iterations += rep.iterations;
    previous.assign(state.coeffs().begin(), state.coeffs().end());
    state = FeFunction(space, std::move(x));
    if (opt.observer) opt.observer(n + 1, t_next, state);
    if (opt.snapshot_stride > 0 && (n + 1) % opt.snapshot_stride == 0 && n + 1 != n_steps) {
      traj.times.push_back(t_next);
      traj.snapshots.push_back(state);
    }
  }
  traj.times.push_back(problem.final_time);
  traj.snapshots.push_back(state);
  traj.final_state = std::move(state);
  return traj;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) write_function_csv(os, traj.snapshots[k], traj.times[k], k == 0);
}

// ---------------------------------------------------------------------------
// Coupled miscible-displacement problem:
//   -div((k / mu(c)) grad P) = f,             u = -m (k / mu(c)) grad P,
//   Phi c_t - div(D(u) grad c) + u . grad c = g,
//   u . n = Psi,  D(u) grad c . n = flux     on the boundary.

struct CoupledProblem {
  std::function<double(double)> viscosity;
  double viscosity_floor = 0.1;
  double mobility = 1.0;
  ScalarField permeability;  // empty means k = 1
  double porosity = 1.0;
  DispersionParams dispersion;
  ScalarField pressure_source;
  ScalarField transport_source;
  BoundaryField normal_velocity;
  BoundaryField dispersive_flux;
  ScalarField initial_concentration;
  double final_time = 1.0;
};

struct PressureSolution {
  FeFunction pressure;
  PointVelocity velocity;
  SolveReport report;
  double compatibility_defect = 0.0;
};

/// Counts evaluations where mu(c_h) fell below the viscosity floor.
using ClampCounter = std::shared_ptr<std::size_t>;

/// Relative tolerance on sum_i b_i / sum_i |b_i| for the Neumann pressure data.
inline constexpr double kCompatibilityTol = 1e-8;

/// Solves the pure-Neumann pressure equation in the space of degree r+1 with
/// the concentration frozen at c_h, and exposes u_h = -m (k / mu(c_h)) grad P_h
/// as a pointwise field.
inline PressureSolution pressure_solve(const SpacePtr& space_p, const FeFunction& c_h, const CoupledProblem& problem,
                                       double t, ClampCounter clamps = {}) {
  if (space_p->mesh_ptr() != c_h.space().mesh_ptr()) throw ParameterError("pressure and concentration meshes differ");
  if (!clamps) clamps = std::make_shared<std::size_t>(0);

  auto mobility_at = [viscosity = problem.viscosity, floor = problem.viscosity_floor,
                      permeability = problem.permeability, c_h, clamps](const ElementPoint& p) {
    const double c = c_h.value_on(p.triangle, p.bary);
    if (!std::isfinite(c)) throw EvaluationError("concentration is not finite at " + detail::describe(p));
    double mu = viscosity(c);
    if (mu < floor) {
      mu = floor;
      ++*clamps;
    }
    const double k = permeability ? permeability(p.x, 0.0) : 1.0;
    return k / mu;
  };

  // Stiffness with the scalar coefficient k / mu(c_h) sampled element by element.
  detail::PatternAccumulator acc(*space_p);
  detail::for_each_quadrature_point(*space_p, kAssemblyOrder, [&](const ElementPoint& p, double w, const LocalBasis& b) {
    const double a = mobility_at(p);
    for (std::size_t j = 0; j < b.size; ++j) {
      for (std::size_t i = 0; i < b.size; ++i) acc.add(p.triangle, i, j, w * a * dot(b.grad[j], b.grad[i]));
    }
  });
  const SparseMatrix stiffness = std::move(acc).finish();

  // (k/mu) grad P . n = -Psi / m on the boundary.
  auto rhs = assemble_load(*space_p, problem.pressure_source, t, kDataOrder);
  if (problem.normal_velocity) {
    const double m = problem.mobility;
    const auto boundary = assemble_boundary_load(
        *space_p, [&](Vec2 x, Vec2 n, double s) { return -problem.normal_velocity(x, n, s) / m; }, t);
    detail::axpy(1.0, boundary, rhs);
  }
  const double defect = std::accumulate(rhs.begin(), rhs.end(), 0.0);
  double scale = 0.0;
  for (double v : rhs) scale += std::abs(v);
  if (std::abs(defect) > kCompatibilityTol * std::max(scale, 1.0)) {
    throw SolverError("pressure data violate the compatibility condition: sum of load = " + detail::fmt17(defect));
  }

  const auto weights = assemble_load(*space_p, [](Vec2, double) { return 1.0; }, t);
  auto [x, rep] = solve_spd(stiffness, rhs, {.tol = 1e-10, .nullspace_mean_zero = true, .mean_weights = weights});
  if (!rep.converged) {
    throw SolverError("pressure solve did not converge (residual " + detail::fmt17(rep.residual_norm) + ")");
  }

  PressureSolution out;
  out.pressure = FeFunction(space_p, std::move(x));
  out.report = rep;
  out.compatibility_defect = defect;
  out.velocity = [pressure = out.pressure, mobility_at, m = problem.mobility](const ElementPoint& p, double) {
    return (-m * mobility_at(p)) * pressure.eval_on(p.triangle, p.bary).gradient;
  };
  return out;
}

struct TransportStep {
  FeFunction next;
  SolveReport report;
};

/// One Crank-Nicolson step of the transport equation with the operator
/// frozen at the half-step velocity u_half:
///   (M + dt/2 L) c^{n+1} = (M - dt/2 L) c^n + dt (G + B)(t_{n+1/2}),
/// L = K_{D(u_half)} + C_{u_half}.
inline TransportStep cn_transport_step(const FeFunction& c_n, const PointVelocity& u_half, const CoupledProblem& problem,
                                       double t_n, double dt) {
  if (!(dt > 0.0)) throw ParameterError("time step must be positive");
  const FeSpace& space = c_n.space();
  const double t_half = t_n + 0.5 * dt;
  const double phi = problem.porosity;
  const SparseMatrix mass = assemble_mass(space, [phi](Vec2, double) { return phi; }, t_half);
  const SparseMatrix diffusion = assemble_stiffness(space, DispersionCoefficient{problem.dispersion, u_half}, t_half);
  const SparseMatrix convection = assemble_convection(space, u_half, t_half);
  const SparseMatrix op = combine(1.0, diffusion, 1.0, convection);

  std::vector<double> rhs = combine(1.0, mass, -0.5 * dt, op) * c_n.coeffs();
  if (problem.transport_source) detail::axpy(dt, assemble_load(space, problem.transport_source, t_half), rhs);
  if (problem.dispersive_flux) detail::axpy(dt, assemble_boundary_load(space, problem.dispersive_flux, t_half), rhs);

  auto [x, rep] = solve_general(combine(1.0, mass, 0.5 * dt, op), rhs, {.tol = 1e-10, .initial_guess = c_n.coeffs()});
  if (!rep.converged) {
    throw SolverError("transport step did not converge (residual " + detail::fmt17(rep.residual_norm) + ")");
  }
  return {FeFunction(c_n.space_ptr(), std::move(x)), rep};
}

struct CoupledStats {
  std::size_t steps = 0;
  std::size_t pressure_iterations = 0;
  std::size_t transport_iterations = 0;
  std::size_t clamp_events = 0;
};

struct CoupledResult {
  FeFunction pressure;
  PointVelocity velocity;
  FeFunction concentration;
  CoupledStats stats;
};

/// Runs the coupled scheme on [0, T]. Each step solves the pressure at
/// t_{n+1/2} with the extrapolated concentration (3 c^n - c^{n-1}) / 2
/// (c^0 on the first step), then advances the concentration by
/// cn_transport_step. The returned pressure and velocity are recomputed
/// from the final concentration at t = T.
inline CoupledResult run_coupled(const CoupledProblem& problem, std::shared_ptr<const Mesh> mesh, int degree, double dt) {
  const std::size_t n_steps = detail::step_count(problem.final_time, dt);
  const SpacePtr space_c = build_space(mesh, degree);
  const SpacePtr space_p = build_space(mesh, degree + 1);
  auto clamps = std::make_shared<std::size_t>(0);

  CoupledResult out;
  FeFunction c_prev = interpolate(space_c, problem.initial_concentration, 0.0);
  FeFunction c_curr = c_prev;
  std::vector<double> extrapolated(space_c->size());
  for (std::size_t n = 0; n < n_steps; ++n) {
    const double t_n = problem.final_time * static_cast<double>(n) / static_cast<double>(n_steps);
    const auto cc = c_curr.coeffs();
    const auto cp = c_prev.coeffs();
    for (std::size_t i = 0; i < extrapolated.size(); ++i) extrapolated[i] = n == 0 ? cc[i] : 1.5 * cc[i] - 0.5 * cp[i];
    const FeFunction c_hat(space_c, extrapolated);
    const auto pressure = pressure_solve(space_p, c_hat, problem, t_n + 0.5 * dt, clamps);
    auto step = cn_transport_step(c_curr, pressure.velocity, problem, t_n, dt);
    out.stats.pressure_iterations += pressure.report.iterations;
    out.stats.transport_iterations += step.report.iterations;
    c_prev = std::move(c_curr);
    c_curr = std::move(step.next);
  }
  auto final_pressure = pressure_solve(space_p, c_curr, problem, problem.final_time, clamps);
  out.stats.pressure_iterations += final_pressure.report.iterations;
  out.stats.steps = n_steps;
  out.stats.clamp_events = *clamps;
  out.pressure = std::move(final_pressure.pressure);
  out.velocity = std::move(final_pressure.velocity);
  out.concentration = std::move(c_curr);
  return out;
}

}  // namespace mdfem
