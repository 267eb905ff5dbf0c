#pragma once

// Convergence studies for the two benchmarks, the parabolic-projection
// stability lab, and CSV reporting.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mdfem/assembly.hpp"
#include "mdfem/dispersion.hpp"
#include "mdfem/manufactured.hpp"
#include "mdfem/mesh.hpp"
#include "mdfem/time_integrators.hpp"

namespace mdfem {

enum class Experiment { ex51, ex52, projection_lab, tensor_probe };

inline std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::ex51:
      return "ex51";
    case Experiment::ex52:
      return "ex52";
    case Experiment::projection_lab:
      return "projection-lab";
    case Experiment::tensor_probe:
      return "tensor-probe";
  }
  return "?";
}

inline Experiment parse_experiment(const std::string& s) {
  if (s == "ex51") return Experiment::ex51;
  if (s == "ex52") return Experiment::ex52;
  if (s == "projection-lab") return Experiment::projection_lab;
  if (s == "tensor-probe") return Experiment::tensor_probe;
  throw ParameterError("unknown experiment '" + s + "'");
}

struct StudyConfig {
  Experiment experiment = Experiment::ex51;
  std::vector<int> mesh_levels;
  int degree = 1;
  std::string dt_policy = "h2/2";  // "h2/2" (h^2/2, or h^2/4 in the projection lab) or "fixed"
  double dt = 0.0;                 // used when dt_policy == "fixed"
  double final_time = 1.0;
  double p = 5.0;
  double q = 5.0;
  std::uint64_t seed = 20140601;
  std::string output;
  /// Lumped mass with dt = h: a first-order scheme used as a negative control.
  bool negative_control = false;

  void validate() const {
    const std::size_t need = experiment == Experiment::ex51 ? 4 : 3;
    if (experiment != Experiment::tensor_probe && mesh_levels.size() < need) {
      throw ParameterError(to_string(experiment) + " needs at least " + std::to_string(need) + " mesh levels");
    }
    for (int m : mesh_levels) {
      if (m < 1) throw ParameterError("mesh levels must be positive");
    }
    if (!(final_time > 0.0)) throw ParameterError("final time must be positive");
    if (degree != 1 && degree != 2) throw ParameterError("degree must be 1 or 2");
    if (dt_policy != "h2/2" && dt_policy != "fixed") throw ParameterError("dt_policy must be 'h2/2' or 'fixed'");
    if (dt_policy == "fixed" && !(dt > 0.0)) throw ParameterError("fixed dt policy needs dt > 0");
    if (!(p > 1.0 && q > 1.0)) throw ParameterError("exponents p and q must exceed 1");
  }
};

inline StudyConfig default_config(Experiment e) {
  StudyConfig c;
  c.experiment = e;
  c.output = to_string(e) + ".csv";
  switch (e) {
    case Experiment::ex51:
      c.mesh_levels = {16, 32, 64, 128};
      break;
    case Experiment::ex52:
      c.mesh_levels = {16, 32, 64};
      c.dt_policy = "fixed";
      c.dt = 0x1.0p-10;
      break;
    case Experiment::projection_lab:
      c.mesh_levels = {8, 16, 32, 64};
      c.final_time = 0.25;
      break;
    case Experiment::tensor_probe:
      break;
  }
  return c;
}

/// rate_k = ln(e_k / e_{k+1}) / ln(h_k / h_{k+1}).
inline std::vector<double> rate(std::span<const double> errors, std::span<const double> hs) {
  if (errors.size() != hs.size() || errors.size() < 2) {
    throw ParameterError("rate needs two equally long lists with at least two entries");
  }
  std::vector<double> out;
  for (std::size_t k = 0; k + 1 < errors.size(); ++k) {
    if (!(errors[k] > 0.0) || !(errors[k + 1] > 0.0) || !(hs[k] > 0.0) || !(hs[k + 1] > 0.0) || hs[k] == hs[k + 1]) {
      throw ParameterError("rate undefined for non-positive errors or mesh sizes (pair " + std::to_string(k) + ")");
    }
    out.push_back(std::log(errors[k] / errors[k + 1]) / std::log(hs[k] / hs[k + 1]));
  }
  return out;
}

struct LevelMetadata {
  int M = 0;
  double dt = 0.0;
  double runtime_seconds = 0.0;
  std::size_t solver_iterations = 0;
  std::size_t clamp_events = 0;
};

struct ConvergenceReport {
  Experiment experiment = Experiment::ex51;
  std::vector<int> levels;               // M of each row
  std::vector<double> hs;                // h of each row
  std::vector<std::string> columns;      // error column names
  std::vector<std::vector<double>> errors;  // errors[column][row]
  std::vector<std::vector<double>> rates;   // rates[column][pair]
  std::vector<LevelMetadata> metadata;
  bool monotone = true;

  double finest_rate(std::size_t column) const { return rates[column].back(); }
};

// ---------------------------------------------------------------------------
// Benchmark problem definitions.

inline LinearParabolicProblem problem51(double final_time = 1.0) {
  LinearParabolicProblem p;
  p.coefficient = ScalarCoefficient{example51_coefficient};
  p.source = forcing51;
  p.source_time_profile = [](double t) { return std::exp(t); };
  p.initial = [](Vec2 x, double) { return initial51(x); };
  p.final_time = final_time;
  p.zeroth_order = false;
  return p;
}

inline CoupledProblem problem52(double final_time = 1.0) {
  CoupledProblem p;
  p.viscosity = viscosity52;
  p.mobility = kMobility52;
  p.porosity = 1.0;
  p.dispersion = kDispersion52;
  p.pressure_source = [](Vec2 x, double t) { return forcing52(x, t).f; };
  p.transport_source = [](Vec2 x, double t) { return forcing52(x, t).g; };
  p.normal_velocity = [](Vec2 x, Vec2 n, double t) { return forcing52(x, t, n).psi; };
  p.dispersive_flux = [](Vec2 x, Vec2 n, double t) { return forcing52(x, t, n).flux; };
  p.initial_concentration = [](Vec2 x, double) { return exact52(x, 0.0).c; };
  p.final_time = final_time;
  return p;
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline void fill_rates(ConvergenceReport& r, std::span<const double> rate_hs) {
  r.rates.clear();
  for (const auto& col : r.errors) {
    r.rates.push_back(rate(col, rate_hs));
    for (std::size_t k = 0; k + 1 < col.size(); ++k) {
      if (!(col[k + 1] < col[k])) r.monotone = false;
    }
  }
}

inline double level_dt(const StudyConfig& c, double h, double fraction) {
  if (c.negative_control) return h;
  return c.dt_policy == "fixed" ? c.dt : fraction * h * h;
}

}  // namespace detail

/// Consecutive-mesh differences at the coarse vertices at t = T for the
/// parabolic benchmark on nested square meshes.
inline ConvergenceReport run_ex51(const StudyConfig& c) {
  ConvergenceReport r;
  r.experiment = Experiment::ex51;
  r.columns = {"diff_Linf"};
  std::vector<FeFunction> finals;
  for (int M : c.mesh_levels) {
    const auto start = std::chrono::steady_clock::now();
    const double h = 1.0 / M;
    const double dt = detail::level_dt(c, h, 0.5);
    const auto space = build_space(std::make_shared<const Mesh>(generate_square_mesh(M)), c.degree);
    auto traj = backward_euler_solve(problem51(c.final_time), space, dt, {.lumped_mass = c.negative_control});
    finals.push_back(std::move(traj.final_state));
    r.metadata.push_back({M, dt, detail::seconds_since(start), traj.solver_iterations, 0});
  }
  r.errors.emplace_back();
  for (std::size_t k = 0; k + 1 < finals.size(); ++k) {
    r.levels.push_back(c.mesh_levels[k]);
    r.hs.push_back(1.0 / c.mesh_levels[k]);
    r.errors[0].push_back(vertex_difference(finals[k], finals[k + 1]).value);
  }
  detail::fill_rates(r, r.hs);
  return r;
}

/// Max-norm errors of velocity and concentration at t = T for the coupled benchmark.
inline ConvergenceReport run_ex52(const StudyConfig& c) {
  ConvergenceReport r;
  r.experiment = Experiment::ex52;
  r.columns = {"err_u_Linf", "err_c_Linf"};
  r.errors.assign(2, {});
  std::vector<double> nominal_h;
  const auto problem = problem52(c.final_time);
  for (int M : c.mesh_levels) {
    const auto start = std::chrono::steady_clock::now();
    const auto mesh = std::make_shared<const Mesh>(generate_disk_mesh(M));
    const double dt = detail::level_dt(c, 1.0 / M, 0.5);
    const auto result = run_coupled(problem, mesh, c.degree, dt);
    const auto& space = result.concentration.space();
    r.errors[0].push_back(error_norm(space, result.velocity, exact52_velocity, c.final_time, NormKind::Linf).value);
    r.errors[1].push_back(error_norm(result.concentration, exact52_concentration(), c.final_time, NormKind::Linf).value);
    r.levels.push_back(M);
    r.hs.push_back(mesh_stats(*mesh).h_max);
    nominal_h.push_back(1.0 / M);
    r.metadata.push_back({M, dt, detail::seconds_since(start),
                          result.stats.pressure_iterations + result.stats.transport_iterations,
                          result.stats.clamp_events});
  }
  detail::fill_rates(r, nominal_h);
  return r;
}

inline ConvergenceReport run_convergence(const StudyConfig& c) {
  c.validate();
  switch (c.experiment) {
    case Experiment::ex51:
      return run_ex51(c);
    case Experiment::ex52:
      return run_ex52(c);
    default:
      throw ParameterError("run_convergence handles ex51 and ex52 only");
  }
}

inline std::string format_rate(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  std::string s = buf;
  if (s.find_first_of(".eni") == std::string::npos) s += ".0";
  return s;
}

/// ex51: h,diff_Linf,rate; ex52: M,h,err_u_Linf,err_c_Linf,rate_u,rate_c.
/// The rate on row k compares rows k-1 and k; the first row has none.
inline void write_convergence_csv(std::ostream& os, const ConvergenceReport& r) {
  if (r.experiment == Experiment::ex51) {
    os << "h,diff_Linf,rate\n";
    for (std::size_t k = 0; k < r.hs.size(); ++k) {
      os << detail::fmt17(r.hs[k]) << ',' << detail::fmt17(r.errors[0][k]) << ',';
      if (k > 0) os << detail::fmt17(r.rates[0][k - 1]);
      os << '\n';
    }
    return;
  }
  os << "M,h,err_u_Linf,err_c_Linf,rate_u,rate_c\n";
  for (std::size_t k = 0; k < r.hs.size(); ++k) {
    os << r.levels[k] << ',' << detail::fmt17(r.hs[k]) << ',' << detail::fmt17(r.errors[0][k]) << ','
       << detail::fmt17(r.errors[1][k]) << ',';
    if (k > 0) os << detail::fmt17(r.rates[0][k - 1]) << ',' << detail::fmt17(r.rates[1][k - 1]);
    else os << ',';
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Projection lab.

struct StabilityLevel {
  int M = 0;
  double dt = 0.0;
  double fe_error = 0.0;          // ||P_h phi - phi_h||_{L^p(L^q)}
  double initial_error = 0.0;     // ||P_h phi^0 - phi_h^0||_{L^q}
  double ritz_gap = 0.0;          // ||P_h phi - R_h phi||_{L^p(L^q)}
  double ritz_l2_error = 0.0;     // ||phi - R_h phi(T)||_{L^2}
  double stability_ratio = 0.0;   // fe_error / (initial_error + ritz_gap)
  double solution_w1q = 0.0;      // ||phi_h||_{L^p(W^{1,q})}
  double data_norm = 0.0;         // ||f||_{L^p(L^q)} + ||g||_{L^p(L^q)}
  double regularity_ratio = 0.0;  // solution_w1q / data_norm
  double runtime_seconds = 0.0;
};

struct StabilityReport {
  double p = 0.0;
  double q = 0.0;
  std::vector<StabilityLevel> levels;
};

/// A linear parabolic problem with known solution, as used by the projection lab.
struct LabProblem {
  LinearParabolicProblem problem;
  ExactSolution exact;
};

inline LabProblem lab_problem(double final_time) {
  LabProblem lp;
  lp.exact = exact_lab();
  lp.problem.coefficient = ScalarCoefficient{example51_coefficient};
  lp.problem.source = forcing_lab;
  lp.problem.initial = lp.exact.value;
  lp.problem.final_time = final_time;
  lp.problem.zeroth_order = true;
  return lp;
}

/// At most this many evenly strided steps (plus t = 0 and t = T) are sampled
/// for the time integrals of the projection lab.
inline constexpr std::size_t kLabTimeSamples = 64;

/// Runs backward Euler and compares phi_h with the L2 and Ritz projections of
/// the exact solution at strided steps. Time integrals use the trapezoid rule
/// over the sampled times.
inline StabilityLevel measure_stability(const LabProblem& lab, int M, double dt, double p, double q) {
  const auto start = std::chrono::steady_clock::now();
  const auto space = build_space(std::make_shared<const Mesh>(generate_square_mesh(M)), 1);
  const auto& problem = lab.problem;

  struct Sample {
    double t, fe_error, ritz_gap, w1q, data;
  };
  std::vector<Sample> samples;
  auto diff = [&](const FeFunction& a, const FeFunction& b) {
    std::vector<double> d(a.coeffs().begin(), a.coeffs().end());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= b.coeffs()[i];
    return FeFunction(space, std::move(d));
  };
  auto record = [&](double t, const FeFunction& phi_h) {
    const auto l2 = l2_project(space, lab.exact.value, t);
    const auto ritz = ritz_project(space, lab.exact.analytic(), problem.coefficient, t);
    double data = lq_norm(*space, problem.source, t, q);
    if (problem.flux) {
      data += lq_norm(*space, [&](Vec2 x, double s) { return norm(problem.flux(x, s)); }, t, q);
    }
    samples.push_back({t, lq_norm(diff(l2, phi_h), q), lq_norm(diff(l2, ritz), q), w1q_norm(phi_h, q), data});
  };

  StabilityLevel level;
  level.M = M;
  level.dt = dt;
  const FeFunction phi0 = interpolate(space, problem.initial, 0.0);
  record(0.0, phi0);
  level.initial_error = samples.front().fe_error;
  const std::size_t n_steps = detail::step_count(problem.final_time, dt);
  const std::size_t stride = (n_steps + kLabTimeSamples - 1) / kLabTimeSamples;
  backward_euler_solve(problem, space, dt, {.observer = [&](std::size_t n, double t, const FeFunction& s) {
                         if (n % stride == 0 || n == n_steps) record(t, s);
                       }});

  auto lp_in_time = [&](auto member) {
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
      sum += 0.5 * (samples[k + 1].t - samples[k].t) * (std::pow(samples[k].*member, p) + std::pow(samples[k + 1].*member, p));
    }
    return std::pow(sum, 1.0 / p);
  };
  level.fe_error = lp_in_time(&Sample::fe_error);
  level.ritz_gap = lp_in_time(&Sample::ritz_gap);
  level.solution_w1q = lp_in_time(&Sample::w1q);
  level.data_norm = lp_in_time(&Sample::data);
  const double denom = level.initial_error + level.ritz_gap;
  // Errors at solver-tolerance level make the ratio 0/0; report it as zero.
  level.stability_ratio = level.fe_error <= 1e-9 * std::max(1.0, level.solution_w1q) ? 0.0 : level.fe_error / denom;
  level.regularity_ratio = level.solution_w1q / level.data_norm;

  const double T = problem.final_time;
  const auto ritz_T = ritz_project(space, lab.exact.analytic(), problem.coefficient, T);
  level.ritz_l2_error = error_norm(ritz_T, lab.exact, T, NormKind::L2).value;
  level.runtime_seconds = detail::seconds_since(start);
  return level;
}

inline StabilityReport projection_lab(const StudyConfig& c) {
  c.validate();
  StabilityReport rep{c.p, c.q, {}};
  const LabProblem lab = lab_problem(c.final_time);
  for (int M : c.mesh_levels) {
    const double h = 1.0 / M;
    const double dt = c.dt_policy == "fixed" ? c.dt : 0.25 * h * h;
    rep.levels.push_back(measure_stability(lab, M, dt, c.p, c.q));
  }
  return rep;
}

inline void write_stability_csv(std::ostream& os, const StabilityReport& r) {
  os << "M,h,fe_error,initial_error,ritz_gap,stability_ratio,solution_w1q,data_norm,regularity_ratio,ritz_l2_error\n";
  for (const auto& l : r.levels) {
    os << l.M << ',' << detail::fmt17(1.0 / l.M) << ',' << detail::fmt17(l.fe_error) << ','
       << detail::fmt17(l.initial_error) << ',' << detail::fmt17(l.ritz_gap) << ',' << detail::fmt17(l.stability_ratio)
       << ',' << detail::fmt17(l.solution_w1q) << ',' << detail::fmt17(l.data_norm) << ','
       << detail::fmt17(l.regularity_ratio) << ',' << detail::fmt17(l.ritz_l2_error) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Tensor probe.

struct TensorProbeReport {
  std::vector<MixedDerivativeRow> mixed;
  double lipschitz_isotropic = 0.0;
  double lipschitz_isotropic_bound = 0.0;
  double lipschitz_general = 0.0;
};

inline std::vector<double> default_probe_steps() { return {0x1.0p-3, 0x1.0p-4, 0x1.0p-5, 0x1.0p-6, 0x1.0p-7}; }

inline TensorProbeReport tensor_probe(std::uint64_t seed) {
  TensorProbeReport r;
  const auto steps = default_probe_steps();
  r.mixed = mixed_derivative_probe(steps);
  const DispersionParams iso{1.0, 1.0, 0.1, 0.1};
  r.lipschitz_isotropic = lipschitz_probe(iso, 100000, 10.0, seed);
  r.lipschitz_isotropic_bound = iso.alpha_l * std::sqrt(2.0);
  r.lipschitz_general = lipschitz_probe({1.0, 1.0, 1.0, 0.1}, 100000, 10.0, seed);
  return r;
}

}  // namespace mdfem
