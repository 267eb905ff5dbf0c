#pragma once

// Command-line front end: mesh export, the two benchmarks, the tensor probe,
// the projection lab and a rate calculator. Reports go to CSV, run metadata
// (timings, iteration and clamp counts) to a JSON summary next to it.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mdfem/error.hpp"
#include "mdfem/harness.hpp"
#include "mdfem/mesh.hpp"

namespace mdfem {

namespace cli_detail {

using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flags shared by every study subcommand; unset options leave the config alone.
struct StudyFlags {
  std::string config_path;
  std::vector<int> levels;
  std::optional<int> degree;
  std::optional<double> dt;
  std::optional<std::string> dt_policy;
  std::optional<double> final_time;
  std::optional<double> p;
  std::optional<double> q;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  std::string summary;
  bool replicate_paper = false;
  bool negative_control = false;
};

inline void apply_json(StudyConfig& c, const json& j) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "experiment") {
      if (parse_experiment(value.get<std::string>()) != c.experiment) {
        throw UsageError("config experiment '" + value.get<std::string>() + "' does not match the subcommand");
      }
    } else if (key == "mesh_levels") {
      c.mesh_levels = value.get<std::vector<int>>();
    } else if (key == "degree") {
      c.degree = value.get<int>();
    } else if (key == "dt") {
      c.dt = value.get<double>();
    } else if (key == "dt_policy") {
      c.dt_policy = value.get<std::string>();
    } else if (key == "final_time") {
      c.final_time = value.get<double>();
    } else if (key == "p") {
      c.p = value.get<double>();
    } else if (key == "q") {
      c.q = value.get<double>();
    } else if (key == "seed") {
      c.seed = value.get<std::uint64_t>();
    } else if (key == "output") {
      c.output = value.get<std::string>();
    } else {
      throw UsageError("unknown config key '" + key + "'");
    }
  }
}

inline StudyConfig resolve_config(Experiment e, const StudyFlags& f) {
  StudyConfig c = default_config(e);
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw UsageError("cannot open config file " + f.config_path);
    json j;
    try {
      j = json::parse(in);
      apply_json(c, j);
    } catch (const json::exception& ex) {
      throw UsageError("bad config file " + f.config_path + ": " + ex.what());
    }
  }
  if (f.replicate_paper && e == Experiment::ex52) {
    c.dt_policy = "fixed";
    c.dt = 0x1.0p-14;
  }
  if (f.replicate_paper && e == Experiment::ex51) c.mesh_levels = {16, 32, 64, 128};
  if (f.replicate_paper && e == Experiment::ex52) c.mesh_levels = {16, 32, 64};
  if (!f.levels.empty()) c.mesh_levels = f.levels;
  if (f.degree) c.degree = *f.degree;
  if (f.dt_policy) c.dt_policy = *f.dt_policy;
  if (f.dt) {
    c.dt = *f.dt;
    if (!f.dt_policy) c.dt_policy = "fixed";
  }
  if (f.final_time) c.final_time = *f.final_time;
  if (f.p) c.p = *f.p;
  if (f.q) c.q = *f.q;
  if (f.seed) c.seed = *f.seed;
  if (f.output) c.output = *f.output;
  c.negative_control = f.negative_control;
  c.validate();
  return c;
}

inline json config_json(const StudyConfig& c) {
  return {{"experiment", to_string(c.experiment)},
          {"mesh_levels", c.mesh_levels},
          {"degree", c.degree},
          {"dt", c.dt},
          {"dt_policy", c.dt_policy},
          {"final_time", c.final_time},
          {"p", c.p},
          {"q", c.q},
          {"seed", c.seed},
          {"output", c.output},
          {"negative_control", c.negative_control}};
}

/// "-" writes to the given stream, anything else to a file.
inline void write_to(const std::string& path, std::ostream& fallback, const std::function<void(std::ostream&)>& fn) {
  if (path == "-") {
    fn(fallback);
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw UsageError("cannot write " + path);
  fn(os);
}

inline std::string summary_path(const StudyFlags& f, const StudyConfig& c) {
  if (!f.summary.empty()) return f.summary;
  if (c.output == "-") return "";
  const auto dot = c.output.rfind('.');
  const auto slash = c.output.find_last_of('/');
  const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  return (has_ext ? c.output.substr(0, dot) : c.output) + ".json";
}

inline void write_summary(const std::string& path, const json& j) {
  if (path.empty()) return;
  std::ofstream os(path);
  if (!os) throw UsageError("cannot write " + path);
  os << j.dump(2) << '\n';
}

inline std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

inline json levels_json(const std::vector<LevelMetadata>& meta) {
  json arr = json::array();
  for (const auto& m : meta) {
    arr.push_back({{"M", m.M},
                   {"dt", m.dt},
                   {"runtime_seconds", m.runtime_seconds},
                   {"solver_iterations", m.solver_iterations},
                   {"clamp_events", m.clamp_events}});
  }
  return arr;
}

inline void add_study_options(CLI::App& sub, StudyFlags& f, bool with_probe_options) {
  sub.add_option("--config", f.config_path, "JSON config file")->check(CLI::ExistingFile);
  sub.add_option("--levels", f.levels, "mesh levels M, comma separated")->delimiter(',');
  sub.add_option("--degree", f.degree, "polynomial degree r (1 or 2)");
  sub.add_option("--dt", f.dt, "fixed time step (implies dt_policy=fixed)");
  sub.add_option("--dt-policy", f.dt_policy, "h2/2 or fixed");
  sub.add_option("--final-time", f.final_time, "final time T");
  if (with_probe_options) {
    sub.add_option("--p", f.p, "time exponent p");
    sub.add_option("--q", f.q, "space exponent q");
  }
  sub.add_option("--seed", f.seed, "random seed");
  sub.add_option("--output", f.output, "CSV report path, '-' for standard output");
  sub.add_option("--summary", f.summary, "JSON summary path (default: CSV path with .json)");
}

inline int run_study(Experiment e, const StudyFlags& f, std::ostream& out, std::ostream& err) {
  const StudyConfig c = resolve_config(e, f);
  const auto start = std::chrono::steady_clock::now();
  json summary{{"config", config_json(c)}, {"started", timestamp()}};

  if (e == Experiment::ex51 || e == Experiment::ex52) {
    const auto report = run_convergence(c);
    write_to(c.output, out, [&](std::ostream& os) { write_convergence_csv(os, report); });
    summary["levels"] = levels_json(report.metadata);
    summary["monotone"] = report.monotone;
    json rates;
    for (std::size_t k = 0; k < report.columns.size(); ++k) rates[report.columns[k]] = report.rates[k];
    summary["rates"] = rates;
    if (!report.monotone) err << "warning: errors do not decrease monotonically\n";
  } else if (e == Experiment::projection_lab) {
    const auto report = projection_lab(c);
    write_to(c.output, out, [&](std::ostream& os) { write_stability_csv(os, report); });
    json arr = json::array();
    for (const auto& l : report.levels) {
      arr.push_back({{"M", l.M}, {"dt", l.dt}, {"runtime_seconds", l.runtime_seconds},
                     {"stability_ratio", l.stability_ratio}, {"regularity_ratio", l.regularity_ratio}});
    }
    summary["levels"] = arr;
  } else {
    const auto report = tensor_probe(c.seed);
    write_to(c.output, out, [&](std::ostream& os) { write_probe_csv(os, report.mixed); });
    summary["lipschitz_isotropic"] = report.lipschitz_isotropic;
    summary["lipschitz_isotropic_bound"] = report.lipschitz_isotropic_bound;
    summary["lipschitz_anisotropic"] = report.lipschitz_general;
  }
  summary["runtime_seconds"] = detail::seconds_since(start);
  write_summary(summary_path(f, c), summary);
  return 0;
}

}  // namespace cli_detail

/// Exit codes: 0 success, 1 usage error, 2 solver or numerical failure.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  using namespace cli_detail;
  CLI::App app{"Finite element experiments for miscible displacement in porous media"};
  app.require_subcommand(1);

  std::string mesh_kind = "square";
  int mesh_m = 16;
  std::string mesh_output = "-";
  auto* mesh_cmd = app.add_subcommand("mesh", "generate a mesh and print its statistics");
  mesh_cmd->add_option("--kind", mesh_kind, "square or disk")->check(CLI::IsMember({"square", "disk"}));
  mesh_cmd->add_option("--M", mesh_m, "subdivisions (square) or boundary vertices (disk)");
  mesh_cmd->add_option("--output", mesh_output, "mesh file path, '-' for standard output");

  StudyFlags ex51_flags, ex52_flags, probe_flags, lab_flags;
  auto* ex51_cmd = app.add_subcommand("ex51", "parabolic benchmark with a Lipschitz coefficient");
  add_study_options(*ex51_cmd, ex51_flags, false);
  ex51_cmd->add_flag("--replicate-paper", ex51_flags.replicate_paper, "use the published mesh levels");
  ex51_cmd->add_flag("--negative-control", ex51_flags.negative_control, "lumped mass with dt = h");
  auto* ex52_cmd = app.add_subcommand("ex52", "coupled miscible displacement benchmark on the disk");
  add_study_options(*ex52_cmd, ex52_flags, false);
  ex52_cmd->add_flag("--replicate-paper", ex52_flags.replicate_paper, "dt = 2^-14 and the published mesh levels");
  auto* probe_cmd = app.add_subcommand("tensor-probe", "regularity probes of the dispersion tensor");
  add_study_options(*probe_cmd, probe_flags, false);
  auto* lab_cmd = app.add_subcommand("projection-lab", "empirical L^p(L^q) stability of the FE solution");
  add_study_options(*lab_cmd, lab_flags, true);

  std::vector<double> rate_errors, rate_hs;
  auto* rate_cmd = app.add_subcommand("rate", "observed convergence rates");
  rate_cmd->add_option("--errors", rate_errors, "errors, comma separated")->delimiter(',')->required();
  rate_cmd->add_option("--hs", rate_hs, "mesh sizes, comma separated")->delimiter(',')->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (*mesh_cmd) {
      const Mesh mesh = mesh_kind == "disk" ? generate_disk_mesh(mesh_m) : generate_square_mesh(mesh_m);
      validate_mesh(mesh);
      const auto s = mesh_stats(mesh);
      write_to(mesh_output, out, [&](std::ostream& os) { write_mesh(os, mesh); });
      (mesh_output == "-" ? err : out) << "vertices " << mesh.vertices.size() << " triangles " << mesh.triangles.size()
                                        << " h_max " << detail::fmt17(s.h_max) << " h_min " << detail::fmt17(s.h_min)
                                        << " quality " << detail::fmt17(s.quality) << '\n';
      return 0;
    }
    if (*rate_cmd) {
      for (double r : rate(rate_errors, rate_hs)) out << format_rate(r) << '\n';
      return 0;
    }
    if (*ex51_cmd) return run_study(Experiment::ex51, ex51_flags, out, err);
    if (*ex52_cmd) return run_study(Experiment::ex52, ex52_flags, out, err);
    if (*probe_cmd) return run_study(Experiment::tensor_probe, probe_flags, out, err);
    if (*lab_cmd) return run_study(Experiment::projection_lab, lab_flags, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace mdfem
