// curvedbody: simulate, sweep, compare, check and lift scenario files.
//
// Exit codes: 0 success, 1 usage or validation, 2 singular termination,
// 3 numerical failure. The last line on stderr is always
//   STATUS <code> <reason>

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "curvedbody/curvedbody.hpp"

namespace fs = std::filesystem;
using namespace curvedbody;

namespace {

struct Overrides {
  std::optional<double> kappa;
  std::optional<double> t_end;
  std::optional<double> rel_tol;
  std::optional<std::string> formulation;
  std::optional<double> sample_dt;

  void attach(CLI::App* app) {
    app->add_option("--kappa", kappa, "curvature");
    app->add_option("--t-end", t_end, "final time");
    app->add_option("--rel-tol", rel_tol, "adaptive relative tolerance");
    app->add_option("--formulation", formulation,
                    "Unified, CenteredExtrinsic, NorthPoleExtrinsic, Intrinsic2D or Newtonian");
    app->add_option("--sample-dt", sample_dt, "output sampling interval");
  }

  /// Applies the overrides in a fixed order and returns them for the metadata echo.
  std::vector<std::pair<std::string, std::string>> apply(Scenario& sc) const {
    std::vector<std::pair<std::string, std::string>> echo;
    auto num = [&](const char* key, const std::optional<double>& v) {
      if (!v) return;
      apply_override(sc, key, format_double(*v));
      echo.emplace_back(key, format_double(*v));
    };
    num("kappa", kappa);
    num("t_end", t_end);
    num("rel_tol", rel_tol);
    num("sample_dt", sample_dt);
    if (formulation) {
      apply_override(sc, "formulation", *formulation);
      echo.emplace_back("formulation", *formulation);
    }
    return echo;
  }
};

struct Status {
  int code = 0;
  std::string reason = "ok";
};

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

int exit_code(Termination t) {
  switch (t) {
    case Termination::Completed: return 0;
    case Termination::Singular: return 2;
    default: return 3;
  }
}

Status trajectory_status(const Trajectory& t) {
  if (t.termination == Termination::Completed) return {};
  // Singular reasons already start with the kind.
  if (t.singular) return {exit_code(t.termination), one_line(t.reason)};
  return {exit_code(t.termination), std::string(to_string(t.termination)) + ": " + one_line(t.reason)};
}

int error_exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::Io:
    case ErrorCode::Validation:
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidMasses:
    case ErrorCode::LiftOutOfRange:
    case ErrorCode::FormulationInvalidAtKappa:
    case ErrorCode::ZeroCurvature:
    case ErrorCode::ZeroCurvatureShift:
      return 1;
    case ErrorCode::Collision:
    case ErrorCode::AntipodalSingularity:
    case ErrorCode::SingularConfiguration:
      return 2;
    default:
      return 3;
  }
}

fs::path prepare_output_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::Io, "cannot create output directory '" + dir + "'");
  return fs::path(dir);
}

OutputFormat parse_format(const std::string& f) { return f == "jsonl" ? OutputFormat::Jsonl : OutputFormat::Csv; }

void print_audit(const IntegralAudit& a) {
  std::printf("%-8s %24s %24s  %-8s %s\n", "integral", "initial", "max_drift", "kind", "status");
  for (const auto& r : a.rows) {
    std::printf("%-8s %24s %24s  %-8s %s\n", r.name.c_str(), format_double(r.initial).c_str(),
                format_double(r.max_drift).c_str(), r.expected ? "integral" : "witness",
                r.conserved ? "conserved" : "not-conserved");
  }
  std::printf("conserved: %d/%d\n", a.expected_conserved, a.expected_count);
}

Status cmd_simulate(const std::string& path, const Overrides& ov, const std::string& out_dir,
                    const std::string& format) {
  Scenario sc = load_scenario(path);
  const auto echo = ov.apply(sc);
  const fs::path dir = prepare_output_dir(out_dir);
  const RunResult r = run_scenario(sc);
  const OutputFormat f = parse_format(format);
  const fs::path traj = dir / (sc.name + extension(f));
  const fs::path meta = dir / (sc.name + ".meta.json");
  write_trajectory(traj, r.trajectory, f);
  write_text(meta, run_metadata(r, echo).dump(2) + "\n");
  std::printf("trajectory: %s\nmetadata: %s\ntermination: %s\nenergy_drift: %s\n", traj.string().c_str(),
              meta.string().c_str(), std::string(to_string(r.trajectory.termination)).c_str(),
              format_double(r.trajectory.drift.energy_relative).c_str());
  return trajectory_status(r.trajectory);
}

Status cmd_sweep(const std::string& path, const Overrides& ov, const std::vector<double>& kappas,
                 const std::string& out_dir, const std::string& format) {
  Scenario sc = load_scenario(path);
  const auto echo = ov.apply(sc);
  if (kappas.empty()) throw Error(ErrorCode::Validation, "--kappas needs at least one value");
  const fs::path dir = prepare_output_dir(out_dir);
  const auto rows = curvature_sweep(sc, kappas);
  const OutputFormat f = parse_format(format);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].run) continue;
    char stem[64];
    std::snprintf(stem, sizeof stem, ".kappa_%03zu", i);
    write_trajectory(dir / (sc.name + stem + extension(f)), rows[i].run->trajectory, f);
    write_text(dir / (sc.name + stem + ".meta.json"), run_metadata(*rows[i].run, echo).dump(2) + "\n");
  }
  std::ostringstream summary;
  write_sweep_summary(summary, rows);
  write_text(dir / (sc.name + ".sweep.csv"), summary.str());
  std::fputs(summary.str().c_str(), stdout);
  // Per-kappa failures are recorded in the summary; the sweep itself succeeded.
  return {};
}

Status cmd_compare(const std::string& path, const Overrides& ov, const std::string& fa, const std::string& fb,
                   const std::string& out_dir) {
  Scenario sc = load_scenario(path);
  ov.apply(sc);
  const auto a = parse_formulation(fa);
  const auto b = parse_formulation(fb);
  if (!a) throw Error(ErrorCode::Validation, "unknown formulation '" + fa + "'");
  if (!b) throw Error(ErrorCode::Validation, "unknown formulation '" + fb + "'");
  const fs::path dir = prepare_output_dir(out_dir);
  const CompareResult r = compare_formulations(sc, *a, *b);
  std::ostringstream csv;
  write_compare_csv(csv, r);
  const fs::path file = dir / (sc.name + ".compare_" + fa + "_" + fb + ".csv");
  write_text(file, csv.str());
  std::printf("comparison: %s\nmax_state_deviation: %s\nmax_rhs_deviation: %s\n", file.string().c_str(),
              format_double(r.max_state_deviation).c_str(), format_double(r.max_rhs_deviation).c_str());
  Status st = trajectory_status(r.run_a);
  if (st.code == 0) st = trajectory_status(r.run_b);
  return st;
}

Status cmd_check(const std::string& path, const Overrides& ov) {
  Scenario sc = load_scenario(path);
  ov.apply(sc);
  const RunResult r = run_scenario(sc);
  std::printf("kappa: %s\ntermination: %s\n", format_double(sc.kappa).c_str(),
              std::string(to_string(r.trajectory.termination)).c_str());
  print_audit(r.audit);
  return trajectory_status(r.trajectory);
}

Status cmd_lift(const std::string& path, const Overrides& ov) {
  Scenario sc = load_scenario(path);
  ov.apply(sc);
  const SystemState s = initial_state(sc);
  std::printf("body,x,y,z,w,vx,vy,vz,vw\n");
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& p = s.positions[i];
    const auto& v = s.velocities[i];
    std::printf("%zu", i);
    for (double x : {p.x, p.y, p.z, p.w, v.x, v.y, v.z, v.w}) std::printf(",%s", format_double(x).c_str());
    std::printf("\n");
  }
  return {};
}

int finish(const Status& st) {
  std::fflush(stdout);
  std::fprintf(stderr, "STATUS %d %s\n", st.code, st.reason.c_str());
  return st.code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curved N-body simulator on spheres, hyperbolic spheres and flat space"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out_dir = ".";
  std::string format = "csv";
  std::vector<double> kappas;
  std::string form_a = "Unified";
  std::string form_b = "CenteredExtrinsic";
  Overrides ov;

  auto add_common = [&](CLI::App* sub, bool writes) {
    sub->add_option("scenario", scenario, "scenario file")->required();
    ov.attach(sub);
    if (writes) {
      sub->add_option("--output-dir", out_dir, "directory for output files");
      sub->add_option("--format", format, "trajectory format")->check(CLI::IsMember({"csv", "jsonl"}));
    }
  };
  auto* simulate = app.add_subcommand("simulate", "integrate a scenario and write its trajectory");
  add_common(simulate, true);
  auto* sweep = app.add_subcommand("sweep", "run a scenario over several curvatures");
  add_common(sweep, true);
  sweep->add_option("--kappas", kappas, "comma-separated curvatures")->delimiter(',')->required();
  auto* compare = app.add_subcommand("compare", "integrate one scenario under two formulations");
  add_common(compare, true);
  compare->add_option("--formulation-a", form_a, "first formulation");
  compare->add_option("--formulation-b", form_b, "second formulation");
  auto* check = app.add_subcommand("check", "audit the first integrals along a run");
  add_common(check, false);
  auto* lift = app.add_subcommand("lift", "print the lifted initial state");
  add_common(lift, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return finish({});
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return finish({1, "usage: " + one_line(e.what())});
  }

  try {
    if (*simulate) return finish(cmd_simulate(scenario, ov, out_dir, format));
    if (*sweep) return finish(cmd_sweep(scenario, ov, kappas, out_dir, format));
    if (*compare) return finish(cmd_compare(scenario, ov, form_a, form_b, out_dir));
    if (*check) return finish(cmd_check(scenario, ov));
    if (*lift) return finish(cmd_lift(scenario, ov));
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", one_line(e.what()).c_str());
    return finish({error_exit_code(e.code()), one_line(e.what())});
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", one_line(e.what()).c_str());
    return finish({3, one_line(e.what())});
  }
  return finish({1, "no command"});
}
