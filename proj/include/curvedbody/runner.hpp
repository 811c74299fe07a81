#pragma once

// Scenario runs, curvature sweeps, formulation comparisons, and their files.
//
// Trajectory CSV columns (North-Pole frame):
//   time, x_i, y_i, z_i, w_i, vx_i, vy_i, vz_i, vw_i (i = 0..N-1),
//   energy, c_xy, c_xz, c_yz, h_x, h_y, h_z, residual
// Every number is printed with 17 significant digits so files are bit-exact.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "curvedbody/conserved.hpp"
#include "curvedbody/dynamics.hpp"
#include "curvedbody/integrators.hpp"
#include "curvedbody/scenario.hpp"

namespace curvedbody {

inline constexpr const char* kVersion = "1.0.0";

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct RunResult {
  Scenario scenario;
  Trajectory trajectory;
  IntegralAudit audit;
};

inline RunResult run_scenario(const Scenario& sc) {
  validate_scenario(sc);
  RunResult out{sc, integrate(initial_state(sc), sc.formulation, effective_config(sc), sc.t_end, sc.sample_dt), {}};
  out.audit = audit_integrals(out.trajectory.reports);
  return out;
}

// ---------------------------------------------------------------------------
// Trajectory files.

inline std::vector<std::string> trajectory_columns(std::size_t n) {
  std::vector<std::string> cols{"time"};
  for (const char* p : {"x", "y", "z", "w", "vx", "vy", "vz", "vw"}) {
    for (std::size_t i = 0; i < n; ++i) cols.push_back(std::string(p) + "_" + std::to_string(i));
  }
  for (const char* c : {"energy", "c_xy", "c_xz", "c_yz", "h_x", "h_y", "h_z", "residual"}) cols.emplace_back(c);
  return cols;
}

inline std::vector<double> trajectory_row(const SystemState& s, const ConservedReport& r, double residual) {
  std::vector<double> row{s.time};
  const std::size_t n = s.size();
  auto add = [&](auto get, const std::vector<AmbientVec>& vs) {
    for (std::size_t i = 0; i < n; ++i) row.push_back(get(vs[i]));
  };
  add([](const AmbientVec& v) { return v.x; }, s.positions);
  add([](const AmbientVec& v) { return v.y; }, s.positions);
  add([](const AmbientVec& v) { return v.z; }, s.positions);
  add([](const AmbientVec& v) { return v.w; }, s.positions);
  add([](const AmbientVec& v) { return v.x; }, s.velocities);
  add([](const AmbientVec& v) { return v.y; }, s.velocities);
  add([](const AmbientVec& v) { return v.z; }, s.velocities);
  add([](const AmbientVec& v) { return v.w; }, s.velocities);
  row.insert(row.end(), {r.energy, r.wedge.xy, r.wedge.xz, r.wedge.yz, r.hybrid_momentum.x, r.hybrid_momentum.y,
                         r.hybrid_momentum.z, residual});
  return row;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& t) {
  if (t.samples.empty()) return;
  const auto cols = trajectory_columns(t.samples.front().size());
  for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k];
  os << '\n';
  for (std::size_t s = 0; s < t.samples.size(); ++s) {
    const auto row = trajectory_row(t.samples[s], t.reports[s], t.residuals[s]);
    for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << format_double(row[k]);
    os << '\n';
  }
}

/// One JSON object per sample with the same keys as the CSV columns. Values
/// are written as 17-digit literals rather than through the JSON library's
/// shortest form, so both formats carry identical digits.
inline void write_trajectory_jsonl(std::ostream& os, const Trajectory& t) {
  if (t.samples.empty()) return;
  const auto cols = trajectory_columns(t.samples.front().size());
  for (std::size_t s = 0; s < t.samples.size(); ++s) {
    const auto row = trajectory_row(t.samples[s], t.reports[s], t.residuals[s]);
    os << '{';
    for (std::size_t k = 0; k < row.size(); ++k) {
      const std::string v = std::isfinite(row[k]) ? format_double(row[k]) : "null";
      os << (k ? "," : "") << '"' << cols[k] << "\":" << v;
    }
    os << "}\n";
  }
}

inline nlohmann::ordered_json drift_json(const DriftStats& d) {
  nlohmann::ordered_json j;
  j["energy_relative"] = d.energy_relative;
  j["energy_absolute"] = d.energy_absolute;
  j["angular"] = d.angular;
  j["hybrid"] = d.hybrid;
  j["linear_momentum"] = d.linear_momentum;
  j["center_of_mass"] = d.center_of_mass;
  j["constraint_residual"] = d.constraint_residual;
  return j;
}

inline nlohmann::ordered_json audit_json(const IntegralAudit& a) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : a.rows) {
    nlohmann::ordered_json row;
    row["name"] = r.name;
    row["initial"] = r.initial;
    row["max_drift"] = r.max_drift;
    row["expected"] = r.expected;
    row["conserved"] = r.conserved;
    rows.push_back(row);
  }
  nlohmann::ordered_json j;
  j["rows"] = rows;
  j["expected_count"] = a.expected_count;
  j["expected_conserved"] = a.expected_conserved;
  return j;
}

/// Run metadata: inputs, overrides, outcome. Contains nothing that varies
/// between identical invocations.
inline nlohmann::ordered_json run_metadata(const RunResult& r,
                                           const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  nlohmann::ordered_json j;
  j["tool"] = "curvedbody";
  j["version"] = kVersion;
  j["determinism"] = "no random numbers are drawn; identical inputs give byte-identical outputs";
  j["scenario"] = scenario_to_json(r.scenario);
  nlohmann::ordered_json ov = nlohmann::ordered_json::object();
  for (const auto& [k, v] : overrides) ov[k] = v;
  j["overrides"] = ov;
  const auto cfg = effective_config(r.scenario);
  j["collision_threshold"] = cfg.thresholds.collision;
  j["antipodal_threshold"] = cfg.thresholds.antipodal;
  const auto& t = r.trajectory;
  j["termination"] = std::string(to_string(t.termination));
  j["singular_kind"] = t.singular ? nlohmann::ordered_json(std::string(to_string(*t.singular))) : nullptr;
  j["reason"] = t.reason;
  j["final_time"] = t.samples.empty() ? 0.0 : t.samples.back().time;
  j["samples"] = t.samples.size();
  j["accepted_steps"] = t.accepted_steps;
  j["rejected_steps"] = t.rejected_steps;
  j["energy_drift"] = t.drift.energy_relative;
  j["drift"] = drift_json(t.drift);
  j["audit"] = audit_json(r.audit);
  return j;
}

enum class OutputFormat { Csv, Jsonl };

inline std::string extension(OutputFormat f) { return f == OutputFormat::Csv ? ".csv" : ".jsonl"; }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  os << text;
  if (!os) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

inline void write_trajectory(const std::filesystem::path& path, const Trajectory& t, OutputFormat f) {
  std::ostringstream os;
  if (f == OutputFormat::Csv) write_trajectory_csv(os, t);
  else write_trajectory_jsonl(os, t);
  write_text(path, os.str());
}

// ---------------------------------------------------------------------------
// Curvature sweeps.

struct SweepRow {
  double kappa = 0.0;
  std::string status;  // Termination name, or the error code when the run could not start
  std::string reason;
  double energy_drift = std::numeric_limits<double>::quiet_NaN();
  double max_wedge_drift = std::numeric_limits<double>::quiet_NaN();
  bool momentum_conserved = false;
  bool com_uniform = false;
  double final_state_distance_to_flat = std::numeric_limits<double>::quiet_NaN();
  std::optional<RunResult> run;
};

/// Witness tolerance for the two flat-only integrals.
inline constexpr double kWitnessTolerance = 1e-8;

/// Distance between two North-Pole states over the shared xyz block of
/// positions and velocities (the w column is excluded: it vanishes at
/// kappa = 0 and scales like |kappa|^{1/2} elsewhere).
inline double xyz_state_distance(const SystemState& a, const SystemState& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (const auto& [p, q] : {std::pair{a.positions[i], b.positions[i]}, std::pair{a.velocities[i], b.velocities[i]}}) {
      sum += (p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y) + (p.z - q.z) * (p.z - q.z);
    }
  }
  return std::sqrt(sum);
}

inline double vec3_max_abs(const Vec3& v) { return std::max({std::abs(v.x), std::abs(v.y), std::abs(v.z)}); }

inline SweepRow sweep_member(Scenario sc, double kappa) {
  SweepRow row;
  row.kappa = kappa;
  try {
    sc.kappa = kappa;
    RunResult r = run_scenario(sc);
    const auto& t = r.trajectory;
    row.status = std::string(to_string(t.termination));
    row.reason = t.reason;
    row.energy_drift = t.drift.energy_relative;
    row.max_wedge_drift = t.drift.max_wedge();
    const auto& r0 = t.reports.front();
    row.momentum_conserved = t.drift.linear_momentum <= kWitnessTolerance * std::max(1.0, vec3_max_abs(r0.linear_momentum));
    row.com_uniform = t.drift.center_of_mass <= kWitnessTolerance * std::max(1.0, vec3_max_abs(r0.center_of_mass));
    row.run = std::move(r);
  } catch (const Error& e) {
    row.status = std::string(to_string(e.code()));
    row.reason = e.what();
  }
  return row;
}

/// Runs the scenario at every kappa (plus a kappa = 0 reference when absent)
/// concurrently, then fills the distance to the flat final state. Rows keep
/// the order of `kappas`; the extra reference run is not reported.
inline std::vector<SweepRow> curvature_sweep(const Scenario& sc, const std::vector<double>& kappas) {
  std::vector<double> all = kappas;
  const bool has_flat = std::find(all.begin(), all.end(), 0.0) != all.end();
  if (!has_flat) all.push_back(0.0);
  std::vector<std::future<SweepRow>> jobs;
  for (double k : all) jobs.push_back(std::async(std::launch::async, sweep_member, sc, k));
  std::vector<SweepRow> rows;
  for (auto& j : jobs) rows.push_back(j.get());

  const auto flat = std::find_if(rows.begin(), rows.end(), [](const SweepRow& r) { return r.kappa == 0.0; });
  const bool flat_ok = flat != rows.end() && flat->run && flat->run->trajectory.termination == Termination::Completed;
  for (auto& r : rows) {
    if (flat_ok && r.run && r.run->trajectory.termination == Termination::Completed) {
      r.final_state_distance_to_flat =
          xyz_state_distance(r.run->trajectory.samples.back(), flat->run->trajectory.samples.back());
    }
  }
  if (!has_flat) rows.pop_back();
  return rows;
}

inline void write_sweep_summary(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "kappa,status,energy_drift,max_wedge_drift,momentum_conserved,com_uniform,final_state_distance_to_flat\n";
  for (const auto& r : rows) {
    os << format_double(r.kappa) << ',' << r.status << ',' << format_double(r.energy_drift) << ','
       << format_double(r.max_wedge_drift) << ',' << (r.momentum_conserved ? "true" : "false") << ','
       << (r.com_uniform ? "true" : "false") << ',' << format_double(r.final_state_distance_to_flat) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Formulation comparison.

struct ComparePoint {
  double time = 0.0;
  double state_deviation = 0.0;  // max component difference of positions and velocities
  double rhs_deviation = 0.0;    // max component difference of the two right-hand sides on run A's state
};

struct CompareResult {
  Formulation a;
  Formulation b;
  Trajectory run_a;
  Trajectory run_b;
  std::vector<ComparePoint> points;
  double max_state_deviation = 0.0;
  double max_rhs_deviation = 0.0;
};

inline double max_state_difference(const SystemState& a, const SystemState& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (const auto& [p, q] : {std::pair{a.positions[i], b.positions[i]}, std::pair{a.velocities[i], b.velocities[i]}}) {
      d = std::max({d, std::abs(p.x - q.x), std::abs(p.y - q.y), std::abs(p.z - q.z), std::abs(p.w - q.w)});
    }
  }
  return d;
}

/// Largest component difference between two formulations' right-hand sides
/// on one state. Chart accelerations are compared when either side is
/// Intrinsic2D.
inline double rhs_difference(const SystemState& s, Formulation a, Formulation b, const SingularityThresholds& thr) {
  double d = 0.0;
  if (a == Formulation::Intrinsic2D || b == Formulation::Intrinsic2D) {
    const auto ca = chart_acceleration(s, a, thr);
    const auto cb = chart_acceleration(s, b, thr);
    for (std::size_t i = 0; i < ca.size(); ++i) {
      d = std::max({d, std::abs(ca[i].real() - cb[i].real()), std::abs(ca[i].imag() - cb[i].imag())});
    }
    return d;
  }
  const auto aa = acceleration(s, a, thr);
  const auto ab = acceleration(s, b, thr);
  for (std::size_t i = 0; i < aa.size(); ++i) {
    d = std::max({d, std::abs(aa[i].x - ab[i].x), std::abs(aa[i].y - ab[i].y), std::abs(aa[i].z - ab[i].z),
                  std::abs(aa[i].w - ab[i].w)});
  }
  return d;
}

inline CompareResult compare_formulations(const Scenario& sc, Formulation a, Formulation b) {
  const Curvature c(sc.kappa);
  require_formulation(a, c);
  require_formulation(b, c);
  Scenario sa = sc, sb = sc;
  sa.formulation = a;
  sb.formulation = b;
  validate_scenario(sa);
  validate_scenario(sb);
  const SystemState s0 = initial_state(sc);
  const auto cfg = effective_config(sc);
  CompareResult out{a, b, integrate(s0, a, cfg, sc.t_end, sc.sample_dt), integrate(s0, b, cfg, sc.t_end, sc.sample_dt),
                    {}, 0.0, 0.0};
  const std::size_t n = std::min(out.run_a.samples.size(), out.run_b.samples.size());
  for (std::size_t k = 0; k < n; ++k) {
    const auto& x = out.run_a.samples[k];
    const auto& y = out.run_b.samples[k];
    if (x.time != y.time) break;
    ComparePoint p{x.time, max_state_difference(x, y), rhs_difference(x, a, b, cfg.thresholds)};
    out.max_state_deviation = std::max(out.max_state_deviation, p.state_deviation);
    out.max_rhs_deviation = std::max(out.max_rhs_deviation, p.rhs_deviation);
    out.points.push_back(p);
  }
  return out;
}

inline void write_compare_csv(std::ostream& os, const CompareResult& r) {
  os << "time,state_deviation,rhs_deviation\n";
  for (const auto& p : r.points) {
    os << format_double(p.time) << ',' << format_double(p.state_deviation) << ',' << format_double(p.rhs_deviation)
       << '\n';
  }
}

}  // namespace curvedbody
