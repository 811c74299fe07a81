#pragma once

// Scenario files and the flat -> curved lift.
//
// A scenario is strict JSON (unknown keys are errors):
//
//   {
//     "format_version": 1,
//     "name": "two_body_flat",
//     "masses": [1, 1],
//     "flat_positions": [[0.5, 0, 0], [-0.5, 0, 0]],
//     "flat_velocities": [[0, 0.7071, 0], [0, -0.7071, 0]],
//     "kappa": 0,
//     "formulation": "Unified",
//     "integrator": {"scheme": "AdaptiveRK45", "step": 0.01, "rel_tol": 1e-10,
//                    "abs_tol": 1e-12, "projection": "PostStep", "max_steps": 10000000},
//     "t_end": 10,
//     "sample_dt": 0.1
//   }
//
// "integrator" and each of its keys are optional. The same xyz data is used
// at every kappa; only the w column is solved for.

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "curvedbody/dynamics.hpp"
#include "curvedbody/error.hpp"
#include "curvedbody/geometry.hpp"
#include "curvedbody/integrators.hpp"

namespace curvedbody {

inline constexpr int kScenarioFormatVersion = 1;

struct Scenario {
  std::string name;
  std::vector<double> masses;
  std::vector<Vec3> flat_positions;
  std::vector<Vec3> flat_velocities;
  double kappa = 0.0;
  Formulation formulation = Formulation::Unified;
  IntegratorConfig integrator;
  double t_end = 1.0;
  double sample_dt = 0.1;

  bool operator==(const Scenario&) const = default;
};

/// Vertical lift of flat data: keeps x, y, z and solves both constraints for
/// omega and omegadot on the branch that tends to 0 with kappa.
inline std::pair<AmbientVec, AmbientVec> lift_to_curvature(const Vec3& pos, const Vec3& vel, const Curvature& c) {
  if (c.is_flat()) return {{pos.x, pos.y, pos.z, 0.0}, {vel.x, vel.y, vel.z, 0.0}};
  const double rho2 = dot3(pos, pos);
  const double krho2 = c.kappa() * rho2;
  if (!(krho2 < 1.0)) {
    throw Error(ErrorCode::LiftOutOfRange,
                "kappa rho^2 = " + std::to_string(krho2) + " >= 1, no point of the sphere above this position");
  }
  const double a = c.sqrt_abs();
  const double root = std::sqrt(1.0 - krho2);
  // (sqrt(1 - k rho^2) - 1)/sqrt(k) without cancellation; same expression covers kappa < 0.
  const double omega = -c.sigma() * a * rho2 / (root + 1.0);
  // 1 + a omega = sqrt(1 - k rho^2) on both sheets.
  const double omegadot = -c.sigma() * a * dot3(pos, vel) / root;
  return {{pos.x, pos.y, pos.z, omega}, {vel.x, vel.y, vel.z, omegadot}};
}

/// Largest pairwise flat separation (1 for a single body); sets the scale of
/// the collision threshold.
inline double length_scale(const Scenario& sc) {
  double l = 0.0;
  for (std::size_t i = 0; i < sc.flat_positions.size(); ++i) {
    for (std::size_t j = i + 1; j < sc.flat_positions.size(); ++j) {
      const Vec3& a = sc.flat_positions[i];
      const Vec3& b = sc.flat_positions[j];
      l = std::max(l, norm({a.x - b.x, a.y - b.y, a.z - b.z}));
    }
  }
  return l > 0.0 ? l : 1.0;
}

/// Integrator settings with the collision threshold scaled to the scenario.
inline IntegratorConfig effective_config(const Scenario& sc) {
  IntegratorConfig cfg = sc.integrator;
  cfg.thresholds.collision = SingularityThresholds{}.collision * length_scale(sc);
  return cfg;
}

namespace detail {

inline Error field_error(const std::string& field, const std::string& what) {
  return Error(ErrorCode::Validation, "field '" + field + "': " + what);
}

}  // namespace detail

/// Semantic checks shared by the parser and by overrides.
inline void validate_scenario(const Scenario& sc) {
  const std::size_t n = sc.masses.size();
  if (n == 0) throw detail::field_error("masses", "at least one body is required");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(sc.masses[i] > 0.0) || !std::isfinite(sc.masses[i])) {
      throw detail::field_error("masses[" + std::to_string(i) + "]", "must be positive and finite");
    }
  }
  if (sc.flat_positions.size() != n) {
    throw detail::field_error("flat_positions", "has " + std::to_string(sc.flat_positions.size()) +
                                                    " entries, masses has " + std::to_string(n));
  }
  if (sc.flat_velocities.size() != n) {
    throw detail::field_error("flat_velocities", "has " + std::to_string(sc.flat_velocities.size()) +
                                                     " entries, masses has " + std::to_string(n));
  }
  if (!std::isfinite(sc.kappa)) throw detail::field_error("kappa", "must be finite");
  if (!(sc.t_end > 0.0) || !std::isfinite(sc.t_end)) throw detail::field_error("t_end", "must be positive");
  if (!(sc.sample_dt > 0.0 && sc.sample_dt <= sc.t_end)) {
    throw detail::field_error("sample_dt", "must lie in (0, t_end]");
  }
  try {
    sc.integrator.validate();
  } catch (const Error& e) {
    throw detail::field_error("integrator", e.what());
  }
  const Curvature c(sc.kappa);
  if (!formulation_valid(sc.formulation, c)) {
    throw Error(ErrorCode::FormulationInvalidAtKappa, "field 'formulation': " + std::string(to_string(sc.formulation)) +
                                                          " is not defined at kappa = " + std::to_string(sc.kappa));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double krho2 = sc.kappa * dot3(sc.flat_positions[i], sc.flat_positions[i]);
    if (sc.kappa > 0.0 && !(krho2 < 1.0)) {
      throw Error(ErrorCode::LiftOutOfRange, "field 'flat_positions[" + std::to_string(i) +
                                                 "]': kappa rho^2 = " + std::to_string(krho2) + " >= 1");
    }
  }
  if (sc.formulation == Formulation::Intrinsic2D) {
    for (std::size_t i = 0; i < n; ++i) {
      if (sc.flat_positions[i].z != 0.0 || sc.flat_velocities[i].z != 0.0) {
        throw detail::field_error("flat_positions[" + std::to_string(i) + "]",
                                  "Intrinsic2D needs z = 0 positions and velocities");
      }
    }
  }
}

namespace detail {

using json = nlohmann::json;

inline void reject_unknown_keys(const json& obj, const std::string& where, std::initializer_list<const char*> known) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) throw field_error(where.empty() ? item.key() : where + "." + item.key(), "unknown key");
  }
}

inline const json& require_key(const json& obj, const std::string& key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw field_error(key, "missing");
  return *it;
}

inline double as_number(const json& v, const std::string& field) {
  if (!v.is_number()) throw field_error(field, "expected a number");
  return v.get<double>();
}

inline std::string as_string(const json& v, const std::string& field) {
  if (!v.is_string()) throw field_error(field, "expected a string");
  return v.get<std::string>();
}

inline std::vector<Vec3> as_vec3_list(const json& v, const std::string& field) {
  if (!v.is_array()) throw field_error(field, "expected an array of 3-vectors");
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string f = field + "[" + std::to_string(i) + "]";
    if (!v[i].is_array() || v[i].size() != 3) throw field_error(f, "expected 3 numbers");
    out.push_back({as_number(v[i][0], f), as_number(v[i][1], f), as_number(v[i][2], f)});
  }
  return out;
}

inline IntegratorConfig parse_integrator(const json& v) {
  if (!v.is_object()) throw field_error("integrator", "expected an object");
  reject_unknown_keys(v, "integrator", {"scheme", "step", "rel_tol", "abs_tol", "projection", "max_steps"});
  IntegratorConfig cfg;
  if (v.contains("scheme")) {
    const std::string s = as_string(v["scheme"], "integrator.scheme");
    if (s == "FixedRK4") cfg.scheme = Scheme::FixedRK4;
    else if (s == "AdaptiveRK45") cfg.scheme = Scheme::AdaptiveRK45;
    else throw field_error("integrator.scheme", "unknown scheme '" + s + "'");
  }
  if (v.contains("projection")) {
    const std::string s = as_string(v["projection"], "integrator.projection");
    if (s == "None") cfg.projection = Projection::None;
    else if (s == "PostStep") cfg.projection = Projection::PostStep;
    else throw field_error("integrator.projection", "unknown projection '" + s + "'");
  }
  if (v.contains("step")) cfg.step = as_number(v["step"], "integrator.step");
  if (v.contains("rel_tol")) cfg.rel_tol = as_number(v["rel_tol"], "integrator.rel_tol");
  if (v.contains("abs_tol")) cfg.abs_tol = as_number(v["abs_tol"], "integrator.abs_tol");
  if (v.contains("max_steps")) {
    if (!v["max_steps"].is_number_integer()) throw field_error("integrator.max_steps", "expected an integer");
    cfg.max_steps = v["max_steps"].get<long>();
  }
  return cfg;
}

}  // namespace detail

/// Parses and validates scenario text; `source` prefixes every diagnostic.
inline Scenario parse_scenario(const std::string& text, const std::string& source = "<scenario>") {
  using detail::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Validation, source + ": " + e.what());
  }
  try {
    if (!doc.is_object()) throw Error(ErrorCode::Validation, "top level must be an object");
    detail::reject_unknown_keys(doc, "", {"format_version", "name", "masses", "flat_positions", "flat_velocities",
                                          "kappa", "formulation", "integrator", "t_end", "sample_dt"});
    const json& ver = detail::require_key(doc, "format_version");
    if (!ver.is_number_integer() || ver.get<long>() != kScenarioFormatVersion) {
      throw detail::field_error("format_version", "expected " + std::to_string(kScenarioFormatVersion));
    }
    Scenario sc;
    sc.name = detail::as_string(detail::require_key(doc, "name"), "name");
    const json& masses = detail::require_key(doc, "masses");
    if (!masses.is_array()) throw detail::field_error("masses", "expected an array of numbers");
    for (std::size_t i = 0; i < masses.size(); ++i) {
      sc.masses.push_back(detail::as_number(masses[i], "masses[" + std::to_string(i) + "]"));
    }
    sc.flat_positions = detail::as_vec3_list(detail::require_key(doc, "flat_positions"), "flat_positions");
    sc.flat_velocities = detail::as_vec3_list(detail::require_key(doc, "flat_velocities"), "flat_velocities");
    sc.kappa = detail::as_number(detail::require_key(doc, "kappa"), "kappa");
    const std::string f = detail::as_string(detail::require_key(doc, "formulation"), "formulation");
    const auto form = parse_formulation(f);
    if (!form) throw detail::field_error("formulation", "unknown formulation '" + f + "'");
    sc.formulation = *form;
    if (doc.contains("integrator")) sc.integrator = detail::parse_integrator(doc["integrator"]);
    sc.t_end = detail::as_number(detail::require_key(doc, "t_end"), "t_end");
    sc.sample_dt = detail::as_number(detail::require_key(doc, "sample_dt"), "sample_dt");
    validate_scenario(sc);
    return sc;
  } catch (const Error& e) {
    throw Error(e.code(), source + ": " + e.what());
  }
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path);
}

/// Canonical form: every key present, fixed key order, shortest
/// round-tripping decimal for each number.
inline nlohmann::ordered_json scenario_to_json(const Scenario& sc) {
  nlohmann::ordered_json j;
  auto vec_list = [](const std::vector<Vec3>& vs) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (const auto& v : vs) a.push_back({v.x, v.y, v.z});
    return a;
  };
  j["format_version"] = kScenarioFormatVersion;
  j["name"] = sc.name;
  j["masses"] = sc.masses;
  j["flat_positions"] = vec_list(sc.flat_positions);
  j["flat_velocities"] = vec_list(sc.flat_velocities);
  j["kappa"] = sc.kappa;
  j["formulation"] = std::string(to_string(sc.formulation));
  nlohmann::ordered_json integ;
  integ["scheme"] = std::string(to_string(sc.integrator.scheme));
  integ["step"] = sc.integrator.step;
  integ["rel_tol"] = sc.integrator.rel_tol;
  integ["abs_tol"] = sc.integrator.abs_tol;
  integ["projection"] = std::string(to_string(sc.integrator.projection));
  integ["max_steps"] = sc.integrator.max_steps;
  j["integrator"] = integ;
  j["t_end"] = sc.t_end;
  j["sample_dt"] = sc.sample_dt;
  return j;
}

inline std::string serialize_scenario(const Scenario& sc) { return scenario_to_json(sc).dump(2) + "\n"; }

/// Applies one documented override (kappa, t_end, rel_tol, formulation,
/// sample_dt) and revalidates.
inline void apply_override(Scenario& sc, const std::string& key, const std::string& value) {
  auto number = [&]() {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size() || value.empty()) throw detail::field_error(key, "'" + value + "' is not a number");
    return v;
  };
  if (key == "kappa") sc.kappa = number();
  else if (key == "t_end") sc.t_end = number();
  else if (key == "rel_tol") sc.integrator.rel_tol = number();
  else if (key == "sample_dt") sc.sample_dt = number();
  else if (key == "formulation") {
    const auto f = parse_formulation(value);
    if (!f) throw detail::field_error("formulation", "unknown formulation '" + value + "'");
    sc.formulation = *f;
  } else {
    throw Error(ErrorCode::Validation, "'" + key + "' cannot be overridden");
  }
  validate_scenario(sc);
}

/// Lifted initial state in the North-Pole frame at time 0.
inline SystemState initial_state(const Scenario& sc) {
  const Curvature c(sc.kappa);
  SystemState s{MassList(sc.masses), {}, {}, 0.0, c, Frame::NorthPole};
  for (std::size_t i = 0; i < sc.masses.size(); ++i) {
    try {
      auto [p, v] = lift_to_curvature(sc.flat_positions[i], sc.flat_velocities[i], c);
      s.positions.push_back(p);
      s.velocities.push_back(v);
    } catch (const Error& e) {
      throw Error(e.code(), "field 'flat_positions[" + std::to_string(i) + "]': " + e.what());
    }
  }
  return s;
}

}  // namespace curvedbody
