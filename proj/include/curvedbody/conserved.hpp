#pragma once

// First integrals and their drift along trajectories.
//
// kappa != 0: energy + six wedge momenta sum m_i q_i ^ qdot_i (7 integrals).
// kappa == 0: energy + three angular momenta + three linear momenta + three
//             centre-of-mass integrals (10 integrals).
// In the North-Pole frame the wedge components c_w* appear as the hybrid
// momenta sum m_i xdot_i + |k|^{1/2} sum m_i (omega_i xdot_i - omegadot_i x_i)
// = |k|^{1/2} c_wx, which reduce to the linear momentum at kappa = 0.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "curvedbody/dynamics.hpp"
#include "curvedbody/error.hpp"
#include "curvedbody/geometry.hpp"
#include "curvedbody/potentials.hpp"

namespace curvedbody {

struct WedgeMomenta {
  double wx = 0.0;
  double wy = 0.0;
  double wz = 0.0;
  double xy = 0.0;
  double xz = 0.0;
  double yz = 0.0;
};

struct FlatIntegrals {
  Vec3 linear_momentum;
  Vec3 center_of_mass_offset;  // sum m_i r_i - a t
};

struct ConservedReport {
  double energy = 0.0;
  WedgeMomenta wedge;       // c_w* are zero at kappa = 0
  Vec3 hybrid_momentum;     // |k|^{1/2} (c_wx, c_wy, c_wz) in North-Pole form
  Vec3 linear_momentum;     // conserved only at kappa = 0
  Vec3 center_of_mass;      // b = sum m_i r_i - a t, conserved only at kappa = 0
  bool flat = false;
};

/// Kinetic energy. North-Pole frame uses the prefactor
/// (kappa r_i^2 + 2|kappa|^{1/2} omega_i + 1), centered uses kappa q_i^2; both
/// equal 1 on the constraint set.
inline double kinetic_energy(const SystemState& s) {
  const Curvature& c = s.curvature;
  double t = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& p = s.positions[i];
    const double prefactor = s.frame == Frame::Centered
                                 ? c.kappa() * signed_dot(p, p, c)
                                 : c.kappa() * signed_dot(p, p, c) + 2.0 * c.sqrt_abs() * p.w + 1.0;
    t += s.masses[i] * prefactor * signed_dot(s.velocities[i], s.velocities[i], c);
  }
  return 0.5 * t;
}

/// H = T - V.
inline double energy(const SystemState& s, const SingularityThresholds& thr = {}) {
  return kinetic_energy(s) - chordal_potential(s.positions, s.masses, s.curvature, s.frame, thr);
}

/// The six components of sum m_i q_i ^ qdot_i; centered frame, or kappa = 0.
inline WedgeMomenta wedge_momenta(const SystemState& s) {
  if (s.frame == Frame::NorthPole && !s.curvature.is_flat()) {
    throw Error(ErrorCode::FrameMismatch, "wedge momenta are evaluated in the centered frame");
  }
  WedgeMomenta c;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double m = s.masses[i];
    const auto& q = s.positions[i];
    const auto& v = s.velocities[i];
    c.xy += m * (q.x * v.y - v.x * q.y);
    c.xz += m * (q.x * v.z - v.x * q.z);
    c.yz += m * (q.y * v.z - v.y * q.z);
    c.wx += m * (q.w * v.x - v.w * q.x);
    c.wy += m * (q.w * v.y - v.w * q.y);
    c.wz += m * (q.w * v.z - v.w * q.z);
  }
  return c;
}

/// North-Pole form of the (w, x), (w, y), (w, z) integrals.
inline Vec3 hybrid_momenta(const SystemState& s) {
  if (s.frame != Frame::NorthPole) {
    throw Error(ErrorCode::FrameMismatch, "hybrid momenta are evaluated in the North-Pole frame");
  }
  Vec3 linear;
  Vec3 twist;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double m = s.masses[i];
    const auto& r = s.positions[i];
    const auto& v = s.velocities[i];
    linear.x += m * v.x;
    linear.y += m * v.y;
    linear.z += m * v.z;
    twist.x += m * (r.w * v.x - v.w * r.x);
    twist.y += m * (r.w * v.y - v.w * r.y);
    twist.z += m * (r.w * v.z - v.w * r.z);
  }
  const double a = s.curvature.sqrt_abs();
  return {linear.x + a * twist.x, linear.y + a * twist.y, linear.z + a * twist.z};
}

/// Linear momentum and centre-of-mass offset of the xyz block (meaningful
/// as integrals only at kappa = 0, evaluable everywhere).
inline FlatIntegrals flat_only_integrals(const SystemState& s) {
  FlatIntegrals out;
  Vec3 moment;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double m = s.masses[i];
    out.linear_momentum.x += m * s.velocities[i].x;
    out.linear_momentum.y += m * s.velocities[i].y;
    out.linear_momentum.z += m * s.velocities[i].z;
    moment.x += m * s.positions[i].x;
    moment.y += m * s.positions[i].y;
    moment.z += m * s.positions[i].z;
  }
  out.center_of_mass_offset = {moment.x - out.linear_momentum.x * s.time,
                               moment.y - out.linear_momentum.y * s.time,
                               moment.z - out.linear_momentum.z * s.time};
  return out;
}

inline ConservedReport conserved_report(const SystemState& s, const SingularityThresholds& thr = {}) {
  ConservedReport r;
  r.flat = s.curvature.is_flat();
  r.energy = energy(s, thr);
  r.wedge = wedge_momenta(r.flat ? s : to_frame(s, Frame::Centered));
  r.hybrid_momentum = hybrid_momenta(to_frame(s, Frame::NorthPole));
  const auto flat = flat_only_integrals(s);
  r.linear_momentum = flat.linear_momentum;
  r.center_of_mass = flat.center_of_mass_offset;
  return r;
}

// ---------------------------------------------------------------------------
// Drift audit.

struct IntegralRow {
  std::string name;
  double initial = 0.0;
  double max_drift = 0.0;
  bool expected = false;   // an integral of the equations at this kappa
  bool conserved = false;  // measured drift below tolerance
};

struct IntegralAudit {
  std::vector<IntegralRow> rows;
  int conserved_count = 0;
  int expected_count = 0;
  int expected_conserved = 0;  // expected rows that pass; equals expected_count on a good run
};

namespace detail {

struct NamedValue {
  std::string name;
  double value;
  bool expected;
};

/// Candidate integrals at a given curvature. At kappa = 0 the hybrid momenta
/// coincide with the linear momentum and are listed once.
inline std::vector<NamedValue> audit_values(const ConservedReport& r) {
  std::vector<NamedValue> v{{"energy", r.energy, true},
                            {"c_xy", r.wedge.xy, true},
                            {"c_xz", r.wedge.xz, true},
                            {"c_yz", r.wedge.yz, true}};
  if (!r.flat) {
    v.push_back({"h_x", r.hybrid_momentum.x, true});
    v.push_back({"h_y", r.hybrid_momentum.y, true});
    v.push_back({"h_z", r.hybrid_momentum.z, true});
  }
  v.push_back({"p_x", r.linear_momentum.x, r.flat});
  v.push_back({"p_y", r.linear_momentum.y, r.flat});
  v.push_back({"p_z", r.linear_momentum.z, r.flat});
  v.push_back({"com_x", r.center_of_mass.x, r.flat});
  v.push_back({"com_y", r.center_of_mass.y, r.flat});
  v.push_back({"com_z", r.center_of_mass.z, r.flat});
  return v;
}

}  // namespace detail

/// Measures each candidate integral along a report series. A row counts as
/// conserved when its maximum drift is at most tol * max(1, |initial|).
inline IntegralAudit audit_integrals(const std::vector<ConservedReport>& series, double tol = 1e-6) {
  IntegralAudit audit;
  if (series.empty()) return audit;
  const auto first = detail::audit_values(series.front());
  for (const auto& nv : first) audit.rows.push_back({nv.name, nv.value, 0.0, nv.expected, false});
  for (const auto& rep : series) {
    const auto vals = detail::audit_values(rep);
    for (std::size_t k = 0; k < vals.size(); ++k) {
      audit.rows[k].max_drift = std::max(audit.rows[k].max_drift, std::abs(vals[k].value - first[k].value));
    }
  }
  for (auto& row : audit.rows) {
    row.conserved = row.max_drift <= tol * std::max(1.0, std::abs(row.initial));
    audit.conserved_count += row.conserved ? 1 : 0;
    audit.expected_count += row.expected ? 1 : 0;
    audit.expected_conserved += row.expected && row.conserved ? 1 : 0;
  }
  return audit;
}

}  // namespace curvedbody
