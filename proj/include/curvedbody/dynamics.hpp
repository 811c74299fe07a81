#pragma once

// Right-hand sides of the equations of motion. Five formulations share the
// geometry and potentials primitives:
//
//   Unified             North-Pole frame, chordal distances, every kappa.
//   CenteredExtrinsic   centered frame, cotangent gradient, kappa != 0.
//   NorthPoleExtrinsic  the centered system rewritten after the shift
//                       omega = w - |kappa|^{-1/2}, kappa != 0.
//   Intrinsic2D         stereographic chart of a 2D section, kappa != 0.
//   Newtonian           kappa = 0.
//
// Unified is the production path; the others serve as cross-checks.

#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "curvedbody/error.hpp"
#include "curvedbody/geometry.hpp"
#include "curvedbody/potentials.hpp"

namespace curvedbody {

enum class Formulation { Unified, CenteredExtrinsic, NorthPoleExtrinsic, Intrinsic2D, Newtonian };

inline constexpr std::string_view to_string(Formulation f) {
  switch (f) {
    case Formulation::Unified: return "Unified";
    case Formulation::CenteredExtrinsic: return "CenteredExtrinsic";
    case Formulation::NorthPoleExtrinsic: return "NorthPoleExtrinsic";
    case Formulation::Intrinsic2D: return "Intrinsic2D";
    case Formulation::Newtonian: return "Newtonian";
  }
  return "Unknown";
}

inline std::optional<Formulation> parse_formulation(std::string_view name) {
  for (auto f : {Formulation::Unified, Formulation::CenteredExtrinsic, Formulation::NorthPoleExtrinsic,
                 Formulation::Intrinsic2D, Formulation::Newtonian}) {
    if (name == to_string(f)) return f;
  }
  return std::nullopt;
}

inline bool formulation_valid(Formulation f, const Curvature& c) {
  switch (f) {
    case Formulation::Unified: return true;
    case Formulation::Newtonian: return c.is_flat();
    default: return !c.is_flat();
  }
}

inline void require_formulation(Formulation f, const Curvature& c) {
  if (!formulation_valid(f, c)) {
    throw Error(ErrorCode::FormulationInvalidAtKappa,
                std::string(to_string(f)) + " is not defined at kappa = " + std::to_string(c.kappa()));
  }
}

/// Frame each ambient formulation evaluates in.
inline Frame native_frame(Formulation f) {
  return f == Formulation::CenteredExtrinsic ? Frame::Centered : Frame::NorthPole;
}

struct SystemState {
  MassList masses;
  std::vector<AmbientVec> positions;
  std::vector<AmbientVec> velocities;
  double time = 0.0;
  Curvature curvature;
  Frame frame = Frame::NorthPole;

  std::size_t size() const noexcept { return positions.size(); }
};

inline ConstraintResiduals constraint_residuals(const SystemState& s, std::size_t i) {
  return s.frame == Frame::Centered
             ? constraint_residuals_centered(s.positions[i], s.velocities[i], s.curvature)
             : constraint_residuals_northpole(s.positions[i], s.velocities[i], s.curvature);
}

/// Largest absolute constraint residual over all bodies (0 at kappa = 0,
/// where the North-Pole constraints hold identically for omega = omegadot = 0).
inline double max_constraint_residual(const SystemState& s) {
  double worst = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.curvature.is_flat()) {
      worst = std::max({worst, std::abs(s.positions[i].w), std::abs(s.velocities[i].w)});
      continue;
    }
    const auto r = constraint_residuals(s, i);
    worst = std::max({worst, std::abs(r.position), std::abs(r.velocity)});
  }
  return worst;
}

/// Structural and constraint checks on a state.
inline void validate_state(const SystemState& s, double tol = 1e-8) {
  if (s.positions.size() != s.masses.size() || s.velocities.size() != s.masses.size()) {
    throw Error(ErrorCode::Validation, "masses, positions and velocities must have equal length");
  }
  if (s.frame == Frame::Centered && s.curvature.is_flat()) {
    throw Error(ErrorCode::FrameMismatch, "the centered frame requires kappa != 0");
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s.positions[i].is_finite() || !s.velocities[i].is_finite()) {
      throw Error(ErrorCode::Validation, "body " + std::to_string(i) + " has non-finite data");
    }
    if (s.curvature.is_flat()) {
      if (s.positions[i].w != 0.0 || s.velocities[i].w != 0.0) {
        throw Error(ErrorCode::OffManifold, "body " + std::to_string(i) + " has omega != 0 at kappa = 0");
      }
      continue;
    }
    const auto r = constraint_residuals(s, i);
    if (std::abs(r.position) > tol || std::abs(r.velocity) > tol) {
      throw Error(ErrorCode::OffManifold, "body " + std::to_string(i) + " violates the manifold constraints");
    }
  }
}

/// Re-express a state in another frame (positions shift, velocities do not).
inline SystemState to_frame(SystemState s, Frame target) {
  if (s.frame == target) return s;
  for (auto& p : s.positions) {
    p = target == Frame::Centered ? to_centered(p, s.curvature) : to_north_pole(p, s.curvature);
  }
  s.frame = target;
  return s;
}

namespace detail {

inline void require_frame(const SystemState& s, Frame f, std::string_view who) {
  if (s.frame != f) {
    throw Error(ErrorCode::FrameMismatch,
                std::string(who) + " expects the " + to_string(f) + " frame, got " + to_string(s.frame));
  }
}

}  // namespace detail

/// Unified equations of motion, North-Pole frame, any kappa:
///   rddot_i = sum_j m_j [r_j - (1 - k r_ij^2/2) r_i + r_ij^2 r/2] / (r_ij^3 (1 - k r_ij^2/4)^{3/2})
///             - (rdot_i . rdot_i)(k r_i + r).
inline std::vector<AmbientVec> accel_unified(const SystemState& s, const SingularityThresholds& thr = {}) {
  detail::require_frame(s, Frame::NorthPole, "accel_unified");
  const Curvature& c = s.curvature;
  auto acc = chordal_accel_terms(s.positions, s.masses, c, Frame::NorthPole, thr);
  const AmbientVec pole{0.0, 0.0, 0.0, c.sigma() * c.sqrt_abs()};
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double speed2 = signed_dot(s.velocities[i], s.velocities[i], c);
    acc[i] -= speed2 * (c.kappa() * s.positions[i] + pole);
  }
  return acc;
}

/// Centered extrinsic equations: m_i qddot_i = grad_i U - kappa m_i (qdot_i . qdot_i) q_i.
inline std::vector<AmbientVec> accel_centered(const SystemState& s, const SingularityThresholds& thr = {}) {
  detail::require_frame(s, Frame::Centered, "accel_centered");
  require_formulation(Formulation::CenteredExtrinsic, s.curvature);
  const Curvature& c = s.curvature;
  auto acc = cotangent_gradient(s.positions, s.masses, c, thr);
  for (std::size_t i = 0; i < s.size(); ++i) {
    acc[i] *= 1.0 / s.masses[i];
    acc[i] -= (c.kappa() * signed_dot(s.velocities[i], s.velocities[i], c)) * s.positions[i];
  }
  return acc;
}

/// The centered system written componentwise in North-Pole coordinates,
/// with kappa q^{ij} = kappa qbar^{ij} + |kappa|^{1/2}(omega_i + omega_j) + 1.
inline std::vector<AmbientVec> accel_northpole_extrinsic(const SystemState& s,
                                                         const SingularityThresholds& thr = {}) {
  detail::require_frame(s, Frame::NorthPole, "accel_northpole_extrinsic");
  require_formulation(Formulation::NorthPoleExtrinsic, s.curvature);
  const Curvature& c = s.curvature;
  const double k = c.kappa();
  const double a = c.sqrt_abs();
  const double radius = c.radius();
  const double scale = a * std::abs(k);
  const auto& r = s.positions;
  std::vector<AmbientVec> acc(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      detail::require_nonsingular(pair_separation_sq(r[i], r[j], c), i, j, c, thr);
      const double kq = k * signed_dot(r[i], r[j], c) + a * (r[i].w + r[j].w) + 1.0;
      const double base = std::abs(1.0 - kq * kq);
      const double coef = scale / (base * std::sqrt(base));
      const auto row = [&](const AmbientVec& target, const AmbientVec& self) {
        return AmbientVec{target.x - kq * self.x, target.y - kq * self.y, target.z - kq * self.z,
                          target.w + radius - kq * (self.w + radius)};
      };
      acc[i] += (s.masses[j] * coef) * row(r[j], r[i]);
      acc[j] += (s.masses[i] * coef) * row(r[i], r[j]);
    }
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double kv2 = k * signed_dot(s.velocities[i], s.velocities[i], c);
    acc[i] -= AmbientVec{kv2 * r[i].x, kv2 * r[i].y, kv2 * r[i].z, kv2 * (r[i].w + radius)};
  }
  return acc;
}

/// Newton's equations at kappa = 0 (w-components stay zero).
inline std::vector<AmbientVec> accel_newtonian(const SystemState& s, const SingularityThresholds& thr = {}) {
  detail::require_frame(s, Frame::NorthPole, "accel_newtonian");
  require_formulation(Formulation::Newtonian, s.curvature);
  const Curvature& c = s.curvature;
  const auto& r = s.positions;
  std::vector<AmbientVec> acc(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      const double r2 = pair_separation_sq(r[i], r[j], c);
      detail::require_regular_pair(r2, i, j, c, thr);
      const double den = std::sqrt(r2) * r2;
      acc[i] += (s.masses[j] / den) * (r[j] - r[i]);
      acc[j] += (s.masses[i] / den) * (r[i] - r[j]);
    }
  }
  return acc;
}

/// Intrinsic equations in a stereographic chart of a 2D section:
///   zddot_i = (1 + k|z_i|^2)^2 / (2 m_i) dW/dzbar_i + 2 k conj(z_i) zdot_i^2 / (1 + k|z_i|^2).
/// dW/dzbar comes from stereo_potential_gradient. The velocity term is the
/// geodesic term of the conformal metric 4|dz|^2 / (1 + k|z|^2)^2.
inline std::vector<ChartPoint> accel_intrinsic_2d(std::span<const ChartPoint> zs, std::span<const ChartPoint> zdots,
                                                  const MassList& masses, const Curvature& c,
                                                  const SingularityThresholds& thr = {}) {
  require_formulation(Formulation::Intrinsic2D, c);
  if (zs.size() != zdots.size() || zs.size() != masses.size()) {
    throw Error(ErrorCode::Validation, "chart positions, velocities and masses must have equal length");
  }
  const auto grad = stereo_potential_gradient(zs, masses, c, thr);
  std::vector<ChartPoint> acc(zs.size());
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const double den = 1.0 + c.kappa() * std::norm(zs[i]);
    acc[i] = (den * den / (2.0 * masses[i])) * grad[i] +
             2.0 * c.kappa() * std::conj(zs[i]) * zdots[i] * zdots[i] / den;
  }
  return acc;
}

/// Ambient accelerations of an ambient formulation, evaluated in s.frame.
inline std::vector<AmbientVec> acceleration(const SystemState& s, Formulation f,
                                            const SingularityThresholds& thr = {}) {
  require_formulation(f, s.curvature);
  switch (f) {
    case Formulation::Unified: return accel_unified(to_frame(s, Frame::NorthPole), thr);
    case Formulation::CenteredExtrinsic: return accel_centered(to_frame(s, Frame::Centered), thr);
    case Formulation::NorthPoleExtrinsic: return accel_northpole_extrinsic(to_frame(s, Frame::NorthPole), thr);
    case Formulation::Newtonian: return accel_newtonian(s, thr);
    case Formulation::Intrinsic2D: break;
  }
  throw Error(ErrorCode::FormulationInvalidAtKappa, "Intrinsic2D produces chart accelerations; use chart_acceleration");
}

// ---------------------------------------------------------------------------
// 2D sections and their chart. A body on the section z = 0 of the 3-manifold
// is the surface point (x, y, w). For kappa > 0 the chart is taken on the
// sphere reflected through w = 0, so that the North Pole (the origin of the
// flat data) maps to z = 0 instead of to the projection pole.

struct PlanarState {
  MassList masses;
  std::vector<ChartPoint> z;
  std::vector<ChartPoint> zdot;
  double time = 0.0;
  Curvature curvature;
};

namespace detail {

inline double chart_reflection(const Curvature& c) { return c.sigma() > 0 ? -1.0 : 1.0; }

inline Vec3 to_surface(const AmbientVec& centered, const Curvature& c) {
  return {centered.x, centered.y, chart_reflection(c) * centered.w};
}

inline AmbientVec from_surface(const Vec3& p, const Curvature& c) {
  return {p.x, p.y, 0.0, chart_reflection(c) * p.z};
}

}  // namespace detail

/// True when every body lies on (and moves within) the section z = 0.
inline bool is_planar(const SystemState& s, double tol = 1e-12) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (std::abs(s.positions[i].z) > tol || std::abs(s.velocities[i].z) > tol) return false;
  }
  return true;
}

inline PlanarState to_chart(const SystemState& s) {
  require_formulation(Formulation::Intrinsic2D, s.curvature);
  if (!is_planar(s)) throw Error(ErrorCode::Validation, "Intrinsic2D needs all bodies in the z = 0 section");
  const SystemState cs = to_frame(s, Frame::Centered);
  PlanarState out{s.masses, {}, {}, s.time, s.curvature};
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Vec3 p = detail::to_surface(cs.positions[i], s.curvature);
    const Vec3 v = detail::to_surface(cs.velocities[i], s.curvature);
    out.z.push_back(stereo_project(p, s.curvature));
    out.zdot.push_back(stereo_velocity(p, v, s.curvature));
  }
  return out;
}

inline SystemState from_chart(const PlanarState& ps, Frame frame) {
  SystemState s{ps.masses, {}, {}, ps.time, ps.curvature, Frame::Centered};
  for (std::size_t i = 0; i < ps.z.size(); ++i) {
    s.positions.push_back(detail::from_surface(stereo_lift(ps.z[i], ps.curvature), ps.curvature));
    s.velocities.push_back(
        detail::from_surface(stereo_lift_velocity(ps.z[i], ps.zdot[i], ps.curvature), ps.curvature));
  }
  return to_frame(std::move(s), frame);
}

/// Chart accelerations of any formulation on a planar state. Ambient
/// formulations are pushed forward through the projection.
inline std::vector<ChartPoint> chart_acceleration(const SystemState& s, Formulation f,
                                                  const SingularityThresholds& thr = {}) {
  if (f == Formulation::Intrinsic2D) {
    const auto ps = to_chart(s);
    return accel_intrinsic_2d(ps.z, ps.zdot, ps.masses, ps.curvature, thr);
  }
  require_formulation(Formulation::Intrinsic2D, s.curvature);
  if (!is_planar(s)) throw Error(ErrorCode::Validation, "chart accelerations need a planar state");
  const SystemState cs = to_frame(s, Frame::Centered);
  const auto acc = acceleration(cs, f, thr);
  std::vector<ChartPoint> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    out.push_back(stereo_acceleration(detail::to_surface(cs.positions[i], s.curvature),
                                      detail::to_surface(cs.velocities[i], s.curvature),
                                      detail::to_surface(acc[i], s.curvature), s.curvature));
  }
  return out;
}

}  // namespace curvedbody
