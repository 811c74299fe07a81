#pragma once

// Time integration of SystemState: classical RK4 with a fixed step, and a
// Dormand-Prince 5(4) pair with standard step-size control. After each
// accepted step the state can be projected back onto the constraint set.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "curvedbody/conserved.hpp"
#include "curvedbody/dynamics.hpp"
#include "curvedbody/error.hpp"
#include "curvedbody/geometry.hpp"
#include "curvedbody/potentials.hpp"

namespace curvedbody {

enum class Scheme { FixedRK4, AdaptiveRK45 };
enum class Projection { None, PostStep };
enum class SingularKind { CollisionNear, AntipodalNear };

inline constexpr std::string_view to_string(Scheme s) {
  return s == Scheme::FixedRK4 ? "FixedRK4" : "AdaptiveRK45";
}
inline constexpr std::string_view to_string(Projection p) {
  return p == Projection::None ? "None" : "PostStep";
}
inline constexpr std::string_view to_string(SingularKind k) {
  return k == SingularKind::CollisionNear ? "CollisionNear" : "AntipodalNear";
}

struct IntegratorConfig {
  Scheme scheme = Scheme::AdaptiveRK45;
  double step = 1e-2;  // fixed step, or first trial step of the adaptive scheme
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  Projection projection = Projection::PostStep;
  long max_steps = 10'000'000;
  SingularityThresholds thresholds;

  bool operator==(const IntegratorConfig&) const = default;

  void validate() const {
    if (!(step > 0.0) || !std::isfinite(step)) throw Error(ErrorCode::InvalidConfig, "step must be positive");
    if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw Error(ErrorCode::InvalidConfig, "rel_tol must lie in (0, 1)");
    if (!(abs_tol > 0.0 && abs_tol < 1.0)) throw Error(ErrorCode::InvalidConfig, "abs_tol must lie in (0, 1)");
    if (max_steps <= 0) throw Error(ErrorCode::InvalidConfig, "max_steps must be positive");
  }
};

struct StepOutcome {
  SystemState state;
  double accepted_step = 0.0;
  double residual_before_projection = 0.0;
  double constraint_residual_max = 0.0;  // after projection
  std::optional<SingularKind> singular_flag;
  double next_step = 0.0;  // controller suggestion for the following step
  int rejected = 0;
};

/// Pair-distance check on an accepted state.
inline std::optional<SingularKind> detect_singularity(const SystemState& s, const SingularityThresholds& thr) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      double r2 = 0.0;
      try {
        r2 = pair_separation_sq(s.positions[i], s.positions[j], s.curvature);
      } catch (const Error&) {
        return SingularKind::CollisionNear;
      }
      switch (classify_pair(r2, s.curvature, thr)) {
        case PairSingularity::Collision: return SingularKind::CollisionNear;
        case PairSingularity::Antipodal: return SingularKind::AntipodalNear;
        case PairSingularity::None: break;
      }
    }
  }
  return std::nullopt;
}

/// Minimal-change map onto the constraint set: radial (Lorentz-normal)
/// rescaling of positions about the centre, then removal of the normal
/// velocity component. Works directly in either frame.
inline void project_to_manifold(SystemState& s) {
  const Curvature& c = s.curvature;
  if (c.is_flat()) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      s.positions[i].w = 0.0;
      s.velocities[i].w = 0.0;
    }
    return;
  }
  const double k = c.kappa();
  const double a = c.sqrt_abs();
  const double radius = c.radius();
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto& p = s.positions[i];
    auto& v = s.velocities[i];
    if (s.frame == Frame::Centered) {
      const double norm2 = k * signed_dot(p, p, c);
      if (!(norm2 > 0.0)) throw Error(ErrorCode::OffManifold, "cannot project a point through the centre");
      p *= 1.0 / std::sqrt(norm2);
      v -= (k * signed_dot(p, v, c)) * p;
      continue;
    }
    // kappa q^2 = 1 + res with q = r + R e_w; scale q by lambda = (1 + res)^{-1/2}.
    const double res = k * signed_dot(p, p, c) + 2.0 * a * p.w;
    if (!(1.0 + res > 0.0)) throw Error(ErrorCode::OffManifold, "cannot project a point through the centre");
    const double root = std::sqrt(1.0 + res);
    const double lambda = 1.0 / root;
    const double lambda_m1 = -res / (root * (1.0 + root));
    p.x *= lambda;
    p.y *= lambda;
    p.z *= lambda;
    p.w = lambda * p.w + lambda_m1 * radius;
    // v -= (kappa q.v) q, where kappa q.v = kappa r.v + a omegadot and
    // (kappa q.v) R = sigma a r.v + omegadot.
    const double rv = signed_dot(p, v, c);
    const double kqv = k * rv + a * v.w;
    v.x -= kqv * p.x;
    v.y -= kqv * p.y;
    v.z -= kqv * p.z;
    v.w = -c.sigma() * a * rv - kqv * p.w;
  }
}

namespace detail {

/// Flattened phase vector of one formulation.
class PhaseSystem {
 public:
  PhaseSystem(const SystemState& s, Formulation f, const SingularityThresholds& thr)
      : formulation_(f), thr_(thr), tmpl_(s) {
    require_formulation(f, s.curvature);
    if (f != Formulation::Intrinsic2D) tmpl_ = to_frame(s, native_frame(f));
  }

  std::vector<double> pack(const SystemState& s) const {
    std::vector<double> y;
    if (formulation_ == Formulation::Intrinsic2D) {
      const auto ps = to_chart(s);
      y.reserve(4 * s.size());
      for (const auto& z : ps.z) { y.push_back(z.real()); y.push_back(z.imag()); }
      for (const auto& z : ps.zdot) { y.push_back(z.real()); y.push_back(z.imag()); }
      return y;
    }
    const SystemState ns = to_frame(s, native_frame(formulation_));
    y.reserve(8 * s.size());
    for (const auto& p : ns.positions) y.insert(y.end(), {p.x, p.y, p.z, p.w});
    for (const auto& v : ns.velocities) y.insert(y.end(), {v.x, v.y, v.z, v.w});
    return y;
  }

  /// State in the native frame (centered frame for Intrinsic2D).
  SystemState unpack(const std::vector<double>& y, double t) const {
    const std::size_t n = tmpl_.size();
    if (formulation_ == Formulation::Intrinsic2D) {
      return from_chart(to_planar(y, t), Frame::Centered);
    }
    SystemState s = tmpl_;
    s.time = t;
    for (std::size_t i = 0; i < n; ++i) {
      s.positions[i] = {y[4 * i], y[4 * i + 1], y[4 * i + 2], y[4 * i + 3]};
      s.velocities[i] = {y[4 * (n + i)], y[4 * (n + i) + 1], y[4 * (n + i) + 2], y[4 * (n + i) + 3]};
    }
    return s;
  }

  void rhs(const std::vector<double>& y, double t, std::vector<double>& dydt) const {
    const std::size_t n = tmpl_.size();
    dydt.resize(y.size());
    if (formulation_ == Formulation::Intrinsic2D) {
      const auto ps = to_planar(y, t);
      const auto acc = accel_intrinsic_2d(ps.z, ps.zdot, ps.masses, ps.curvature, thr_);
      for (std::size_t i = 0; i < 2 * n; ++i) dydt[i] = y[2 * n + i];
      for (std::size_t i = 0; i < n; ++i) {
        dydt[2 * n + 2 * i] = acc[i].real();
        dydt[2 * n + 2 * i + 1] = acc[i].imag();
      }
      return;
    }
    const SystemState s = unpack(y, t);
    std::vector<AmbientVec> acc;
    switch (formulation_) {
      case Formulation::Unified: acc = accel_unified(s, thr_); break;
      case Formulation::CenteredExtrinsic: acc = accel_centered(s, thr_); break;
      case Formulation::NorthPoleExtrinsic: acc = accel_northpole_extrinsic(s, thr_); break;
      case Formulation::Newtonian: acc = accel_newtonian(s, thr_); break;
      case Formulation::Intrinsic2D: break;
    }
    for (std::size_t i = 0; i < 4 * n; ++i) dydt[i] = y[4 * n + i];
    for (std::size_t i = 0; i < n; ++i) {
      dydt[4 * n + 4 * i] = acc[i].x;
      dydt[4 * n + 4 * i + 1] = acc[i].y;
      dydt[4 * n + 4 * i + 2] = acc[i].z;
      dydt[4 * n + 4 * i + 3] = acc[i].w;
    }
  }

  bool constrained() const { return formulation_ != Formulation::Intrinsic2D; }

 private:
  PlanarState to_planar(const std::vector<double>& y, double t) const {
    const std::size_t n = tmpl_.size();
    PlanarState ps{tmpl_.masses, {}, {}, t, tmpl_.curvature};
    for (std::size_t i = 0; i < n; ++i) {
      ps.z.emplace_back(y[2 * i], y[2 * i + 1]);
      ps.zdot.emplace_back(y[2 * n + 2 * i], y[2 * n + 2 * i + 1]);
    }
    return ps;
  }

  Formulation formulation_;
  SingularityThresholds thr_;
  SystemState tmpl_;
};

inline void axpy(std::vector<double>& out, const std::vector<double>& y, double h,
                 std::initializer_list<std::pair<double, const std::vector<double>*>> terms) {
  out = y;
  for (const auto& [coef, k] : terms) {
    if (coef == 0.0) continue;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += h * coef * (*k)[i];
  }
}

inline std::vector<double> rk4_step(const PhaseSystem& sys, const std::vector<double>& y, double t, double h) {
  std::vector<double> k1, k2, k3, k4, tmp;
  sys.rhs(y, t, k1);
  axpy(tmp, y, h, {{0.5, &k1}});
  sys.rhs(tmp, t + 0.5 * h, k2);
  axpy(tmp, y, h, {{0.5, &k2}});
  sys.rhs(tmp, t + 0.5 * h, k3);
  axpy(tmp, y, h, {{1.0, &k3}});
  sys.rhs(tmp, t + h, k4);
  axpy(tmp, y, h, {{1.0 / 6.0, &k1}, {1.0 / 3.0, &k2}, {1.0 / 3.0, &k3}, {1.0 / 6.0, &k4}});
  return tmp;
}

/// One Dormand-Prince 5(4) attempt; returns the fifth-order solution and the
/// embedded error estimate.
inline std::pair<std::vector<double>, std::vector<double>> dopri5_attempt(const PhaseSystem& sys,
                                                                          const std::vector<double>& y,
                                                                          double t, double h) {
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                   a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                   e6 = 22.0 / 525, e7 = -1.0 / 40;

  std::vector<double> k1, k2, k3, k4, k5, k6, k7, tmp;
  sys.rhs(y, t, k1);
  axpy(tmp, y, h, {{a21, &k1}});
  sys.rhs(tmp, t + c2 * h, k2);
  axpy(tmp, y, h, {{a31, &k1}, {a32, &k2}});
  sys.rhs(tmp, t + c3 * h, k3);
  axpy(tmp, y, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}});
  sys.rhs(tmp, t + c4 * h, k4);
  axpy(tmp, y, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}});
  sys.rhs(tmp, t + c5 * h, k5);
  axpy(tmp, y, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}});
  sys.rhs(tmp, t + h, k6);
  std::vector<double> y5;
  axpy(y5, y, h, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
  sys.rhs(y5, t + h, k7);
  std::vector<double> err(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
  }
  return {std::move(y5), std::move(err)};
}

inline double error_norm(const std::vector<double>& y0, const std::vector<double>& y1,
                         const std::vector<double>& err, const IntegratorConfig& cfg) {
  double worst = 0.0;
  for (std::size_t i = 0; i < y0.size(); ++i) {
    const double scale = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    worst = std::max(worst, std::abs(err[i]) / scale);
  }
  return std::isfinite(worst) ? worst : std::numeric_limits<double>::infinity();
}

inline bool is_singular_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::Collision:
    case ErrorCode::AntipodalSingularity:
    case ErrorCode::SingularConfiguration:
    case ErrorCode::NegativeSeparationSquare:
    case ErrorCode::OffManifold:
    case ErrorCode::AtProjectionPole:
    case ErrorCode::OutsideDisk:
      return true;
    default:
      return false;
  }
}

}  // namespace detail

/// Advance one accepted step. h_try overrides cfg.step as the first trial
/// (adaptive scheme); h_max caps the step so callers can land on sample times.
inline StepOutcome step(const SystemState& s, Formulation f, const IntegratorConfig& cfg, double h_try = 0.0,
                        double h_max = std::numeric_limits<double>::infinity()) {
  cfg.validate();
  const detail::PhaseSystem sys(s, f, cfg.thresholds);
  const std::vector<double> y0 = sys.pack(s);
  const double t0 = s.time;
  StepOutcome out;

  double h = std::min(h_try > 0.0 ? h_try : cfg.step, h_max);
  std::vector<double> y1;
  if (cfg.scheme == Scheme::FixedRK4) {
    y1 = detail::rk4_step(sys, y0, t0, h);
    out.next_step = cfg.step;
  } else {
    const double min_step = 1e-14 * std::max(1.0, std::abs(t0));
    for (;;) {
      if (h < min_step) {
        char msg[96];
        std::snprintf(msg, sizeof msg, "adaptive step fell below %.3g at t = %.17g", min_step, t0);
        throw Error(ErrorCode::StepUnderflow, msg);
      }
      double err = std::numeric_limits<double>::infinity();
      try {
        auto [trial, estimate] = detail::dopri5_attempt(sys, y0, t0, h);
        err = detail::error_norm(y0, trial, estimate, cfg);
        if (err <= 1.0) {
          y1 = std::move(trial);
        }
      } catch (const Error& e) {
        if (!detail::is_singular_error(e.code())) throw;
      }
      if (err <= 1.0) {
        const double grow = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        out.next_step = h * grow;
        break;
      }
      ++out.rejected;
      const double shrink = std::isfinite(err) ? std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9) : 0.1;
      h *= shrink;
    }
  }

  out.accepted_step = h;
  SystemState next = sys.unpack(y1, t0 + h);
  out.residual_before_projection = sys.constrained() ? max_constraint_residual(next) : 0.0;
  if (cfg.projection == Projection::PostStep && sys.constrained()) project_to_manifold(next);
  out.constraint_residual_max = max_constraint_residual(next);
  out.singular_flag = detect_singularity(next, cfg.thresholds);
  out.state = to_frame(std::move(next), s.frame);
  return out;
}

// ---------------------------------------------------------------------------

enum class Termination { Completed, Singular, StepUnderflow, MaxSteps, NumericalFailure };

inline constexpr std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Completed: return "Completed";
    case Termination::Singular: return "Singular";
    case Termination::StepUnderflow: return "StepUnderflow";
    case Termination::MaxSteps: return "MaxSteps";
    case Termination::NumericalFailure: return "NumericalFailure";
  }
  return "Unknown";
}

/// Maximum drift of the integrals against their initial values, over every
/// accepted step.
struct DriftStats {
  double energy_relative = 0.0;
  double energy_absolute = 0.0;
  double angular = 0.0;          // c_xy, c_xz, c_yz
  double hybrid = 0.0;           // h_x, h_y, h_z (= linear momentum at kappa = 0)
  double linear_momentum = 0.0;  // xyz block of sum m_i rdot_i
  double center_of_mass = 0.0;   // sum m_i r_i - a t
  double constraint_residual = 0.0;

  double max_wedge() const { return std::max(angular, hybrid); }
};

struct Trajectory {
  std::vector<SystemState> samples;
  std::vector<ConservedReport> reports;
  std::vector<double> residuals;
  Termination termination = Termination::Completed;
  std::optional<SingularKind> singular;
  std::string reason;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  DriftStats drift;
};

namespace detail {

inline std::string format_time(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", t);
  return buf;
}

inline double vec_drift(const Vec3& a, const Vec3& b) {
  return std::max({std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.z - b.z)});
}

inline void update_drift(DriftStats& d, const ConservedReport& r0, const ConservedReport& r, double residual) {
  const double de = std::abs(r.energy - r0.energy);
  d.energy_absolute = std::max(d.energy_absolute, de);
  d.energy_relative = std::max(d.energy_relative, r0.energy != 0.0 ? de / std::abs(r0.energy) : de);
  d.angular = std::max({d.angular, std::abs(r.wedge.xy - r0.wedge.xy), std::abs(r.wedge.xz - r0.wedge.xz),
                        std::abs(r.wedge.yz - r0.wedge.yz)});
  d.hybrid = std::max(d.hybrid, vec_drift(r.hybrid_momentum, r0.hybrid_momentum));
  d.linear_momentum = std::max(d.linear_momentum, vec_drift(r.linear_momentum, r0.linear_momentum));
  d.center_of_mass = std::max(d.center_of_mass, vec_drift(r.center_of_mass, r0.center_of_mass));
  d.constraint_residual = std::max(d.constraint_residual, residual);
}

}  // namespace detail

/// Integrate from s0.time to t_end, sampling every sample_dt. Steps are
/// clamped so that every sample time is hit exactly. Singular approaches
/// and controller failures end the run early with the reason recorded.
inline Trajectory integrate(const SystemState& s0, Formulation f, const IntegratorConfig& cfg, double t_end,
                            double sample_dt) {
  cfg.validate();
  require_formulation(f, s0.curvature);
  if (!(t_end > s0.time)) throw Error(ErrorCode::InvalidConfig, "t_end must exceed the initial time");
  if (!(sample_dt > 0.0)) throw Error(ErrorCode::InvalidConfig, "sample_dt must be positive");

  Trajectory traj;
  const ConservedReport r0 = conserved_report(s0, cfg.thresholds);
  const double res0 = max_constraint_residual(s0);
  traj.samples.push_back(s0);
  traj.reports.push_back(r0);
  traj.residuals.push_back(res0);
  traj.drift.constraint_residual = res0;

  const double t0 = s0.time;
  const auto span = t_end - t0;
  const long n_samples = std::max(1L, static_cast<long>(std::ceil(span / sample_dt - 1e-9)));
  auto sample_time = [&](long k) { return k >= n_samples ? t_end : t0 + static_cast<double>(k) * sample_dt; };

  SystemState s = s0;
  double h = cfg.step;
  long next_sample = 1;
  const double eps_t = 1e-12 * std::max(1.0, std::abs(t_end));
  try {
    while (next_sample <= n_samples) {
      if (static_cast<long>(traj.accepted_steps) >= cfg.max_steps) {
        traj.termination = Termination::MaxSteps;
        traj.reason = "max_steps reached at t = " + detail::format_time(s.time);
        break;
      }
      const double target = sample_time(next_sample);
      const double available = target - s.time;
      StepOutcome out = step(s, f, cfg, h, available);
      ++traj.accepted_steps;
      traj.rejected_steps += static_cast<std::size_t>(out.rejected);
      // A step cut short only to land on a sample keeps the previous trial size.
      const bool clamped = out.rejected == 0 && h > available;
      if (cfg.scheme == Scheme::AdaptiveRK45 && !clamped) h = out.next_step;
      s = std::move(out.state);
      const bool at_sample = target - s.time <= eps_t;
      if (at_sample) s.time = target;

      if (out.singular_flag) {
        traj.termination = Termination::Singular;
        traj.singular = out.singular_flag;
        traj.reason = std::string(to_string(*out.singular_flag)) + " at t = " + detail::format_time(s.time);
      }
      const ConservedReport rep = conserved_report(s, SingularityThresholds{0.0, 0.0});
      detail::update_drift(traj.drift, r0, rep, out.constraint_residual_max);
      if (at_sample || traj.singular) {
        traj.samples.push_back(s);
        traj.reports.push_back(rep);
        traj.residuals.push_back(out.constraint_residual_max);
      }
      if (traj.singular) break;
      if (at_sample) ++next_sample;
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::StepUnderflow) {
      // The controller cannot resolve the last stretch of a collision or
      // antipodal approach; an underflow within 100x the thresholds is that approach.
      const SingularityThresholds near{100.0 * cfg.thresholds.collision, 100.0 * cfg.thresholds.antipodal};
      traj.singular = detect_singularity(s, near);
      traj.termination = traj.singular ? Termination::Singular : Termination::StepUnderflow;
      if (traj.singular) {
        traj.samples.push_back(s);
        traj.reports.push_back(conserved_report(s, SingularityThresholds{0.0, 0.0}));
        traj.residuals.push_back(max_constraint_residual(s));
      }
    } else if (detail::is_singular_error(e.code())) {
      traj.termination = Termination::Singular;
      traj.singular = e.code() == ErrorCode::AntipodalSingularity ? SingularKind::AntipodalNear
                                                                 : SingularKind::CollisionNear;
    } else {
      traj.termination = Termination::NumericalFailure;
    }
    traj.reason = e.what();
    if (traj.singular && e.code() == ErrorCode::StepUnderflow) {
      traj.reason = std::string(to_string(*traj.singular)) + " at t = " + detail::format_time(s.time) + " (step underflow)";
    }
  }
  return traj;
}

}  // namespace curvedbody
