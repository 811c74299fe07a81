#pragma once

// Force functions of the curved N-body problem and their gradients:
//   cotangent form   U = sum m_i m_j |k|^{1/2} k q^{ij} / |(k q_i^2)(k q_j^2) - (k q^{ij})^2|^{1/2}
//   chordal form     V = sum m_i m_j (1 - k r^2/2) / (r (1 - k r^2/4)^{1/2})
//   chart form       W = sum |k|^{1/2} m_i m_j B_ij / |A_ij^2 - B_ij^2|^{1/2}
// U and V agree on the manifold; V extends to kappa = 0 as the Newtonian
// force function. Pairs are always visited in (i < j) lexicographic order.

#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "curvedbody/error.hpp"
#include "curvedbody/geometry.hpp"

namespace curvedbody {

/// Strictly positive body masses.
class MassList {
 public:
  MassList() = default;

  explicit MassList(std::vector<double> masses) : m_(std::move(masses)) {
    if (m_.empty()) throw Error(ErrorCode::InvalidMasses, "at least one body is required");
    for (std::size_t i = 0; i < m_.size(); ++i) {
      if (!(m_[i] > 0.0) || !std::isfinite(m_[i])) {
        throw Error(ErrorCode::InvalidMasses, "mass " + std::to_string(i) + " must be positive and finite");
      }
    }
  }

  std::size_t size() const noexcept { return m_.size(); }
  double operator[](std::size_t i) const { return m_[i]; }
  std::span<const double> values() const noexcept { return m_; }
  double total() const {
    double t = 0.0;
    for (double m : m_) t += m;
    return t;
  }

  friend bool operator==(const MassList&, const MassList&) = default;

 private:
  std::vector<double> m_;
};

/// Distances below which a pair is treated as singular.
struct SingularityThresholds {
  double collision = 1e-8;   // minimum chordal separation
  double antipodal = 1e-12;  // minimum of 1 - kappa r^2 / 4 (kappa > 0)

  bool operator==(const SingularityThresholds&) const = default;
};

enum class PairSingularity { None, Collision, Antipodal };

inline PairSingularity classify_pair(double r2, const Curvature& c, const SingularityThresholds& t) {
  if (r2 < t.collision * t.collision) return PairSingularity::Collision;
  if (c.kappa() > 0.0 && 1.0 - c.kappa() * r2 / 4.0 < t.antipodal) return PairSingularity::Antipodal;
  return PairSingularity::None;
}

/// Per-pair quantities of the chordal force function.
struct PairTerms {
  std::size_t i = 0;
  std::size_t j = 0;
  double separation = 0.0;
  double dot = 0.0;
  double contribution = 0.0;
};

namespace detail {

inline void check_sizes(std::span<const AmbientVec> positions, const MassList& masses) {
  if (positions.size() != masses.size()) {
    throw Error(ErrorCode::Validation, "position and mass counts differ");
  }
}

/// Raise the chordal-family errors for a singular pair.
inline void require_regular_pair(double r2, std::size_t i, std::size_t j, const Curvature& c,
                                 const SingularityThresholds& t) {
  switch (classify_pair(r2, c, t)) {
    case PairSingularity::Collision:
      throw Error(ErrorCode::Collision,
                  "bodies " + std::to_string(i) + " and " + std::to_string(j) + " collide");
    case PairSingularity::Antipodal:
      throw Error(ErrorCode::AntipodalSingularity,
                  "bodies " + std::to_string(i) + " and " + std::to_string(j) + " are antipodal");
    case PairSingularity::None:
      break;
  }
}

/// Same check for the cotangent forms, which report a single error kind.
inline void require_nonsingular(double r2, std::size_t i, std::size_t j, const Curvature& c,
                                const SingularityThresholds& t) {
  if (classify_pair(r2, c, t) != PairSingularity::None) {
    throw Error(ErrorCode::SingularConfiguration,
                "pair (" + std::to_string(i) + ", " + std::to_string(j) + ") is singular");
  }
}

inline void require_curved(const Curvature& c) {
  if (c.is_flat()) throw Error(ErrorCode::ZeroCurvature, "formula requires kappa != 0");
}

inline AmbientVec embed_surface_point(const Vec3& p) { return {p.x, p.y, 0.0, p.z}; }

}  // namespace detail

/// Cotangent force function on centered-frame positions (kappa != 0).
inline double cotangent_potential(std::span<const AmbientVec> q, const MassList& masses, const Curvature& c,
                                  const SingularityThresholds& thr = {}) {
  detail::require_curved(c);
  detail::check_sizes(q, masses);
  const double k = c.kappa();
  double total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double kqi = k * signed_dot(q[i], q[i], c);
    for (std::size_t j = i + 1; j < q.size(); ++j) {
      detail::require_nonsingular(pair_separation_sq(q[i], q[j], c), i, j, c, thr);
      const double kqj = k * signed_dot(q[j], q[j], c);
      const double kqij = k * signed_dot(q[i], q[j], c);
      const double den = std::sqrt(std::abs(kqi * kqj - kqij * kqij));
      total += masses[i] * masses[j] * c.sqrt_abs() * kqij / den;
    }
  }
  return total;
}

/// Per-pair terms of the chordal force function, in (i < j) order.
inline std::vector<PairTerms> chordal_pair_terms(std::span<const AmbientVec> r, const MassList& masses,
                                                 const Curvature& c, Frame frame,
                                                 const SingularityThresholds& thr = {}) {
  detail::check_sizes(r, masses);
  if (c.is_flat() && frame == Frame::Centered) {
    throw Error(ErrorCode::FrameMismatch, "the centered frame does not exist at kappa = 0");
  }
  const double k = c.kappa();
  std::vector<PairTerms> out;
  out.reserve(r.size() * (r.size() - 1) / 2);
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t j = i + 1; j < r.size(); ++j) {
      const double r2 = pair_separation_sq(r[i], r[j], c);
      detail::require_regular_pair(r2, i, j, c, thr);
      const double sep = std::sqrt(r2);
      const double num = 1.0 - k * r2 / 2.0;
      const double f = 1.0 - k * r2 / 4.0;
      out.push_back({i, j, sep, signed_dot(r[i], r[j], c),
                     masses[i] * masses[j] * num / (sep * std::sqrt(f))});
    }
  }
  return out;
}

/// Chordal force function; valid for every kappa and in both frames.
inline double chordal_potential(std::span<const AmbientVec> r, const MassList& masses, const Curvature& c,
                                Frame frame, const SingularityThresholds& thr = {}) {
  double total = 0.0;
  for (const auto& t : chordal_pair_terms(r, masses, c, frame, thr)) total += t.contribution;
  return total;
}

/// Gravitational part of the accelerations in chordal form. In the
/// North-Pole frame each pair term carries the extra r_ij^2 r / 2 with
/// r = (0, 0, 0, sigma |kappa|^{1/2}).
inline std::vector<AmbientVec> chordal_accel_terms(std::span<const AmbientVec> r, const MassList& masses,
                                                   const Curvature& c, Frame frame,
                                                   const SingularityThresholds& thr = {}) {
  detail::check_sizes(r, masses);
  if (c.is_flat() && frame == Frame::Centered) {
    throw Error(ErrorCode::FrameMismatch, "the centered frame does not exist at kappa = 0");
  }
  const double k = c.kappa();
  const AmbientVec pole = frame == Frame::NorthPole ? AmbientVec{0.0, 0.0, 0.0, c.sigma() * c.sqrt_abs()}
                                                    : AmbientVec{};
  std::vector<AmbientVec> acc(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t j = i + 1; j < r.size(); ++j) {
      const double r2 = pair_separation_sq(r[i], r[j], c);
      detail::require_regular_pair(r2, i, j, c, thr);
      const double sep = std::sqrt(r2);
      const double num = 1.0 - k * r2 / 2.0;
      const double f = 1.0 - k * r2 / 4.0;
      const double den = (sep * r2) * (f * std::sqrt(f));
      const AmbientVec shift = (r2 / 2.0) * pole;
      acc[i] += (masses[j] / den) * (r[j] - num * r[i] + shift);
      acc[j] += (masses[i] / den) * (r[i] - num * r[j] + shift);
    }
  }
  return acc;
}

/// Gradient of the cotangent force function on the manifold (kappa != 0),
/// centered frame. Each row is tangent: q_i . grad_i = 0.
inline std::vector<AmbientVec> cotangent_gradient(std::span<const AmbientVec> q, const MassList& masses,
                                                  const Curvature& c, const SingularityThresholds& thr = {}) {
  detail::require_curved(c);
  detail::check_sizes(q, masses);
  const double k = c.kappa();
  const double scale = c.sqrt_abs() * std::abs(k);
  std::vector<AmbientVec> grad(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (std::size_t j = i + 1; j < q.size(); ++j) {
      detail::require_nonsingular(pair_separation_sq(q[i], q[j], c), i, j, c, thr);
      const double kqij = k * signed_dot(q[i], q[j], c);
      const double base = std::abs(1.0 - kqij * kqij);
      const double coef = masses[i] * masses[j] * scale / (base * std::sqrt(base));
      grad[i] += coef * (q[j] - kqij * q[i]);
      grad[j] += coef * (q[i] - kqij * q[j]);
    }
  }
  return grad;
}

namespace detail {

inline void require_in_chart(std::span<const ChartPoint> zs, const Curvature& c) {
  require_curved(c);
  if (c.sigma() < 0) {
    for (std::size_t i = 0; i < zs.size(); ++i) {
      if (1.0 + c.kappa() * std::norm(zs[i]) < tolerance::kChart) {
        throw Error(ErrorCode::OutsideDisk, "chart point " + std::to_string(i) + " is outside the disk");
      }
    }
  }
}

}  // namespace detail

/// Force function written in stereographic chart coordinates (validation only).
inline double stereo_potential(std::span<const ChartPoint> zs, const MassList& masses, const Curvature& c,
                               const SingularityThresholds& thr = {}) {
  detail::require_in_chart(zs, c);
  if (zs.size() != masses.size()) throw Error(ErrorCode::Validation, "chart point and mass counts differ");
  const double inv_k = 1.0 / c.kappa();
  double total = 0.0;
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const double ni = std::norm(zs[i]);
    for (std::size_t j = i + 1; j < zs.size(); ++j) {
      const double nj = std::norm(zs[j]);
      const AmbientVec pi = detail::embed_surface_point(stereo_lift(zs[i], c));
      const AmbientVec pj = detail::embed_surface_point(stereo_lift(zs[j], c));
      detail::require_nonsingular(pair_separation_sq(pi, pj, c), i, j, c, thr);
      const double cross = 2.0 * (zs[i] * std::conj(zs[j])).real();  // z_i conj(z_j) + z_j conj(z_i)
      const double b = 2.0 * inv_k * cross + (ni - inv_k) * (nj - inv_k);
      const double a = (ni + inv_k) * (nj + inv_k);
      total += c.sqrt_abs() * masses[i] * masses[j] * b / std::sqrt(std::abs(a * a - b * b));
    }
  }
  return total;
}

/// dW/d(conj z_i) for every body, obtained by pulling the manifold gradient of
/// the cotangent force function back through the stereographic lift:
///   dW/du = grad U . dp/du,  dW/dv = grad U . dp/dv,  dW/dzbar = (dW/du + i dW/dv) / 2.
inline std::vector<ChartPoint> stereo_potential_gradient(std::span<const ChartPoint> zs, const MassList& masses,
                                                         const Curvature& c,
                                                         const SingularityThresholds& thr = {}) {
  detail::require_in_chart(zs, c);
  std::vector<AmbientVec> p;
  p.reserve(zs.size());
  for (const auto& z : zs) p.push_back(detail::embed_surface_point(stereo_lift(z, c)));
  const auto grad = cotangent_gradient(p, masses, c, thr);
  std::vector<ChartPoint> out(zs.size());
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const auto jac = stereo_lift_jacobian(zs[i], c);
    const double dwdu = signed_dot(grad[i], detail::embed_surface_point(jac.du), c);
    const double dwdv = signed_dot(grad[i], detail::embed_surface_point(jac.dv), c);
    out[i] = ChartPoint{dwdu, dwdv} / 2.0;
  }
  return out;
}

}  // namespace curvedbody
