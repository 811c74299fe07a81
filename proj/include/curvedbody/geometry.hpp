#pragma once

// Signature-aware linear algebra on the ambient space R^4 / R^{3,1}, chordal
// and geodesic distances, manifold constraint functions, and the
// stereographic charts of the 2D constant-curvature surfaces.

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "curvedbody/error.hpp"

namespace curvedbody {

/// Gaussian curvature together with its sign and |kappa|^{1/2}.
class Curvature {
 public:
  constexpr Curvature() = default;

  explicit Curvature(double kappa) : kappa_(kappa) {
    if (!std::isfinite(kappa)) {
      throw Error(ErrorCode::Validation, "curvature must be finite");
    }
    sigma_ = kappa >= 0.0 ? 1 : -1;
    sqrt_abs_ = std::sqrt(std::abs(kappa));
  }

  double kappa() const noexcept { return kappa_; }
  int sigma() const noexcept { return sigma_; }
  double sqrt_abs() const noexcept { return sqrt_abs_; }
  bool is_flat() const noexcept { return kappa_ == 0.0; }

  /// |kappa|^{-1/2}; the distance from the centre to the North Pole.
  double radius() const {
    if (is_flat()) throw Error(ErrorCode::ZeroCurvature, "radius undefined at kappa = 0");
    return 1.0 / sqrt_abs_;
  }

 private:
  double kappa_ = 0.0;
  int sigma_ = 1;
  double sqrt_abs_ = 0.0;
};

/// Point, velocity or acceleration in the ambient 4-space. The last
/// component is w in the centered frame and omega in the North-Pole frame.
struct AmbientVec {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double w = 0.0;

  AmbientVec& operator+=(const AmbientVec& o) {
    x += o.x; y += o.y; z += o.z; w += o.w;
    return *this;
  }
  AmbientVec& operator-=(const AmbientVec& o) {
    x -= o.x; y -= o.y; z -= o.z; w -= o.w;
    return *this;
  }
  AmbientVec& operator*=(double s) {
    x *= s; y *= s; z *= s; w *= s;
    return *this;
  }

  bool is_finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z) && std::isfinite(w);
  }

  friend AmbientVec operator+(AmbientVec a, const AmbientVec& b) { return a += b; }
  friend AmbientVec operator-(AmbientVec a, const AmbientVec& b) { return a -= b; }
  friend AmbientVec operator-(const AmbientVec& a) { return {-a.x, -a.y, -a.z, -a.w}; }
  friend AmbientVec operator*(double s, AmbientVec a) { return a *= s; }
  friend AmbientVec operator*(AmbientVec a, double s) { return a *= s; }
  friend AmbientVec operator/(AmbientVec a, double s) { return a *= (1.0 / s); }
  friend bool operator==(const AmbientVec&, const AmbientVec&) = default;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double norm(const Vec3& v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); }
inline double dot3(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

/// Coordinate origin: the centre of the sphere/hyperboloid or its North Pole.
enum class Frame { Centered, NorthPole };

inline constexpr const char* to_string(Frame f) {
  return f == Frame::Centered ? "Centered" : "NorthPole";
}

namespace tolerance {
/// Relative slack allowed on inverse trig/hyperbolic arguments before the
/// input is declared off-manifold.
inline constexpr double kClamp = 1e-9;
/// Denominators of the stereographic maps and conformal factor.
inline constexpr double kChart = 1e-12;
}  // namespace tolerance

/// Euclidean inner product for kappa >= 0, Lorentz (+,+,+,-) for kappa < 0.
inline double signed_dot(const AmbientVec& a, const AmbientVec& b, const Curvature& c) {
  return a.x * b.x + a.y * b.y + a.z * b.z + c.sigma() * a.w * b.w;
}

/// Squared chordal separation. The w-difference is dropped at kappa = 0.
inline double pair_separation_sq(const AmbientVec& a, const AmbientVec& b, const Curvature& c) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  const double spatial = dx * dx + dy * dy + dz * dz;
  if (c.is_flat()) return spatial;
  const double dw = a.w - b.w;
  if (c.sigma() > 0) return spatial + dw * dw;
  const double r2 = spatial - dw * dw;
  if (r2 < 0.0) {
    if (r2 < -tolerance::kClamp * (spatial + dw * dw)) {
      throw Error(ErrorCode::NegativeSeparationSquare,
                  "Minkowski separation square " + std::to_string(r2) + " is negative");
    }
    return 0.0;
  }
  return r2;
}

/// Chordal (kappa >= 0) or Minkowski (kappa < 0) separation r_ij.
inline double pair_separation(const AmbientVec& a, const AmbientVec& b, const Curvature& c) {
  return std::sqrt(pair_separation_sq(a, b, c));
}

/// Arc length between two points given in the centered frame (or flat points).
inline double geodesic_distance(const AmbientVec& a, const AmbientVec& b, const Curvature& c) {
  if (c.is_flat()) return pair_separation(a, b, c);
  double arg = c.kappa() * signed_dot(a, b, c);
  if (c.sigma() > 0) {
    if (std::abs(arg) > 1.0 + tolerance::kClamp) {
      throw Error(ErrorCode::OffManifold, "cos argument " + std::to_string(arg) + " outside [-1,1]");
    }
    arg = std::clamp(arg, -1.0, 1.0);
    return std::acos(arg) / c.sqrt_abs();
  }
  if (arg < 1.0 - tolerance::kClamp) {
    throw Error(ErrorCode::OffManifold, "cosh argument " + std::to_string(arg) + " below 1");
  }
  return std::acosh(std::max(arg, 1.0)) / c.sqrt_abs();
}

struct ConstraintResiduals {
  double position = 0.0;
  double velocity = 0.0;
};

/// Residuals of the North-Pole frame constraints:
///   kappa r^2 + 2|kappa|^{1/2} omega  and  sigma|kappa|^{1/2} r.rdot + omegadot.
/// The second is the time derivative of the first divided by 2|kappa|^{1/2}.
inline ConstraintResiduals constraint_residuals_northpole(const AmbientVec& pos, const AmbientVec& vel,
                                                          const Curvature& c) {
  const double k = c.kappa();
  const double s = c.sqrt_abs();
  return {k * signed_dot(pos, pos, c) + 2.0 * s * pos.w,
          c.sigma() * s * signed_dot(pos, vel, c) + vel.w};
}

/// Residuals of the centered-frame constraints: kappa q^2 - 1 and kappa q.qdot.
inline ConstraintResiduals constraint_residuals_centered(const AmbientVec& pos, const AmbientVec& vel,
                                                         const Curvature& c) {
  return {c.kappa() * signed_dot(pos, pos, c) - 1.0, c.kappa() * signed_dot(pos, vel, c)};
}

/// Centered -> North-Pole coordinates: omega = w - |kappa|^{-1/2}.
inline AmbientVec to_north_pole(AmbientVec pos_centered, const Curvature& c) {
  if (c.is_flat()) throw Error(ErrorCode::ZeroCurvatureShift, "frame shift undefined at kappa = 0");
  pos_centered.w -= c.radius();
  return pos_centered;
}

/// North-Pole -> centered coordinates: w = omega + |kappa|^{-1/2}.
inline AmbientVec to_centered(AmbientVec pos_north_pole, const Curvature& c) {
  if (c.is_flat()) throw Error(ErrorCode::ZeroCurvatureShift, "frame shift undefined at kappa = 0");
  pos_north_pole.w += c.radius();
  return pos_north_pole;
}

// ---------------------------------------------------------------------------
// Stereographic charts of M^2_kappa = {X^2 + Y^2 + sigma Z^2 = 1/kappa}.
// Points of the surface are Vec3 (X, Y, Z); chart points are complex u + iv.

using ChartPoint = std::complex<double>;

inline ChartPoint stereo_project(const Vec3& p, const Curvature& c) {
  if (c.is_flat()) throw Error(ErrorCode::ZeroCurvature, "stereographic chart needs kappa != 0");
  const double den = 1.0 - c.sigma() * c.sqrt_abs() * p.z;
  if (std::abs(den) < tolerance::kChart) {
    throw Error(ErrorCode::AtProjectionPole, "point coincides with the projection pole");
  }
  return {p.x / den, p.y / den};
}

inline Vec3 stereo_lift(ChartPoint z, const Curvature& c) {
  if (c.is_flat()) throw Error(ErrorCode::ZeroCurvature, "stereographic chart needs kappa != 0");
  const double k = c.kappa();
  const double s2 = std::norm(z);
  const double den = 1.0 + k * s2;
  if (c.sigma() < 0 && den < tolerance::kChart) {
    throw Error(ErrorCode::OutsideDisk, "chart point outside the disk of radius |kappa|^{-1/2}");
  }
  const double a = c.sqrt_abs();
  return {2.0 * z.real() / den, 2.0 * z.imag() / den,
          (k * s2 - 1.0) / (a * std::abs(k) * s2 + c.sigma() * a)};
}

/// Conformal factor 4 / (1 + kappa |z|^2)^2 of the chart metric.
inline double conformal_factor(ChartPoint z, const Curvature& c) {
  const double den = 1.0 + c.kappa() * std::norm(z);
  if (std::abs(den) < tolerance::kChart) {
    throw Error(ErrorCode::SingularMetric, "1 + kappa|z|^2 vanishes");
  }
  return 4.0 / (den * den);
}

/// Partial derivatives of stereo_lift with respect to u and v.
struct LiftJacobian {
  Vec3 du;
  Vec3 dv;
};

inline LiftJacobian stereo_lift_jacobian(ChartPoint z, const Curvature& c) {
  const double k = c.kappa();
  const double u = z.real();
  const double v = z.imag();
  const double d = 1.0 + k * (u * u + v * v);
  const double d2 = d * d;
  const double a = c.sqrt_abs();
  return {{2.0 / d - 4.0 * k * u * u / d2, -4.0 * k * u * v / d2, 4.0 * a * u / d2},
          {-4.0 * k * u * v / d2, 2.0 / d - 4.0 * k * v * v / d2, 4.0 * a * v / d2}};
}

/// Tangent vector of the surface corresponding to a chart velocity.
inline Vec3 stereo_lift_velocity(ChartPoint z, ChartPoint zdot, const Curvature& c) {
  const auto j = stereo_lift_jacobian(z, c);
  const double du = zdot.real();
  const double dv = zdot.imag();
  return {j.du.x * du + j.dv.x * dv, j.du.y * du + j.dv.y * dv, j.du.z * du + j.dv.z * dv};
}

/// Chart velocity of a surface curve through p with velocity pdot.
inline ChartPoint stereo_velocity(const Vec3& p, const Vec3& pdot, const Curvature& c) {
  const double s = c.sigma() * c.sqrt_abs();
  const double den = 1.0 - s * p.z;
  if (std::abs(den) < tolerance::kChart) {
    throw Error(ErrorCode::AtProjectionPole, "point coincides with the projection pole");
  }
  const ChartPoint pos{p.x, p.y};
  const ChartPoint vel{pdot.x, pdot.y};
  const double den_dot = -s * pdot.z;
  return vel / den - pos * den_dot / (den * den);
}

/// Chart acceleration of a surface curve with position p, velocity pdot and
/// acceleration pddot (second-order chain rule through the projection).
inline ChartPoint stereo_acceleration(const Vec3& p, const Vec3& pdot, const Vec3& pddot,
                                      const Curvature& c) {
  const double s = c.sigma() * c.sqrt_abs();
  const double den = 1.0 - s * p.z;
  if (std::abs(den) < tolerance::kChart) {
    throw Error(ErrorCode::AtProjectionPole, "point coincides with the projection pole");
  }
  const ChartPoint pos{p.x, p.y};
  const ChartPoint vel{pdot.x, pdot.y};
  const ChartPoint acc{pddot.x, pddot.y};
  const double d1 = -s * pdot.z;
  const double d2 = -s * pddot.z;
  const double den2 = den * den;
  return acc / den - 2.0 * vel * d1 / den2 - pos * d2 / den2 + 2.0 * pos * d1 * d1 / (den2 * den);
}

}  // namespace curvedbody
