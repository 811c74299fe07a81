#pragma once

// Test-only generators and independent oracles.

#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

#include "curvedbody/dynamics.hpp"
#include "curvedbody/geometry.hpp"
#include "curvedbody/potentials.hpp"

namespace curvedbody::testing {

inline AmbientVec gaussian_vec(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  return {n(rng), n(rng), n(rng), n(rng)};
}

/// Point on the kappa-manifold in the centered frame (upper sheet for kappa < 0).
inline AmbientVec random_centered_point(std::mt19937_64& rng, const Curvature& c) {
  const double radius = c.radius();
  AmbientVec v = gaussian_vec(rng);
  if (c.sigma() > 0) {
    const double n = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z + v.w * v.w);
    return (radius / n) * v;
  }
  v *= 0.7 * radius;
  const double rho2 = v.x * v.x + v.y * v.y + v.z * v.z;
  v.w = std::sqrt(rho2 + radius * radius);
  return v;
}

inline AmbientVec tangent_projection(const AmbientVec& q, const AmbientVec& v, const Curvature& c) {
  return v - (c.kappa() * signed_dot(q, v, c)) * q;
}

/// Random constrained centered-frame state whose pairs keep at least
/// min_sep * R apart (and away from antipodes for kappa > 0).
inline SystemState random_centered_state(std::mt19937_64& rng, std::size_t n, const Curvature& c,
                                         double min_sep = 0.3, double speed = 0.5) {
  std::uniform_real_distribution<double> mass(0.5, 2.0);
  const double radius = c.radius();
  for (;;) {
    std::vector<AmbientVec> q;
    for (std::size_t i = 0; i < n; ++i) q.push_back(random_centered_point(rng, c));
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      for (std::size_t j = i + 1; j < n && ok; ++j) {
        const double r2 = pair_separation_sq(q[i], q[j], c);
        if (r2 < min_sep * min_sep * radius * radius) ok = false;
        if (c.kappa() > 0 && 1.0 - c.kappa() * r2 / 4.0 < 0.05) ok = false;
      }
    }
    if (!ok) continue;
    std::vector<double> m;
    std::vector<AmbientVec> v;
    for (std::size_t i = 0; i < n; ++i) {
      m.push_back(mass(rng));
      v.push_back(tangent_projection(q[i], gaussian_vec(rng, speed), c));
    }
    return SystemState{MassList(m), q, v, 0.0, c, Frame::Centered};
  }
}

inline SystemState random_northpole_state(std::mt19937_64& rng, std::size_t n, const Curvature& c,
                                          double min_sep = 0.3, double speed = 0.5) {
  return to_frame(random_centered_state(rng, n, c, min_sep, speed), Frame::NorthPole);
}

/// Point moved along the manifold: normalize(q + eps t) in the centered frame.
inline AmbientVec move_on_manifold(const AmbientVec& q, const AmbientVec& t, double eps, const Curvature& c) {
  const AmbientVec p = q + eps * t;
  return (1.0 / std::sqrt(c.kappa() * signed_dot(p, p, c))) * p;
}

/// Central-difference directional derivative of f along a manifold curve
/// through body i of a centered configuration.
inline double manifold_directional_derivative(const std::function<double(const std::vector<AmbientVec>&)>& f,
                                              std::vector<AmbientVec> q, std::size_t i, const AmbientVec& t,
                                              const Curvature& c, double h = 1e-5) {
  const AmbientVec q0 = q[i];
  q[i] = move_on_manifold(q0, t, h, c);
  const double fp = f(q);
  q[i] = move_on_manifold(q0, t, -h, c);
  const double fm = f(q);
  return (fp - fm) / (2.0 * h);
}

inline double euclid_norm(const AmbientVec& v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z + v.w * v.w); }

inline double max_component_diff(const AmbientVec& a, const AmbientVec& b) {
  return std::max({std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.z - b.z), std::abs(a.w - b.w)});
}

inline double max_abs_component(const AmbientVec& a) {
  return std::max({std::abs(a.x), std::abs(a.y), std::abs(a.z), std::abs(a.w)});
}

/// Chart acceleration of a surface curve through p with velocity v and
/// acceleration a, from second central differences of stereo_project applied
/// to the quadratic Taylor curve p + tv + t^2 a / 2. Independent of the
/// library's analytic chain rule.
inline ChartPoint chart_acceleration_fd(const Vec3& p, const Vec3& v, const Vec3& a, const Curvature& c,
                                        double h = 1e-4) {
  auto at = [&](double t) {
    return stereo_project({p.x + t * v.x + 0.5 * t * t * a.x, p.y + t * v.y + 0.5 * t * t * a.y,
                           p.z + t * v.z + 0.5 * t * t * a.z},
                          c);
  };
  // Fourth-order stencil for the second derivative.
  return (-at(2 * h) + 16.0 * at(h) - 30.0 * at(0.0) + 16.0 * at(-h) - at(-2 * h)) / (12.0 * h * h);
}

inline ChartPoint chart_velocity_fd(const Vec3& p, const Vec3& v, const Curvature& c, double h = 1e-5) {
  auto at = [&](double t) { return stereo_project({p.x + t * v.x, p.y + t * v.y, p.z + t * v.z}, c); };
  return (-at(2 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2 * h)) / (12.0 * h);
}

}  // namespace curvedbody::testing
