#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "curvedbody/integrators.hpp"
#include "curvedbody/scenario.hpp"
#include "support.hpp"

using namespace curvedbody;
namespace t = curvedbody::testing;

namespace {

constexpr double kPi = std::numbers::pi;

// Unit-speed great circle through the North Pole of the unit sphere:
// q(t) = (sin t, 0, 0, cos t), i.e. r(t) = (sin t, 0, 0, cos t - 1).
SystemState geodesic_start() {
  return {MassList({1.0}), {{0, 0, 0, 0}}, {{1, 0, 0, 0}}, 0.0, Curvature(1.0), Frame::NorthPole};
}

AmbientVec geodesic_position(double time) { return {std::sin(time), 0, 0, std::cos(time) - 1.0}; }

double max_state_diff(const SystemState& a, const SystemState& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d = std::max({d, t::max_component_diff(a.positions[i], b.positions[i]),
                  t::max_component_diff(a.velocities[i], b.velocities[i])});
  }
  return d;
}

Scenario corpus(const std::string& name) { return load_scenario(std::string(CURVEDBODY_CORPUS_DIR) + "/" + name); }

TEST(IntegratorConfig, Validation) {
  IntegratorConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.step = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.rel_tol = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.abs_tol = -1.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.max_steps = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Step, ReportsResidualsBeforeAndAfterProjection) {
  IntegratorConfig cfg;
  cfg.scheme = Scheme::FixedRK4;
  cfg.step = 0.2;
  const auto out = step(geodesic_start(), Formulation::Unified, cfg);
  EXPECT_EQ(out.accepted_step, 0.2);
  EXPECT_GT(out.residual_before_projection, 0.0);
  EXPECT_LT(out.constraint_residual_max, 1e-15);
  EXPECT_FALSE(out.singular_flag.has_value());
  EXPECT_EQ(out.state.frame, Frame::NorthPole);
  EXPECT_LT(t::max_component_diff(out.state.positions[0], geodesic_position(0.2)), 1e-5);
}

TEST(Step, AdaptiveShrinksOnLargeTrialStep) {
  IntegratorConfig cfg;
  const auto out = step(geodesic_start(), Formulation::Unified, cfg, 1.0);
  EXPECT_GT(out.rejected, 0);
  EXPECT_LT(out.accepted_step, 1.0);
  EXPECT_LT(t::max_component_diff(out.state.positions[0], geodesic_position(out.accepted_step)), 1e-9);
}

TEST(Projection, RestoresConstraintsInBothFrames) {
  std::mt19937_64 rng(9);
  for (double k : {-2.0, -0.5, 0.5, 2.0}) {
    const Curvature c(k);
    for (int n = 0; n < 50; ++n) {
      auto cs = t::random_centered_state(rng, 3, c);
      for (auto& q : cs.positions) q += t::gaussian_vec(rng, 1e-6);
      for (auto& v : cs.velocities) v += t::gaussian_vec(rng, 1e-6);
      auto ns = to_frame(cs, Frame::NorthPole);
      project_to_manifold(cs);
      project_to_manifold(ns);
      EXPECT_LT(max_constraint_residual(cs), 1e-14);
      EXPECT_LT(max_constraint_residual(ns), 1e-14);
      // Same map in either frame.
      EXPECT_LT(max_state_diff(to_frame(ns, Frame::Centered), cs), 1e-13);
    }
  }
}

TEST(Projection, IsIdentityOnTheManifold) {
  std::mt19937_64 rng(10);
  const Curvature c(1.0);
  auto s = t::random_northpole_state(rng, 3, c);
  const auto before = s;
  project_to_manifold(s);
  EXPECT_LT(max_state_diff(s, before), 1e-15);
}

TEST(Integrate, GeodesicReturnsAfterOnePeriod) {
  IntegratorConfig cfg;
  const auto traj = integrate(geodesic_start(), Formulation::Unified, cfg, 2 * kPi, kPi / 2);
  ASSERT_EQ(traj.termination, Termination::Completed);
  ASSERT_EQ(traj.samples.size(), 5u);
  for (const auto& s : traj.samples) {
    EXPECT_LT(t::max_component_diff(s.positions[0], geodesic_position(s.time)), 1e-8);
  }
  EXPECT_EQ(traj.samples.back().time, 2 * kPi);
  EXPECT_LT(t::max_component_diff(traj.samples.back().positions[0], AmbientVec{}), 1e-8);
}

TEST(Integrate, RK4GlobalErrorIsFourthOrder) {
  std::vector<double> hs, errs;
  for (double h : {0.1, 0.05, 0.025, 0.0125}) {
    const long n = std::lround(2 * kPi / h);
    IntegratorConfig cfg;
    cfg.scheme = Scheme::FixedRK4;
    cfg.projection = Projection::None;
    cfg.step = 2 * kPi / static_cast<double>(n);
    const auto traj = integrate(geodesic_start(), Formulation::Unified, cfg, 2 * kPi, 2 * kPi);
    ASSERT_EQ(traj.termination, Termination::Completed);
    hs.push_back(cfg.step);
    errs.push_back(t::max_component_diff(traj.samples.back().positions[0], AmbientVec{}));
  }
  // Least-squares slope of log(err) against log(h).
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    mx += std::log(hs[i]) / hs.size();
    my += std::log(errs[i]) / hs.size();
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    sxy += (std::log(hs[i]) - mx) * (std::log(errs[i]) - my);
    sxx += (std::log(hs[i]) - mx) * (std::log(hs[i]) - mx);
  }
  EXPECT_NEAR(sxy / sxx, 4.0, 0.3);
}

TEST(Integrate, FlatCircularOrbitCloses) {
  const Scenario sc = corpus("two_body_flat.scn");
  const double period = kPi * std::sqrt(2.0);  // 2 pi r / v with r = 0.5, v = sqrt(1/2)
  const auto s0 = initial_state(sc);
  const auto traj = integrate(s0, Formulation::Unified, effective_config(sc), period, period / 4);
  ASSERT_EQ(traj.termination, Termination::Completed);
  EXPECT_LT(max_state_diff(traj.samples.back(), s0), 1e-8);
  EXPECT_NEAR(traj.samples[2].positions[0].x, -0.5, 1e-8);
  EXPECT_LT(traj.drift.energy_relative, 1e-8);
  EXPECT_LT(traj.drift.linear_momentum, 1e-12);
}

TEST(Integrate, HeadOnCollisionStopsBeforeFreeFallTime) {
  const Scenario sc = corpus("headon_flat.scn");
  const auto traj = integrate(initial_state(sc), Formulation::Unified, effective_config(sc), sc.t_end, sc.sample_dt);
  EXPECT_EQ(traj.termination, Termination::Singular);
  ASSERT_TRUE(traj.singular.has_value());
  EXPECT_EQ(*traj.singular, SingularKind::CollisionNear);
  // Unit masses from rest at distance 1 meet at t = pi / 4.
  const double t_hit = traj.samples.back().time;
  EXPECT_LE(t_hit, kPi / 4);
  EXPECT_GT(t_hit, kPi / 4 - 1e-6);
  EXPECT_LT(traj.drift.linear_momentum, 1e-12);
}

TEST(Integrate, BoundSphereThreeBodyConservesIntegrals) {
  const Scenario sc = corpus("sphere_three_body.scn");
  const auto traj = integrate(initial_state(sc), Formulation::Unified, effective_config(sc), 10.0, 0.5);
  ASSERT_EQ(traj.termination, Termination::Completed);
  EXPECT_LT(traj.drift.energy_relative, 1e-7);
  EXPECT_LT(traj.drift.angular, 1e-7);
  EXPECT_LT(traj.drift.hybrid, 1e-7);
  EXPECT_LT(traj.drift.constraint_residual, 1e-9);
}

TEST(Integrate, HyperbolicThreeBodyWedgeMomentaOverFiveTimeUnits) {
  std::mt19937_64 rng(13);
  const Curvature c(-1.0);
  const auto s0 = t::random_northpole_state(rng, 3, c, 0.5, 0.3);
  const auto traj = integrate(s0, Formulation::Unified, IntegratorConfig{}, 5.0, 0.5);
  ASSERT_EQ(traj.termination, Termination::Completed) << traj.reason;
  double worst = 0.0;
  const auto& w0 = traj.reports.front().wedge;
  for (const auto& r : traj.reports) {
    const auto& w = r.wedge;
    worst = std::max({worst, std::abs(w.wx - w0.wx), std::abs(w.wy - w0.wy), std::abs(w.wz - w0.wz),
                      std::abs(w.xy - w0.xy), std::abs(w.xz - w0.xz), std::abs(w.yz - w0.yz)});
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(Integrate, TimeReversal) {
  for (double k : {-1.0, 0.0, 1.0}) {
    Scenario sc = corpus("triangle_three_body.scn");
    sc.kappa = k;
    const auto s0 = initial_state(sc);
    const auto cfg = effective_config(sc);
    const auto fwd = integrate(s0, Formulation::Unified, cfg, 1.0, 1.0);
    IntegratorConfig tight = cfg;
    tight.rel_tol = 1e-13;
    tight.abs_tol = 1e-15;
    const auto ref = integrate(s0, Formulation::Unified, tight, 1.0, 1.0);
    const double one_way = std::max(max_state_diff(fwd.samples.back(), ref.samples.back()), 1e-14);

    SystemState back = fwd.samples.back();
    back.time = 0.0;
    for (auto& v : back.velocities) v *= -1.0;
    const auto rev = integrate(back, Formulation::Unified, cfg, 1.0, 1.0);
    SystemState end = rev.samples.back();
    for (auto& v : end.velocities) v *= -1.0;
    EXPECT_LT(max_state_diff(end, s0), 100.0 * one_way) << "kappa " << k;
  }
}

TEST(Integrate, AdaptiveAndFixedConvergeTogether) {
  Scenario sc = corpus("triangle_three_body.scn");
  sc.kappa = 0.5;
  const auto s0 = initial_state(sc);
  std::vector<double> gaps;
  const std::vector<std::pair<double, double>> levels{{1e-6, 0.02}, {1e-8, 0.005}, {1e-10, 0.00125}};
  for (const auto& [tol, h] : levels) {
    IntegratorConfig adaptive;
    adaptive.rel_tol = tol;
    IntegratorConfig fixed;
    fixed.scheme = Scheme::FixedRK4;
    fixed.step = h;
    const auto a = integrate(s0, Formulation::Unified, adaptive, 1.0, 1.0);
    const auto b = integrate(s0, Formulation::Unified, fixed, 1.0, 1.0);
    gaps.push_back(max_state_diff(a.samples.back(), b.samples.back()));
  }
  EXPECT_LT(gaps[1], gaps[0]);
  EXPECT_LT(gaps[2], gaps[1]);
  EXPECT_LT(gaps[2], 1e-8);
}

TEST(Integrate, ProjectionDoesNotBiasTheFlow) {
  Scenario sc = corpus("triangle_three_body.scn");
  for (double k : {-1.0, 1.0}) {
    sc.kappa = k;
    const auto s0 = initial_state(sc);
    IntegratorConfig with;
    with.rel_tol = 1e-12;
    with.abs_tol = 1e-14;
    IntegratorConfig without = with;
    without.projection = Projection::None;
    const auto a = integrate(s0, Formulation::Unified, with, 1.0, 1.0);
    const auto b = integrate(s0, Formulation::Unified, without, 1.0, 1.0);
    EXPECT_LT(max_state_diff(a.samples.back(), b.samples.back()), 10.0 * with.rel_tol) << "kappa " << k;
  }
}

TEST(Integrate, SamplesHitRequestedTimesExactly) {
  IntegratorConfig cfg;
  const auto traj = integrate(geodesic_start(), Formulation::Unified, cfg, 1.0, 0.3);
  ASSERT_EQ(traj.samples.size(), 5u);
  const std::vector<double> times{0.0, 0.3, 0.6, 0.3 * 3, 1.0};
  for (std::size_t i = 0; i < times.size(); ++i) EXPECT_EQ(traj.samples[i].time, times[i]);
  for (std::size_t i = 1; i < traj.samples.size(); ++i) EXPECT_GT(traj.samples[i].time, traj.samples[i - 1].time);
}

TEST(Integrate, MaxStepsStopsTheRun) {
  IntegratorConfig cfg;
  cfg.scheme = Scheme::FixedRK4;
  cfg.step = 0.01;
  cfg.max_steps = 10;
  const auto traj = integrate(geodesic_start(), Formulation::Unified, cfg, 1.0, 0.5);
  EXPECT_EQ(traj.termination, Termination::MaxSteps);
  EXPECT_EQ(traj.accepted_steps, 10u);
}

// Two light bodies on the unit sphere moving apart along one great circle.
// The force function tends to -infinity at the antipode, so with finite
// energy they turn back short of it; the default window never triggers.
SystemState separating_pair() {
  const Curvature c(1.0);
  SystemState s{MassList({1e-3, 1e-3}), {}, {}, 0.0, c, Frame::Centered};
  s.positions = {{0, 0, 0, 1}, {0.01, 0, 0, std::sqrt(1 - 1e-4)}};
  s.velocities = {{-2, 0, 0, 0}, {2 * std::sqrt(1 - 1e-4), 0, 0, -0.02}};
  return to_frame(s, Frame::NorthPole);
}

TEST(Integrate, AntipodalBarrierTurnsBodiesBack) {
  const auto traj = integrate(separating_pair(), Formulation::Unified, IntegratorConfig{}, 1.0, 0.01);
  ASSERT_EQ(traj.termination, Termination::Completed) << traj.reason;
  double closest = 1.0;  // 1 - k r^2 / 4 = cos^2(d / 2)
  for (const auto& s : traj.samples) {
    const double r2 = pair_separation_sq(s.positions[0], s.positions[1], s.curvature);
    closest = std::min(closest, 1.0 - r2 / 4.0);
  }
  EXPECT_LT(closest, 1e-3);
  EXPECT_GT(closest, 1e-12);
  // Separation at t = 1 is smaller again than at the turning point.
  const auto& last = traj.samples.back();
  EXPECT_GT(1.0 - pair_separation_sq(last.positions[0], last.positions[1], last.curvature) / 4.0, 10 * closest);
  EXPECT_LT(traj.drift.energy_relative, 1e-6);
}

TEST(Integrate, AntipodalApproachIsFlagged) {
  IntegratorConfig cfg;
  cfg.thresholds.antipodal = 1e-3;
  const auto traj = integrate(separating_pair(), Formulation::Unified, cfg, 1.0, 0.01);
  EXPECT_EQ(traj.termination, Termination::Singular);
  ASSERT_TRUE(traj.singular.has_value());
  EXPECT_EQ(*traj.singular, SingularKind::AntipodalNear);
  EXPECT_LT(traj.samples.back().time, 1.0);
}

TEST(Integrate, EveryFormulationFollowsTheSameFlow) {
  const Scenario sc = corpus("sphere_two_body.scn");
  Scenario planar = sc;
  for (auto& v : planar.flat_velocities) v.z = 0.0;
  const auto s0 = initial_state(planar);
  const auto cfg = effective_config(planar);
  const auto ref = integrate(s0, Formulation::CenteredExtrinsic, cfg, 1.0, 0.25);
  for (auto f : {Formulation::Unified, Formulation::NorthPoleExtrinsic, Formulation::Intrinsic2D}) {
    const auto traj = integrate(s0, f, cfg, 1.0, 0.25);
    ASSERT_EQ(traj.termination, Termination::Completed) << to_string(f);
    ASSERT_EQ(traj.samples.size(), ref.samples.size());
    for (std::size_t k = 0; k < ref.samples.size(); ++k) {
      EXPECT_LT(max_state_diff(traj.samples[k], ref.samples[k]), 1e-7) << to_string(f);
    }
  }
}

TEST(Integrate, RejectsBadArguments) {
  EXPECT_THROW(integrate(geodesic_start(), Formulation::Unified, IntegratorConfig{}, 0.0, 0.1), Error);
  EXPECT_THROW(integrate(geodesic_start(), Formulation::Unified, IntegratorConfig{}, 1.0, 0.0), Error);
  EXPECT_THROW(integrate(geodesic_start(), Formulation::Newtonian, IntegratorConfig{}, 1.0, 0.1), Error);
}

}  // namespace
