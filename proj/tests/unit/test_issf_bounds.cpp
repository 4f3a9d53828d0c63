#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "issf/issf_bounds.hpp"
#include "issf/merging.hpp"

using namespace issf;
using fixtures::v2;

namespace {

IssfGainBundle identity_bundle(const SafetyGeometry& g = fixtures::geometry()) {
  const auto id = MonotoneFn::identity();
  return build_gains(id, id, id, id, 0.5, 0.5, g);
}

Trajectory straight_line(const Vec& x0, const Vec& u, double t_end, double dt) {
  return integrate(ControlAffineSystem::single_integrator(2), x0, DisturbanceSignal::constant(u), std::nullopt,
                   t_end, dt, fixtures::geometry());
}

}  // namespace

TEST(BuildGains, IdentityBundleClosedForms) {
  const auto b = identity_bundle();
  EXPECT_NEAR(b.delta, 0.5, 1e-12);
  EXPECT_NEAR(b.kappa, 1.0, 1e-12);
  for (double s : {0.0, 0.5, 2.0, 6.0}) {
    EXPECT_NEAR(b.phi(s), 2.0 * s, 1e-9);
    EXPECT_EQ(b.sigma(s), s);
    for (double t : {0.0, 1.0, 3.0}) {
      const double exact = 0.5 * s * std::exp(0.5 * t);
      EXPECT_NEAR(b.mu(s, t), exact, 1e-6 * std::max(1.0, exact));
    }
  }
}

TEST(BuildGains, MuAtZeroTimeIsScaledTransfer) {
  const auto a1 = MonotoneFn::power(2.0), a2 = MonotoneFn::power(2.0, 2.0);
  const auto b = build_gains(a1, a2, MonotoneFn::linear(3.0), MonotoneFn::power(2.0, 0.5), 0.5, 0.3,
                             fixtures::geometry());
  for (int i = 0; i <= 50; ++i) {
    const double s = 0.2 * i;
    EXPECT_NEAR(b.mu(s, 0.0), 0.3 * std::sqrt(2.0) * s, 1e-8);
    EXPECT_NEAR(b.mu_tilde0(s), std::sqrt(2.0) * s, 1e-8);
  }
  const auto same = build_gains(a1, a1, a1, a1, 0.5, 0.5, fixtures::geometry());
  EXPECT_NEAR(same.mu(1.7, 0.0), 0.5 * 1.7, 1e-9);
}

TEST(BuildGains, MuVanishesAtZero) {
  const auto b = identity_bundle();
  for (double t : {0.0, 2.0, 9.0}) EXPECT_EQ(b.mu(0.0, t), 0.0);
}

TEST(BuildGains, CappedInitialTermIsNondecreasingProperty) {
  const auto s4 = MonotoneFn::linear_quadratic(4.0, 1.0);
  const auto b = build_gains(s4, s4, MonotoneFn::linear(280.0), MonotoneFn::power(2.0, 0.5), 0.5, 0.5,
                             SafetyGeometry::make(fixtures::unsafe(), Region::disk(4, 6, 2.8)));
  for (double s : {0.05, 0.2, 0.7, 2.0}) {
    std::vector<double> ts;
    for (int k = 0; k <= 100; ++k) ts.push_back(0.05 * k);
    const auto series = b.mu_series(s, ts);
    for (std::size_t k = 1; k < ts.size(); ++k) {
      EXPECT_LE(std::min(series[k - 1], b.delta), std::min(series[k], b.delta));
      EXPECT_NEAR(series[k], b.mu(s, ts[k]), 1e-9 * std::max(1.0, series[k]));
    }
  }
}

TEST(BuildGains, RejectsParameterRanges) {
  const auto id = MonotoneFn::identity();
  EXPECT_THROW(build_gains(id, id, id, id, 0.0, 0.5, fixtures::geometry()), std::invalid_argument);
  EXPECT_THROW(build_gains(id, id, id, id, 0.5, 1.0, fixtures::geometry()), std::invalid_argument);
  const MonotoneFn bounded([](double s) { return 1.0 - std::exp(-s); }, FnClass::K, "bounded");
  EXPECT_THROW(build_gains(bounded, id, id, id, 0.5, 0.5, fixtures::geometry()), std::invalid_argument);
}

TEST(Evaluate, SafeTrajectoryFarFromObstacle) {
  const auto b = identity_bundle();
  const auto tr = straight_line(v2(-6, -6), v2(0, 0), 2.0, 1e-2);
  const auto ev = evaluate_issf_inequality(b, tr);
  EXPECT_TRUE(ev.admissible);
  EXPECT_EQ(ev.verdict, IssfVerdict::pass);
  for (const auto& s : ev.samples) EXPECT_GT(s.residual, 0.0);
  ASSERT_EQ(ev.samples.size(), tr.size());
  const auto& s0 = ev.samples.front();
  EXPECT_NEAR(s0.residual, s0.lhs - s0.rhs, 1e-15);
}

TEST(Evaluate, PushIntoObstacleWithoutLawIsVacuous) {
  const auto b = identity_bundle();
  const Vec x0 = v2(4, 8.05);  // 0.05 above the obstacle
  const auto tr = straight_line(x0, v2(0, -3), 1.0, 1e-3);
  EXPECT_EQ(tr.min_dist_to_D(), 0.0);
  const auto ev = evaluate_issf_inequality(b, tr);
  EXPECT_FALSE(ev.admissible);
  EXPECT_EQ(ev.verdict, IssfVerdict::vacuous);
  ASSERT_TRUE(ev.first_inadmissible_time.has_value());
  EXPECT_EQ(*ev.first_inadmissible_time, 0.0);
}

TEST(Evaluate, PersistentViolationFails) {
  // A slow approach that satisfies the bound, then a forged distance series.
  const auto id = MonotoneFn::identity();
  const auto geom = SafetyGeometry::make(fixtures::unsafe(), Region::disk(4, 6, 40.0));
  const auto b = build_gains(id, id, id, MonotoneFn::power(2.0, 1e-6), 0.5, 0.1, geom);
  const auto tr = straight_line(v2(4, 9), v2(0, -1e-3), 1.0, 1e-3);
  const auto ev = evaluate_issf_inequality(b, tr);
  EXPECT_TRUE(ev.admissible);
  EXPECT_EQ(ev.verdict, IssfVerdict::pass);
  Trajectory forged = tr;
  for (std::size_t i = tr.size() / 2; i < tr.size(); ++i) forged.dist_to_D[i] = 0.0;
  const auto bad = evaluate_issf_inequality(b, forged);
  EXPECT_EQ(bad.verdict, IssfVerdict::fail);
  EXPECT_LT(bad.min_residual, -1e-3);
}

TEST(Admissibility, Examples) {
  const auto geom = fixtures::geometry();
  const auto b = identity_bundle();
  EXPECT_TRUE(admissibility_check(b, v2(5, 8), DisturbanceSignal::zero(2), geom, 5.0).admissible);
  const auto big = admissibility_check(b, v2(5, 8), DisturbanceSignal::constant(v2(3, 0)), geom, 5.0);
  EXPECT_FALSE(big.admissible);
  ASSERT_TRUE(big.first_violation_time.has_value());
  EXPECT_EQ(*big.first_violation_time, 0.0);
}

TEST(Admissibility, ExactEqualityIsInadmissible) {
  // Wide locality so that the cap does not bind: at t = 0 the RHS is
  // mu(4, 0) - phi(1) = 0.5 * 4 - 2 * 1 = 0.
  const auto geom = SafetyGeometry::make(fixtures::unsafe(), Region::disk(4, 6, 100.0));
  const auto b = identity_bundle(geom);
  ASSERT_EQ(b.mu(4.0, 0.0), b.phi(1.0));
  const auto r = admissibility_check(b, v2(4, 12), DisturbanceSignal::constant(v2(1, 0)), geom, 1.0);
  EXPECT_FALSE(r.admissible);
  EXPECT_EQ(r.first_violation_time.value_or(-1.0), 0.0);
}

TEST(SafetyEnvelope, IdentityBundle) {
  const auto env = safety_envelope(identity_bundle(), {0.0, 0.5, 1.0, 2.0, 3.0});
  ASSERT_EQ(env.min_safe_initial_distance.size(), 5u);
  EXPECT_EQ(env.min_safe_initial_distance[0], 0.0);
  EXPECT_NEAR(env.min_safe_initial_distance[2], 4.0, 1e-6);
  for (std::size_t i = 1; i < 5; ++i) {
    EXPECT_LE(env.min_safe_initial_distance[i - 1], env.min_safe_initial_distance[i]);
    EXPECT_NEAR(env.min_safe_initial_distance[i], 4.0 * env.u_bounds[i], 1e-6);
  }
}

TEST(SafetyEnvelope, UnreachableBoundRaises) {
  auto b = identity_bundle();
  b.mu = KKFn{[](double s, double) { return 0.5 * (1.0 - std::exp(-s)); }, "bounded"};
  EXPECT_THROW(safety_envelope(b, {10.0}), std::range_error);
}

TEST(IssGains, EqualSandwichGivesIdentityOvershoot) {
  const auto a = MonotoneFn::power(2.0);
  const auto g = build_iss_gains(a, a, a, MonotoneFn::power(2.0, 9.0));
  for (double s : {0.0, 1.0, 3.5}) EXPECT_NEAR(g.beta(s, 0.0), s, 1e-9);
  EXPECT_FALSE(g.construction.empty());
}

TEST(IssGains, QuadraticSandwich) {
  const auto g = build_iss_gains(MonotoneFn::power(2.0, 0.5), MonotoneFn::power(2.0, 1.5), MonotoneFn::power(2.0, 0.5),
                                 MonotoneFn::power(2.0, 9.0));
  for (double s : {0.5, 1.0, 4.0}) EXPECT_NEAR(g.beta(s, 0.0), std::sqrt(3.0) * s, 1e-8);
  // gamma = a1^-1 o a2 o a3^-1 o (9 s^2 / 0.5) = sqrt(3) * sqrt(36) s.
  EXPECT_NEAR(g.gamma(1.0), std::sqrt(3.0) * 6.0, 1e-7);
  EXPECT_LT(g.beta(2.0, 3.0), g.beta(2.0, 1.0));
}

TEST(Witness, EtaClamping) {
  EXPECT_EQ(eta_from(0.5, 1.0, 1e-3, 1e-3), 0.5);
  EXPECT_NEAR(eta_from(0.5, 1.0, 1000.0, 9.0), 0.5 / 1009.0, 1e-15);
}

TEST(Witness, ObstacleSideInitialCondition) {
  const auto s4 = MonotoneFn::linear_quadratic(4.0, 1.0);
  const auto geom = SafetyGeometry::make(fixtures::unsafe(), Region::disk(4, 6, 2.8));
  const auto b = build_gains(s4, s4, MonotoneFn::linear(280.0), MonotoneFn::power(2.0, 0.5), 0.5, 0.5, geom);
  const auto iss = build_iss_gains(MonotoneFn::power(2.0, 0.5), MonotoneFn::power(2.0, 1.5),
                                   MonotoneFn::power(2.0, 0.5), MonotoneFn::power(2.0, 9.0));
  const auto w = admissibility_witness(b, fixtures::barrier(), iss, v2(5, 8), 3.0, geom);
  EXPECT_GT(w.eta, 0.0);
  EXPECT_LE(w.eta, 0.5);
  EXPECT_NEAR(w.d2, std::sqrt(52.0) + 2.0, 1e-12);
  EXPECT_NEAR(w.d1, std::sqrt(3.0) * std::sqrt(89.0) + iss.gamma(3.0), 1e-6);
  EXPECT_NEAR(w.eta, eta_from(0.5, w.mu_tilde0, w.d1, w.d2), 1e-15);
  // rho(x) = a4^-1(theta a3(a1^-1(-B(x)))) with -B(5, 8) = 1 and a1^-1(1) = sqrt(5) - 2.
  const double d = std::sqrt(5.0) - 2.0;
  EXPECT_NEAR(w.rho_at(v2(5, 8)), std::sqrt(0.5 * 280.0 * d / 0.5), 1e-6);
}
