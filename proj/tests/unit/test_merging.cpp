#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "issf/errors.hpp"
#include "issf/merging.hpp"
#include "issf/random.hpp"

using namespace issf;
using fixtures::on_circle;
using fixtures::v2;

namespace {

CompactBarrier transform() {
  return compact_support_transform(fixtures::barrier(), fixtures::unsafe(), fixtures::locality());
}

// Midpoint-rule line integral of 0.5 (cos(pi B / 5) + 1) grad B along the
// radial segment from the boundary of D to x.
double radial_quadrature(const Vec& x, int n = 20000) {
  const Vec c = fixtures::obstacle_center();
  const Vec dir = (x - c).normalized();
  const Vec start = c + 2.0 * dir;
  const Vec seg = x - start;
  const auto B = fixtures::barrier();
  double acc = 0.0;
  for (int k = 0; k < n; ++k) {
    const Vec p = start + (k + 0.5) / n * seg;
    acc += 0.5 * (std::cos(std::numbers::pi * B(p) / 5.0) + 1.0) * B.grad(p).dot(seg) / n;
  }
  return acc;
}

}  // namespace

TEST(CompactBarrier, DepthAndShape) {
  const auto bt = transform();
  EXPECT_NEAR(bt.depth(), 5.0, 1e-12);
  EXPECT_DOUBLE_EQ(bt.outside_value(), -2.5);
  for (double b : {-5.0, -2.25, 0.0, 1.3}) EXPECT_NEAR(bt.shape(b), fixtures::shape_G(b), 1e-14);
  EXPECT_NEAR(bt.shape_slope(-5.0), 0.0, 1e-15);
}

TEST(CompactBarrier, ZeroOnUnsafeBoundary) {
  const auto bt = transform();
  for (int k = 0; k < 64; ++k) EXPECT_LE(std::abs(bt.value(on_circle(2.0, 2.0 * std::numbers::pi * k / 64))), 1e-8);
}

TEST(CompactBarrier, FlatOnLocalityBoundary) {
  const auto bt = transform();
  for (int k = 0; k < 64; ++k) {
    const Vec p = on_circle(3.0, 2.0 * std::numbers::pi * k / 64);
    EXPECT_NEAR(bt.value(p), -2.5, 1e-12);
    EXPECT_LE(bt.gradient(p).norm(), 1e-6);
  }
}

TEST(CompactBarrier, InteriorPointAgainstQuadrature) {
  const auto bt = transform();
  const Vec x = v2(4.0, 8.5);
  const double expected = 0.5 * (-2.25 + (5.0 / std::numbers::pi) * std::sin(-0.45 * std::numbers::pi));
  EXPECT_NEAR(bt.value(x), expected, 1e-14);
  EXPECT_NEAR(bt.value(x), -1.9122, 2e-3);
  EXPECT_NEAR(radial_quadrature(x), bt.value(x), 1e-8);
  EXPECT_NEAR(path_integral(bt, x), bt.value(x), 1e-6);
}

TEST(CompactBarrier, PathIntegralIdentityProperty) {
  const auto bt = transform();
  SplitMix64 rng(21);
  for (int i = 0; i < 100; ++i) {
    const double r = rng.uniform(2.0, 3.0), a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const Vec x = on_circle(r, a);
    EXPECT_LE(std::abs(fixtures::shape_G(fixtures::barrier()(x)) - path_integral(bt, x)), 1e-6);
    if (i < 10) EXPECT_NEAR(radial_quadrature(x), bt.value(x), 1e-8);
  }
}

TEST(CompactBarrier, ConstantOutsideAndContinuousAcrossBoundary) {
  const auto bt = transform();
  for (const Vec& p : {v2(0, 0), v2(20, -3), v2(4, 9.5)}) {
    EXPECT_EQ(bt.value(p), -2.5);
    EXPECT_EQ(bt.gradient(p), Vec::Zero(2));
  }
  for (int k = 0; k < 32; ++k) {
    const double a = 2.0 * std::numbers::pi * k / 32;
    EXPECT_LE(std::abs(bt.value(on_circle(3.0 - 1e-9, a)) - bt.value(on_circle(3.0 + 1e-9, a))), 1e-8);
  }
}

TEST(CompactBarrier, GradientMatchesFiniteDifferencesProperty) {
  const auto bt = transform();
  const auto field = bt.as_field();
  SplitMix64 rng(22);
  for (int i = 0; i < 1000; ++i) {
    const Vec x = on_circle(rng.uniform(2.0, 3.0), rng.uniform(0.0, 2.0 * std::numbers::pi));
    const auto B = fixtures::barrier();
    const Vec closed = 0.5 * (std::cos(std::numbers::pi * B(x) / 5.0) + 1.0) * B.grad(x);
    EXPECT_LE((bt.gradient(x) - closed).norm() / std::max(1.0, closed.norm()), 1e-12);
    const Vec fd = finite_difference_gradient(field.value, x);
    EXPECT_LE((fd - closed).norm() / std::max(1.0, closed.norm()), 1e-6);
  }
}

TEST(CompactBarrier, SignInheritanceOnGrid) {
  const auto bt = transform();
  for (int i = 0; i <= 120; ++i) {
    for (int j = 0; j <= 120; ++j) {
      const Vec x = v2(0.5 + 7.0 * i / 120, 2.5 + 7.0 * j / 120);
      const double r = (x - fixtures::obstacle_center()).norm();
      if (r < 2.0) EXPECT_GT(bt.value(x), 0.0);
      if (r > 2.0) EXPECT_LE(bt.value(x), 0.0);
    }
  }
}

TEST(CompactBarrier, RejectsUnsupportedShapes) {
  const ScalarField ellipse{[](const Vec& x) { return 4.0 - (x(0) - 4) * (x(0) - 4) - 2.0 * (x(1) - 6) * (x(1) - 6); },
                            {}, "ellipse"};
  EXPECT_THROW(compact_support_transform(ellipse, fixtures::unsafe(), fixtures::locality()), UnsupportedShapeError);
  const ScalarField tilted{[](const Vec& x) { return fixtures::barrier()(x) * (1.0 + 0.1 * x(0)); }, {}, "tilted"};
  EXPECT_THROW(compact_support_transform(tilted, fixtures::unsafe(), fixtures::locality()), UnsupportedShapeError);
  const ScalarField flipped{[](const Vec& x) { return -fixtures::barrier()(x); }, {}, "-B"};
  EXPECT_THROW(compact_support_transform(flipped, fixtures::unsafe(), fixtures::locality()), UnsupportedShapeError);
}

TEST(Merged, ValueOnUnsafeBoundary) {
  const auto W = merged_W(fixtures::lyapunov(), transform(), 100.0, -10.0);
  EXPECT_NEAR(W.value(v2(6, 6)), 98.0, 1e-9);
}

TEST(Merged, FarOutsideReducesToLyapunovShape) {
  const auto W = merged_W(fixtures::lyapunov(), transform(), 100.0, -10.0);
  const auto V = fixtures::lyapunov();
  for (const Vec& x : {v2(-8, 3), v2(11, 11), v2(0, 0)}) {
    EXPECT_DOUBLE_EQ(W.value(x), V(x) - 250.0 - 10.0);
    EXPECT_EQ(W.gradient(x), V.grad(x));
  }
  EXPECT_DOUBLE_EQ(W.value(v2(0, 0)), -260.0);
}

TEST(Merged, ZeroBarrierGain) {
  const auto W = merged_W(fixtures::lyapunov(), transform(), 0.0, -10.0);
  for (const Vec& x : {v2(4, 7), v2(1, 1)}) EXPECT_DOUBLE_EQ(W.value(x), fixtures::lyapunov()(x) - 10.0);
  EXPECT_THROW(merged_W(fixtures::lyapunov(), transform(), -1.0, 0.0), std::invalid_argument);
}

TEST(Merged, GradientIsSumOfParts) {
  const auto bt = transform();
  const auto W = merged_W(fixtures::lyapunov(), bt, 100.0, -10.0);
  SplitMix64 rng(23);
  for (int i = 0; i < 200; ++i) {
    const Vec x = v2(rng.uniform(-10, 12), rng.uniform(-10, 12));
    EXPECT_LE((W.gradient(x) - (fixtures::lyapunov().grad(x) + 100.0 * bt.gradient(x))).norm(), 1e-12);
  }
}

TEST(GradientLaw, OuterBranchAndOrigin) {
  const auto law = gradient_control(merged_W(fixtures::lyapunov(), transform(), 100.0, -10.0));
  const Vec x = v2(-3, 2);
  EXPECT_EQ(law.k(x), v2(-(2 * -3.0 + 2.0), -(-3.0 + 2 * 2.0)));
  EXPECT_EQ(law.k(v2(0, 0)), Vec::Zero(2));
}

TEST(GradientLaw, BranchesAgreeOnLocalityBoundary) {
  const auto bt = transform();
  const auto law = gradient_control(merged_W(fixtures::lyapunov(), bt, 100.0, -10.0));
  const auto V = fixtures::lyapunov();
  for (int k = 0; k < 64; ++k) {
    const Vec p = on_circle(3.0, 2.0 * std::numbers::pi * k / 64);
    const Vec inner = -V.grad(p) - 100.0 * bt.inner_gradient(p);
    const Vec outer = -V.grad(p);
    EXPECT_LE((inner - outer).norm(), 1e-6);
    EXPECT_LE(law.branch_mismatch(p), 1e-6);
  }
}

Mat fd_hessian(const MergedFunction& W, const Vec& x) {
  Mat H(2, 2);
  const double h = 1e-6;
  for (int j = 0; j < 2; ++j) {
    Vec e = Vec::Zero(2);
    e(j) = h;
    H.col(j) = (W.gradient(x + e) - W.gradient(x - e)) / (2.0 * h);
  }
  return 0.5 * (H + H.transpose());
}

// A gradient flow around a disk obstacle cannot be globally attracted to the
// origin: a saddle sits behind the obstacle, inside X.
TEST(GradientLaw, EquilibriaAreTheOriginAndOneSaddleBehindTheObstacle) {
  const auto W = merged_W(fixtures::lyapunov(), transform(), 100.0, -10.0);
  Vec x = v2(5.4, 8.1);
  for (int it = 0; it < 50; ++it) x -= fd_hessian(W, x).fullPivLu().solve(W.gradient(x));
  ASSERT_LT(W.gradient(x).norm(), 1e-9);
  EXPECT_TRUE(contains(x, fixtures::locality()));
  EXPECT_GT(distance_to_set(x, fixtures::unsafe()), 0.5);
  const Eigen::SelfAdjointEigenSolver<Mat> eig(fd_hessian(W, x));
  EXPECT_LT(eig.eigenvalues()(0), 0.0);
  EXPECT_GT(eig.eigenvalues()(1), 0.0);

  const int n = 401;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vec p = v2(-10.0 + 22.0 * i / (n - 1), -10.0 + 22.0 * j / (n - 1));
      if (contains(p, fixtures::unsafe()) || W.gradient(p).norm() >= 0.5) continue;
      EXPECT_TRUE(p.norm() < 0.5 || (p - x).norm() < 0.5) << p.transpose();
    }
  }
}
