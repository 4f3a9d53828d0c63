#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "issf/envelope_fit.hpp"
#include "issf/merging.hpp"

using namespace issf;
using fixtures::v2;

namespace {

std::vector<EnvelopeSample> samples_of(double a, double b, double wiggle) {
  std::vector<EnvelopeSample> out;
  for (int i = 1; i <= 200; ++i) {
    const double s = 0.05 * i;
    out.push_back({s, a * s + b * s * s + wiggle * std::sin(7.0 * s) * s});
  }
  return out;
}

}  // namespace

TEST(EnvelopeFamily, ParsesNames) {
  EXPECT_EQ(parse_envelope_family("quadratic"), EnvelopeFamily::quadratic);
  EXPECT_EQ(parse_envelope_family("linear"), EnvelopeFamily::linear);
  EXPECT_EQ(parse_envelope_family("square"), EnvelopeFamily::square);
  EXPECT_THROW(parse_envelope_family("cubic"), std::invalid_argument);
}

TEST(FitEnvelope, UpperAndLowerBoundEverySample) {
  const auto samples = samples_of(3.0, 2.0, 0.4);
  const auto up = fit_envelope(samples, EnvelopeFamily::quadratic, EnvelopeSide::upper);
  const auto lo = fit_envelope(samples, EnvelopeFamily::quadratic, EnvelopeSide::lower);
  ASSERT_TRUE(up.feasible);
  ASSERT_TRUE(lo.feasible);
  for (const auto& s : samples) {
    EXPECT_GE(up.fn(s.s), s.y);
    EXPECT_LE(lo.fn(s.s), s.y);
  }
  EXPECT_TRUE(check_class(up.fn, FnClass::Kinf).ok);
  EXPECT_TRUE(check_class(lo.fn, FnClass::Kinf).ok);
}

TEST(FitEnvelope, ExactPolynomialIsRecovered) {
  const auto samples = samples_of(4.0, 1.0, 0.0);
  const auto up = fit_envelope(samples, EnvelopeFamily::quadratic, EnvelopeSide::upper, 1e-6);
  EXPECT_NEAR(up.fn(1.0), 5.0, 1e-4);
  const auto lin = fit_envelope(samples_of(2.0, 0.0, 0.0), EnvelopeFamily::linear, EnvelopeSide::lower, 1e-6);
  EXPECT_NEAR(lin.fn(1.0), 2.0, 1e-4);
}

TEST(FitEnvelope, NonPositiveDataIsInfeasibleForLowerEnvelope) {
  std::vector<EnvelopeSample> samples = {{0.5, 1.0}, {1.0, -0.5}, {2.0, 3.0}};
  EXPECT_FALSE(fit_envelope(samples, EnvelopeFamily::quadratic, EnvelopeSide::lower).feasible);
}

TEST(FitIssfBarrier, RecoversDistancePolynomial) {
  GridSpec g;
  g.bounds = {{-10, 12}, {-10, 12}};
  g.resolution = 201;
  g.input_samples = input_ball_samples(2, 3.0);
  const auto bt = compact_support_transform(fixtures::barrier(), fixtures::unsafe(), fixtures::locality());
  const auto loop = closed_loop(ControlAffineSystem::single_integrator(2),
                                gradient_control(merged_W(fixtures::lyapunov(), bt, 100.0, -10.0)));
  const auto fit = fit_issf_barrier(fixtures::barrier(), loop, fixtures::unsafe(), Region::disk(4, 6, 2.8), g,
                                    EnvelopeFamily::quadratic, 0.5);
  ASSERT_TRUE(fit.feasible);
  ASSERT_EQ(fit.alphas.size(), 4u);
  for (double s : {0.1, 1.0, 5.0}) {
    EXPECT_NEAR(fit.alphas[0](s), 4 * s + s * s, 1e-4 * (4 * s + s * s));
    EXPECT_NEAR(fit.alphas[1](s), 4 * s + s * s, 1e-4 * (4 * s + s * s));
    EXPECT_GE(fit.alphas[0](s), fit.alphas[1](s));
  }
  EXPECT_DOUBLE_EQ(fit.alphas[3](2.0), 2.0);
  EXPECT_GT(fit.alphas[2](1.0), 0.0);
}
