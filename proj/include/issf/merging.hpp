#pragma once

#include "issf/dynamics.hpp"
#include "issf/geometry.hpp"
#include "issf/scalar_field.hpp"

namespace issf {

/// Cosine-weighted compact-support transform of a barrier B:
///   B̃ = G(B) on X,  G(b) = 0.5·(b + (depth/π)·sin(π·b/depth)),
/// and the constant G(−depth) = −depth/2 outside X, where depth = −B on ∂X.
/// G' = 0.5·(1 + cos(π·b/depth)) vanishes at b = −depth, so ∇B̃ = 0 on ∂X.
class CompactBarrier {
 public:
  CompactBarrier(ScalarField base, Region unsafe, Region support, double depth);

  const ScalarField& base() const noexcept { return base_; }
  const Region& unsafe() const noexcept { return unsafe_; }
  const Region& support() const noexcept { return support_; }
  double depth() const noexcept { return depth_; }
  double outside_value() const noexcept { return -0.5 * depth_; }

  double shape(double b) const;        ///< G(b)
  double shape_slope(double b) const;  ///< G'(b)

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  /// The inside-X formula G'(B)·∇B evaluated anywhere (used for branch checks).
  Vec inner_gradient(const Vec& x) const;

  ScalarField as_field() const;

 private:
  ScalarField base_;
  Region unsafe_;
  Region support_;
  double depth_;
};

/// Builds B̃ from B. Requires B ≈ 0 on ∂D and B ≈ −depth (constant, > 0) on
/// ∂X, checked on sampled boundary points; throws UnsupportedShapeError
/// otherwise.
CompactBarrier compact_support_transform(const ScalarField& B, const Region& unsafe,
                                         const Region& support, int boundary_samples = 256);

/// The transform evaluated from its line-integral definition:
///   B(ω) + ∫ 0.5·(cos(π·B/depth) + 1)·∇B · dσ
/// along the straight segment from the nearest point ω of ∂D to x, by
/// composite Simpson quadrature with the given step. The integrand is taken
/// as zero outside X.
double path_integral(const CompactBarrier& bt, const Vec& x, double step = 1e-4);

/// W = V + k1·B̃ + k2.
class MergedFunction {
 public:
  MergedFunction(ScalarField v_part, CompactBarrier b_part, double k1, double k2);

  const ScalarField& v_part() const noexcept { return v_; }
  const CompactBarrier& b_part() const noexcept { return b_; }
  double k1() const noexcept { return k1_; }
  double k2() const noexcept { return k2_; }

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  ScalarField as_field() const;

 private:
  ScalarField v_;
  CompactBarrier b_;
  double k1_;
  double k2_;
};

MergedFunction merged_W(const ScalarField& V, const CompactBarrier& bt, double k1, double k2);

/// v = −∇W: −∇V − k1·∇B̃ inside X and −∇V outside. The branch-mismatch
/// diagnostic is k1·‖G'(B)·∇B‖ at the nearest point of ∂X, reported for
/// states within 0.05 of ∂X.
FeedbackLaw gradient_control(const MergedFunction& W);

/// v = −∇V.
FeedbackLaw lyapunov_gradient_control(const ScalarField& V);

}  // namespace issf
