#include "issf/merging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "issf/errors.hpp"

namespace issf {

CompactBarrier::CompactBarrier(ScalarField base, Region unsafe, Region support, double depth)
    : base_(std::move(base)), unsafe_(std::move(unsafe)), support_(std::move(support)),
      depth_(depth) {
  if (!(depth_ > 0.0)) throw UnsupportedShapeError("compact barrier: depth must be positive");
}

double CompactBarrier::shape(double b) const {
  return 0.5 * (b + depth_ / std::numbers::pi * std::sin(std::numbers::pi * b / depth_));
}

double CompactBarrier::shape_slope(double b) const {
  return 0.5 * (1.0 + std::cos(std::numbers::pi * b / depth_));
}

double CompactBarrier::value(const Vec& x) const {
  if (!contains(x, support_)) return outside_value();
  return shape(base_(x));
}

Vec CompactBarrier::inner_gradient(const Vec& x) const {
  return shape_slope(base_(x)) * base_.grad(x);
}

Vec CompactBarrier::gradient(const Vec& x) const {
  if (!contains(x, support_)) return Vec::Zero(x.size());
  return inner_gradient(x);
}

ScalarField CompactBarrier::as_field() const {
  const CompactBarrier self = *this;
  return ScalarField{[self](const Vec& x) { return self.value(x); },
                     [self](const Vec& x) { return self.gradient(x); },
                     fmt::format("compact transform of {} (depth {})", base_.description, depth_)};
}

CompactBarrier compact_support_transform(const ScalarField& B, const Region& unsafe,
                                         const Region& support, int boundary_samples) {
  if (!support.is_bounded() || !unsafe.is_bounded()) {
    throw UnsupportedShapeError("compact_support_transform: D and X must be bounded");
  }
  for (const auto& w : sample_boundary(unsafe, boundary_samples)) {
    const double b = B(w);
    if (std::abs(b) > 1e-8) {
      throw UnsupportedShapeError(fmt::format(
          "compact_support_transform: B = {:.3e} on the boundary of D (expected 0)", b));
    }
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& w : sample_boundary(support, boundary_samples)) {
    const double b = B(w);
    lo = std::min(lo, b);
    hi = std::max(hi, b);
  }
  const double depth = -0.5 * (lo + hi);
  if (hi - lo > 1e-8 * std::max(1.0, depth)) {
    throw UnsupportedShapeError(fmt::format(
        "compact_support_transform: B is not constant on the boundary of X (range [{}, {}])", lo,
        hi));
  }
  if (!(depth > 0.0)) {
    throw UnsupportedShapeError("compact_support_transform: B must be negative on the boundary of X");
  }
  return CompactBarrier(B, unsafe, support, depth);
}

double path_integral(const CompactBarrier& bt, const Vec& x, double step) {
  const Vec omega = nearest_boundary_point(x, bt.unsafe());
  const Vec seg = x - omega;
  const double len = seg.norm();
  double acc = bt.base()(omega);
  if (len == 0.0) return acc;
  auto n = static_cast<long>(std::ceil(len / step));
  if (n % 2 == 1) ++n;
  const double h = 1.0 / static_cast<double>(n);
  auto integrand = [&](double s) {
    const Vec p = omega + s * seg;
    if (!contains(p, bt.support()) && distance_to_set(p, bt.support()) > 0.0) return 0.0;
    return bt.shape_slope(bt.base()(p)) * bt.base().grad(p).dot(seg);
  };
  double sum = integrand(0.0) + integrand(1.0);
  for (long i = 1; i < n; ++i) sum += (i % 2 == 1 ? 4.0 : 2.0) * integrand(h * i);
  acc += sum * h / 3.0;
  return acc;
}

MergedFunction::MergedFunction(ScalarField v_part, CompactBarrier b_part, double k1, double k2)
    : v_(std::move(v_part)), b_(std::move(b_part)), k1_(k1), k2_(k2) {
  if (!(k1_ >= 0.0)) throw std::invalid_argument("merged_W: k1 must be nonnegative");
}

double MergedFunction::value(const Vec& x) const { return v_(x) + k1_ * b_.value(x) + k2_; }

Vec MergedFunction::gradient(const Vec& x) const {
  Vec g = v_.grad(x);
  if (k1_ != 0.0) g += k1_ * b_.gradient(x);
  return g;
}

ScalarField MergedFunction::as_field() const {
  const MergedFunction self = *this;
  return ScalarField{[self](const Vec& x) { return self.value(x); },
                     [self](const Vec& x) { return self.gradient(x); },
                     fmt::format("{} + {}*Bt + {}", v_.description, k1_, k2_)};
}

MergedFunction merged_W(const ScalarField& V, const CompactBarrier& bt, double k1, double k2) {
  return MergedFunction(V, bt, k1, k2);
}

FeedbackLaw gradient_control(const MergedFunction& W) {
  FeedbackLaw law;
  law.k = [W](const Vec& x) -> Vec { return -W.gradient(x); };
  law.description = "v = -grad W";
  law.branch_mismatch = [W](const Vec& x) {
    const auto& X = W.b_part().support();
    const Vec edge = nearest_boundary_point(x, X);
    if ((edge - x).norm() > 0.05) return 0.0;
    return W.k1() * W.b_part().inner_gradient(edge).norm();
  };
  return law;
}

FeedbackLaw lyapunov_gradient_control(const ScalarField& V) {
  FeedbackLaw law;
  law.k = [V](const Vec& x) -> Vec { return -V.grad(x); };
  law.description = "v = -grad V";
  return law;
}

}  // namespace issf
