#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "issf/types.hpp"

namespace issf {

/// A smooth function of the state with an optional analytic gradient. When the
/// gradient is absent, central finite differences are used.
struct ScalarField {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  std::string description;

  double operator()(const Vec& x) const { return value(x); }
  /// Analytic gradient if declared, else central differences with h = 1e-6.
  Vec grad(const Vec& x) const;
  bool has_analytic_gradient() const { return static_cast<bool>(gradient); }
};

Vec finite_difference_gradient(const std::function<double(const Vec&)>& f, const Vec& x,
                               double h = 1e-6);

struct GradientCheck {
  bool ok = true;
  double max_error = 0.0;
  Vec worst_point;
  int samples = 0;
};

/// Compares the analytic gradient with central differences at `samples`
/// uniformly drawn points of `box`. The error at a point is
/// ‖g_analytic − g_fd‖ / max(1, ‖g_analytic‖). Fields without an analytic
/// gradient pass trivially.
GradientCheck check_gradient(const ScalarField& field, const Bounds& box, int samples = 1000,
                             std::uint64_t seed = 7, double tol = 1e-6, double h = 1e-6);

/// Same test restricted to points accepted by `keep` (rejection sampling).
GradientCheck check_gradient(const ScalarField& field, const Bounds& box,
                             const std::function<bool(const Vec&)>& keep, int samples,
                             std::uint64_t seed, double tol = 1e-6, double h = 1e-6);

/// Throws GradientMismatchError when check_gradient fails.
void require_gradient(const ScalarField& field, const Bounds& box, const std::string& what);

}  // namespace issf
