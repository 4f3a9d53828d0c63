#pragma once

#include <cmath>
#include <numbers>

#include "issf/comparison_functions.hpp"
#include "issf/geometry.hpp"
#include "issf/scalar_field.hpp"

// Hand-written reference data for the planar obstacle example. These do not go
// through the expression parser so they can serve as independent oracles.
namespace fixtures {

using issf::Mat;
using issf::Vec;

inline Vec v2(double a, double b) { return Vec{{a, b}}; }

inline const Vec& obstacle_center() {
  static const Vec c = v2(4.0, 6.0);
  return c;
}

inline Mat hessian_P() {
  Mat P(2, 2);
  P << 2.0, 1.0, 1.0, 2.0;
  return P;
}

/// x1^2 + x1 x2 + x2^2.
inline issf::ScalarField lyapunov() {
  return {[](const Vec& x) { return x(0) * x(0) + x(0) * x(1) + x(1) * x(1); },
          [](const Vec& x) { return v2(2.0 * x(0) + x(1), x(0) + 2.0 * x(1)); }, "V"};
}

/// 4 - |x - c|^2.
inline issf::ScalarField barrier() {
  return {[](const Vec& x) { return 4.0 - (x - obstacle_center()).squaredNorm(); },
          [](const Vec& x) { return Vec(-2.0 * (x - obstacle_center())); }, "B"};
}

inline issf::Region unsafe() { return issf::Region::disk(4.0, 6.0, 2.0); }
inline issf::Region locality() { return issf::Region::disk(4.0, 6.0, 3.0); }
inline issf::SafetyGeometry geometry() { return issf::SafetyGeometry::make(unsafe(), locality()); }

/// Antiderivative of 0.5 (cos(pi b / 5) + 1).
inline double shape_G(double b) {
  return 0.5 * (b + (5.0 / std::numbers::pi) * std::sin(std::numbers::pi * b / 5.0));
}

/// Point at angle a on the circle of radius r around the obstacle center.
inline Vec on_circle(double r, double a) {
  return obstacle_center() + r * v2(std::cos(a), std::sin(a));
}

}  // namespace fixtures
