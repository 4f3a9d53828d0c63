#include "issf/comparison_functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace issf {

const char* to_string(FnClass c) {
  switch (c) {
    case FnClass::P:
      return "P";
    case FnClass::K:
      return "K";
    case FnClass::Kinf:
      return "Kinf";
  }
  return "?";
}

MonotoneFn::MonotoneFn(Evaluator evaluator, FnClass fn_class, std::string label)
    : evaluator_(std::move(evaluator)), class_(fn_class), label_(std::move(label)) {
  if (!evaluator_) throw std::invalid_argument("MonotoneFn: empty evaluator");
}

double MonotoneFn::operator()(double s) const {
  if (!(s >= 0.0)) {
    throw std::domain_error(fmt::format("comparison function '{}' evaluated at s = {}", label_, s));
  }
  return evaluator_(s);
}

MonotoneFn MonotoneFn::identity() {
  return MonotoneFn([](double s) { return s; }, FnClass::Kinf, "identity");
}

MonotoneFn MonotoneFn::linear(double c) {
  if (!(c > 0.0)) throw std::invalid_argument("linear(c) requires c > 0");
  return MonotoneFn([c](double s) { return c * s; }, FnClass::Kinf, fmt::format("linear({})", c));
}

MonotoneFn MonotoneFn::power(double p, double c) {
  if (!(p > 0.0) || !(c > 0.0)) throw std::invalid_argument("power(p, c) requires p > 0, c > 0");
  auto label = c == 1.0 ? fmt::format("power({})", p) : fmt::format("power({}, {})", p, c);
  return MonotoneFn([p, c](double s) { return c * std::pow(s, p); }, FnClass::Kinf,
                    std::move(label));
}

MonotoneFn MonotoneFn::poly_odd(double a, double b) {
  if (a < 0.0 || b < 0.0 || !(a + b > 0.0)) {
    throw std::invalid_argument("poly_odd(a, b) requires a, b >= 0 and a + b > 0");
  }
  return MonotoneFn([a, b](double s) { return a * s + b * s * s * s; }, FnClass::Kinf,
                    fmt::format("poly_odd({}, {})", a, b));
}

MonotoneFn MonotoneFn::linear_quadratic(double a, double b) {
  if (a < 0.0 || b < 0.0 || !(a + b > 0.0)) {
    throw std::invalid_argument("linear_quadratic(a, b) requires a, b >= 0 and a + b > 0");
  }
  return MonotoneFn([a, b](double s) { return a * s + b * s * s; }, FnClass::Kinf,
                    fmt::format("{:.9g}*s + {:.9g}*s^2", a, b));
}

MonotoneFn MonotoneFn::scaled(const MonotoneFn& f, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("scaled(f, c) requires c > 0");
  return MonotoneFn([f, c](double s) { return c * f(s); }, f.fn_class(),
                    fmt::format("{}*({})", c, f.label()));
}

double eval(const MonotoneFn& f, double s) { return f(s); }

double inverse(const MonotoneFn& f, double y, double tol, double horizon) {
  const double f0 = f(0.0);
  if (y < f0 - tol) {
    throw std::range_error(
        fmt::format("inverse of '{}': y = {} is below f(0) = {}", f.label(), y, f0));
  }
  if (y <= f0) return 0.0;

  double lo = 0.0;
  double hi = 1.0;
  while (f(hi) < y) {
    lo = hi;
    hi *= 2.0;
    if (hi > horizon) {
      throw std::range_error(fmt::format(
          "inverse of '{}': bracket passed horizon {} without enclosing y = {}", f.label(),
          horizon, y));
    }
  }
  // Bisect to floating-point resolution (or well below tol): the result must
  // be accurate in s as well as in f(s), since f may be flat near zero.
  for (int it = 0; it < 2000; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) < y) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-3 * tol * std::max(1.0, hi)) break;
  }
  return std::abs(f(lo) - y) <= std::abs(f(hi) - y) ? lo : hi;
}

MonotoneFn inverse_fn(const MonotoneFn& f, double tol) {
  return MonotoneFn([f, tol](double y) { return inverse(f, y, tol); }, f.fn_class(),
                    fmt::format("inv({})", f.label()));
}

namespace {

FnClass weakest(FnClass a, FnClass b) {
  return static_cast<int>(a) < static_cast<int>(b) ? a : b;
}

}  // namespace

MonotoneFn compose(std::span<const MonotoneFn> fs) {
  if (fs.empty()) throw std::invalid_argument("compose: empty factor list");
  std::vector<MonotoneFn> factors(fs.begin(), fs.end());
  FnClass cls = FnClass::Kinf;
  std::string label;
  for (const auto& f : factors) {
    cls = weakest(cls, f.fn_class());
    if (!label.empty()) label += " o ";
    label += f.label();
  }
  if (factors.size() == 1) return factors.front();
  return MonotoneFn(
      [factors = std::move(factors)](double s) {
        double v = s;
        for (auto it = factors.rbegin(); it != factors.rend(); ++it) v = (*it)(std::max(v, 0.0));
        return v;
      },
      cls, std::move(label));
}

MonotoneFn compose(std::initializer_list<MonotoneFn> fs) {
  return compose(std::span<const MonotoneFn>(fs.begin(), fs.size()));
}

namespace {

void check_flow_args(double theta, double s, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("comparison_flow: step must be positive");
  if (!(theta > 0.0 && theta < 1.0)) {
    throw std::invalid_argument("comparison_flow: theta must lie in (0, 1)");
  }
  if (!(s >= 0.0)) throw std::domain_error("comparison_flow: s must be nonnegative");
}

// One RK4 step of y' = rate(y); stage values are clamped to [0, cap].
template <typename Rate>
double rk4_step(const Rate& rate, double y, double h) {
  auto clamp = [](double v) { return std::clamp(v, 0.0, kFlowCap); };
  const double k1 = rate(y);
  const double k2 = rate(clamp(y + 0.5 * h * k1));
  const double k3 = rate(clamp(y + 0.5 * h * k2));
  const double k4 = rate(clamp(y + h * k3));
  return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

FlowResult comparison_flow_detailed(const MonotoneFn& alpha, double theta, double s, double t,
                                    double step) {
  check_flow_args(theta, s, step);
  if (!(t >= 0.0)) throw std::domain_error("comparison_flow: t must be nonnegative");
  const auto rate = [&](double y) { return (1.0 - theta) * alpha(y); };
  double y = s;
  double now = 0.0;
  while (now < t) {
    const double h = std::min(step, t - now);
    y = rk4_step(rate, y, h);
    now = (t - now <= step) ? t : now + step;
    if (!(y < kFlowCap)) return {kFlowCap, true};
  }
  return {y, false};
}

double comparison_flow(const MonotoneFn& alpha, double theta, double s, double t, double step) {
  return comparison_flow_detailed(alpha, theta, s, t, step).value;
}

std::vector<double> comparison_flow_series(const MonotoneFn& alpha, double theta, double s,
                                           std::span<const double> times, double step) {
  check_flow_args(theta, s, step);
  const auto rate = [&](double y) { return (1.0 - theta) * alpha(y); };
  std::vector<double> out;
  out.reserve(times.size());
  double y = s;
  double now = 0.0;
  for (double target : times) {
    if (target < now) throw std::invalid_argument("comparison_flow_series: times must be sorted");
    while (now < target && y < kFlowCap) {
      const double h = std::min(step, target - now);
      y = std::min(rk4_step(rate, y, h), kFlowCap);
      now = (target - now <= step) ? target : now + step;
    }
    now = std::max(now, target);
    out.push_back(y);
  }
  return out;
}

double decay_flow(const MonotoneFn& rate, double s, double t, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("decay_flow: step must be positive");
  if (!(s >= 0.0) || !(t >= 0.0)) throw std::domain_error("decay_flow: s, t must be nonnegative");
  const auto neg = [&](double y) { return -rate(std::max(y, 0.0)); };
  double y = s;
  double now = 0.0;
  while (now < t && y > 0.0) {
    const double h = std::min(step, t - now);
    y = std::max(rk4_step(neg, y, h), 0.0);
    now = (t - now <= step) ? t : now + step;
  }
  return y;
}

ClassCheck check_class(const MonotoneFn& f, FnClass required, double horizon) {
  std::vector<double> grid;
  grid.push_back(0.0);
  for (int i = 1; i <= 200; ++i) grid.push_back(10.0 * i / 200.0);
  const double lg0 = std::log10(1e-6);
  const double lg1 = std::log10(horizon);
  for (int i = 0; i <= 300; ++i) grid.push_back(std::pow(10.0, lg0 + (lg1 - lg0) * i / 300.0));
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::vector<double> vals;
  vals.reserve(grid.size());
  for (double s : grid) {
    const double v = f(s);
    if (!std::isfinite(v)) return {false, fmt::format("non-finite value at s = {}", s)};
    if (v < 0.0) return {false, fmt::format("negative value {} at s = {}", v, s)};
    vals.push_back(v);
  }
  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (std::size_t i = 1; i < vals.size(); ++i) {
    if (vals[i] < vals[i - 1] - 4.0 * eps * std::abs(vals[i - 1])) {
      return {false, fmt::format("decreasing between s = {} and s = {}", grid[i - 1], grid[i])};
    }
  }
  if (!(vals.back() > vals.front())) return {false, "not strictly increasing (constant)"};
  if (required == FnClass::P) return {};

  if (std::abs(vals.front()) > 1e-12) {
    return {false, fmt::format("f(0) = {} is not zero", vals.front())};
  }
  for (std::size_t i = 1; i < vals.size(); ++i) {
    if (!(vals[i] > 0.0)) return {false, fmt::format("f({}) = 0 (not positive definite)", grid[i])};
  }
  if (required == FnClass::K) return {};

  const double at_one = f(1.0);
  if (!(vals.back() >= 100.0 * at_one)) {
    return {false, fmt::format("f({}) = {} does not grow unboundedly (f(1) = {})", horizon,
                               vals.back(), at_one)};
  }
  return {};
}

void require_class(const MonotoneFn& f, FnClass required, const std::string& what) {
  const auto check = check_class(f, required);
  if (!check.ok) {
    throw std::invalid_argument(fmt::format("{} ('{}') is not of class {}: {}", what, f.label(),
                                            to_string(required), check.reason));
  }
}

}  // namespace issf
