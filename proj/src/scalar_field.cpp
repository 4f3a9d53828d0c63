#include "issf/scalar_field.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "issf/errors.hpp"
#include "issf/random.hpp"

namespace issf {

FiniteEscapeError::FiniteEscapeError(double time, double norm)
    : std::runtime_error(fmt::format("finite escape: |x| = {:.6g} at t = {:.6g}", norm, time)),
      time_(time),
      norm_(norm) {}

SpecError::SpecError(std::string path, const std::string& message)
    : std::runtime_error(path.empty() ? message : fmt::format("{}: {}", path, message)),
      path_(std::move(path)) {}

Vec ScalarField::grad(const Vec& x) const {
  if (gradient) return gradient(x);
  return finite_difference_gradient(value, x);
}

Vec finite_difference_gradient(const std::function<double(const Vec&)>& f, const Vec& x,
                               double h) {
  Vec g(x.size());
  Vec probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

GradientCheck check_gradient(const ScalarField& field, const Bounds& box, int samples,
                             std::uint64_t seed, double tol, double h) {
  return check_gradient(field, box, [](const Vec&) { return true; }, samples, seed, tol, h);
}

GradientCheck check_gradient(const ScalarField& field, const Bounds& box,
                             const std::function<bool(const Vec&)>& keep, int samples,
                             std::uint64_t seed, double tol, double h) {
  GradientCheck out;
  if (!field.has_analytic_gradient()) return out;
  SplitMix64 rng(seed);
  Vec x(static_cast<Eigen::Index>(box.size()));
  int attempts = 0;
  while (out.samples < samples) {
    if (++attempts > 1000 * samples) break;
    for (std::size_t i = 0; i < box.size(); ++i) x(i) = rng.uniform(box[i].lo, box[i].hi);
    if (!keep(x)) continue;
    ++out.samples;
    const Vec ga = field.gradient(x);
    const Vec gf = finite_difference_gradient(field.value, x, h);
    const double err = (ga - gf).norm() / std::max(1.0, ga.norm());
    if (err > out.max_error || out.worst_point.size() == 0) {
      out.max_error = std::max(err, out.max_error);
      if (err >= out.max_error) out.worst_point = x;
    }
  }
  out.ok = out.max_error <= tol;
  return out;
}

void require_gradient(const ScalarField& field, const Bounds& box, const std::string& what) {
  const auto check = check_gradient(field, box);
  if (!check.ok) {
    throw GradientMismatchError(fmt::format(
        "gradient of {} ('{}') disagrees with finite differences: error {:.3e} at ({})", what,
        field.description, check.max_error,
        fmt::join(check.worst_point.data(), check.worst_point.data() + check.worst_point.size(),
                  ", ")));
  }
}

}  // namespace issf
