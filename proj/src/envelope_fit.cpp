#include "issf/envelope_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace issf {

EnvelopeFamily parse_envelope_family(const std::string& name) {
  if (name == "linear") return EnvelopeFamily::linear;
  if (name == "square") return EnvelopeFamily::square;
  if (name == "quadratic") return EnvelopeFamily::quadratic;
  throw std::invalid_argument(fmt::format("unknown envelope family '{}'", name));
}

const char* to_string(EnvelopeFamily f) {
  switch (f) {
    case EnvelopeFamily::linear:
      return "linear";
    case EnvelopeFamily::square:
      return "square";
    case EnvelopeFamily::quadratic:
      return "quadratic";
  }
  return "?";
}

namespace {

// Nonnegative least-squares coefficients (a, b) of y ≈ a·s + b·s².
std::pair<double, double> least_squares(const std::vector<EnvelopeSample>& samples,
                                        EnvelopeFamily family) {
  double s2 = 0, s3 = 0, s4 = 0, ys = 0, ys2 = 0;
  for (const auto& p : samples) {
    const double s = p.s;
    s2 += s * s;
    s3 += s * s * s;
    s4 += s * s * s * s;
    ys += p.y * s;
    ys2 += p.y * s * s;
  }
  auto only_linear = [&] { return std::pair{s2 > 0 ? std::max(ys / s2, 0.0) : 0.0, 0.0}; };
  auto only_square = [&] { return std::pair{0.0, s4 > 0 ? std::max(ys2 / s4, 0.0) : 0.0}; };
  switch (family) {
    case EnvelopeFamily::linear:
      return only_linear();
    case EnvelopeFamily::square:
      return only_square();
    case EnvelopeFamily::quadratic: {
      const double det = s2 * s4 - s3 * s3;
      if (std::abs(det) > 1e-300) {
        const double a = (ys * s4 - ys2 * s3) / det;
        const double b = (s2 * ys2 - s3 * ys) / det;
        if (a >= 0.0 && b >= 0.0) return {a, b};
      }
      auto residual = [&](std::pair<double, double> c) {
        double r = 0;
        for (const auto& p : samples) {
          const double e = c.first * p.s + c.second * p.s * p.s - p.y;
          r += e * e;
        }
        return r;
      };
      const auto l = only_linear();
      const auto q = only_square();
      return residual(l) <= residual(q) ? l : q;
    }
  }
  return {0.0, 0.0};
}

}  // namespace

EnvelopeFit fit_envelope(const std::vector<EnvelopeSample>& samples, EnvelopeFamily family,
                         EnvelopeSide side, double safety, const std::string& label) {
  if (samples.empty()) throw std::invalid_argument("fit_envelope: no samples");
  auto [a, b] = least_squares(samples, family);
  if (!(a + b > 0.0)) {
    // Flat or negative data: fall back to a unit shape and let scaling decide.
    a = family == EnvelopeFamily::square ? 0.0 : 1.0;
    b = family == EnvelopeFamily::linear ? 0.0 : (family == EnvelopeFamily::square ? 1.0 : 0.0);
  }
  const auto shape = [&](double s) { return a * s + b * s * s; };

  EnvelopeFit out{MonotoneFn::linear_quadratic(a, b), true, ""};
  double ratio = side == EnvelopeSide::lower ? std::numeric_limits<double>::infinity() : 0.0;
  for (const auto& p : samples) {
    if (p.s <= 0.0) {
      const bool bad = side == EnvelopeSide::lower ? p.y < 0.0 : p.y > 0.0;
      if (bad) {
        out.feasible = false;
        out.note = fmt::format("y = {:.6g} at s = 0 cannot be bounded by a function vanishing at 0",
                               p.y);
      }
      continue;
    }
    const double r = p.y / shape(p.s);
    ratio = side == EnvelopeSide::lower ? std::min(ratio, r) : std::max(ratio, r);
    if (side == EnvelopeSide::lower && !(p.y > 0.0) && out.feasible) {
      out.feasible = false;
      out.note = fmt::format("y = {:.6g} <= 0 at s = {:.6g}; no positive lower envelope", p.y, p.s);
    }
  }
  if (!out.feasible) {
    if (!label.empty()) out.note = label + ": " + out.note;
    return out;
  }
  if (!std::isfinite(ratio) || !(ratio > 0.0)) ratio = 1.0;
  const double scale = ratio * (side == EnvelopeSide::lower ? 1.0 - safety : 1.0 + safety);
  out.fn = MonotoneFn::linear_quadratic(a * scale, b * scale);
  out.note = fmt::format("{}{} {} envelope {}", label.empty() ? "" : label + ": ",
                         to_string(family), side == EnvelopeSide::lower ? "lower" : "upper",
                         out.fn.label());
  return out;
}

namespace {

template <typename Fn>
void for_each_grid_point(const GridSpec& grid, Fn&& fn) {
  const std::size_t n = grid.point_count();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec x = grid.point(i);
    if (grid.exclusion && contains(x, *grid.exclusion)) continue;
    if (grid.inclusion && !contains(x, *grid.inclusion)) continue;
    fn(x);
  }
}

// −max over the input samples of [∇F·(f + g·v) − supply(‖v‖)].
double dissipation_slack(const ScalarField& F, const ControlAffineSystem& sys, const Vec& x,
                         const std::vector<Vec>& inputs, const MonotoneFn& supply) {
  const Vec grad = F.grad(x);
  const double drift = grad.dot(sys.drift(x));
  double worst = drift;
  if (sys.dim_u() > 0) {
    const Vec coef = sys.input_matrix(x).transpose() * grad;
    for (const auto& v : inputs) worst = std::max(worst, drift + coef.dot(v) - supply(v.norm()));
  }
  return -worst;
}

void absorb(const EnvelopeFit& fit, bool& feasible, std::vector<std::string>& notes) {
  feasible = feasible && fit.feasible;
  notes.push_back(fit.note);
}

}  // namespace

IssfBarrierFit fit_issf_barrier(const ScalarField& B, const ControlAffineSystem& sys,
                                const Region& unsafe, const Region& locality,
                                const GridSpec& grid, EnvelopeFamily family,
                                double supply_gain) {
  std::vector<EnvelopeSample> level;
  std::vector<EnvelopeSample> slack;
  const MonotoneFn a4 = MonotoneFn::power(2.0, supply_gain);
  for_each_grid_point(grid, [&](const Vec& x) {
    const double d = distance_to_set(x, unsafe);
    if (d <= kBoundaryExclusion) return;
    level.push_back({d, -B(x)});
    if (contains(x, locality)) {
      slack.push_back({d, dissipation_slack(B, sys, x, grid.input_samples, a4)});
    }
  });
  if (level.empty() || slack.empty()) {
    throw std::invalid_argument("fit_issf_barrier: no grid points outside D (or in X\\D)");
  }
  IssfBarrierFit out;
  const auto f1 = fit_envelope(level, family, EnvelopeSide::upper, 1e-6, "alpha1");
  const auto f2 = fit_envelope(level, family, EnvelopeSide::lower, 1e-6, "alpha2");
  const auto f3 = fit_envelope(slack, family, EnvelopeSide::lower, 1e-6, "alpha3");
  absorb(f1, out.feasible, out.notes);
  absorb(f2, out.feasible, out.notes);
  absorb(f3, out.feasible, out.notes);
  out.notes.push_back(fmt::format("alpha4: fixed supply {}", a4.label()));
  out.alphas = {f1.fn, f2.fn, f3.fn, a4};
  return out;
}

MergedFit fit_merged_envelopes(const ScalarField& W, const ControlAffineSystem& sys,
                               const Region& unsafe, const Region& locality,
                               const GridSpec& grid, EnvelopeFamily family,
                               double supply_gain) {
  MergedFit out;
  out.boundary_min = std::numeric_limits<double>::infinity();
  out.boundary_max = -out.boundary_min;
  for (const auto& w : sample_boundary(unsafe, 4096)) {
    const double v = W(w);
    out.boundary_min = std::min(out.boundary_min, v);
    out.boundary_max = std::max(out.boundary_max, v);
  }
  out.c = 0.5 * (out.boundary_min + out.boundary_max);
  out.notes.push_back(fmt::format("c = {:.9g} (W over the boundary of D ranges over [{:.6g}, {:.6g}])",
                                  out.c, out.boundary_min, out.boundary_max));

  const MonotoneFn a7 = MonotoneFn::power(2.0, supply_gain);
  std::vector<EnvelopeSample> level, band, slack;
  std::vector<Vec> band_points;
  std::vector<double> band_slack;
  for_each_grid_point(grid, [&](const Vec& x) {
    const double w = W(x);
    level.push_back({x.norm(), w});
    const double y = dissipation_slack(W, sys, x, grid.input_samples, a7);
    slack.push_back({x.norm(), y});
    const double d = distance_to_set(x, unsafe);
    if (contains(x, locality) && d > kBoundaryExclusion) {
      band.push_back({d, out.c - w});
      band_points.push_back(x);
      band_slack.push_back(y);
    }
  });
  if (level.empty() || band.empty()) {
    throw std::invalid_argument("fit_merged_envelopes: grid misses X\\D");
  }
  const auto f1 = fit_envelope(level, family, EnvelopeSide::lower, 1e-6, "alpha1");
  const auto f2 = fit_envelope(level, family, EnvelopeSide::upper, 1e-6, "alpha2");
  const auto f3 = fit_envelope(band, family, EnvelopeSide::upper, 1e-6, "alpha3");
  const auto f4 = fit_envelope(band, family, EnvelopeSide::lower, 1e-6, "alpha4");
  const auto f5 = fit_envelope(slack, family, EnvelopeSide::lower, 1e-6, "alpha5");
  const MonotoneFn a5 = MonotoneFn::scaled(f5.fn, 0.5);
  std::vector<EnvelopeSample> rest;
  for (std::size_t i = 0; i < band_points.size(); ++i) {
    rest.push_back({band[i].s, band_slack[i] - a5(band_points[i].norm())});
  }
  const auto f6 = fit_envelope(rest, family, EnvelopeSide::lower, 1e-6, "alpha6");
  for (const auto* f : {&f1, &f2, &f3, &f4, &f5, &f6}) absorb(*f, out.feasible, out.notes);
  out.notes.push_back(fmt::format("alpha7: fixed supply {}", a7.label()));
  out.envelopes.alphas = {f1.fn, f2.fn, f3.fn, f4.fn, a5, f6.fn, a7};
  return out;
}

}  // namespace issf
