#include "issf/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "issf/errors.hpp"
#include "issf/random.hpp"

namespace issf {

ControlAffineSystem::ControlAffineSystem(int dim_x, int dim_u, Drift f, InputMatrix g,
                                         std::string description)
    : dim_x_(dim_x),
      dim_u_(dim_u),
      f_(std::move(f)),
      g_(std::move(g)),
      description_(std::move(description)) {
  if (dim_x < 1 || dim_u < 0) throw std::invalid_argument("ControlAffineSystem: bad dimensions");
  if (!f_ || !g_) throw std::invalid_argument("ControlAffineSystem: empty vector field");
}

ControlAffineSystem ControlAffineSystem::single_integrator(int n) {
  return ControlAffineSystem(
      n, n, [n](const Vec&) { return Vec::Zero(n); },
      [n](const Vec&) { return Mat::Identity(n, n); }, fmt::format("single integrator (n={})", n));
}

Vec ControlAffineSystem::drift(const Vec& x) const { return f_(x); }

Mat ControlAffineSystem::input_matrix(const Vec& x) const { return g_(x); }

Vec ControlAffineSystem::velocity(const Vec& x, const Vec& u) const {
  Vec v = f_(x);
  if (dim_u_ > 0 && u.size() > 0) v += g_(x) * u;
  return v;
}

Mat ControlAffineSystem::drift_jacobian(const Vec& x, double h) const {
  Mat J(dim_x_, dim_x_);
  Vec probe = x;
  for (int j = 0; j < dim_x_; ++j) {
    probe(j) = x(j) + h;
    const Vec up = f_(probe);
    probe(j) = x(j) - h;
    const Vec down = f_(probe);
    probe(j) = x(j);
    J.col(j) = (up - down) / (2.0 * h);
  }
  return J;
}

ControlAffineSystem closed_loop(const ControlAffineSystem& sys, const FeedbackLaw& law) {
  auto f = [sys, law](const Vec& x) -> Vec { return sys.velocity(x, law.k(x)); };
  auto g = [sys](const Vec& x) -> Mat { return sys.input_matrix(x); };
  return ControlAffineSystem(sys.dim_x(), sys.dim_u(), std::move(f), std::move(g),
                             fmt::format("{} with {}", sys.description(), law.description));
}

DisturbanceSignal DisturbanceSignal::zero(int dim_u) {
  DisturbanceSignal d;
  d.kind_ = Kind::zero;
  d.dim_ = dim_u;
  return d;
}

DisturbanceSignal DisturbanceSignal::constant(Vec value) {
  DisturbanceSignal d;
  d.kind_ = Kind::constant;
  d.dim_ = static_cast<int>(value.size());
  d.bound_ = value.norm();
  d.a_ = std::move(value);
  return d;
}

DisturbanceSignal DisturbanceSignal::sinusoid(Vec amp, Vec freq, Vec phase) {
  if (amp.size() != freq.size() || amp.size() != phase.size()) {
    throw std::invalid_argument("sinusoid: amplitude, frequency and phase differ in length");
  }
  DisturbanceSignal d;
  d.kind_ = Kind::sinusoid;
  d.dim_ = static_cast<int>(amp.size());
  d.bound_ = amp.norm();
  d.a_ = std::move(amp);
  d.b_ = std::move(freq);
  d.c_ = std::move(phase);
  return d;
}

DisturbanceSignal DisturbanceSignal::seeded_noise(int dim_u, double bound, std::uint64_t seed,
                                                  double hold_dt) {
  if (dim_u < 1) throw std::invalid_argument("seeded_noise: dim_u must be positive");
  if (!(bound >= 0.0)) throw std::invalid_argument("seeded_noise: bound must be nonnegative");
  if (!(hold_dt > 0.0)) throw std::invalid_argument("seeded_noise: hold_dt must be positive");
  DisturbanceSignal d;
  d.kind_ = Kind::seeded_noise;
  d.dim_ = dim_u;
  d.bound_ = bound;
  d.seed_ = seed;
  d.hold_ = hold_dt;
  return d;
}

Vec DisturbanceSignal::sample(double t) const {
  switch (kind_) {
    case Kind::zero:
      return Vec::Zero(dim_);
    case Kind::constant:
      return a_;
    case Kind::sinusoid: {
      Vec out(dim_);
      for (int i = 0; i < dim_; ++i) out(i) = a_(i) * std::sin(b_(i) * t + c_(i));
      return out;
    }
    case Kind::seeded_noise: {
      const auto index = static_cast<std::uint64_t>(std::max(0.0, std::floor(t / hold_ + 1e-9)));
      SplitMix64 rng(mix_seed(seed_, index));
      Vec dir(dim_);
      double n = 0.0;
      while (n == 0.0) {
        for (int i = 0; i < dim_; ++i) dir(i) = rng.normal();
        n = dir.norm();
      }
      const double radius = bound_ * std::pow(rng.uniform(), 1.0 / dim_);
      return (radius / n) * dir;
    }
  }
  return Vec::Zero(dim_);
}

Vec sample_disturbance(const DisturbanceSignal& u, double t) {
  if (!(t >= 0.0)) throw std::domain_error("sample_disturbance: t must be nonnegative");
  return u.sample(t);
}

const char* to_string(EventKind e) {
  switch (e) {
    case EventKind::enter_X:
      return "enter_X";
    case EventKind::exit_X:
      return "exit_X";
    case EventKind::enter_D:
      return "enter_D";
  }
  return "?";
}

double Trajectory::min_dist_to_D() const {
  double m = std::numeric_limits<double>::infinity();
  for (double d : dist_to_D) m = std::min(m, d);
  return m;
}

namespace {

struct Stepper {
  const ControlAffineSystem& sys;
  const DisturbanceSignal& u;
  const std::optional<FeedbackLaw>& law;

  Vec rhs(const Vec& x, const Vec& w) const {
    if (law) return sys.velocity(x, law->k(x) + w);
    return sys.velocity(x, w);
  }

  Vec input_at(double t) const { return u.sample(t); }

  // One RK4 step of size h from (t, x). Piecewise-constant inputs are taken
  // at the step midpoint, so a hold switch on a step boundary never splits a step.
  Vec step(double t, const Vec& x, double h) const {
    if (u.piecewise_constant()) {
      const Vec w = input_at(t + 0.5 * h);
      const Vec k1 = rhs(x, w);
      const Vec k2 = rhs(x + 0.5 * h * k1, w);
      const Vec k3 = rhs(x + 0.5 * h * k2, w);
      const Vec k4 = rhs(x + h * k3, w);
      return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    const Vec w0 = input_at(t);
    const Vec wm = input_at(t + 0.5 * h);
    const Vec w1 = input_at(t + h);
    const Vec k1 = rhs(x, w0);
    const Vec k2 = rhs(x + 0.5 * h * k1, wm);
    const Vec k3 = rhs(x + 0.5 * h * k2, wm);
    const Vec k4 = rhs(x + h * k3, w1);
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
};

// First time in (t, t+h] where membership of r differs from `before`.
double locate_crossing(const Stepper& s, double t, const Vec& x, double h, const Region& r,
                       bool before, double tol) {
  double lo = 0.0;
  double hi = h;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (contains(s.step(t, x, mid), r) == before) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return t + hi;
}

}  // namespace

Trajectory integrate(const ControlAffineSystem& sys, const Vec& x0, const DisturbanceSignal& u,
                     const std::optional<FeedbackLaw>& law, double t_end, double dt,
                     const SafetyGeometry& geom) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate: dt must be positive");
  if (!(t_end > 0.0)) throw std::invalid_argument("integrate: t_end must be positive");
  if (x0.size() != sys.dim_x()) throw std::invalid_argument("integrate: x0 has wrong dimension");
  if (u.dim() != sys.dim_u()) {
    throw std::invalid_argument("integrate: disturbance dimension differs from the input dimension");
  }

  const Stepper stepper{sys, u, law};
  const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
  Trajectory tr;
  tr.times.reserve(steps + 1);
  tr.states.reserve(steps + 1);
  tr.inputs.reserve(steps + 1);

  auto record = [&](double t, const Vec& x) {
    tr.times.push_back(t);
    tr.states.push_back(x);
    tr.inputs.push_back(u.sample(t));
    tr.dist_to_D.push_back(distance_to_set(x, geom.unsafe));
    tr.norm_x.push_back(x.norm());
    tr.in_X.push_back(contains(x, geom.locality));
    if (law && law->branch_mismatch) {
      tr.max_branch_mismatch = std::max(tr.max_branch_mismatch, law->branch_mismatch(x));
    }
  };

  Vec x = x0;
  record(0.0, x);
  bool in_x = contains(x, geom.locality);
  bool in_d = contains(x, geom.unsafe);
  const double event_tol = dt / 100.0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) * dt;
    const double t_next = (i + 1 == steps) ? t_end : static_cast<double>(i + 1) * dt;
    const double h = t_next - t;
    Vec next = stepper.step(t, x, h);
    const double n = next.norm();
    if (!std::isfinite(n) || n > kEscapeNorm) throw FiniteEscapeError(t_next, n);

    const bool next_in_x = contains(next, geom.locality);
    const bool next_in_d = contains(next, geom.unsafe);
    if (next_in_x != in_x) {
      const double te = locate_crossing(stepper, t, x, h, geom.locality, in_x, event_tol);
      tr.events.push_back({te, next_in_x ? EventKind::enter_X : EventKind::exit_X});
    }
    if (next_in_d && !in_d) {
      const double te = locate_crossing(stepper, t, x, h, geom.unsafe, in_d, event_tol);
      tr.events.push_back({te, EventKind::enter_D});
    }
    std::stable_sort(tr.events.end() - ((next_in_x != in_x) + (next_in_d && !in_d)),
                     tr.events.end(),
                     [](const TrajectoryEvent& a, const TrajectoryEvent& b) {
                       return a.time < b.time;
                     });
    in_x = next_in_x;
    in_d = next_in_d;
    x = std::move(next);
    record(t_next, x);
  }
  return tr;
}

}  // namespace issf
