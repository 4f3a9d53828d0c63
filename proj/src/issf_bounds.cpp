#include "issf/issf_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace issf {

std::vector<double> IssfGainBundle::mu_series(double s, const std::vector<double>& times) const {
  const double a1 = epsilon;
  auto flow = comparison_flow_series(flow_rate, theta, alphas[1](s), times, flow_step);
  for (double& y : flow) y = a1 * inverse(alphas[0], y);
  return flow;
}

double IssfGainBundle::mu_tilde0(double s) const { return inverse(alphas[0], alphas[1](s)); }

IssfGainBundle build_gains(const MonotoneFn& a1, const MonotoneFn& a2, const MonotoneFn& a3,
                           const MonotoneFn& a4, double theta, double epsilon,
                           const SafetyGeometry& geom, double flow_step) {
  if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("build_gains: theta must lie in (0, 1)");
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("build_gains: epsilon must lie in (0, 1)");
  }
  if (!(flow_step > 0.0)) throw std::invalid_argument("build_gains: flow step must be positive");
  require_class(a1, FnClass::Kinf, "alpha1");
  require_class(a2, FnClass::Kinf, "alpha2");
  require_class(a3, FnClass::Kinf, "alpha3");
  require_class(a4, FnClass::Kinf, "alpha4");

  const MonotoneFn rate = compose({a3, inverse_fn(a1)});
  const MonotoneFn a4_over_theta = MonotoneFn::scaled(a4, 1.0 / theta);
  const MonotoneFn phi = compose({inverse_fn(a2), a1, inverse_fn(a3), a4_over_theta});

  KKFn alpha_tilde{[rate, theta, flow_step](double s, double t) {
                     return comparison_flow(rate, theta, s, t, flow_step);
                   },
                   fmt::format("flow of (1-{})*({})", theta, rate.label())};
  KKFn mu{[a1, a2, alpha_tilde, epsilon](double s, double t) {
            return epsilon * inverse(a1, alpha_tilde(a2(s), t));
          },
          fmt::format("{}*inv(alpha1)(alpha_tilde(alpha2(s), t))", epsilon)};

  return IssfGainBundle{MonotoneFn::identity(),
                        std::move(mu),
                        phi,
                        epsilon * geom.kappa,
                        theta,
                        epsilon,
                        std::move(alpha_tilde),
                        rate,
                        {a1, a2, a3, a4},
                        geom.kappa,
                        flow_step};
}

const char* to_string(IssfVerdict v) {
  switch (v) {
    case IssfVerdict::pass:
      return "pass";
    case IssfVerdict::fail:
      return "fail";
    case IssfVerdict::vacuous:
      return "vacuous";
  }
  return "?";
}

IssfEvaluation evaluate_issf_inequality(const IssfGainBundle& bundle, const Trajectory& traj) {
  IssfEvaluation out;
  const std::size_t n = traj.size();
  if (n == 0) return out;
  const double dt = n > 1 ? traj.times[1] - traj.times[0] : 0.0;
  out.tolerance = 1e-9 + dt * dt * dt * dt;
  const double d0 = traj.dist_to_D.front();
  const auto mu = bundle.mu_series(d0, traj.times);
  out.samples.reserve(n);
  out.min_residual = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    ResidualSample s;
    s.t = traj.times[i];
    s.lhs = bundle.sigma(traj.dist_to_D[i]);
    s.rhs = std::min(mu[i], bundle.delta) - bundle.phi(traj.inputs[i].norm());
    s.residual = s.lhs - s.rhs;
    s.admissible = s.rhs > 0.0;
    if (!s.admissible && out.admissible) {
      out.admissible = false;
      out.first_inadmissible_time = s.t;
    }
    out.min_residual = std::min(out.min_residual, s.residual);
    out.samples.push_back(s);
  }
  if (!out.admissible) {
    out.verdict = IssfVerdict::vacuous;
    return out;
  }

  auto near_event = [&](double t0, double t1) {
    return std::any_of(traj.events.begin(), traj.events.end(), [&](const TrajectoryEvent& e) {
      return e.time >= t0 - dt && e.time <= t1 + dt;
    });
  };
  std::size_t i = 0;
  while (i < n) {
    if (out.samples[i].residual >= -out.tolerance) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && out.samples[j].residual < -out.tolerance) ++j;
    const std::size_t run = j - i;
    if (run >= 3 || !near_event(out.samples[i].t, out.samples[j - 1].t)) {
      out.verdict = IssfVerdict::fail;
    } else {
      out.ignored_violations += run;
    }
    i = j;
  }
  return out;
}

AdmissibilityResult admissibility_check(const IssfGainBundle& bundle, const Vec& x0,
                                        const DisturbanceSignal& u, const SafetyGeometry& geom,
                                        double horizon, double sample_dt) {
  if (!(sample_dt > 0.0)) throw std::invalid_argument("admissibility_check: sample_dt must be positive");
  if (!(horizon >= 0.0)) throw std::invalid_argument("admissibility_check: horizon must be nonnegative");
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / sample_dt - 1e-9));
  std::vector<double> times;
  times.reserve(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) {
    times.push_back(i == steps ? horizon : static_cast<double>(i) * sample_dt);
  }
  const double d0 = distance_to_set(x0, geom.unsafe);
  const auto mu = bundle.mu_series(d0, times);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double rhs = std::min(mu[i], bundle.delta) - bundle.phi(u.sample(times[i]).norm());
    if (!(rhs > 0.0)) return {false, times[i]};
  }
  return {};
}

SafetyEnvelope safety_envelope(const IssfGainBundle& bundle, const std::vector<double>& k_values) {
  SafetyEnvelope env;
  auto mu0 = [&](double s) { return bundle.mu(s, 0.0); };
  for (double k : k_values) {
    if (!(k >= 0.0)) throw std::domain_error("safety_envelope: k must be nonnegative");
    const double target = bundle.phi(k);
    double s_star = 0.0;
    if (target > mu0(0.0)) {
      double lo = 0.0;
      double hi = 1.0;
      while (!(mu0(hi) > target)) {
        lo = hi;
        hi *= 2.0;
        if (hi > kInverseHorizon) {
          throw std::range_error(fmt::format(
              "safety_envelope: phi({}) = {} is beyond the reach of mu(., 0)", k, target));
        }
      }
      for (int it = 0; it < 400 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) break;
        if (mu0(mid) > target) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      s_star = hi;
    }
    env.u_bounds.push_back(k);
    env.min_safe_initial_distance.push_back(s_star);
  }
  return env;
}

IssGains build_iss_gains(const MonotoneFn& a1, const MonotoneFn& a2, const MonotoneFn& a3,
                         const MonotoneFn& gamma_supply, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) {
    throw std::invalid_argument("build_iss_gains: theta must lie in (0, 1)");
  }
  const MonotoneFn decay = compose({MonotoneFn::scaled(a3, 1.0 - theta), inverse_fn(a2)});
  KLFn beta{[a1, a2, decay](double s, double t) {
              const double y0 = a2(s);
              const double y = t == 0.0 ? y0 : decay_flow(decay, y0, t);
              return inverse(a1, y);
            },
            "inv(alpha1)(y(t)), y' = -(1-theta) alpha3(inv(alpha2)(y)), y(0) = alpha2(s)"};
  const MonotoneFn gamma = compose(
      {inverse_fn(a1), a2, inverse_fn(a3), MonotoneFn::scaled(gamma_supply, 1.0 / theta)});
  return IssGains{std::move(beta), gamma, theta,
                  fmt::format("beta(s,0) = inv(alpha1)(alpha2(s)); gamma = {}", gamma.label())};
}

double eta_from(double epsilon, double mu_tilde0, double d1, double d2) {
  const double denom = d1 + d2;
  if (!(denom > 0.0)) return 0.5;
  return std::min(0.5, (1.0 - epsilon) * mu_tilde0 / denom);
}

AdmissibilityWitness admissibility_witness(const IssfGainBundle& bundle, const ScalarField& B,
                                           const IssGains& iss, const Vec& x0, double u_linf,
                                           const SafetyGeometry& geom) {
  AdmissibilityWitness w;
  const auto& a = bundle.alphas;
  const double theta = bundle.theta;
  w.rho_at = [B, a, theta](const Vec& x) {
    const double level = std::max(0.0, -B(x));
    return inverse(a[3], theta * a[2](inverse(a[0], level)));
  };
  w.d1 = iss.beta(x0.norm(), 0.0) + iss.gamma(u_linf);
  w.d2 = geom.d2;
  w.mu_tilde0 = bundle.mu_tilde0(distance_to_set(x0, geom.unsafe));
  w.eta = eta_from(bundle.epsilon, w.mu_tilde0, w.d1, w.d2);
  return w;
}

}  // namespace issf
