#pragma once

#include <optional>
#include <string>
#include <vector>

#include "issf/comparison_functions.hpp"
#include "issf/dynamics.hpp"
#include "issf/geometry.hpp"
#include "issf/scalar_field.hpp"

namespace issf {

/// Gains of the safety estimate
///   σ(|x(t)|_D) >= min{μ(|x0|_D, t), δ} − φ(‖u(t)‖)
/// built from barrier envelopes α1..α4:
///   μ(s,t) = ε·α1⁻¹(α̃(α2(s), t)),  φ = α2⁻¹∘α1∘α3⁻¹∘(α4/θ),  δ = ε·κ,
/// where α̃ solves y' = (1 − θ)·α3∘α1⁻¹(y), y(0) = s.
struct IssfGainBundle {
  MonotoneFn sigma;
  KKFn mu;
  MonotoneFn phi;
  double delta = 0.0;
  double theta = 0.5;
  double epsilon = 0.5;
  KKFn alpha_tilde;
  MonotoneFn flow_rate;            ///< α3∘α1⁻¹
  std::vector<MonotoneFn> alphas;  ///< α1..α4
  double kappa = 0.0;
  double flow_step = 1e-3;

  /// μ(s, t) at every entry of the sorted `times`, sharing one flow pass.
  std::vector<double> mu_series(double s, const std::vector<double>& times) const;
  /// μ(s, 0)/ε.
  double mu_tilde0(double s) const;
};

IssfGainBundle build_gains(const MonotoneFn& a1, const MonotoneFn& a2, const MonotoneFn& a3,
                           const MonotoneFn& a4, double theta, double epsilon,
                           const SafetyGeometry& geom, double flow_step = 1e-3);

struct ResidualSample {
  double t = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
  bool admissible = true;
};

enum class IssfVerdict { pass, fail, vacuous };
const char* to_string(IssfVerdict v);

struct IssfEvaluation {
  std::vector<ResidualSample> samples;
  bool admissible = true;
  std::optional<double> first_inadmissible_time;
  IssfVerdict verdict = IssfVerdict::pass;
  double min_residual = 0.0;
  double tolerance = 0.0;
  std::size_t ignored_violations = 0;
};

/// Residual σ(|x(t)|_D) − min{μ(|x0|_D, t), δ} + φ(‖u(t)‖) along the stored
/// trajectory. Violations (residual < −(1e-9 + dt⁴)) fail the verdict when they
/// persist for 3 or more consecutive samples or are not adjacent to a recorded
/// event; an inadmissible tuple (RHS <= 0 at some sample) is reported vacuous.
IssfEvaluation evaluate_issf_inequality(const IssfGainBundle& bundle, const Trajectory& traj);

struct AdmissibilityResult {
  bool admissible = true;
  std::optional<double> first_violation_time;
};

/// RHS = min{μ(|x0|_D, t), δ} − φ(‖u(t)‖) must be strictly positive at every
/// sample t = 0, sample_dt, ..., horizon.
AdmissibilityResult admissibility_check(const IssfGainBundle& bundle, const Vec& x0,
                                        const DisturbanceSignal& u, const SafetyGeometry& geom,
                                        double horizon, double sample_dt = 1e-3);

struct SafetyEnvelope {
  std::vector<double> u_bounds;
  std::vector<double> min_safe_initial_distance;
};

/// For each k: the infimum of s with μ(s, 0) > φ(k), by bisection. Throws
/// std::range_error when φ(k) lies beyond the reach of μ(·, 0).
SafetyEnvelope safety_envelope(const IssfGainBundle& bundle, const std::vector<double>& k_values);

/// Comparison bounds derived from an ISS-Lyapunov function:
///   β(s, t) = α1⁻¹(y(t)),  y' = −(1 − θ)·α3∘α2⁻¹(y),  y(0) = α2(s)
///   γ = α1⁻¹∘α2∘α3⁻¹∘(γ_supply/θ).
struct IssGains {
  KLFn beta;
  MonotoneFn gamma;
  double theta = 0.5;
  std::string construction;
};

IssGains build_iss_gains(const MonotoneFn& a1, const MonotoneFn& a2, const MonotoneFn& a3,
                         const MonotoneFn& gamma_supply, double theta = 0.5);

/// Quantities from the safety argument: ρ(x) = α4⁻¹(θ·α3(α1⁻¹(−B(x)))),
/// D1 = β(‖x0‖, 0) + γ(‖u‖∞), D2 = max norm over D and
/// η = min{0.5, (1 − ε)·μ(|x0|_D, 0)/ε / (D1 + D2)}.
struct AdmissibilityWitness {
  std::function<double(const Vec&)> rho_at;
  double d1 = 0.0;
  double d2 = 0.0;
  double mu_tilde0 = 0.0;
  double eta = 0.0;
};

AdmissibilityWitness admissibility_witness(const IssfGainBundle& bundle, const ScalarField& B,
                                           const IssGains& iss, const Vec& x0, double u_linf,
                                           const SafetyGeometry& geom);

double eta_from(double epsilon, double mu_tilde0, double d1, double d2);

}  // namespace issf
