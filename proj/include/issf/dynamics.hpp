#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "issf/geometry.hpp"
#include "issf/types.hpp"

namespace issf {

/// ẋ = f(x) + g(x)·u.
class ControlAffineSystem {
 public:
  using Drift = std::function<Vec(const Vec&)>;
  using InputMatrix = std::function<Mat(const Vec&)>;

  ControlAffineSystem(int dim_x, int dim_u, Drift f, InputMatrix g, std::string description);

  /// ẋ = u (f = 0, g = I).
  static ControlAffineSystem single_integrator(int n);

  int dim_x() const noexcept { return dim_x_; }
  int dim_u() const noexcept { return dim_u_; }
  const std::string& description() const noexcept { return description_; }

  Vec drift(const Vec& x) const;
  Mat input_matrix(const Vec& x) const;
  Vec velocity(const Vec& x, const Vec& u) const;
  /// Central-difference Jacobian of f (step h).
  Mat drift_jacobian(const Vec& x, double h = 1e-6) const;

 private:
  int dim_x_;
  int dim_u_;
  Drift f_;
  InputMatrix g_;
  std::string description_;
};

struct FeedbackLaw {
  std::function<Vec(const Vec&)> k;
  std::string description;
  /// Optional diagnostic: size of the jump between the branches of a
  /// piecewise law at x (zero away from branch boundaries).
  std::function<double(const Vec&)> branch_mismatch;
};

/// The system with v = k(x) substituted into the drift; the input channel is
/// kept for disturbances.
ControlAffineSystem closed_loop(const ControlAffineSystem& sys, const FeedbackLaw& law);

class DisturbanceSignal {
 public:
  enum class Kind { zero, constant, sinusoid, seeded_noise };

  static DisturbanceSignal zero(int dim_u);
  static DisturbanceSignal constant(Vec value);
  /// amp_i · sin(freq_i · t + phase_i) per channel.
  static DisturbanceSignal sinusoid(Vec amp, Vec freq, Vec phase);
  /// Piecewise-constant samples held for hold_dt, drawn uniformly in the
  /// closed ball of radius `bound`.
  static DisturbanceSignal seeded_noise(int dim_u, double bound, std::uint64_t seed,
                                        double hold_dt);

  Kind kind() const noexcept { return kind_; }
  int dim() const noexcept { return dim_; }
  double linf_bound() const noexcept { return bound_; }
  bool piecewise_constant() const noexcept { return kind_ == Kind::seeded_noise; }
  double hold_dt() const noexcept { return hold_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const Vec& amplitude() const noexcept { return a_; }
  const Vec& frequency() const noexcept { return b_; }
  const Vec& phase() const noexcept { return c_; }

  Vec sample(double t) const;

 private:
  DisturbanceSignal() = default;

  Kind kind_ = Kind::zero;
  int dim_ = 0;
  double bound_ = 0.0;
  double hold_ = 0.0;
  std::uint64_t seed_ = 0;
  Vec a_, b_, c_;
};

Vec sample_disturbance(const DisturbanceSignal& u, double t);

enum class EventKind { enter_X, exit_X, enter_D };
const char* to_string(EventKind e);

struct TrajectoryEvent {
  double time = 0.0;
  EventKind kind = EventKind::enter_X;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> inputs;  ///< disturbance u(t) at each sample
  std::vector<double> dist_to_D;
  std::vector<double> norm_x;
  std::vector<bool> in_X;
  std::vector<TrajectoryEvent> events;
  double max_branch_mismatch = 0.0;

  std::size_t size() const { return times.size(); }
  double min_dist_to_D() const;
};

/// Bound on ‖x‖ beyond which integration stops with FiniteEscapeError.
inline constexpr double kEscapeNorm = 1e9;

/// Fixed-step RK4 of ẋ = f + g·(k(x) + u(t)) (or f + g·u without a law).
/// The last step lands exactly on t_end. Membership changes of X and D are
/// located by bisection on a single RK4 sub-step to within dt/100.
Trajectory integrate(const ControlAffineSystem& sys, const Vec& x0, const DisturbanceSignal& u,
                     const std::optional<FeedbackLaw>& law, double t_end, double dt,
                     const SafetyGeometry& geom);

}  // namespace issf
