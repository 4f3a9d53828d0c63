#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace issf {

/// Comparison-function classes: P (continuous, strictly increasing, nonnegative),
/// K (P with f(0) = 0) and K-infinity (K and unbounded).
enum class FnClass { P, K, Kinf };

const char* to_string(FnClass c);

/// Default absolute tolerance for numerical inversion.
inline constexpr double kInverseTolerance = 1e-10;
/// Bracket growth stops once the upper end passes this value.
inline constexpr double kInverseHorizon = 1e15;
/// Comparison flows saturate here instead of following a finite escape.
inline constexpr double kFlowCap = 1e12;

/// A scalar comparison function on the half-line [0, inf).
///
/// Values are immutable; composites hold copies of their factors, so a
/// MonotoneFn can be shared across threads freely.
class MonotoneFn {
 public:
  using Evaluator = std::function<double(double)>;

  MonotoneFn(Evaluator evaluator, FnClass fn_class, std::string label);

  /// Evaluates at s. Throws std::domain_error for s < 0.
  double operator()(double s) const;

  FnClass fn_class() const noexcept { return class_; }
  const std::string& label() const noexcept { return label_; }

  // Catalog entries (these are the only forms accepted in experiment files).
  static MonotoneFn identity();
  static MonotoneFn linear(double c);
  /// c * s^p.
  static MonotoneFn power(double p, double c = 1.0);
  /// a*s + b*s^3.
  static MonotoneFn poly_odd(double a, double b);

  /// a*s + b*s^2, the family produced by envelope fitting.
  static MonotoneFn linear_quadratic(double a, double b);
  /// s -> c * f(s).
  static MonotoneFn scaled(const MonotoneFn& f, double c);

 private:
  Evaluator evaluator_;
  FnClass class_;
  std::string label_;
};

/// Functions of two arguments, increasing in both (class KK).
struct KKFn {
  std::function<double(double, double)> evaluator;
  std::string label;
  double operator()(double s, double t) const { return evaluator(s, t); }
};

/// Class KL: class K in s, decreasing to zero in t.
struct KLFn {
  std::function<double(double, double)> evaluator;
  std::string label;
  double operator()(double s, double t) const { return evaluator(s, t); }
};

double eval(const MonotoneFn& f, double s);

/// Returns s >= 0 with |f(s) - y| <= tol, by bisection after growing the
/// bracket [0, 1] geometrically. Throws std::range_error when y is below f(0)
/// or the bracket passes `horizon` without enclosing y.
double inverse(const MonotoneFn& f, double y, double tol = kInverseTolerance,
               double horizon = kInverseHorizon);

/// The inverse of f as a MonotoneFn (evaluated by `inverse`).
MonotoneFn inverse_fn(const MonotoneFn& f, double tol = kInverseTolerance);

/// fs[0] o fs[1] o ... o fs.back(); the last factor is applied first.
/// Class is the weakest class among the factors.
MonotoneFn compose(std::span<const MonotoneFn> fs);
MonotoneFn compose(std::initializer_list<MonotoneFn> fs);

struct FlowResult {
  double value = 0.0;
  bool saturated = false;
};

/// Solution at time t of  y' = (1 - theta) * alpha(y),  y(0) = s,
/// by fixed-step classical RK4 (last step shortened to land on t).
/// Values are capped at kFlowCap and flagged as saturated.
FlowResult comparison_flow_detailed(const MonotoneFn& alpha, double theta, double s,
                                    double t, double step = 1e-3);

double comparison_flow(const MonotoneFn& alpha, double theta, double s, double t,
                       double step = 1e-3);

/// Same flow sampled at every entry of `times` (sorted ascending) with a single
/// integration pass.
std::vector<double> comparison_flow_series(const MonotoneFn& alpha, double theta, double s,
                                           std::span<const double> times,
                                           double step = 1e-3);

/// Solution of the decaying comparison flow  y' = -rate(y), y(0) = s, clamped
/// at zero. Used for the KL bound of an ISS estimate.
double decay_flow(const MonotoneFn& rate, double s, double t, double step = 1e-3);

struct ClassCheck {
  bool ok = true;
  std::string reason;
};

/// Sampled class membership test: nondecreasing on a grid over [0, horizon]
/// (ties allowed at machine precision), positive away from zero and zero at
/// zero for K, and growth by at least 100x between 1 and `horizon` for Kinf.
ClassCheck check_class(const MonotoneFn& f, FnClass required, double horizon = 1e6);

/// Throws std::invalid_argument naming `what` when check_class fails.
void require_class(const MonotoneFn& f, FnClass required, const std::string& what);

}  // namespace issf
