#pragma once

#include <optional>
#include <string>
#include <vector>

#include "issf/comparison_functions.hpp"
#include "issf/dynamics.hpp"
#include "issf/geometry.hpp"
#include "issf/scalar_field.hpp"

namespace issf {

struct GridSpec {
  Bounds bounds;
  int resolution = 401;                 ///< points per dimension, >= 2
  std::vector<Vec> input_samples;       ///< covers U; empty means v = 0 only
  std::optional<Region> exclusion;      ///< grid points inside are skipped
  std::optional<Region> inclusion;      ///< if set, only points inside are checked

  std::size_t point_count() const;
  Vec point(std::size_t flat_index) const;
};

/// Zero, plus `n_dirs` equally spaced planar directions (pseudo-random
/// directions for dim_u != 2) at each of `n_norms` evenly spaced norms in
/// (0, radius]. Defaults give 65 samples covering the radius-3 ball.
std::vector<Vec> input_ball_samples(int dim_u, double radius, int n_norms = 4, int n_dirs = 16);

enum class Verdict { pass, fail };
const char* to_string(Verdict v);

/// One inequality family checked over the grid: margin >= 0 (or > 0 when
/// strict) at every applicable point and input sample.
struct PartReport {
  std::string id;
  std::string statement;
  Verdict verdict = Verdict::pass;
  double worst_margin = 0.0;
  Vec witness_point;
  std::optional<Vec> witness_input;
  std::size_t checked_count = 0;
};

struct CertificateReport {
  std::string condition_id;
  Verdict verdict = Verdict::pass;
  double worst_margin = 0.0;
  Vec witness_point;
  std::optional<Vec> witness_input;
  std::size_t checked_count = 0;
  std::vector<PartReport> parts;
  std::vector<std::string> notes;
  Bounds window;
  int resolution = 0;
  std::size_t input_sample_count = 0;

  std::string to_json() const;
  std::string summary() const;
  const PartReport* part(const std::string& id) const;
};

/// A grid-checkable inequality of control-affine form
///   margin(x, v) = base(x) − coef(x)·v + supply(‖v‖),
/// where coef is empty for state-only inequalities.
struct InequalityFamily {
  std::string id;
  std::string statement;
  std::function<bool(const Vec&)> applies;
  /// Writes base and coef at x; coef is left empty if v does not enter.
  std::function<void(const Vec& x, double& base, Vec& coef)> eval;
  std::optional<MonotoneFn> supply;
  bool strict = false;

  /// Standalone re-evaluation at a single (x, v).
  double margin(const Vec& x, const std::optional<Vec>& v) const;
  bool violated(const Vec& x, const std::optional<Vec>& v) const;
};

/// Runs the families over the grid (in parallel), reducing each family to its
/// minimum margin with ties broken by the lexicographically smallest witness.
CertificateReport run_families(const std::string& condition_id,
                               const std::vector<InequalityFamily>& families,
                               const GridSpec& grid);

/// Cross-checks the gradient over the grid window; throws GradientMismatchError.
void require_field_gradient(const ScalarField& field, const GridSpec& grid,
                            const std::string& what);

/// Theorem-1 style: α1(‖x‖) ≤ V ≤ α2(‖x‖) and ∇V·(f+gv) ≤ −α3(‖x‖) + γ(‖v‖).
CertificateReport check_iss_lyapunov(const ScalarField& V, const ControlAffineSystem& sys,
                                     const MonotoneFn& a1, const MonotoneFn& a2,
                                     const MonotoneFn& a3, const MonotoneFn& gamma,
                                     const GridSpec& grid);

/// B > 0 on D, B < 0 on X0, ∇B·f ≤ 0 where |B| ≤ level_band.
CertificateReport check_barrier_certificate(const ScalarField& B, const ControlAffineSystem& sys,
                                            const Region& unsafe, const Region& initial,
                                            const GridSpec& grid, double level_band = 1e-2);

/// ∇B·f ≤ −α(|x|_D) off D. Throws std::invalid_argument unless α is class K.
CertificateReport check_strict_barrier(const ScalarField& B, const ControlAffineSystem& sys,
                                       const Region& unsafe, const MonotoneFn& alpha,
                                       const GridSpec& grid);

/// ∇B·(f + g·v) ≤ 0 for every grid point and input sample.
CertificateReport check_robust_barrier(const ScalarField& B, const ControlAffineSystem& sys,
                                       const GridSpec& grid);

/// −α1(|x|_D) ≤ B ≤ −α2(|x|_D) off D, and ∇B·(f+gv) ≤ −α3(|x|_D) + α4(‖v‖)
/// on X\D. Throws std::invalid_argument unless every αi is class K∞.
CertificateReport check_issf_barrier(const ScalarField& B, const ControlAffineSystem& sys,
                                     const Region& unsafe, const Region& locality,
                                     const MonotoneFn& a1, const MonotoneFn& a2,
                                     const MonotoneFn& a3, const MonotoneFn& a4,
                                     const GridSpec& grid);

/// The seven merged-function envelopes, in order α1..α7.
struct MergedEnvelopes {
  std::vector<MonotoneFn> alphas;
};

/// Wn1: α1(‖x‖) ≤ W ≤ α2(‖x‖);
/// Wn2: −α3(|x|_D) ≤ W − c ≤ −α4(|x|_D) on X\D;
/// Wn3: ∇W·(f+gv) ≤ −α5(‖x‖) − 1_X(x)·α6(|x|_D) + α7(‖v‖).
/// Throws std::invalid_argument for c <= 0 or non-K∞ envelopes.
CertificateReport check_merged_W(const ScalarField& W, const ControlAffineSystem& sys,
                                 const Region& unsafe, const Region& locality, double c,
                                 const MergedEnvelopes& env, const GridSpec& grid);

/// Points closer than this to ∂D are skipped for |x|_D-denominated bounds.
inline constexpr double kBoundaryExclusion = 1e-9;

}  // namespace issf
