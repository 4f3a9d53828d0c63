#pragma once

#include <string>
#include <vector>

#include "issf/certification.hpp"
#include "issf/comparison_functions.hpp"

namespace issf {

/// linear: a·s;  square: b·s²;  quadratic: a·s + b·s² (a, b >= 0).
enum class EnvelopeFamily { linear, square, quadratic };
enum class EnvelopeSide { lower, upper };

EnvelopeFamily parse_envelope_family(const std::string& name);
const char* to_string(EnvelopeFamily f);

struct EnvelopeSample {
  double s = 0.0;
  double y = 0.0;
};

struct EnvelopeFit {
  MonotoneFn fn;
  bool feasible = true;
  std::string note;
};

/// Proposes f in the family with f(s) <= y (lower) or f(s) >= y (upper) at
/// every sample: a least-squares shape, rescaled by the extreme ratio y/f(s)
/// and then by (1 ∓ safety). Infeasible when no member of the family can
/// bound the samples (a lower envelope needs y > 0 wherever s > 0; an upper
/// envelope needs y <= 0 at s = 0); the least-squares shape is returned then.
EnvelopeFit fit_envelope(const std::vector<EnvelopeSample>& samples, EnvelopeFamily family,
                         EnvelopeSide side, double safety = 1e-6, const std::string& label = "");

struct IssfBarrierFit {
  std::vector<MonotoneFn> alphas;  ///< α1..α4
  bool feasible = true;
  std::vector<std::string> notes;
};

/// Envelopes for an ISSf barrier B on the grid window:
///   α1 upper and α2 lower envelopes of −B against |x|_D off D;
///   α4 = supply_gain·s²;
///   α3 lower envelope of −max_v[∇B·(f + g·v) − α4(‖v‖)] on X\D.
IssfBarrierFit fit_issf_barrier(const ScalarField& B, const ControlAffineSystem& sys,
                                const Region& unsafe, const Region& locality,
                                const GridSpec& grid, EnvelopeFamily family,
                                double supply_gain = 0.5);

struct MergedFit {
  double c = 0.0;
  double boundary_min = 0.0;  ///< range of W over the sampled ∂D
  double boundary_max = 0.0;
  MergedEnvelopes envelopes;
  bool feasible = true;
  std::vector<std::string> notes;
};

/// Envelopes for a merged function W:
///   c = midpoint of W over ∂D;
///   α1 lower / α2 upper envelopes of W against ‖x‖;
///   α3 upper / α4 lower envelopes of c − W against |x|_D on X\D;
///   α7 = supply_gain·s²;
///   α5 = half the lower envelope of the dissipation slack against ‖x‖;
///   α6 lower envelope of the remaining slack against |x|_D inside X.
MergedFit fit_merged_envelopes(const ScalarField& W, const ControlAffineSystem& sys,
                               const Region& unsafe, const Region& locality,
                               const GridSpec& grid, EnvelopeFamily family,
                               double supply_gain = 0.5);

}  // namespace issf
