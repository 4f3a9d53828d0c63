#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "issf/certification.hpp"
#include "issf/comparison_functions.hpp"
#include "issf/dynamics.hpp"
#include "issf/envelope_fit.hpp"
#include "issf/geometry.hpp"
#include "issf/issf_bounds.hpp"
#include "issf/merging.hpp"
#include "issf/scalar_field.hpp"

namespace issf {

inline constexpr const char* kToolkitVersion = "0.1.0";

struct RegionDecl {
  std::string shape = "disk";  ///< disk | ball | disk_union | ball_complement
  std::vector<double> center;
  double radius = 0.0;
  std::vector<RegionDecl> members;  ///< disk_union only
  bool open = true;
  bool operator==(const RegionDecl&) const = default;
};

/// A catalog comparison function: identity, linear(c), power(p[, c]), poly_odd(a, b).
struct FnDecl {
  std::string name = "identity";
  std::map<std::string, double> params;
  bool operator==(const FnDecl&) const = default;
};

struct SystemDecl {
  std::string catalog;  ///< "single_integrator" or empty for expressions
  int dim_x = 2;
  int dim_u = 2;
  std::vector<std::string> f;               ///< dim_x expressions
  std::vector<std::vector<std::string>> g;  ///< dim_x rows of dim_u expressions
  bool operator==(const SystemDecl&) const = default;
};

struct DisturbanceDecl {
  std::string kind = "zero";  ///< zero | constant | sinusoid | seeded_noise
  std::vector<double> value;  ///< constant
  std::vector<double> amplitude, frequency, phase;  ///< sinusoid
  double bound = 0.0;
  std::uint64_t seed = 0;
  double hold_dt = 0.1;
  bool operator==(const DisturbanceDecl&) const = default;
};

struct GridDecl {
  std::vector<std::pair<double, double>> bounds;
  int resolution = 401;
  double input_radius = 3.0;
  int input_norms = 4;
  int input_directions = 16;
  bool operator==(const GridDecl&) const = default;
};

struct ExperimentSpec {
  std::string name;
  SystemDecl system;
  RegionDecl unsafe;
  RegionDecl locality;
  std::optional<RegionDecl> issf_locality;  ///< X used for the ISSf barrier; defaults to locality
  std::optional<RegionDecl> robust_region;  ///< where the robust-barrier check looks
  std::string lyapunov;  ///< V expression
  std::string barrier;   ///< B expression
  FnDecl iss_alpha1, iss_alpha2, iss_alpha3, iss_gamma;
  double theta = 0.5;
  double epsilon = 0.5;
  double k1 = 100.0;
  double k2 = -10.0;
  std::string controller = "merged_gradient";  ///< merged_gradient | lyapunov_gradient | none
  DisturbanceDecl disturbance;
  std::vector<std::vector<double>> initial_conditions;
  double t_end = 10.0;
  double dt = 1e-3;
  GridDecl grid;
  std::string fit_family = "quadratic";
  double supply_gain = 0.5;
  std::vector<double> envelope_k;
  std::vector<std::string> stages;  ///< subset of certify, gains, simulate, issf, export
  bool operator==(const ExperimentSpec&) const = default;

  std::string to_json() const;
  /// Throws SpecError naming the offending field (and line for syntax errors).
  static ExperimentSpec from_json(const std::string& text);
  bool has_stage(const std::string& s) const;
};

/// Names accepted by bundled_spec: paper_sec4, paper_sec4_nominal.
std::vector<std::string> bundled_spec_names();
ExperimentSpec bundled_spec(const std::string& name);

/// Loads "bundled:<name>" or a JSON file path.
ExperimentSpec load_spec(const std::string& ref);

MonotoneFn make_fn(const FnDecl& d);
Region make_region(const RegionDecl& d);
ControlAffineSystem make_system(const SystemDecl& d);
DisturbanceSignal make_disturbance(const DisturbanceDecl& d, int dim_u);
ScalarField make_field(const std::string& expression, int dim, const std::string& label);

/// Everything the stages need, built from a validated spec.
struct ExperimentModel {
  ExperimentSpec spec;
  ControlAffineSystem plant;
  SafetyGeometry geometry;        ///< D and X
  SafetyGeometry issf_geometry;   ///< D and the ISSf locality
  ScalarField V;
  std::optional<ScalarField> B;
  std::optional<CompactBarrier> Bt;
  std::optional<MergedFunction> W;
  std::optional<FeedbackLaw> law;
  ControlAffineSystem loop;  ///< plant with the law substituted (plant if none)
  DisturbanceSignal disturbance;
  GridSpec grid;

  std::vector<std::pair<std::string, ScalarField>> fields() const;
};

/// Validates the spec (SpecError on failure) and builds the model.
ExperimentModel build_model(const ExperimentSpec& spec);

struct CertificationOutcome {
  std::vector<CertificateReport> reports;
  std::optional<MergedFit> merged_fit;
  std::vector<std::string> notes;
};

CertificationOutcome run_certification(const ExperimentModel& m);

struct GainsOutcome {
  IssfBarrierFit fit;
  IssfGainBundle bundle;
  IssGains iss;
  SafetyEnvelope envelope;
  std::vector<AdmissibilityWitness> witnesses;  ///< one per initial condition
};

GainsOutcome run_gains(const ExperimentModel& m);

/// One trajectory per initial condition, integrated in parallel.
std::vector<Trajectory> run_simulations(const ExperimentModel& m);

struct StageRecord {
  std::string stage;
  bool ok = true;
  std::string message;
  double seconds = 0.0;
};

struct OutputFile {
  std::string name;
  std::string hash;  ///< FNV-1a 64 of the contents, hex
};

struct RunManifest {
  std::string spec_hash;
  std::uint64_t seed = 0;
  std::string version = kToolkitVersion;
  std::vector<OutputFile> files;
  std::vector<StageRecord> stages;

  std::string to_json() const;
  /// Hash over spec hash, seed, version and file hashes (timings excluded).
  std::string digest() const;
};

std::string fnv1a_hex(const std::string& data);

/// certify → gains → simulate → issf → export, restricted to spec.stages.
/// A failing stage is recorded and later stages that depend on it are skipped.
RunManifest run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir);

}  // namespace issf
