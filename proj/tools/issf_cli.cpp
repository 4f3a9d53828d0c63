#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "issf/errors.hpp"
#include "issf/experiment.hpp"

namespace {

struct CommonArgs {
  std::string spec;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args, const std::string& default_spec) {
  args.spec = default_spec;
  cmd->add_option("--spec", args.spec, "experiment file or bundled:<name>")
      ->capture_default_str();
  cmd->add_option("--out", args.out, "output directory")->capture_default_str();
  cmd->add_option("--seed", args.seed, "override the disturbance seed");
}

issf::ExperimentSpec prepare(const CommonArgs& args, std::vector<std::string> stages) {
  auto spec = issf::load_spec(args.spec);
  if (args.seed) spec.disturbance.seed = *args.seed;
  if (!stages.empty()) spec.stages = std::move(stages);
  return spec;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int report_stages(const issf::RunManifest& m) {
  int rc = 0;
  for (const auto& s : m.stages) {
    std::cerr << fmt::format("[{}] {} ({:.2f} s){}\n", s.ok ? "ok" : "FAILED", s.stage, s.seconds,
                             s.ok ? "" : ": " + s.message);
    if (!s.ok) rc = 1;
  }
  std::cerr << "manifest digest " << m.digest() << "\n";
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Input-to-state safety toolkit: certificates, gains and simulations"};
  app.require_subcommand(1);

  CommonArgs certify_args, simulate_args, gains_args, envelope_args, full_args, show_args;
  const std::string def = "bundled:paper_sec4";
  auto* certify = app.add_subcommand("certify", "check every certificate on the grid");
  add_common(certify, certify_args, def);
  auto* simulate = app.add_subcommand("simulate", "integrate the closed loop from each initial condition");
  add_common(simulate, simulate_args, def);
  auto* gains = app.add_subcommand("gains", "build the ISSf gain bundle");
  add_common(gains, gains_args, def);
  auto* envelope = app.add_subcommand("envelope", "minimum safe initial distance per disturbance bound");
  add_common(envelope, envelope_args, def);
  auto* full = app.add_subcommand("reproduce-paper", "run every stage of the worked example");
  add_common(full, full_args, def);
  auto* show = app.add_subcommand("show-spec", "print the resolved experiment file");
  add_common(show, show_args, def);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*show) {
      std::cout << prepare(show_args, {}).to_json();
      return 0;
    }
    if (*certify) {
      const auto m = issf::run_experiment(prepare(certify_args, {"certify"}), certify_args.out);
      std::cout << slurp(std::filesystem::path(certify_args.out) / "certificates.txt");
      return report_stages(m);
    }
    if (*simulate) {
      const auto m = issf::run_experiment(prepare(simulate_args, {"simulate", "export"}), simulate_args.out);
      return report_stages(m);
    }
    if (*gains) {
      const auto m = issf::run_experiment(prepare(gains_args, {"gains"}), gains_args.out);
      std::cout << slurp(std::filesystem::path(gains_args.out) / "gains.json");
      return report_stages(m);
    }
    if (*envelope) {
      const auto m = issf::run_experiment(prepare(envelope_args, {"gains"}), envelope_args.out);
      std::cout << slurp(std::filesystem::path(envelope_args.out) / "envelope.csv");
      return report_stages(m);
    }
    if (*full) {
      const auto m = issf::run_experiment(prepare(full_args, {}), full_args.out);
      return report_stages(m);
    }
  } catch (const issf::SpecError& e) {
    std::cerr << "spec error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
