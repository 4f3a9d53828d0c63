#include "issf/csv_export.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

namespace issf {

namespace {

void append_num(std::string& out, double v) { fmt::format_to(std::back_inserter(out), "{:.12g}", v); }

}  // namespace

std::string trajectory_csv(const Trajectory& traj) {
  std::string out = "t";
  const auto n = traj.states.empty() ? 0 : traj.states.front().size();
  const auto m = traj.inputs.empty() ? 0 : traj.inputs.front().size();
  for (Eigen::Index i = 1; i <= n; ++i) out += fmt::format(",x{}", i);
  for (Eigen::Index i = 1; i <= m; ++i) out += fmt::format(",u{}", i);
  out += ",dist_D,norm_x,in_X\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    append_num(out, traj.times[k]);
    for (Eigen::Index i = 0; i < n; ++i) {
      out += ',';
      append_num(out, traj.states[k](i));
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      out += ',';
      append_num(out, traj.inputs[k](i));
    }
    out += ',';
    append_num(out, traj.dist_to_D[k]);
    out += ',';
    append_num(out, traj.norm_x[k]);
    out += traj.in_X[k] ? ",1\n" : ",0\n";
  }
  return out;
}

std::string events_csv(const Trajectory& traj) {
  std::string out = "t,event\n";
  for (const auto& e : traj.events) out += fmt::format("{:.12g},{}\n", e.time, to_string(e.kind));
  return out;
}

std::string residual_csv(const IssfEvaluation& eval) {
  std::string out = "t,lhs,rhs,residual,admissible_flag\n";
  for (const auto& s : eval.samples) {
    out += fmt::format("{:.12g},{:.12g},{:.12g},{:.12g},{}\n", s.t, s.lhs, s.rhs, s.residual,
                       s.admissible ? 1 : 0);
  }
  return out;
}

std::string envelope_csv(const SafetyEnvelope& env) {
  std::string out = "k,s_star\n";
  for (std::size_t i = 0; i < env.u_bounds.size(); ++i) {
    out += fmt::format("{:.12g},{:.12g}\n", env.u_bounds[i], env.min_safe_initial_distance[i]);
  }
  return out;
}

std::string field_grid_csv(const ScalarField& field, const Bounds& window, int resolution) {
  if (window.size() != 2) throw std::invalid_argument("field_grid_csv: planar window required");
  if (resolution < 2) throw std::invalid_argument("field_grid_csv: resolution must be >= 2");
  std::string out = "x1,x2,value\n";
  Vec x(2);
  for (int j = 0; j < resolution; ++j) {
    x(1) = window[1].lo + (window[1].hi - window[1].lo) * j / (resolution - 1);
    for (int i = 0; i < resolution; ++i) {
      x(0) = window[0].lo + (window[0].hi - window[0].lo) * i / (resolution - 1);
      out += fmt::format("{:.12g},{:.12g},{:.12g}\n", x(0), x(1), field(x));
    }
  }
  return out;
}

std::string boundary_csv(const Region& r, int samples) {
  if (r.dim() != 2) throw std::invalid_argument("boundary_csv: planar region required");
  std::string out = "x1,x2\n";
  for (const auto& b : r.balls()) {
    for (int k = 0; k <= samples; ++k) {
      const double a = 2.0 * std::numbers::pi * k / samples;
      out += fmt::format("{:.12g},{:.12g}\n", b.center(0) + b.radius * std::cos(a),
                         b.center(1) + b.radius * std::sin(a));
    }
    out += "\n";
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error(fmt::format("cannot open {} for writing", path.string()));
  f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!f) throw std::runtime_error(fmt::format("failed writing {}", path.string()));
}

}  // namespace issf
