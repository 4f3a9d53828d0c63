#pragma once

#include <filesystem>
#include <string>

#include "issf/dynamics.hpp"
#include "issf/issf_bounds.hpp"
#include "issf/scalar_field.hpp"

namespace issf {

/// t, x1..xn, u1..um, dist_D, norm_x, in_X
std::string trajectory_csv(const Trajectory& traj);
/// t, event
std::string events_csv(const Trajectory& traj);
/// t, lhs, rhs, residual, admissible_flag
std::string residual_csv(const IssfEvaluation& eval);
/// k, s_star
std::string envelope_csv(const SafetyEnvelope& env);
/// x1, x2, value on a resolution × resolution grid over a planar window.
std::string field_grid_csv(const ScalarField& field, const Bounds& window, int resolution);
/// x1, x2 points on the boundary of a planar region (closed polyline).
std::string boundary_csv(const Region& r, int samples = 256);

/// Writes `contents` to `path` (binary, truncating); throws std::runtime_error.
void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace issf
