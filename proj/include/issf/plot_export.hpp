#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "issf/dynamics.hpp"
#include "issf/geometry.hpp"

namespace issf {

/// Phase portrait in the (x1, x2) plane: D filled, X dashed, one polyline per
/// trajectory. Planar systems only.
std::string portrait_svg(const std::vector<Trajectory>& trajs, const SafetyGeometry& geom,
                         const Bounds& window);

/// Stacked panels of ‖x(t)‖, |x(t)|_D and the disturbance channels.
std::string timeseries_svg(const Trajectory& traj, const std::string& title);

/// Writes the plot layers into out_dir and returns the file names written.
/// Planar systems get boundary_D.csv, boundary_X.csv and portrait.svg (a
/// geometry-only portrait when `trajs` is empty); every trajectory gets
/// timeseries_<i>.svg.
std::vector<std::string> emit_plot_data(const std::filesystem::path& out_dir,
                                        const std::vector<Trajectory>& trajs,
                                        const SafetyGeometry& geom, const Bounds& window);

}  // namespace issf
