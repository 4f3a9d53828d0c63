#include "issf/plot_export.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "issf/csv_export.hpp"

namespace issf {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b", "#e377c2", "#17becf", "#7f7f7f"};

std::size_t stride_for(std::size_t n, std::size_t max_points = 2000) {
  return std::max<std::size_t>(1, n / max_points);
}

}  // namespace

std::string portrait_svg(const std::vector<Trajectory>& trajs, const SafetyGeometry& geom,
                         const Bounds& window) {
  if (geom.unsafe.dim() != 2 || window.size() != 2) {
    throw std::invalid_argument("portrait_svg: planar geometry required");
  }
  const double size = 600.0;
  const double pad = 40.0;
  const double sx = (size - 2 * pad) / (window[0].hi - window[0].lo);
  const double sy = (size - 2 * pad) / (window[1].hi - window[1].lo);
  auto px = [&](double x) { return pad + (x - window[0].lo) * sx; };
  auto py = [&](double y) { return size - pad - (y - window[1].lo) * sy; };

  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{0}\" "
      "viewBox=\"0 0 {0} {0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      size);
  out += fmt::format(
      "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", pad,
      pad, size - 2 * pad, size - 2 * pad);
  for (const auto& b : geom.locality.balls()) {
    out += fmt::format(
        "<ellipse cx=\"{:.3f}\" cy=\"{:.3f}\" rx=\"{:.3f}\" ry=\"{:.3f}\" fill=\"none\" "
        "stroke=\"black\" stroke-dasharray=\"6,4\"/>\n",
        px(b.center(0)), py(b.center(1)), b.radius * sx, b.radius * sy);
  }
  for (const auto& b : geom.unsafe.balls()) {
    out += fmt::format(
        "<ellipse cx=\"{:.3f}\" cy=\"{:.3f}\" rx=\"{:.3f}\" ry=\"{:.3f}\" fill=\"#d62728\" "
        "fill-opacity=\"0.6\" stroke=\"#d62728\"/>\n",
        px(b.center(0)), py(b.center(1)), b.radius * sx, b.radius * sy);
  }
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    const auto& tr = trajs[k];
    if (tr.size() == 0) continue;
    const char* color = kPalette[k % std::size(kPalette)];
    std::string pts;
    const std::size_t stride = stride_for(tr.size());
    for (std::size_t i = 0; i < tr.size(); i += stride) {
      pts += fmt::format("{:.2f},{:.2f} ", px(tr.states[i](0)), py(tr.states[i](1)));
    }
    pts += fmt::format("{:.2f},{:.2f}", px(tr.states.back()(0)), py(tr.states.back()(1)));
    out += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\"/>\n",
                       pts, color);
    out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n",
                       px(tr.states.front()(0)), py(tr.states.front()(1)), color);
  }
  out += fmt::format(
      "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">x1</text>\n"
      "<text x=\"12\" y=\"{}\" font-size=\"13\">x2</text>\n</svg>\n",
      size / 2, size - 10, size / 2);
  return out;
}

std::string timeseries_svg(const Trajectory& traj, const std::string& title) {
  const double width = 720.0;
  const double panel = 180.0;
  const double pad = 45.0;
  struct Series {
    std::string label;
    std::vector<std::vector<double>> lines;
  };
  std::vector<Series> panels(3);
  panels[0].label = "|x(t)|";
  panels[0].lines.push_back(traj.norm_x);
  panels[1].label = "dist(x(t), D)";
  panels[1].lines.push_back(traj.dist_to_D);
  panels[2].label = "u(t)";
  const auto m = traj.inputs.empty() ? 0 : traj.inputs.front().size();
  for (Eigen::Index c = 0; c < m; ++c) {
    std::vector<double> ch;
    ch.reserve(traj.size());
    for (const auto& u : traj.inputs) ch.push_back(u(c));
    panels[2].lines.push_back(std::move(ch));
  }
  const double height = pad + panels.size() * (panel + pad);
  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{3}</text>\n",
      width, height, width / 2, title);
  if (traj.size() == 0) return out + "</svg>\n";
  const double t0 = traj.times.front();
  const double t1 = std::max(traj.times.back(), t0 + 1e-12);
  const std::size_t stride = stride_for(traj.size());
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const double top = pad + p * (panel + pad);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& line : panels[p].lines) {
      for (double v : line) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    if (!(hi > lo)) {
      lo -= 1.0;
      hi += 1.0;
    }
    auto px = [&](double t) { return pad + (t - t0) / (t1 - t0) * (width - 2 * pad); };
    auto py = [&](double v) { return top + panel - (v - lo) / (hi - lo) * panel; };
    out += fmt::format(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n"
        "<text x=\"{}\" y=\"{}\" font-size=\"12\">{}</text>\n"
        "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{:.3g}</text>\n"
        "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{:.3g}</text>\n",
        pad, top, width - 2 * pad, panel, pad, top - 6, panels[p].label, pad - 4, top + 10, hi,
        pad - 4, top + panel, lo);
    for (std::size_t l = 0; l < panels[p].lines.size(); ++l) {
      const auto& line = panels[p].lines[l];
      std::string pts;
      for (std::size_t i = 0; i < line.size(); i += stride) {
        pts += fmt::format("{:.2f},{:.2f} ", px(traj.times[i]), py(line[i]));
      }
      pts += fmt::format("{:.2f},{:.2f}", px(traj.times.back()), py(line.back()));
      out += fmt::format(
          "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1\"/>\n", pts,
          kPalette[l % std::size(kPalette)]);
    }
  }
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">t</text>\n",
                     width / 2, height - 8);
  return out + "</svg>\n";
}

std::vector<std::string> emit_plot_data(const std::filesystem::path& out_dir,
                                        const std::vector<Trajectory>& trajs,
                                        const SafetyGeometry& geom, const Bounds& window) {
  std::vector<std::string> written;
  if (geom.unsafe.dim() == 2 && window.size() == 2) {
    write_text_file(out_dir / "boundary_D.csv", boundary_csv(geom.unsafe));
    write_text_file(out_dir / "boundary_X.csv", boundary_csv(geom.locality));
    write_text_file(out_dir / "portrait.svg", portrait_svg(trajs, geom, window));
    written.insert(written.end(), {"boundary_D.csv", "boundary_X.csv", "portrait.svg"});
  }
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const auto name = fmt::format("timeseries_{}.svg", i);
    const auto& x0 = trajs[i].states.front();
    write_text_file(out_dir / name,
                    timeseries_svg(trajs[i], fmt::format("trajectory {} from ({:.6g})", i,
                                                         fmt::join(x0.data(), x0.data() + x0.size(), ", "))));
    written.push_back(name);
  }
  return written;
}

}  // namespace issf
