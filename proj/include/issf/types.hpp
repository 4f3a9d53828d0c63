#pragma once

#include <Eigen/Dense>
#include <vector>

namespace issf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Interval&) const = default;
};

/// Axis-aligned box, one interval per state dimension.
using Bounds = std::vector<Interval>;

}  // namespace issf
