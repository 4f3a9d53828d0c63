#pragma once

#include <vector>

#include "issf/types.hpp"

namespace issf {

struct Ball {
  Vec center;
  double radius = 0.0;
};

/// Unsafe and locality sets: a ball, a union of balls, or the complement of a
/// ball. Distances are always measured to the closure.
class Region {
 public:
  enum class Kind { ball, ball_union, ball_complement };

  static Region disk(double cx, double cy, double radius, bool open = true);
  static Region ball(Vec center, double radius, bool open = true);
  static Region ball_union(std::vector<Ball> members, bool open = true);
  /// {x : ‖x − c‖ > r} (open) or {‖x − c‖ >= r} (closed).
  static Region ball_complement(Vec center, double radius, bool open = true);

  Kind kind() const noexcept { return kind_; }
  bool is_open() const noexcept { return open_; }
  bool is_bounded() const noexcept { return kind_ != Kind::ball_complement; }
  int dim() const noexcept { return static_cast<int>(balls_.front().center.size()); }
  const std::vector<Ball>& balls() const noexcept { return balls_; }

 private:
  Region(Kind kind, std::vector<Ball> balls, bool open);

  Kind kind_;
  std::vector<Ball> balls_;
  bool open_;
};

/// Euclidean distance from p to the closure of r (0 inside).
/// Throws std::invalid_argument on dimension mismatch.
double distance_to_set(const Vec& p, const Region& r);

bool contains(const Vec& p, const Region& r);

/// Nearest point of the closure's boundary (for balls and unions: the point on
/// the nearest member sphere that is not inside another member).
Vec nearest_boundary_point(const Vec& p, const Region& r);

/// Points on the boundary of a bounded region. Planar circles are sampled at
/// equal angles; higher dimensions use deterministic pseudo-random directions.
std::vector<Vec> sample_boundary(const Region& r, int count_per_ball);

struct BoundaryExtremes {
  double kappa = 0.0;  ///< min over ∂X of the distance to D
  double d2 = 0.0;     ///< max norm over the closure of D
};

/// Closed form when X is a single ball; dense boundary sampling
/// (`samples` per circle) otherwise. Throws std::invalid_argument if D is not
/// strictly inside X.
BoundaryExtremes boundary_extremes(const Region& unsafe, const Region& locality,
                                   int samples = 4096);

/// Unsafe set D together with the locality set X ⊃ D.
struct SafetyGeometry {
  Region unsafe;
  Region locality;
  double kappa = 0.0;
  double d2 = 0.0;

  static SafetyGeometry make(Region unsafe, Region locality);
};

}  // namespace issf
