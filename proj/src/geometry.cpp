#include "issf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

#include "issf/random.hpp"

namespace issf {

Region::Region(Kind kind, std::vector<Ball> balls, bool open)
    : kind_(kind), balls_(std::move(balls)), open_(open) {
  if (balls_.empty()) throw std::invalid_argument("Region: a union needs at least one member");
  const auto n = balls_.front().center.size();
  if (n == 0) throw std::invalid_argument("Region: zero-dimensional center");
  for (const auto& b : balls_) {
    if (!(b.radius > 0.0)) throw std::invalid_argument("Region: radius must be positive");
    if (b.center.size() != n) throw std::invalid_argument("Region: members differ in dimension");
  }
}

Region Region::disk(double cx, double cy, double radius, bool open) {
  return ball(Vec{{cx, cy}}, radius, open);
}

Region Region::ball(Vec center, double radius, bool open) {
  return Region(Kind::ball, {Ball{std::move(center), radius}}, open);
}

Region Region::ball_union(std::vector<Ball> members, bool open) {
  return Region(Kind::ball_union, std::move(members), open);
}

Region Region::ball_complement(Vec center, double radius, bool open) {
  return Region(Kind::ball_complement, {Ball{std::move(center), radius}}, open);
}

namespace {

void check_dim(const Vec& p, const Region& r) {
  if (p.size() != r.dim()) {
    throw std::invalid_argument(
        fmt::format("dimension mismatch: point has {} coordinates, region has {}", p.size(),
                    r.dim()));
  }
}

}  // namespace

double distance_to_set(const Vec& p, const Region& r) {
  check_dim(p, r);
  if (r.kind() == Region::Kind::ball_complement) {
    const auto& b = r.balls().front();
    return std::max(0.0, b.radius - (p - b.center).norm());
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& b : r.balls()) best = std::min(best, std::max(0.0, (p - b.center).norm() - b.radius));
  return best;
}

bool contains(const Vec& p, const Region& r) {
  check_dim(p, r);
  const bool open = r.is_open();
  if (r.kind() == Region::Kind::ball_complement) {
    const auto& b = r.balls().front();
    const double d = (p - b.center).norm();
    return open ? d > b.radius : d >= b.radius;
  }
  return std::any_of(r.balls().begin(), r.balls().end(), [&](const Ball& b) {
    const double d = (p - b.center).norm();
    return open ? d < b.radius : d <= b.radius;
  });
}

namespace {

Vec project_to_sphere(const Vec& p, const Ball& b) {
  Vec dir = p - b.center;
  const double n = dir.norm();
  if (n == 0.0) {
    dir = Vec::Zero(p.size());
    dir(0) = 1.0;
  } else {
    dir /= n;
  }
  return b.center + b.radius * dir;
}

bool strictly_inside_other(const Vec& q, const std::vector<Ball>& balls, std::size_t self) {
  for (std::size_t j = 0; j < balls.size(); ++j) {
    if (j == self) continue;
    if ((q - balls[j].center).norm() < balls[j].radius - 1e-12) return true;
  }
  return false;
}

}  // namespace

Vec nearest_boundary_point(const Vec& p, const Region& r) {
  check_dim(p, r);
  const auto& balls = r.balls();
  if (balls.size() == 1) return project_to_sphere(p, balls.front());
  Vec best;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < balls.size(); ++i) {
    const Vec q = project_to_sphere(p, balls[i]);
    if (strictly_inside_other(q, balls, i)) continue;
    const double d = (q - p).norm();
    if (d < best_d) {
      best_d = d;
      best = q;
    }
  }
  if (best.size() == 0) {
    // Every projection is covered by another member; fall back to sampling.
    for (const auto& q : sample_boundary(r, 4096)) {
      const double d = (q - p).norm();
      if (d < best_d) {
        best_d = d;
        best = q;
      }
    }
  }
  return best;
}

std::vector<Vec> sample_boundary(const Region& r, int count_per_ball) {
  if (count_per_ball < 1) throw std::invalid_argument("sample_boundary: count must be positive");
  const auto& balls = r.balls();
  const int n = r.dim();
  std::vector<Vec> out;
  for (std::size_t i = 0; i < balls.size(); ++i) {
    const auto& b = balls[i];
    SplitMix64 rng(0x5EEDull + i);
    for (int k = 0; k < count_per_ball; ++k) {
      Vec dir(n);
      if (n == 1) {
        dir(0) = (k % 2 == 0) ? 1.0 : -1.0;
      } else if (n == 2) {
        const double a = 2.0 * std::numbers::pi * k / count_per_ball;
        dir << std::cos(a), std::sin(a);
      } else {
        for (int j = 0; j < n; ++j) dir(j) = rng.normal();
        dir.normalize();
      }
      Vec q = b.center + b.radius * dir;
      if (balls.size() > 1 && strictly_inside_other(q, balls, i)) continue;
      out.push_back(std::move(q));
    }
  }
  return out;
}

BoundaryExtremes boundary_extremes(const Region& unsafe, const Region& locality, int samples) {
  if (!unsafe.is_bounded() || !locality.is_bounded()) {
    throw std::invalid_argument("boundary_extremes: D and X must be bounded");
  }
  if (unsafe.dim() != locality.dim()) {
    throw std::invalid_argument("boundary_extremes: D and X differ in dimension");
  }
  BoundaryExtremes out;
  for (const auto& b : unsafe.balls()) out.d2 = std::max(out.d2, b.center.norm() + b.radius);

  if (locality.balls().size() == 1) {
    const auto& x = locality.balls().front();
    out.kappa = std::numeric_limits<double>::infinity();
    for (const auto& b : unsafe.balls()) {
      out.kappa = std::min(out.kappa, x.radius - (x.center - b.center).norm() - b.radius);
    }
  } else {
    for (const auto& q : sample_boundary(unsafe, samples)) {
      if (!contains(q, locality)) {
        throw std::invalid_argument("boundary_extremes: D is not contained in X");
      }
    }
    out.kappa = std::numeric_limits<double>::infinity();
    for (const auto& q : sample_boundary(locality, samples)) {
      out.kappa = std::min(out.kappa, distance_to_set(q, unsafe));
    }
  }
  if (!(out.kappa > 0.0)) {
    throw std::invalid_argument(
        fmt::format("boundary_extremes: D is not strictly inside X (kappa = {})", out.kappa));
  }
  return out;
}

SafetyGeometry SafetyGeometry::make(Region unsafe, Region locality) {
  const auto ext = boundary_extremes(unsafe, locality);
  return SafetyGeometry{std::move(unsafe), std::move(locality), ext.kappa, ext.d2};
}

}  // namespace issf
