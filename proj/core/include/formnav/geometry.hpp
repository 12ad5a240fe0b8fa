#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>

namespace formnav {

using Vec2 = Eigen::Vector2d;

constexpr double kPi = 3.14159265358979323846;

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

// Robot configuration [x, y, theta], theta kept in (-pi, pi].
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Vec2 position() const { return Vec2(x, y); }
  Vec2 heading() const { return Vec2(std::cos(theta), std::sin(theta)); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(theta); }
};

// Control command [v, w]: linear (m/s) and angular (rad/s) velocity.
struct ActionCmd {
  double v = 0.0;
  double w = 0.0;

  bool finite() const { return std::isfinite(v) && std::isfinite(w); }
};

// Box bounds for the action set A.
struct ActionBounds {
  double v_min = 0.0;
  double v_max = 0.22;
  double w_min = -2.84;
  double w_max = 2.84;

  ActionCmd clamp(const ActionCmd& a) const {
    return {std::clamp(a.v, v_min, v_max), std::clamp(a.w, w_min, w_max)};
  }
  bool contains(const ActionCmd& a, double tol = 0.0) const {
    return a.v >= v_min - tol && a.v <= v_max + tol && a.w >= w_min - tol && a.w <= w_max + tol;
  }
  double v_range() const { return v_max - v_min; }
  double w_range() const { return w_max - w_min; }
};

// Axis-aligned rectangle, used for arena bounds and the MPC state box X.
struct Rect {
  Vec2 lo = Vec2(-3.0, -3.0);
  Vec2 hi = Vec2(3.0, 3.0);

  bool contains(const Vec2& p, double margin = 0.0) const {
    return p.x() >= lo.x() + margin && p.x() <= hi.x() - margin &&
           p.y() >= lo.y() + margin && p.y() <= hi.y() - margin;
  }
  Rect shrunk(double margin) const { return {lo + Vec2(margin, margin), hi - Vec2(margin, margin)}; }
  Vec2 extent() const { return hi - lo; }
  // Distance from an interior point to the nearest wall.
  double wall_clearance(const Vec2& p) const {
    return std::min(std::min(p.x() - lo.x(), hi.x() - p.x()),
                    std::min(p.y() - lo.y(), hi.y() - p.y()));
  }
};

// Distance and body-frame bearing from a pose to a point. Coincident points
// report bearing 0.
inline std::pair<double, double> relative_polar(const Pose2D& from, const Vec2& to) {
  if (!from.finite() || !to.allFinite()) {
    throw std::invalid_argument("relative_polar: non-finite input");
  }
  const double dx = to.x() - from.x;
  const double dy = to.y() - from.y;
  const double dist = std::sqrt(dx * dx + dy * dy);
  if (dist == 0.0) return {0.0, 0.0};
  return {dist, wrap_angle(std::atan2(dy, dx) - from.theta)};
}

// First positive ray parameter t with |o + t d - c| = r, or +inf if the ray
// misses the circle. d must be unit length.
double ray_circle(const Vec2& origin, const Vec2& dir, const Vec2& center, double radius);

// First positive hit of a ray against an oriented box (center, half extents,
// rotation), or +inf.
double ray_oriented_box(const Vec2& origin, const Vec2& dir, const Vec2& center,
                        const Vec2& half_extents, double rotation);

// Exit distance of a ray starting inside an axis-aligned rectangle.
double ray_rect_interior(const Vec2& origin, const Vec2& dir, const Rect& rect);

// Closest point on an oriented box (surface or interior) to p.
Vec2 closest_point_oriented_box(const Vec2& p, const Vec2& center, const Vec2& half_extents,
                                double rotation);

}  // namespace formnav
