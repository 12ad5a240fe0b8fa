#include "formnav/geometry.hpp"

#include <limits>

namespace formnav {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double ray_circle(const Vec2& origin, const Vec2& dir, const Vec2& center, double radius) {
  const Vec2 oc = origin - center;
  const double b = oc.dot(dir);
  const double c = oc.squaredNorm() - radius * radius;
  const double disc = b * b - c;
  if (disc < 0.0) return kInf;
  const double s = std::sqrt(disc);
  const double t0 = -b - s;
  if (t0 > 0.0) return t0;
  const double t1 = -b + s;
  if (t1 > 0.0) return t1;  // origin inside the circle
  return kInf;
}

double ray_oriented_box(const Vec2& origin, const Vec2& dir, const Vec2& center,
                        const Vec2& half_extents, double rotation) {
  // Slab test in the box frame.
  const double c = std::cos(rotation), s = std::sin(rotation);
  const Vec2 rel = origin - center;
  const Vec2 o(c * rel.x() + s * rel.y(), -s * rel.x() + c * rel.y());
  const Vec2 d(c * dir.x() + s * dir.y(), -s * dir.x() + c * dir.y());

  double t_enter = -kInf, t_exit = kInf;
  for (int axis = 0; axis < 2; ++axis) {
    const double e = half_extents[axis];
    if (std::abs(d[axis]) < 1e-15) {
      if (o[axis] < -e || o[axis] > e) return kInf;
      continue;
    }
    double t0 = (-e - o[axis]) / d[axis];
    double t1 = (e - o[axis]) / d[axis];
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
  }
  if (t_enter > t_exit) return kInf;
  if (t_enter > 0.0) return t_enter;
  if (t_exit > 0.0) return t_exit;  // origin inside the box
  return kInf;
}

double ray_rect_interior(const Vec2& origin, const Vec2& dir, const Rect& rect) {
  double t_exit = kInf;
  if (dir.x() > 1e-15) t_exit = std::min(t_exit, (rect.hi.x() - origin.x()) / dir.x());
  if (dir.x() < -1e-15) t_exit = std::min(t_exit, (rect.lo.x() - origin.x()) / dir.x());
  if (dir.y() > 1e-15) t_exit = std::min(t_exit, (rect.hi.y() - origin.y()) / dir.y());
  if (dir.y() < -1e-15) t_exit = std::min(t_exit, (rect.lo.y() - origin.y()) / dir.y());
  return std::max(t_exit, 0.0);
}

Vec2 closest_point_oriented_box(const Vec2& p, const Vec2& center, const Vec2& half_extents,
                                double rotation) {
  const double c = std::cos(rotation), s = std::sin(rotation);
  const Vec2 rel = p - center;
  const Vec2 local(c * rel.x() + s * rel.y(), -s * rel.x() + c * rel.y());
  const Vec2 clamped(std::clamp(local.x(), -half_extents.x(), half_extents.x()),
                     std::clamp(local.y(), -half_extents.y(), half_extents.y()));
  return center + Vec2(c * clamped.x() - s * clamped.y(), s * clamped.x() + c * clamped.y());
}

}  // namespace formnav
