#include "formnav/world.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "formnav/csv.hpp"

namespace formnav {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Obstacle Obstacle::cylinder(const Vec2& center, double radius) {
  if (radius <= 0.0) throw std::invalid_argument("cylinder radius must be > 0");
  Obstacle o;
  o.kind = ObstacleKind::kCylinder;
  o.center = center;
  o.radius = radius;
  return o;
}

Obstacle Obstacle::box(const Vec2& center, const Vec2& half_extents, double rotation) {
  if (half_extents.minCoeff() <= 0.0) throw std::invalid_argument("box extents must be > 0");
  Obstacle o;
  o.kind = ObstacleKind::kBox;
  o.center = center;
  o.half_extents = half_extents;
  o.rotation = rotation;
  return o;
}

Obstacle Obstacle::wall_segment(const Vec2& a, const Vec2& b, double thickness) {
  if (thickness <= 0.0) throw std::invalid_argument("wall thickness must be > 0");
  const Vec2 d = b - a;
  if (d.norm() <= 0.0) throw std::invalid_argument("wall segment endpoints coincide");
  Obstacle o;
  o.kind = ObstacleKind::kWallSegment;
  o.center = 0.5 * (a + b);
  o.half_extents = Vec2(0.5 * d.norm(), 0.5 * thickness);
  o.rotation = std::atan2(d.y(), d.x());
  return o;
}

Obstacle Obstacle::dynamic_cylinder(const Vec2& center, double radius, const Vec2& velocity) {
  Obstacle o = cylinder(center, radius);
  o.kind = ObstacleKind::kDynamicCylinder;
  o.velocity = velocity;
  return o;
}

double Obstacle::surface_distance(const Vec2& p) const {
  switch (kind) {
    case ObstacleKind::kCylinder:
    case ObstacleKind::kDynamicCylinder:
      return (p - center).norm() - radius;
    case ObstacleKind::kBox:
    case ObstacleKind::kWallSegment: {
      const Vec2 q = closest_point_oriented_box(p, center, half_extents, rotation);
      return (p - q).norm();
    }
  }
  return kInf;
}

Vec2 Obstacle::closest_point(const Vec2& p) const {
  switch (kind) {
    case ObstacleKind::kCylinder:
    case ObstacleKind::kDynamicCylinder: {
      const Vec2 d = p - center;
      const double n = d.norm();
      if (n == 0.0) return center + Vec2(radius, 0.0);
      return center + d * (radius / n);
    }
    case ObstacleKind::kBox:
    case ObstacleKind::kWallSegment:
      return closest_point_oriented_box(p, center, half_extents, rotation);
  }
  return p;
}

double Obstacle::ray_hit(const Vec2& origin, const Vec2& dir) const {
  switch (kind) {
    case ObstacleKind::kCylinder:
    case ObstacleKind::kDynamicCylinder:
      return ray_circle(origin, dir, center, radius);
    case ObstacleKind::kBox:
    case ObstacleKind::kWallSegment:
      return ray_oriented_box(origin, dir, center, half_extents, rotation);
  }
  return kInf;
}

const char* to_string(EpisodeState s) {
  switch (s) {
    case EpisodeState::kRunning: return "running";
    case EpisodeState::kGoalReached: return "goal_reached";
    case EpisodeState::kCollision: return "collision";
    case EpisodeState::kStuck: return "stuck";
    case EpisodeState::kTimeout: return "timeout";
  }
  return "?";
}

Pose2D step_unicycle(const Pose2D& pose, const ActionCmd& action, double dt) {
  if (!pose.finite() || !action.finite() || !std::isfinite(dt) || dt <= 0.0) {
    throw std::invalid_argument("step_unicycle: non-finite input or dt <= 0");
  }
  Pose2D next;
  next.x = pose.x + std::cos(pose.theta) * action.v * dt;
  next.y = pose.y + std::sin(pose.theta) * action.v * dt;
  next.theta = wrap_angle(pose.theta + action.w * dt);
  return next;
}

namespace {

EpisodeStatus evaluate_status(const WorldState& world, const SimParams& params) {
  const int n = world.n_robots();
  // Robot-robot collisions.
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = (world.robots[i].pose.position() - world.robots[j].pose.position()).norm();
      if (d < 2.0 * world.robot_radius) return {EpisodeState::kCollision, i};
    }
  }
  // Robot-obstacle and robot-wall collisions.
  for (int i = 0; i < n; ++i) {
    const Vec2 p = world.robots[i].pose.position();
    for (const auto& obs : world.obstacles) {
      if (obs.surface_distance(p) < world.robot_radius) return {EpisodeState::kCollision, i};
    }
    if (world.arena.wall_clearance(p) < world.robot_radius) return {EpisodeState::kCollision, i};
  }
  if ((centroid(world) - world.centroid_goal).norm() < params.goal_tolerance) {
    return {EpisodeState::kGoalReached, std::nullopt};
  }
  if (world.step_count >= params.max_steps) return {EpisodeState::kTimeout, std::nullopt};
  return {EpisodeState::kRunning, std::nullopt};
}

}  // namespace

std::pair<WorldState, EpisodeStatus> step_world(const WorldState& world,
                                                const std::vector<ActionCmd>& actions, double dt,
                                                const SimParams& params) {
  if (static_cast<int>(actions.size()) != world.n_robots()) {
    throw std::invalid_argument("step_world: one action per robot required");
  }
  WorldState next = world;
  for (int i = 0; i < world.n_robots(); ++i) {
    next.robots[i].pose = step_unicycle(world.robots[i].pose, actions[i], dt);
    next.robots[i].last_action = actions[i];
  }
  for (auto& obs : next.obstacles) {
    if (!obs.dynamic()) continue;
    obs.center += obs.velocity * dt;
    // Reflect off arena walls.
    for (int axis = 0; axis < 2; ++axis) {
      if (obs.center[axis] - obs.radius < next.arena.lo[axis]) {
        obs.center[axis] = next.arena.lo[axis] + obs.radius;
        obs.velocity[axis] = std::abs(obs.velocity[axis]);
      } else if (obs.center[axis] + obs.radius > next.arena.hi[axis]) {
        obs.center[axis] = next.arena.hi[axis] - obs.radius;
        obs.velocity[axis] = -std::abs(obs.velocity[axis]);
      }
    }
  }
  next.step_count = world.step_count + 1;
  return {next, evaluate_status(next, params)};
}

std::vector<double> cast_lidar(const WorldState& world, int robot, int n_beams,
                               double max_range) {
  if (robot < 0 || robot >= world.n_robots()) {
    throw std::invalid_argument("cast_lidar: robot index out of range");
  }
  const Pose2D& pose = world.robots[robot].pose;
  const Vec2 origin = pose.position();
  std::vector<double> ranges(n_beams, max_range);
  for (int k = 0; k < n_beams; ++k) {
    const double angle = pose.theta + 2.0 * kPi * k / n_beams;
    const Vec2 dir(std::cos(angle), std::sin(angle));
    double t = ray_rect_interior(origin, dir, world.arena);
    for (const auto& obs : world.obstacles) t = std::min(t, obs.ray_hit(origin, dir));
    for (int j = 0; j < world.n_robots(); ++j) {
      if (j == robot) continue;
      t = std::min(t, ray_circle(origin, dir, world.robots[j].pose.position(),
                                 world.robot_radius));
    }
    ranges[k] = std::clamp(t, 0.0, max_range);
  }
  return ranges;
}

Vec2 centroid(const WorldState& world) {
  if (world.robots.empty()) throw std::invalid_argument("centroid: no robots");
  Vec2 sum = Vec2::Zero();
  for (const auto& r : world.robots) sum += r.pose.position();
  return sum / static_cast<double>(world.robots.size());
}

bool detect_stuck(const std::deque<std::vector<Vec2>>& history, double eps, int k) {
  if (static_cast<int>(history.size()) < k + 1) return false;
  const auto& oldest = history[history.size() - 1 - k];
  const auto& newest = history.back();
  for (std::size_t i = 0; i < newest.size(); ++i) {
    if ((newest[i] - oldest[i]).norm() >= eps) return false;
  }
  return true;
}

double nearest_obstacle_clearance(const WorldState& world, int robot) {
  const Vec2 p = world.robots[robot].pose.position();
  double best = kInf;
  for (const auto& obs : world.obstacles) best = std::min(best, obs.surface_distance(p));
  return best;
}

Episode::Episode(WorldState world, SimParams params)
    : world_(std::move(world)), params_(std::move(params)) {
  std::vector<Vec2> positions;
  for (const auto& r : world_.robots) positions.push_back(r.pose.position());
  position_history_.push_back(std::move(positions));
}

EpisodeStatus Episode::step(const std::vector<ActionCmd>& actions) {
  if (status_.terminal()) throw std::logic_error("Episode::step after terminal status");
  auto [next, status] = step_world(world_, actions, params_.dt, params_);
  world_ = std::move(next);

  std::vector<Vec2> positions;
  for (const auto& r : world_.robots) positions.push_back(r.pose.position());
  position_history_.push_back(std::move(positions));
  while (static_cast<int>(position_history_.size()) > params_.stuck_window + 1) {
    position_history_.pop_front();
  }

  if (status.state == EpisodeState::kRunning &&
      detect_stuck(position_history_, params_.stuck_eps, params_.stuck_window)) {
    // Whole team stalled; report the robot that moved least.
    int argmin = 0;
    double least = kInf;
    const auto& oldest = position_history_.front();
    const auto& newest = position_history_.back();
    for (std::size_t i = 0; i < newest.size(); ++i) {
      const double moved = (newest[i] - oldest[i]).norm();
      if (moved < least) {
        least = moved;
        argmin = static_cast<int>(i);
      }
    }
    status = {EpisodeState::kStuck, argmin};
  }

  status_ = status;
  if (trace_enabled_) record_trace_row(status);
  return status;
}

void Episode::record_trace_row(const EpisodeStatus& status) {
  std::ostringstream row;
  row << world_.step_count;
  for (const auto& r : world_.robots) {
    row << ',' << format_double(r.pose.x) << ',' << format_double(r.pose.y) << ','
        << format_double(r.pose.theta) << ',' << format_double(r.last_action.v) << ','
        << format_double(r.last_action.w);
  }
  row << ',' << to_string(status.state) << '\n';
  trace_ += row.str();
}

void Episode::write_trace(std::ostream& out) const {
  out << "step";
  for (int i = 0; i < world_.n_robots(); ++i) {
    out << ",x" << i << ",y" << i << ",theta" << i << ",v" << i << ",w" << i;
  }
  out << ",status\n";
  out << trace_;
}

}  // namespace formnav
