#pragma once

#include <deque>
#include <optional>
#include <ostream>
#include <vector>

#include "formnav/geometry.hpp"

namespace formnav {

enum class ObstacleKind { kCylinder, kBox, kWallSegment, kDynamicCylinder };

// Static or constant-velocity obstacle. Wall segments are stored as oriented
// boxes (midpoint, half length, half thickness, rotation).
struct Obstacle {
  ObstacleKind kind = ObstacleKind::kCylinder;
  Vec2 center = Vec2::Zero();
  double radius = 0.0;          // cylinder kinds
  Vec2 half_extents = Vec2::Zero();  // box / wall-segment kinds
  double rotation = 0.0;             // box / wall-segment kinds
  Vec2 velocity = Vec2::Zero();      // nonzero only for dynamic kinds

  static Obstacle cylinder(const Vec2& center, double radius);
  static Obstacle box(const Vec2& center, const Vec2& half_extents, double rotation = 0.0);
  static Obstacle wall_segment(const Vec2& a, const Vec2& b, double thickness);
  static Obstacle dynamic_cylinder(const Vec2& center, double radius, const Vec2& velocity);

  bool dynamic() const { return kind == ObstacleKind::kDynamicCylinder; }
  // Distance from p to the obstacle surface (negative if p is inside).
  double surface_distance(const Vec2& p) const;
  // Closest point on the obstacle surface/volume boundary to p.
  Vec2 closest_point(const Vec2& p) const;
  double ray_hit(const Vec2& origin, const Vec2& dir) const;
};

struct RobotState {
  Pose2D pose;
  ActionCmd last_action;
};

struct WorldState {
  std::vector<RobotState> robots;
  std::vector<Obstacle> obstacles;
  Rect arena;
  Vec2 centroid_goal = Vec2::Zero();
  long step_count = 0;
  double robot_radius = 0.15;

  int n_robots() const { return static_cast<int>(robots.size()); }
};

enum class EpisodeState { kRunning, kGoalReached, kCollision, kStuck, kTimeout };

struct EpisodeStatus {
  EpisodeState state = EpisodeState::kRunning;
  std::optional<int> offending_robot;

  bool terminal() const { return state != EpisodeState::kRunning; }
  bool collision_or_stuck() const {
    return state == EpisodeState::kCollision || state == EpisodeState::kStuck;
  }
};

const char* to_string(EpisodeState s);

// Episode-level constants; everything here is config-exposed.
struct SimParams {
  double dt = 0.1;
  long max_steps = 1000;
  double goal_tolerance = 0.15;
  double stuck_eps = 0.01;
  int stuck_window = 50;
  int lidar_beams = 40;
  double lidar_max_range = 3.5;
};

// Discrete unicycle step: pose + [cos(theta) v dt, sin(theta) v dt, w dt].
Pose2D step_unicycle(const Pose2D& pose, const ActionCmd& action, double dt);

// Advances all robots simultaneously and moves dynamic obstacles, then
// evaluates collision / goal / timeout on the new poses. Stuck detection
// needs pose history and lives in Episode.
std::pair<WorldState, EpisodeStatus> step_world(const WorldState& world,
                                                const std::vector<ActionCmd>& actions, double dt,
                                                const SimParams& params);

// 40 equiangular ranges; beam k points at theta_robot + 2*pi*k/n. Sees
// obstacles, arena walls, and the other robots as discs of robot_radius.
std::vector<double> cast_lidar(const WorldState& world, int robot, int n_beams, double max_range);

Vec2 centroid(const WorldState& world);

// True iff every robot moved less than eps over the last k steps. history
// holds per-step position snapshots, oldest first, length >= k + 1.
bool detect_stuck(const std::deque<std::vector<Vec2>>& history, double eps, int k);

// Surface clearance from a robot center to the nearest obstacle (walls and
// other robots excluded); +inf when there are none.
double nearest_obstacle_clearance(const WorldState& world, int robot);

// Runs one episode: stepping, stuck detection, optional trace recording.
class Episode {
 public:
  Episode(WorldState world, SimParams params);

  // Applies one joint action; returns the status after the step. Further
  // calls after a terminal status throw.
  EpisodeStatus step(const std::vector<ActionCmd>& actions);

  const WorldState& world() const { return world_; }
  WorldState& mutable_world() { return world_; }
  const SimParams& params() const { return params_; }
  const EpisodeStatus& status() const { return status_; }

  // Clears termination so training can continue after a goal is re-sampled.
  void resume() { status_ = EpisodeStatus{}; }

  void enable_trace() { trace_enabled_ = true; }
  void write_trace(std::ostream& out) const;

 private:
  void record_trace_row(const EpisodeStatus& status);

  WorldState world_;
  SimParams params_;
  EpisodeStatus status_;
  std::deque<std::vector<Vec2>> position_history_;
  bool trace_enabled_ = false;
  std::string trace_;
};

}  // namespace formnav
