#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "formnav/world.hpp"

namespace formnav {

enum class ScenarioKind { kEmptyWalled, kRandomObstacles, kNamedConfig, kSPath };

// World generation recipe. Everything the paper leaves unspecified (arena
// size, clearances, obstacle size range) is exposed here.
struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::kEmptyWalled;
  int n_robots = 3;
  int n_obstacles = 0;
  int n_dynamic_obstacles = 0;
  std::string named_config;  // in-formation | 3-corners | centerline | collinear | face-to-face
  int s_path_id = 1;         // 1..8

  Rect arena = {Vec2(-2.0, -2.0), Vec2(2.0, 2.0)};
  double robot_radius = 0.15;
  double d_ref = 0.6;
  double spawn_clearance = 0.35;      // minimum pairwise robot clearance (surface)
  double spawn_spread = 100.0;        // robots start within this radius of a
                                      // random cluster center; larger than the
                                      // arena means uniform placement
  double obstacle_clearance = 0.4;    // obstacle to robot/goal clearance at spawn
  double wall_margin = 0.3;           // keep spawns away from walls
  double goal_min_dist = 1.0;         // goal at least this far from spawn centroid
  double obstacle_radius_min = 0.12;
  double obstacle_radius_max = 0.30;
  double dynamic_speed = 0.15;        // m/s for dynamic cylinders
  int max_spawn_attempts = 2000;

  // Fixed start poses / goal for named configurations (filled by the named
  // presets or a scenario file).
  std::vector<Pose2D> fixed_poses;
  Vec2 fixed_goal = Vec2::Zero();
  bool has_fixed_goal = false;
};

// Thrown when rejection sampling exhausts max_spawn_attempts.
struct SpawnFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Builds a collision-free world, reproducible per seed.
WorldState spawn_scenario(const ScenarioSpec& spec, std::uint64_t rng_seed);

// Centroid waypoints for one of the eight S-shaped paths, expressed for the
// given arena. Path ids 1..8 vary amplitude, wavelength, phase and direction.
std::vector<Vec2> s_path_waypoints(int path_id, const Rect& arena);

// The five Fig. 5-style start configurations, reconstructed geometrically.
ScenarioSpec named_config_preset(const std::string& name);

const std::vector<std::string>& named_config_names();

// Scenario files (key/value + lists; see docs/file-formats.md).
ScenarioSpec load_scenario_file(const std::string& path);
void save_scenario_file(const ScenarioSpec& spec, const std::string& path);

}  // namespace formnav
