#include "formnav/scenario.hpp"

#include <algorithm>
#include <cmath>

#include "formnav/config.hpp"
#include "formnav/rng.hpp"

namespace formnav {

namespace {

bool robot_placement_ok(const std::vector<Pose2D>& placed, const Vec2& candidate,
                        const ScenarioSpec& spec) {
  for (const auto& p : placed) {
    const double clearance = (p.position() - candidate).norm() - 2.0 * spec.robot_radius;
    if (clearance < spec.spawn_clearance) return false;
  }
  return true;
}

Vec2 random_point(Rng& rng, const Rect& r, double margin) {
  return Vec2(rng.uniform(r.lo.x() + margin, r.hi.x() - margin),
              rng.uniform(r.lo.y() + margin, r.hi.y() - margin));
}

std::vector<Pose2D> spawn_robots(Rng& rng, const ScenarioSpec& spec) {
  const double margin = spec.wall_margin + spec.robot_radius;
  // Robots spawn as a loose group around a random cluster center; a spread
  // covering the arena degenerates to uniform placement.
  const Vec2 half = 0.5 * spec.arena.extent();
  const bool clustered = spec.spawn_spread + margin < half.minCoeff();
  Vec2 center = Vec2::Zero();
  if (clustered) {
    center = random_point(rng, spec.arena, margin + spec.spawn_spread);
  }
  std::vector<Pose2D> poses;
  int attempts = 0;
  while (static_cast<int>(poses.size()) < spec.n_robots) {
    if (++attempts > spec.max_spawn_attempts) {
      throw SpawnFailure("robot spawn exceeded attempt budget");
    }
    Vec2 p;
    if (clustered) {
      p = center + Vec2(rng.uniform(-spec.spawn_spread, spec.spawn_spread),
                        rng.uniform(-spec.spawn_spread, spec.spawn_spread));
      if (!spec.arena.contains(p, margin)) continue;
    } else {
      p = random_point(rng, spec.arena, margin);
    }
    if (!robot_placement_ok(poses, p, spec)) continue;
    Pose2D pose;
    pose.x = p.x();
    pose.y = p.y();
    pose.theta = wrap_angle(rng.uniform(-kPi, kPi));
    poses.push_back(pose);
  }
  return poses;
}

Vec2 spawn_goal(Rng& rng, const ScenarioSpec& spec, const std::vector<Pose2D>& poses) {
  Vec2 start_centroid = Vec2::Zero();
  for (const auto& p : poses) start_centroid += p.position();
  start_centroid /= static_cast<double>(poses.size());

  for (int attempt = 0; attempt < spec.max_spawn_attempts; ++attempt) {
    const Vec2 g = random_point(rng, spec.arena, spec.wall_margin + spec.robot_radius);
    if ((g - start_centroid).norm() >= spec.goal_min_dist) return g;
  }
  throw SpawnFailure("goal spawn exceeded attempt budget");
}

void spawn_obstacles(Rng& rng, const ScenarioSpec& spec, WorldState& world) {
  const int total = spec.n_obstacles + spec.n_dynamic_obstacles;
  int placed = 0;
  int attempts = 0;
  while (placed < total) {
    if (++attempts > spec.max_spawn_attempts) {
      throw SpawnFailure("obstacle spawn exceeded attempt budget");
    }
    const double radius = rng.uniform(spec.obstacle_radius_min, spec.obstacle_radius_max);
    const Vec2 c = random_point(rng, spec.arena, radius + 0.1);
    bool ok = true;
    for (const auto& r : world.robots) {
      if ((r.pose.position() - c).norm() - radius - spec.robot_radius <
          spec.obstacle_clearance) {
        ok = false;
        break;
      }
    }
    if (ok && (world.centroid_goal - c).norm() - radius < spec.obstacle_clearance) ok = false;
    if (ok) {
      for (const auto& o : world.obstacles) {
        if ((o.center - c).norm() < o.radius + radius) {
          ok = false;
          break;
        }
      }
    }
    if (!ok) continue;
    if (placed < spec.n_obstacles) {
      world.obstacles.push_back(Obstacle::cylinder(c, radius));
    } else {
      const double heading = rng.uniform(-kPi, kPi);
      const Vec2 vel = spec.dynamic_speed * Vec2(std::cos(heading), std::sin(heading));
      world.obstacles.push_back(Obstacle::dynamic_cylinder(c, radius, vel));
    }
    ++placed;
  }
}

}  // namespace

WorldState spawn_scenario(const ScenarioSpec& spec, std::uint64_t rng_seed) {
  if (spec.n_robots < 3) throw std::invalid_argument("scenario needs at least 3 robots");
  Rng rng(rng_seed);
  WorldState world;
  world.arena = spec.arena;
  world.robot_radius = spec.robot_radius;

  if (spec.kind == ScenarioKind::kNamedConfig) {
    ScenarioSpec preset =
        spec.fixed_poses.empty() ? named_config_preset(spec.named_config) : spec;
    world.arena = preset.arena;
    for (const auto& pose : preset.fixed_poses) {
      world.robots.push_back({pose, ActionCmd{}});
    }
    world.centroid_goal = preset.has_fixed_goal ? preset.fixed_goal
                                                : spawn_goal(rng, preset, preset.fixed_poses);
    return world;
  }

  auto poses = spawn_robots(rng, spec);
  for (const auto& pose : poses) world.robots.push_back({pose, ActionCmd{}});

  if (spec.kind == ScenarioKind::kSPath) {
    const auto waypoints = s_path_waypoints(spec.s_path_id, spec.arena);
    world.centroid_goal = waypoints.front();
  } else if (spec.has_fixed_goal) {
    world.centroid_goal = spec.fixed_goal;
  } else {
    world.centroid_goal = spawn_goal(rng, spec, poses);
  }

  if (spec.kind == ScenarioKind::kRandomObstacles) {
    spawn_obstacles(rng, spec, world);
  }
  return world;
}

std::vector<Vec2> s_path_waypoints(int path_id, const Rect& arena) {
  if (path_id < 1 || path_id > 8) throw std::invalid_argument("s-path id must be in 1..8");
  // Sinusoidal centroid paths across the arena; the eight variants change
  // amplitude, wavelength, phase, and travel direction.
  const int idx = path_id - 1;
  const double amplitude = (idx & 1) ? 1.4 : 0.9;
  const double wavelength = (idx & 2) ? 6.0 : 4.0;
  const double phase = (idx & 4) ? kPi : 0.0;
  const Vec2 span = arena.extent();
  const double x0 = arena.lo.x() + 0.15 * span.x();
  const double x1 = arena.hi.x() - 0.15 * span.x();
  const int n_waypoints = 7;
  std::vector<Vec2> out;
  for (int k = 0; k < n_waypoints; ++k) {
    const double s = static_cast<double>(k) / (n_waypoints - 1);
    const double x = x0 + s * (x1 - x0);
    const double y = amplitude * std::sin(2.0 * kPi * (x - x0) / wavelength + phase);
    out.emplace_back(x, y);
  }
  return out;
}

const std::vector<std::string>& named_config_names() {
  static const std::vector<std::string> names = {"in-formation", "3-corners", "centerline",
                                                 "collinear", "face-to-face"};
  return names;
}

ScenarioSpec named_config_preset(const std::string& name) {
  ScenarioSpec spec;
  spec.kind = ScenarioKind::kNamedConfig;
  spec.named_config = name;
  spec.has_fixed_goal = true;
  spec.arena = {Vec2(-3.0, -3.0), Vec2(3.0, 3.0)};  // layouts assume this span
  spec.d_ref = 1.0;
  auto pose = [](double x, double y, double theta) {
    Pose2D p;
    p.x = x;
    p.y = y;
    p.theta = theta;
    return p;
  };
  if (name == "in-formation") {
    // Equilateral triangle at d_ref spacing, already formed, goal across the arena.
    spec.fixed_poses = {pose(-1.8, -1.5, 0.7), pose(-0.8, -1.5, 0.7), pose(-1.3, -0.634, 0.7)};
    spec.fixed_goal = Vec2(1.6, 1.4);
  } else if (name == "3-corners") {
    spec.fixed_poses = {pose(-2.4, -2.4, kPi / 4), pose(2.4, -2.4, 3 * kPi / 4),
                        pose(-2.4, 2.4, -kPi / 4)};
    spec.fixed_goal = Vec2(1.8, 1.8);
  } else if (name == "centerline") {
    // Spread along the vertical center line, all heading +x.
    spec.fixed_poses = {pose(-2.0, -1.0, 0.0), pose(-2.0, 0.0, 0.0), pose(-2.0, 1.0, 0.0)};
    spec.fixed_goal = Vec2(2.0, 0.0);
  } else if (name == "collinear") {
    // Single file along the travel direction.
    spec.fixed_poses = {pose(-2.2, 0.0, 0.0), pose(-1.2, 0.0, 0.0), pose(-0.2, 0.0, 0.0)};
    spec.fixed_goal = Vec2(2.0, 0.0);
  } else if (name == "face-to-face") {
    // Two robots heading straight at each other, third approaching the midpoint.
    spec.fixed_poses = {pose(-1.2, 0.0, 0.0), pose(1.2, 0.0, kPi), pose(0.0, 1.2, -kPi / 2)};
    spec.fixed_goal = Vec2(0.0, -1.8);
  } else {
    throw std::invalid_argument("unknown named configuration: " + name);
  }
  return spec;
}

namespace {

const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::kEmptyWalled: return "empty-walled";
    case ScenarioKind::kRandomObstacles: return "random-obstacles";
    case ScenarioKind::kNamedConfig: return "named-config";
    case ScenarioKind::kSPath: return "s-path";
  }
  return "?";
}

ScenarioKind kind_from_string(const std::string& s) {
  if (s == "empty-walled") return ScenarioKind::kEmptyWalled;
  if (s == "random-obstacles") return ScenarioKind::kRandomObstacles;
  if (s == "named-config") return ScenarioKind::kNamedConfig;
  if (s == "s-path") return ScenarioKind::kSPath;
  throw std::runtime_error("unknown scenario kind: " + s);
}

}  // namespace

ScenarioSpec load_scenario_file(const std::string& path) {
  const ConfigDoc doc = ConfigDoc::parse_file(path);
  ConfigBinder binder(doc);
  ScenarioSpec spec;
  std::string kind = "empty-walled";
  binder.bind("kind", &kind);
  spec.kind = kind_from_string(kind);
  binder.bind("n_robots", &spec.n_robots);
  binder.bind("n_obstacles", &spec.n_obstacles);
  binder.bind("n_dynamic_obstacles", &spec.n_dynamic_obstacles);
  binder.bind("named_config", &spec.named_config);
  binder.bind("s_path_id", &spec.s_path_id);
  std::vector<double> arena;
  binder.bind_list("arena", &arena);
  if (!arena.empty()) {
    if (arena.size() != 4) throw std::runtime_error(path + ": arena needs 4 numbers");
    spec.arena = {Vec2(arena[0], arena[1]), Vec2(arena[2], arena[3])};
  }
  binder.bind("robot_radius", &spec.robot_radius);
  binder.bind("d_ref", &spec.d_ref);
  binder.bind("spawn_clearance", &spec.spawn_clearance);
  binder.bind("spawn_spread", &spec.spawn_spread);
  binder.bind("obstacle_clearance", &spec.obstacle_clearance);
  binder.bind("wall_margin", &spec.wall_margin);
  binder.bind("goal_min_dist", &spec.goal_min_dist);
  binder.bind("obstacle_radius_min", &spec.obstacle_radius_min);
  binder.bind("obstacle_radius_max", &spec.obstacle_radius_max);
  binder.bind("dynamic_speed", &spec.dynamic_speed);
  binder.bind("max_spawn_attempts", &spec.max_spawn_attempts);

  std::vector<double> goal;
  binder.bind_list("goal", &goal);
  if (!goal.empty()) {
    if (goal.size() != 2) throw std::runtime_error(path + ": goal needs 2 numbers");
    spec.fixed_goal = Vec2(goal[0], goal[1]);
    spec.has_fixed_goal = true;
  }
  std::vector<double> poses;
  binder.bind_list("robot", &poses);
  if (!poses.empty()) {
    if (poses.size() % 3 != 0) {
      throw std::runtime_error(path + ": each robot line needs x,y,theta");
    }
    for (std::size_t i = 0; i + 2 < poses.size(); i += 3) {
      Pose2D p;
      p.x = poses[i];
      p.y = poses[i + 1];
      p.theta = wrap_angle(poses[i + 2]);
      spec.fixed_poses.push_back(p);
    }
    spec.n_robots = static_cast<int>(spec.fixed_poses.size());
  }
  binder.finish();

  if (spec.kind == ScenarioKind::kNamedConfig && spec.fixed_poses.empty()) {
    ScenarioSpec preset = named_config_preset(spec.named_config);
    preset.d_ref = spec.d_ref;
    return preset;
  }
  return spec;
}

void save_scenario_file(const ScenarioSpec& spec, const std::string& path) {
  ConfigWriter w;
  w.set("kind", std::string(to_string(spec.kind)));
  w.set("n_robots", spec.n_robots);
  if (spec.n_obstacles) w.set("n_obstacles", spec.n_obstacles);
  if (spec.n_dynamic_obstacles) w.set("n_dynamic_obstacles", spec.n_dynamic_obstacles);
  if (!spec.named_config.empty()) w.set("named_config", spec.named_config);
  if (spec.kind == ScenarioKind::kSPath) w.set("s_path_id", spec.s_path_id);
  w.set("arena", std::to_string(spec.arena.lo.x()) + ", " + std::to_string(spec.arena.lo.y()) +
                     ", " + std::to_string(spec.arena.hi.x()) + ", " +
                     std::to_string(spec.arena.hi.y()));
  w.set("robot_radius", spec.robot_radius);
  w.set("d_ref", spec.d_ref);
  for (const auto& p : spec.fixed_poses) {
    w.append_list("robot", std::to_string(p.x) + ", " + std::to_string(p.y) + ", " +
                               std::to_string(p.theta));
  }
  if (spec.has_fixed_goal) {
    w.set("goal", std::to_string(spec.fixed_goal.x()) + ", " + std::to_string(spec.fixed_goal.y()));
  }
  w.write_file(path);
}

}  // namespace formnav
