#include "formnav/world.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "formnav/rng.hpp"
#include "formnav/scenario.hpp"

using namespace formnav;

namespace {

WorldState three_robot_world() {
  WorldState world;
  world.arena = {Vec2(-3, -3), Vec2(3, 3)};
  world.robots = {{{0.0, 0.0, 0.0}, {}}, {{1.5, 0.0, 0.0}, {}}, {{0.0, 1.5, 0.0}, {}}};
  world.centroid_goal = Vec2(2.0, 2.0);
  return world;
}

}  // namespace

TEST(StepWorld, ZeroActionsKeepPoses) {
  const WorldState world = three_robot_world();
  SimParams params;
  auto [next, status] = step_world(world, {{}, {}, {}}, 0.1, params);
  EXPECT_EQ(status.state, EpisodeState::kRunning);
  EXPECT_EQ(next.step_count, 1);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(next.robots[i].pose.x, world.robots[i].pose.x);
    EXPECT_EQ(next.robots[i].pose.y, world.robots[i].pose.y);
  }
}

TEST(StepWorld, ActionCountMismatchThrows) {
  const WorldState world = three_robot_world();
  SimParams params;
  EXPECT_THROW(step_world(world, {{}, {}}, 0.1, params), std::invalid_argument);
}

TEST(StepWorld, RobotPairCloserThanDiameterIsCollision) {
  WorldState world = three_robot_world();
  world.robots[1].pose = {2.0 * world.robot_radius - 1e-3, 0.0, 0.0};
  SimParams params;
  auto [next, status] = step_world(world, {{}, {}, {}}, 0.1, params);
  EXPECT_EQ(status.state, EpisodeState::kCollision);
  ASSERT_TRUE(status.offending_robot.has_value());
}

TEST(StepWorld, ObstacleContactIsCollision) {
  WorldState world = three_robot_world();
  world.obstacles.push_back(Obstacle::cylinder(Vec2(0.3, 0.0), 0.2));
  // Surface distance from robot 0 at origin: 0.3 - 0.2 = 0.1 < robot_radius.
  SimParams params;
  auto [next, status] = step_world(world, {{}, {}, {}}, 0.1, params);
  EXPECT_EQ(status.state, EpisodeState::kCollision);
  EXPECT_EQ(status.offending_robot.value(), 0);
}

TEST(StepWorld, TimeoutAtMaxSteps) {
  WorldState world = three_robot_world();
  world.step_count = 99;
  SimParams params;
  params.max_steps = 100;
  auto [next, status] = step_world(world, {{}, {}, {}}, 0.1, params);
  EXPECT_EQ(status.state, EpisodeState::kTimeout);
  EXPECT_FALSE(status.offending_robot.has_value());
}

TEST(StepWorld, GoalReachedWhenCentroidClose) {
  WorldState world = three_robot_world();
  world.centroid_goal = centroid(world);
  SimParams params;
  auto [next, status] = step_world(world, {{}, {}, {}}, 0.1, params);
  EXPECT_EQ(status.state, EpisodeState::kGoalReached);
}

TEST(StepWorld, DynamicObstacleReflectsOffWalls) {
  WorldState world = three_robot_world();
  world.obstacles.push_back(
      Obstacle::dynamic_cylinder(Vec2(2.85, -2.0), 0.1, Vec2(1.0, 0.0)));
  SimParams params;
  auto [next, status] = step_world(world, {{}, {}, {}}, 0.1, params);
  // 2.85 + 0.1 dt would exceed 3 - radius = 2.9; reflected back.
  EXPECT_NEAR(next.obstacles[0].center.x(), 2.9, 1e-12);
  EXPECT_LT(next.obstacles[0].velocity.x(), 0.0);
}

TEST(CastLidar, EmptyArenaFarFromWallsSaturates) {
  WorldState world;
  world.arena = {Vec2(-10, -10), Vec2(10, 10)};
  world.robots = {{{0, 0, 0}, {}}};
  const auto ranges = cast_lidar(world, 0, 40, 3.5);
  ASSERT_EQ(ranges.size(), 40u);
  for (double r : ranges) EXPECT_EQ(r, 3.5);
}

TEST(CastLidar, CylinderDirectlyAhead) {
  WorldState world;
  world.arena = {Vec2(-10, -10), Vec2(10, 10)};
  world.robots = {{{0, 0, 0}, {}}};
  world.obstacles.push_back(Obstacle::cylinder(Vec2(1.0, 0.0), 0.2));
  const auto ranges = cast_lidar(world, 0, 40, 3.5);
  EXPECT_NEAR(ranges[0], 0.8, 1e-6);
}

TEST(CastLidar, OtherRobotAtBearingPiOverTwo) {
  WorldState world;
  world.arena = {Vec2(-10, -10), Vec2(10, 10)};
  const double d = 1.4;
  world.robots = {{{0, 0, 0}, {}}, {{0, d, 0}, {}}};
  const auto ranges = cast_lidar(world, 0, 40, 3.5);
  // Beam 10 points at +pi/2 in the body frame.
  EXPECT_NEAR(ranges[10], d - world.robot_radius, 1e-9);
}

TEST(CastLidar, RangesWithinBoundsAndMonotoneInObstacleDistance) {
  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    WorldState world;
    world.arena = {Vec2(-5, -5), Vec2(5, 5)};
    world.robots = {{{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-kPi, kPi)}, {}}};
    const double d_far = rng.uniform(1.5, 3.0);
    const double radius = rng.uniform(0.1, 0.4);
    const double bearing = rng.uniform(-kPi, kPi);
    const Vec2 dir(std::cos(world.robots[0].pose.theta + bearing),
                   std::sin(world.robots[0].pose.theta + bearing));
    WorldState near_world = world;
    world.obstacles.push_back(
        Obstacle::cylinder(world.robots[0].pose.position() + d_far * dir, radius));
    near_world.obstacles.push_back(
        Obstacle::cylinder(world.robots[0].pose.position() + (d_far - 0.5) * dir, radius));
    const auto far_ranges = cast_lidar(world, 0, 40, 3.5);
    const auto near_ranges = cast_lidar(near_world, 0, 40, 3.5);
    for (int k = 0; k < 40; ++k) {
      EXPECT_GE(far_ranges[k], 0.0);
      EXPECT_LE(far_ranges[k], 3.5);
      // Pulling the obstacle closer along its bearing never lengthens a beam.
      EXPECT_LE(near_ranges[k], far_ranges[k] + 1e-12);
    }
  }
}

TEST(Centroid, MeanAndTranslationInvariance) {
  WorldState world;
  world.robots = {{{0, 0, 0}, {}}, {{2, 0, 0}, {}}, {{1, 3, 0}, {}}};
  const Vec2 c = centroid(world);
  EXPECT_NEAR(c.x(), 1.0, 1e-15);
  EXPECT_NEAR(c.y(), 1.0, 1e-15);

  WorldState single;
  single.robots = {{{-0.7, 2.3, 0.1}, {}}};
  const Vec2 s = centroid(single);
  EXPECT_EQ(s.x(), -0.7);
  EXPECT_EQ(s.y(), 2.3);

  const Vec2 t(0.5, -1.25);
  for (auto& r : world.robots) {
    r.pose.x += t.x();
    r.pose.y += t.y();
  }
  const Vec2 moved = centroid(world);
  EXPECT_NEAR(moved.x(), c.x() + t.x(), 1e-12);
  EXPECT_NEAR(moved.y(), c.y() + t.y(), 1e-12);
}

TEST(DetectStuck, ZeroMotionIsStuck) {
  std::deque<std::vector<Vec2>> history;
  for (int i = 0; i < 51; ++i) history.push_back({Vec2(1, 1), Vec2(2, 2)});
  EXPECT_TRUE(detect_stuck(history, 0.01, 50));
}

TEST(DetectStuck, ConstantMotionIsNotStuck) {
  std::deque<std::vector<Vec2>> history;
  for (int i = 0; i < 51; ++i) {
    history.push_back({Vec2(0.02 * i, 0.0), Vec2(1.0, 0.02 * i)});
  }
  EXPECT_FALSE(detect_stuck(history, 0.01, 50));
}

TEST(DetectStuck, OscillationWithSmallNetDisplacementIsStuck) {
  std::deque<std::vector<Vec2>> history;
  for (int i = 0; i < 51; ++i) {
    const double wiggle = (i % 2 == 0) ? 0.0 : 0.05;
    history.push_back({Vec2(wiggle, 0.0)});
  }
  // Window endpoints (both even) are 0 apart even though the path wiggles.
  EXPECT_TRUE(detect_stuck(history, 0.01, 50));
}

TEST(DetectStuck, ShortWindowIsNeverStuck) {
  std::deque<std::vector<Vec2>> history;
  for (int i = 0; i < 10; ++i) history.push_back({Vec2(0, 0)});
  EXPECT_FALSE(detect_stuck(history, 0.01, 50));
}

TEST(Episode, StuckTerminatesWithOffendingRobot) {
  WorldState world = three_robot_world();
  SimParams params;
  params.stuck_window = 5;
  params.max_steps = 100;
  Episode episode(world, params);
  EpisodeStatus status;
  int steps = 0;
  while (!episode.status().terminal() && steps < 20) {
    status = episode.step({{}, {}, {}});
    ++steps;
  }
  EXPECT_EQ(status.state, EpisodeState::kStuck);
  EXPECT_EQ(steps, params.stuck_window);  // fires as soon as the window fills
  EXPECT_TRUE(status.offending_robot.has_value());
  EXPECT_THROW(episode.step({{}, {}, {}}), std::logic_error);
}

TEST(Episode, TraceHasHeaderAndRows) {
  WorldState world = three_robot_world();
  SimParams params;
  Episode episode(world, params);
  episode.enable_trace();
  episode.step({{0.1, 0.0}, {0.1, 0.0}, {0.1, 0.0}});
  episode.step({{0.1, 0.0}, {0.1, 0.0}, {0.1, 0.0}});
  std::ostringstream out;
  episode.write_trace(out);
  const std::string text = out.str();
  EXPECT_NE(text.find("step,x0,y0,theta0,v0,w0"), std::string::npos);
  EXPECT_NE(text.find("running"), std::string::npos);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);  // header + 2 rows
}

TEST(Episode, SameSeedGivesBitwiseIdenticalTraces) {
  ScenarioSpec spec;
  spec.kind = ScenarioKind::kRandomObstacles;
  spec.n_obstacles = 3;
  auto run = [&]() {
    WorldState world = spawn_scenario(spec, 42);
    SimParams params;
    params.max_steps = 50;
    Episode episode(world, params);
    episode.enable_trace();
    Rng rng(99);
    while (!episode.status().terminal()) {
      std::vector<ActionCmd> actions;
      for (int i = 0; i < world.n_robots(); ++i) {
        actions.push_back({rng.uniform(0.0, 0.22), rng.uniform(-2.84, 2.84)});
      }
      episode.step(actions);
    }
    std::ostringstream out;
    episode.write_trace(out);
    return out.str();
  };
  EXPECT_EQ(run(), run());
}
