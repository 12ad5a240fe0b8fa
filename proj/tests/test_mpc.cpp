#include "formnav/mpc.hpp"

#include <gtest/gtest.h>

#include "formnav/rng.hpp"
#include "formnav/scenario.hpp"

using namespace formnav;

namespace {

MpcProblem open_space_problem(const ActionCmd& a_rl) {
  MpcProblem p;
  p.x0 = {0, 0, 0};
  p.a_rl = a_rl;
  return p;  // anchors default to 1e30 away, state box unbounded
}

MpcProblem random_problem(Rng& rng, bool near_anchors) {
  MpcProblem p;
  p.x0 = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-kPi, kPi)};
  p.a_rl = {rng.uniform(0.0, 0.22), rng.uniform(-2.84, 2.84)};
  if (near_anchors) {
    for (int m = 0; m < 2; ++m) {
      const double r = rng.uniform(0.4, 1.5);
      const double a = rng.uniform(-kPi, kPi);
      p.neighbor_positions[m] =
          p.x0.position() + r * Vec2(std::cos(a), std::sin(a));
    }
    const double r = rng.uniform(0.4, 1.5);
    const double a = rng.uniform(-kPi, kPi);
    p.obstacle_position = p.x0.position() + r * Vec2(std::cos(a), std::sin(a));
  }
  return p;
}

std::vector<ActionCmd> random_actions(Rng& rng, int T) {
  std::vector<ActionCmd> u(T);
  for (auto& a : u) {
    a.v = rng.uniform(0.0, 0.22);
    a.w = rng.uniform(-2.84, 2.84);
  }
  return u;
}

}  // namespace

TEST(Rollout, ZeroActionsStayPut) {
  const std::vector<ActionCmd> u(20);
  const auto states = rollout({0.3, -0.2, 0.5}, u, 0.1);
  ASSERT_EQ(states.size(), 21u);
  for (const auto& s : states) {
    EXPECT_EQ(s.x, 0.3);
    EXPECT_EQ(s.y, -0.2);
    EXPECT_EQ(s.theta, 0.5);
  }
}

TEST(Rollout, ConstantForwardClosedForm) {
  const std::vector<ActionCmd> u(10, ActionCmd{0.2, 0.0});
  const auto states = rollout({0, 0, 0}, u, 0.1);
  for (std::size_t k = 0; k < states.size(); ++k) {
    EXPECT_NEAR(states[k].x, 0.02 * static_cast<double>(k), 1e-12);
    EXPECT_EQ(states[k].y, 0.0);
  }
}

TEST(Rollout, ConstantRotationClosedForm) {
  const std::vector<ActionCmd> u(10, ActionCmd{0.0, 0.5});
  const auto states = rollout({1, 2, 0}, u, 0.1);
  for (std::size_t k = 0; k < states.size(); ++k) {
    EXPECT_EQ(states[k].x, 1.0);
    EXPECT_EQ(states[k].y, 2.0);
    EXPECT_NEAR(states[k].theta, 0.05 * static_cast<double>(k), 1e-12);
  }
}

TEST(MpcCost, AnchorsAtInfinityVanish) {
  MpcProblem p = open_space_problem({0.1, 0.3});
  std::vector<ActionCmd> u(p.config.horizon);
  u[0] = p.a_rl;  // remaining actions zero
  EXPECT_EQ(mpc_cost(p, u), 0.0);
}

TEST(MpcCost, FirstActionDeviationIsWeightedSquare) {
  MpcProblem p = open_space_problem({0.2, 1.0});
  std::vector<ActionCmd> u(p.config.horizon);
  u[0] = {0.1, 0.5};
  const double dv = 0.2 - 0.1, dw = 1.0 - 0.5;
  const double expected = p.config.r0_diag.x() * dv * dv + p.config.r0_diag.y() * dw * dw;
  EXPECT_NEAR(mpc_cost(p, u), expected, 1e-12);
}

TEST(MpcCost, StaticRobotSingleStepHandExpansion) {
  // T = 1, zero actions, obstacle at clearance d, neighbors at clearances d1, d2:
  // both horizon states sit at x0, so each anchor contributes twice.
  MpcProblem p;
  p.config.horizon = 1;
  p.x0 = {0, 0, 0};
  p.a_rl = {0, 0};
  p.obstacle_position = Vec2(1.0, 0.0);
  p.obstacle_clearance = 0.35;  // d_obs = 0.65
  p.neighbor_positions[0] = Vec2(0.0, 2.0);
  p.neighbor_positions[1] = Vec2(-3.0, 0.0);
  p.neighbor_clearance = 0.3;  // d1 = 1.7, d2 = 2.7
  const std::vector<ActionCmd> u(1);
  const double D = p.config.distance_weight;
  const double expected = 2.0 * D *
                          (std::exp(-2.0 * 0.65) + std::exp(-2.0 * 1.7) + std::exp(-2.0 * 2.7));
  EXPECT_NEAR(mpc_cost(p, u), expected, 1e-9);
}

TEST(MpcGradient, MatchesCentralFiniteDifferences) {
  Rng rng(23);
  const double h = 1e-6;
  for (int instance = 0; instance < 50; ++instance) {
    MpcProblem p = random_problem(rng, instance % 2 == 0);
    std::vector<ActionCmd> u = random_actions(rng, p.config.horizon);
    const auto grad = mpc_cost_gradient(p, u);
    for (int k = 0; k < p.config.horizon; k += 5) {
      for (int axis = 0; axis < 2; ++axis) {
        auto up = u, dn = u;
        double& pu = axis == 0 ? up[k].v : up[k].w;
        double& pd = axis == 0 ? dn[k].v : dn[k].w;
        pu += h;
        pd -= h;
        const double fd = (mpc_cost(p, up) - mpc_cost(p, dn)) / (2.0 * h);
        const double an = axis == 0 ? grad[k].v : grad[k].w;
        const double rel = std::abs(fd - an) / std::max(1.0, std::abs(an));
        EXPECT_LT(rel, 1e-5) << "instance " << instance << " k=" << k << " axis=" << axis;
      }
    }
  }
}

TEST(MpcSolve, OpenSpacePassThrough) {
  Rng rng(29);
  for (int i = 0; i < 20; ++i) {
    MpcProblem p = open_space_problem(
        {rng.uniform(0.0, 0.22), rng.uniform(-2.84, 2.84)});
    const MpcSolution sol = mpc_solve(p);
    EXPECT_TRUE(sol.converged);
    const double dist = std::hypot(sol.actions[0].v - p.a_rl.v, sol.actions[0].w - p.a_rl.w);
    EXPECT_LT(dist, 1e-3);
  }
}

TEST(MpcSolve, RolloutConsistencyAndBoxes) {
  Rng rng(31);
  for (int i = 0; i < 20; ++i) {
    MpcProblem p = random_problem(rng, true);
    p.state_box = {Vec2(-4, -4), Vec2(4, 4)};
    const MpcSolution sol = mpc_solve(p);
    ASSERT_EQ(sol.states.size(), sol.actions.size() + 1);
    for (std::size_t k = 0; k < sol.actions.size(); ++k) {
      const Pose2D expect = step_unicycle(sol.states[k], sol.actions[k], p.config.dt);
      EXPECT_NEAR(sol.states[k + 1].x, expect.x, 1e-12);
      EXPECT_NEAR(sol.states[k + 1].y, expect.y, 1e-12);
      EXPECT_NEAR(sol.states[k + 1].theta, expect.theta, 1e-12);
      EXPECT_TRUE(p.config.bounds.contains(sol.actions[k]));
      EXPECT_TRUE(p.state_box.contains(sol.states[k + 1].position()));
    }
  }
}

TEST(MpcSolve, BrakesBeforeObstacleVersusGridOracle) {
  // Full speed at an obstacle 0.3 m ahead: the filter must slow down, and the
  // chosen first action must cost no more than the best constant sequence
  // found by brute force over a coarse grid.
  MpcProblem p;
  p.x0 = {0, 0, 0};
  p.a_rl = {0.22, 0.0};
  p.obstacle_position = Vec2(0.3 + 0.15, 0.0);
  p.obstacle_clearance = 0.15;  // surface clearance 0.3 from x0
  const MpcSolution sol = mpc_solve(p);
  EXPECT_LT(sol.actions[0].v, 0.22);

  double best_grid_cost = std::numeric_limits<double>::infinity();
  for (int vi = 0; vi <= 11; ++vi) {
    for (int wi = -6; wi <= 6; ++wi) {
      const ActionCmd a{0.02 * vi, 0.4 * wi};
      std::vector<ActionCmd> u(p.config.horizon, a);
      best_grid_cost = std::min(best_grid_cost, mpc_cost(p, u));
    }
  }
  EXPECT_LE(sol.cost, best_grid_cost + 1e-9);
}

TEST(MpcSolve, WarmStartAtOptimumConvergesImmediately) {
  // The solver shifts the warm start by one step, so hand it a sequence whose
  // shift lands exactly on the open-space optimum (a_rl, 0, ..., 0).
  MpcProblem p = open_space_problem({0.15, -0.8});
  const MpcSolution reference = mpc_solve(p);
  ASSERT_TRUE(reference.converged);
  MpcSolution warm = reference;
  warm.actions.insert(warm.actions.begin(), ActionCmd{0.05, 0.3});
  warm.actions.pop_back();
  const MpcSolution second = mpc_solve(p, warm);
  EXPECT_TRUE(second.converged);
  EXPECT_LE(second.iters, 2);
  const double dist =
      std::hypot(second.actions[0].v - p.a_rl.v, second.actions[0].w - p.a_rl.w);
  EXPECT_LT(dist, 1e-3);
}

TEST(MpcSolve, MonotoneDescentAcrossAcceptedIterates) {
  // The solver only replaces the iterate when cost strictly decreases, so the
  // final cost can never exceed the initial guess's cost.
  Rng rng(37);
  for (int i = 0; i < 30; ++i) {
    MpcProblem p = random_problem(rng, true);
    const std::vector<ActionCmd> zeros(p.config.horizon);
    const double zero_cost = mpc_cost(p, zeros);
    const MpcSolution sol = mpc_solve(p);
    EXPECT_LE(sol.cost, zero_cost + 1e-12);
    EXPECT_NEAR(sol.cost, mpc_cost(p, sol.actions), 1e-9);
  }
}

TEST(MpcConfig, WeightOrderingEnforced) {
  MpcConfig bad;
  bad.r0_diag = Vec2(0.1, 0.1);  // must dominate R
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  MpcConfig bad2;
  bad2.distance_weight = 1.0;  // must dominate R0
  EXPECT_THROW(bad2.validate(), std::invalid_argument);
  MpcConfig good;
  EXPECT_NO_THROW(good.validate());
}

TEST(FilterAction, OpenSpacePassThrough) {
  ScenarioSpec spec;
  spec.arena = {Vec2(-20, -20), Vec2(20, 20)};
  spec.spawn_clearance = 6.0;  // anchors far apart
  spec.spawn_spread = 100.0;   // no clustering
  spec.wall_margin = 4.0;
  const WorldState world = spawn_scenario(spec, 3);
  const auto assignment = NeighborAssignment::ring(3);
  MpcConfig config;
  Rng rng(41);
  for (int i = 0; i < 30; ++i) {
    const ActionCmd a_rl{rng.uniform(0.0, 0.22), rng.uniform(-2.84, 2.84)};
    const FilterResult result = filter_action(world, 0, a_rl, assignment, config);
    EXPECT_FALSE(result.emergency);
    EXPECT_LT(std::hypot(result.action.v - a_rl.v, result.action.w - a_rl.w), 1e-3);
  }
}

TEST(FilterAction, OutOfBoundsProposalIsProjected) {
  ScenarioSpec spec;
  spec.arena = {Vec2(-20, -20), Vec2(20, 20)};
  spec.spawn_clearance = 6.0;
  spec.spawn_spread = 100.0;
  spec.wall_margin = 4.0;
  const WorldState world = spawn_scenario(spec, 3);
  const auto assignment = NeighborAssignment::ring(3);
  MpcConfig config;
  const FilterResult result = filter_action(world, 0, {5.0, -9.0}, assignment, config);
  EXPECT_TRUE(config.bounds.contains(result.action));
}

TEST(FilterAction, HeadOnPairReducesClosingSpeedAndKeepsSeparation) {
  WorldState world;
  world.arena = {Vec2(-5, -5), Vec2(5, 5)};
  world.robots = {{{-0.4, 0, 0}, {}}, {{0.4, 0, kPi}, {}}, {{0, 4.0, 0}, {}}};
  world.centroid_goal = Vec2(0, 0);
  const auto assignment = NeighborAssignment::ring(3);
  MpcConfig config;
  const ActionCmd full{0.22, 0.0};
  const FilterResult r0 = filter_action(world, 0, full, assignment, config);
  const FilterResult r1 = filter_action(world, 1, full, assignment, config);
  // Closing speed strictly reduced on both sides.
  EXPECT_LT(r0.action.v + r1.action.v, 2 * 0.22);
  // Joint rollout of both solutions never violates the robot diameter.
  for (std::size_t k = 0; k < r0.solution.states.size(); ++k) {
    const double dist =
        (r0.solution.states[k].position() - r1.solution.states[k].position()).norm();
    EXPECT_GE(dist, 2.0 * world.robot_radius);
  }
}

TEST(FilterAction, EmergencyStopsTranslationNearContact) {
  WorldState world;
  world.arena = {Vec2(-5, -5), Vec2(5, 5)};
  // Robot 1 just outside the collision diameter of robot 0, dead ahead.
  world.robots = {{{0, 0, 0}, {}}, {{0.34, 0, kPi}, {}}, {{0, 4.0, 0}, {}}};
  world.centroid_goal = Vec2(0, 0);
  const auto assignment = NeighborAssignment::ring(3);
  MpcConfig config;
  const FilterResult r = filter_action(world, 0, {0.22, 0.0}, assignment, config);
  // Whatever the solver did, the executed action cannot step into the
  // hard-stop margin: surface clearance is 0.04 < hard_stop_dist.
  const double clearance_after = one_step_clearance(world, 0, r.action, config.dt);
  EXPECT_GE(clearance_after, 0.0);
  EXPECT_LE(r.action.v, 0.01);
}

TEST(FilterAction, StateBoxKeepsRobotOffWalls) {
  WorldState world;
  world.arena = {Vec2(-2, -2), Vec2(2, 2)};
  // Facing the wall from 0.3 m away (clearance 0.15 beyond the radius).
  world.robots = {{{1.7, 0, 0}, {}}, {{-1.0, 1.0, 0}, {}}, {{-1.0, -1.0, 0}, {}}};
  world.centroid_goal = Vec2(0, 0);
  const auto assignment = NeighborAssignment::ring(3);
  MpcConfig config;
  const FilterResult r = filter_action(world, 0, {0.22, 0.0}, assignment, config);
  const Rect box = world.arena.shrunk(world.robot_radius);
  for (std::size_t k = 1; k < r.solution.states.size(); ++k) {
    EXPECT_TRUE(box.contains(r.solution.states[k].position())) << "state " << k;
  }
}
