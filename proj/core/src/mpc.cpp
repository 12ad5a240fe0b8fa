#include "formnav/mpc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace formnav {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Anchor {
  Vec2 position;
  double clearance_radius;
};

std::array<Anchor, 3> anchors_of(const MpcProblem& p) {
  return {Anchor{p.neighbor_positions[0], p.neighbor_clearance},
          Anchor{p.neighbor_positions[1], p.neighbor_clearance},
          Anchor{p.obstacle_position, p.obstacle_clearance}};
}

bool states_feasible(const std::vector<Pose2D>& states, const Rect& box) {
  // x0 is the measured state and not a decision; check predicted states only.
  for (std::size_t k = 1; k < states.size(); ++k) {
    if (!box.contains(states[k].position())) return false;
  }
  return true;
}

}  // namespace

void MpcConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("mpc horizon must be >= 1");
  if (dt <= 0.0) throw std::invalid_argument("mpc dt must be > 0");
  if (r0_diag.minCoeff() <= 0.0 || r_diag.minCoeff() <= 0.0) {
    throw std::invalid_argument("mpc weights must be positive definite");
  }
  if (!(r0_diag.x() > r_diag.x() && r0_diag.y() > r_diag.y())) {
    throw std::invalid_argument("R0 must dominate R");
  }
  if (distance_weight < 0.0) throw std::invalid_argument("distance weight must be >= 0");
  if (distance_weight < r0_diag.maxCoeff()) {
    throw std::invalid_argument("distance weight must dominate R0");
  }
}

std::vector<Pose2D> rollout(const Pose2D& x0, const std::vector<ActionCmd>& actions, double dt) {
  std::vector<Pose2D> states;
  states.reserve(actions.size() + 1);
  states.push_back(x0);
  for (const auto& a : actions) states.push_back(step_unicycle(states.back(), a, dt));
  return states;
}

double mpc_cost(const MpcProblem& problem, const std::vector<ActionCmd>& actions) {
  const int T = problem.config.horizon;
  if (static_cast<int>(actions.size()) != T) {
    throw std::invalid_argument("mpc_cost: action sequence length must equal horizon");
  }
  const auto states = rollout(problem.x0, actions, problem.config.dt);
  const Vec2& r0 = problem.config.r0_diag;
  const Vec2& r = problem.config.r_diag;
  const double D = problem.config.distance_weight;
  const auto anchors = anchors_of(problem);

  double cost = 0.0;
  const double dv = actions[0].v - problem.a_rl.v;
  const double dw = actions[0].w - problem.a_rl.w;
  cost += r0.x() * dv * dv + r0.y() * dw * dw;
  for (int k = 1; k < T; ++k) {
    cost += r.x() * actions[k].v * actions[k].v + r.y() * actions[k].w * actions[k].w;
  }
  for (int k = 0; k <= T; ++k) {
    const Vec2 p = states[k].position();
    for (const auto& a : anchors) {
      const double dist = (p - a.position).norm() - a.clearance_radius;
      cost += D * std::exp(-2.0 * dist);
    }
  }
  return cost;
}

std::vector<ActionCmd> mpc_cost_gradient(const MpcProblem& problem,
                                         const std::vector<ActionCmd>& actions) {
  const int T = problem.config.horizon;
  if (static_cast<int>(actions.size()) != T) {
    throw std::invalid_argument("mpc_cost_gradient: action sequence length must equal horizon");
  }
  const double dt = problem.config.dt;
  const auto states = rollout(problem.x0, actions, dt);
  const double D = problem.config.distance_weight;
  const auto anchors = anchors_of(problem);

  // Stage gradient of the distance penalties w.r.t. position at state k.
  auto stage_grad = [&](int k) -> Vec2 {
    const Vec2 p = states[k].position();
    Vec2 g = Vec2::Zero();
    for (const auto& a : anchors) {
      const Vec2 diff = p - a.position;
      const double center_dist = std::max(diff.norm(), 1e-12);
      const double dist = center_dist - a.clearance_radius;
      g += (-2.0 * D * std::exp(-2.0 * dist) / center_dist) * diff;
    }
    return g;
  };

  std::vector<ActionCmd> grad(T);
  // Adjoint lambda over [x, y, theta], swept backwards from the last state.
  Eigen::Vector3d lambda;
  const Vec2 gT = stage_grad(T);
  lambda << gT.x(), gT.y(), 0.0;

  for (int k = T - 1; k >= 0; --k) {
    const double theta = states[k].theta;
    const double c = std::cos(theta), s = std::sin(theta);
    // d cost / d a_k through the dynamics.
    grad[k].v = dt * (c * lambda.x() + s * lambda.y());
    grad[k].w = dt * lambda.z();
    // Action-term gradients.
    if (k == 0) {
      grad[k].v += 2.0 * problem.config.r0_diag.x() * (actions[0].v - problem.a_rl.v);
      grad[k].w += 2.0 * problem.config.r0_diag.y() * (actions[0].w - problem.a_rl.w);
    } else {
      grad[k].v += 2.0 * problem.config.r_diag.x() * actions[k].v;
      grad[k].w += 2.0 * problem.config.r_diag.y() * actions[k].w;
    }
    // lambda_k = stage_grad_k + A_k^T lambda_{k+1}.
    const double v = actions[k].v;
    Eigen::Vector3d next;
    next.x() = lambda.x();
    next.y() = lambda.y();
    next.z() = -s * v * dt * lambda.x() + c * v * dt * lambda.y() + lambda.z();
    const Vec2 gk = stage_grad(k);
    next.x() += gk.x();
    next.y() += gk.y();
    lambda = next;
  }
  return grad;
}

MpcSolution mpc_solve(const MpcProblem& problem, const std::optional<MpcSolution>& warm_start) {
  problem.config.validate();
  const int T = problem.config.horizon;
  const double dt = problem.config.dt;
  const ActionBounds& A = problem.config.bounds;
  const auto& solver = problem.config.solver;

  auto finalize = [&](std::vector<ActionCmd> actions, double cost, bool converged, int iters) {
    MpcSolution sol;
    sol.states = rollout(problem.x0, actions, dt);
    sol.actions = std::move(actions);
    sol.cost = cost;
    sol.converged = converged;
    sol.iters = iters;
    return sol;
  };

  // Initial guess: shifted warm start when feasible, otherwise zero actions.
  std::vector<ActionCmd> u(T);
  if (warm_start && static_cast<int>(warm_start->actions.size()) == T) {
    for (int k = 0; k < T - 1; ++k) u[k] = warm_start->actions[k + 1];
    u[T - 1] = warm_start->actions[T - 1];
    for (auto& a : u) a = A.clamp(a);
    if (!states_feasible(rollout(problem.x0, u, dt), problem.state_box)) {
      std::fill(u.begin(), u.end(), ActionCmd{});
    }
  }
  if (!states_feasible(rollout(problem.x0, u, dt), problem.state_box)) {
    std::fill(u.begin(), u.end(), ActionCmd{});
    if (!problem.state_box.contains(problem.x0.position())) {
      // Degenerate start outside X: stop is the only safe answer.
      return finalize(std::move(u), mpc_cost(problem, u), false, 0);
    }
  }

  double cost = mpc_cost(problem, u);
  double mu = solver.damping_init;
  bool converged = false;
  int iter = 0;

  while (iter < solver.max_iters) {
    ++iter;
    const auto grad = mpc_cost_gradient(problem, u);

    // Damped diagonal-Newton direction from the quadratic action terms.
    std::vector<ActionCmd> dir(T);
    double dir_norm = 0.0;
    for (int k = 0; k < T; ++k) {
      const double hv = 2.0 * (k == 0 ? problem.config.r0_diag.x() : problem.config.r_diag.x());
      const double hw = 2.0 * (k == 0 ? problem.config.r0_diag.y() : problem.config.r_diag.y());
      dir[k].v = -grad[k].v / (hv + mu);
      dir[k].w = -grad[k].w / (hw + mu);
      dir_norm = std::max(dir_norm, std::max(std::abs(dir[k].v), std::abs(dir[k].w)));
    }
    if (dir_norm < solver.step_tol) {
      converged = true;
      break;
    }

    bool accepted = false;
    double alpha = 1.0;
    for (int ls = 0; ls < 12; ++ls) {
      std::vector<ActionCmd> trial(T);
      double step_norm = 0.0;
      for (int k = 0; k < T; ++k) {
        trial[k] = A.clamp({u[k].v + alpha * dir[k].v, u[k].w + alpha * dir[k].w});
        step_norm = std::max(step_norm,
                             std::max(std::abs(trial[k].v - u[k].v), std::abs(trial[k].w - u[k].w)));
      }
      if (step_norm == 0.0) {
        // Projection pinned every coordinate: a box-constrained stationary
        // point (smaller alphas can only re-pin the same coordinates).
        if (ls == 0) converged = true;
        break;
      }
      if (states_feasible(rollout(problem.x0, trial, dt), problem.state_box)) {
        const double trial_cost = mpc_cost(problem, trial);
        if (trial_cost < cost) {
          const double decrease = cost - trial_cost;
          u = std::move(trial);
          cost = trial_cost;
          accepted = true;
          mu = std::max(mu * 0.5, 1e-8);
          if (step_norm < solver.step_tol || decrease < solver.cost_tol) converged = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (converged) break;
    if (!accepted) {
      mu *= 4.0;
      if (mu > solver.damping_max) break;  // stalled; report best found
    }
  }
  return finalize(std::move(u), cost, converged, iter);
}

MpcProblem make_filter_problem(const WorldState& world, int robot, const ActionCmd& a_rl,
                               const NeighborAssignment& assignment, const MpcConfig& config) {
  MpcProblem problem;
  problem.config = config;
  problem.x0 = world.robots[robot].pose;
  problem.a_rl = config.bounds.clamp(a_rl);
  problem.state_box = world.arena.shrunk(world.robot_radius);

  const auto [n1, n2] = assignment.of(robot);
  problem.neighbor_positions[0] = world.robots[n1].pose.position();
  problem.neighbor_positions[1] = world.robots[n2].pose.position();
  problem.neighbor_clearance = 2.0 * world.robot_radius;

  // Nearest other object: obstacles plus robots outside the neighbor pair.
  const Vec2 p = world.robots[robot].pose.position();
  double best = kInf;
  problem.obstacle_position = Vec2(1e30, 1e30);
  problem.obstacle_clearance = world.robot_radius;
  problem.obstacle_speed = 0.0;
  for (const auto& obs : world.obstacles) {
    const double clear = obs.surface_distance(p) - world.robot_radius;
    if (clear < best) {
      best = clear;
      if (obs.kind == ObstacleKind::kCylinder || obs.kind == ObstacleKind::kDynamicCylinder) {
        problem.obstacle_position = obs.center;
        problem.obstacle_clearance = obs.radius + world.robot_radius;
      } else {
        problem.obstacle_position = obs.closest_point(p);
        problem.obstacle_clearance = world.robot_radius;
      }
      problem.obstacle_speed = obs.velocity.norm();
    }
  }
  for (int j = 0; j < world.n_robots(); ++j) {
    if (j == robot || j == n1 || j == n2) continue;
    const Vec2 q = world.robots[j].pose.position();
    const double clear = (q - p).norm() - 2.0 * world.robot_radius;
    if (clear < best) {
      best = clear;
      problem.obstacle_position = q;
      problem.obstacle_clearance = 2.0 * world.robot_radius;
      problem.obstacle_speed = 0.0;
    }
  }
  return problem;
}

double one_step_clearance(const WorldState& world, int robot, const ActionCmd& action,
                          double dt) {
  const Pose2D next = step_unicycle(world.robots[robot].pose, action, dt);
  const Vec2 p = next.position();
  double clear = world.arena.wall_clearance(p) - world.robot_radius;
  for (int j = 0; j < world.n_robots(); ++j) {
    if (j == robot) continue;
    clear = std::min(clear,
                     (world.robots[j].pose.position() - p).norm() - 2.0 * world.robot_radius);
  }
  for (const auto& obs : world.obstacles) {
    Obstacle moved = obs;
    if (obs.dynamic()) moved.center += obs.velocity * dt;
    clear = std::min(clear, moved.surface_distance(p) - world.robot_radius);
  }
  return clear;
}

FilterResult filter_action(const WorldState& world, int robot, const ActionCmd& a_rl,
                           const NeighborAssignment& assignment, const MpcConfig& config,
                           const std::optional<MpcSolution>& warm_start) {
  const MpcProblem problem = make_filter_problem(world, robot, a_rl, assignment, config);
  MpcSolution solution = mpc_solve(problem, warm_start);

  FilterResult result;
  result.solution = solution;
  result.action = solution.actions.front();

  // Emergency handling: a zero-velocity rotation away from the nearest anchor.
  auto emergency_action = [&]() {
    const Vec2 p = world.robots[robot].pose.position();
    double best = kInf;
    Vec2 toward = Vec2(1.0, 0.0);
    const auto anchors = anchors_of(problem);
    for (const auto& a : anchors) {
      const double d = (a.position - p).norm() - a.clearance_radius;
      if (d < best) {
        best = d;
        toward = a.position - p;
      }
    }
    const double bearing =
        wrap_angle(std::atan2(toward.y(), toward.x()) - world.robots[robot].pose.theta);
    return ActionCmd{0.0, bearing >= 0.0 ? -config.w_escape : config.w_escape};
  };

  if (!solution.converged) {
    double min_clear = kInf;
    const auto anchors = anchors_of(problem);
    for (std::size_t k = 1; k < solution.states.size(); ++k) {
      for (const auto& a : anchors) {
        min_clear = std::min(min_clear,
                             (solution.states[k].position() - a.position).norm() -
                                 a.clearance_radius);
      }
    }
    if (min_clear < config.hard_stop_dist) {
      result.action = emergency_action();
      result.emergency = true;
    }
  }

  // Verified first step: never execute an action whose immediate successor
  // state enters the hard-stop margin while still translating.
  if (!result.emergency && result.action.v > 0.0) {
    const double margin = config.hard_stop_dist + problem.obstacle_speed * config.dt;
    if (one_step_clearance(world, robot, result.action, config.dt) < margin) {
      result.action = emergency_action();
      result.emergency = true;
    }
  }
  return result;
}

}  // namespace formnav
