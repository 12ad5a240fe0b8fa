#include "formnav/reward.hpp"

#include <cmath>
#include <stdexcept>

namespace formnav {

double mpc_deviation(const ActionCmd& a_rl, const ActionCmd& a_mpc, const ActionBounds& bounds) {
  if (!a_rl.finite() || !a_mpc.finite()) {
    throw std::invalid_argument("mpc_deviation: non-finite action");
  }
  const double dv = (a_rl.v - a_mpc.v) / bounds.v_range();
  const double dw = (a_rl.w - a_mpc.w) / bounds.w_range();
  return std::sqrt(dv * dv + dw * dw);
}

RewardBreakdown compute_reward(const WorldState& world, int robot,
                               const NeighborAssignment& assignment, double d_ref,
                               const EpisodeStatus& status, const ActionCmd& a_rl,
                               const ActionCmd& a_mpc, const RewardWeights& weights,
                               const ActionBounds& bounds) {
  RewardBreakdown out;
  if (status.state == EpisodeState::kGoalReached) {
    out.goal = weights.r_goal;
  } else if (status.collision_or_stuck()) {
    out.collision = weights.r_collision;
  } else {
    const Pose2D& pose = world.robots[robot].pose;
    const auto [n1, n2] = assignment.of(robot);
    const double d1 = (pose.position() - world.robots[n1].pose.position()).norm();
    const double d2 = (pose.position() - world.robots[n2].pose.position()).norm();
    out.formation = -weights.c_form * (std::abs(d1 - d_ref) + std::abs(d2 - d_ref));

    const double d_obs = nearest_obstacle_clearance(world, robot);
    if (d_obs < weights.d_safe) {
      out.obstacle = -weights.c_obs * (weights.d_safe - d_obs);
    }

    out.centroid = -weights.c_cent * (centroid(world) - world.centroid_goal).norm();
  }
  out.deviation = -weights.c_dev * mpc_deviation(a_rl, a_mpc, bounds);
  return out;
}

double formation_error(const WorldState& world, double d_ref) {
  const int n = world.n_robots();
  if (n < 2) throw std::invalid_argument("formation_error: need at least 2 robots");
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    const double dx = world.robots[i].pose.x - world.robots[j].pose.x;
    const double dy = world.robots[i].pose.y - world.robots[j].pose.y;
    sum += std::abs(std::sqrt(dx * dx + dy * dy) - d_ref);
  }
  return sum / static_cast<double>(n);
}

}  // namespace formnav
