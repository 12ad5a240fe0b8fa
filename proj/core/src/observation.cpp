#include "formnav/observation.hpp"

#include <stdexcept>

namespace formnav {

NeighborAssignment NeighborAssignment::ring(int n_robots) {
  if (n_robots < 3) throw std::invalid_argument("ring assignment needs at least 3 robots");
  NeighborAssignment a;
  for (int i = 0; i < n_robots; ++i) {
    a.neighbors.push_back({(i + n_robots - 1) % n_robots, (i + 1) % n_robots});
  }
  return a;
}

std::pair<double, double> nearest_obstacle_from_scan(const std::vector<double>& lidar) {
  if (lidar.size() != kLidarBeams) {
    throw std::invalid_argument("nearest_obstacle_from_scan: expected 40 ranges");
  }
  int best = 0;
  for (int k = 1; k < kLidarBeams; ++k) {
    if (lidar[k] < lidar[best]) best = k;
  }
  return {lidar[best], wrap_angle(2.0 * kPi * best / kLidarBeams)};
}

ObservationVector build_observation(const WorldState& world, int robot,
                                    const NeighborAssignment& assignment, double d_ref,
                                    const ActionCmd& prev_action, const SimParams& params) {
  if (robot < 0 || robot >= world.n_robots()) {
    throw std::invalid_argument("build_observation: robot index out of range");
  }
  const Pose2D& pose = world.robots[robot].pose;
  const auto [n1, n2] = assignment.of(robot);

  const auto lidar = cast_lidar(world, robot, kLidarBeams, params.lidar_max_range);
  const auto [d_obs, theta_obs] = nearest_obstacle_from_scan(lidar);

  ObservationVector obs;
  for (int k = 0; k < kLidarBeams; ++k) obs[k] = lidar[k] / params.lidar_max_range;

  const auto [d_n1, th_n1] = relative_polar(pose, world.robots[n1].pose.position());
  const auto [d_n2, th_n2] = relative_polar(pose, world.robots[n2].pose.position());
  const auto [d_goal, th_goal] = relative_polar(pose, world.centroid_goal);
  obs[40] = d_n1;
  obs[41] = th_n1;
  obs[42] = d_n2;
  obs[43] = th_n2;
  obs[44] = d_goal;
  obs[45] = th_goal;
  obs[46] = (centroid(world) - world.centroid_goal).norm();
  obs[47] = d_obs;
  obs[48] = theta_obs;
  obs[49] = d_ref;
  obs[50] = prev_action.v;
  obs[51] = prev_action.w;
  return obs;
}

}  // namespace formnav
