#pragma once

#include <vector>

#include "formnav/world.hpp"

namespace formnav {

// Layout of the 52-entry per-robot observation:
//   [0..39]  lidar ranges normalized by max_range
//   [40,41]  distance / body-frame bearing to neighbor 1
//   [42,43]  distance / body-frame bearing to neighbor 2
//   [44,45]  distance / body-frame bearing to the centroid goal
//   [46]     distance from the formation centroid to the goal
//   [47,48]  distance / body-frame bearing of the nearest scan return
//   [49]     reference inter-robot distance d_ref
//   [50,51]  previous executed action (v, w)
inline constexpr int kLidarBeams = 40;
inline constexpr int kObservationDim = 52;

using ObservationVector = Eigen::Matrix<double, kObservationDim, 1>;

// Fixed two-neighbor topology. Ring: robot i observes i-1 and i+1 (mod N),
// which keeps the observation size independent of the team size.
struct NeighborAssignment {
  std::vector<std::pair<int, int>> neighbors;

  static NeighborAssignment ring(int n_robots);
  const std::pair<int, int>& of(int robot) const { return neighbors.at(robot); }
  int size() const { return static_cast<int>(neighbors.size()); }
};

// Minimum range in a scan and the body-frame angle of its beam; ties break
// toward the lowest beam index.
std::pair<double, double> nearest_obstacle_from_scan(const std::vector<double>& lidar);

ObservationVector build_observation(const WorldState& world, int robot,
                                    const NeighborAssignment& assignment, double d_ref,
                                    const ActionCmd& prev_action, const SimParams& params);

}  // namespace formnav
