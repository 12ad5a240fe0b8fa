#pragma once

#include "formnav/observation.hpp"
#include "formnav/world.hpp"

namespace formnav {

// Defaults keep the dense terms small against the sparse ones. The
// collision/stuck penalty must exceed any discounted stream of dense
// penalties (roughly c_dense / (1 - gamma)), otherwise ending the episode
// early is the best available policy and the agents learn to freeze.
struct RewardWeights {
  double r_goal = 20.0;
  double r_collision = -250.0;  // also applied when stuck
  double c_form = 0.5;
  double c_obs = 1.0;
  double c_cent = 0.5;
  double c_dev = 0.5;
  double d_safe = 0.5;  // obstacle term active below this clearance
};

struct RewardBreakdown {
  double goal = 0.0;
  double collision = 0.0;
  double formation = 0.0;
  double obstacle = 0.0;
  double centroid = 0.0;
  double deviation = 0.0;

  double total() const { return goal + collision + formation + obstacle + centroid + deviation; }
  std::vector<std::pair<const char*, double>> components() const {
    return {{"goal", goal},         {"collision", collision}, {"formation", formation},
            {"obstacle", obstacle}, {"centroid", centroid},   {"deviation", deviation}};
  }
};

// Bound-scaled Euclidean distance between two actions, so v and w deviations
// are commensurate. Symmetric, zero iff equal.
double mpc_deviation(const ActionCmd& a_rl, const ActionCmd& a_mpc, const ActionBounds& bounds);

// Per-robot reward with mutually exclusive branches (goal / collision-or-
// stuck / dense shaping) plus the deviation penalty in every branch.
RewardBreakdown compute_reward(const WorldState& world, int robot,
                               const NeighborAssignment& assignment, double d_ref,
                               const EpisodeStatus& status, const ActionCmd& a_rl,
                               const ActionCmd& a_mpc, const RewardWeights& weights,
                               const ActionBounds& bounds);

// Mean absolute deviation of the N ring-edge distances from d_ref.
double formation_error(const WorldState& world, double d_ref);

}  // namespace formnav
