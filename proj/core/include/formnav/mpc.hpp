#pragma once

#include <optional>
#include <vector>

#include "formnav/observation.hpp"
#include "formnav/world.hpp"

namespace formnav {

// Receding-horizon safety filter. Cost over a T-step rollout:
//   |a_rl - a_0|^2_R0 + sum_{k=1}^{T-1} |a_k|^2_R
//   + sum_{k=0}^{T} D ( e^{-2 d1_k} + e^{-2 d2_k} + e^{-2 dobs_k} )
// with d* the surface clearances of the predicted positions to three fixed
// anchors (two neighbors, nearest obstacle). Actions are box-constrained to
// A, predicted positions to the state box X.

struct MpcSolverParams {
  int max_iters = 40;
  double step_tol = 1e-6;
  double cost_tol = 1e-9;
  double damping_init = 1e-3;
  double damping_max = 1e9;
};

struct MpcConfig {
  int horizon = 20;
  double dt = 0.1;
  // The exponential clearance penalty has a 0.5 m e-folding length, so it
  // acts as a long-range soft repulsor; R0 close to D keeps the filter
  // permissive at formation spacing while contact stays dominated by D.
  Vec2 r0_diag = Vec2(80.0, 80.0);  // first-action deviation weight (diagonal)
  Vec2 r_diag = Vec2(0.5, 0.5);     // future-action magnitude weight (diagonal)
  double distance_weight = 100.0;   // D
  ActionBounds bounds;
  MpcSolverParams solver;
  double hard_stop_dist = 0.05;  // emergency threshold on surface clearance
  double w_escape = 1.0;         // rad/s used by the emergency rotation

  void validate() const;
};

struct MpcProblem {
  Pose2D x0;
  ActionCmd a_rl;
  Vec2 neighbor_positions[2] = {Vec2(1e30, 1e30), Vec2(1e30, 1e30)};
  Vec2 obstacle_position = Vec2(1e30, 1e30);
  double neighbor_clearance = 0.3;   // radii sum subtracted from neighbor distances
  double obstacle_clearance = 0.15;  // radii sum subtracted from the obstacle distance
  double obstacle_speed = 0.0;       // used to widen the one-step safety margin
  Rect state_box = {Vec2(-1e30, -1e30), Vec2(1e30, 1e30)};
  MpcConfig config;
};

struct MpcSolution {
  std::vector<ActionCmd> actions;  // length T
  std::vector<Pose2D> states;      // length T+1, exact rollout of actions
  double cost = 0.0;
  bool converged = false;
  int iters = 0;
};

// Repeated unicycle stepping; returns T+1 states starting at x0.
std::vector<Pose2D> rollout(const Pose2D& x0, const std::vector<ActionCmd>& actions, double dt);

double mpc_cost(const MpcProblem& problem, const std::vector<ActionCmd>& actions);

// Analytic gradient of mpc_cost w.r.t. the action sequence (adjoint sweep).
std::vector<ActionCmd> mpc_cost_gradient(const MpcProblem& problem,
                                         const std::vector<ActionCmd>& actions);

// Projected damped-Newton descent with X-feasible iterates. Never throws on
// hard instances: returns the best feasible sequence found, converged=false.
MpcSolution mpc_solve(const MpcProblem& problem,
                      const std::optional<MpcSolution>& warm_start = std::nullopt);

struct FilterResult {
  ActionCmd action;
  MpcSolution solution;
  bool emergency = false;
};

// Builds the MpcProblem for one robot from current measurements: the two
// assigned neighbors plus the nearest other object (obstacle or non-neighbor
// robot) as the obstacle anchor.
MpcProblem make_filter_problem(const WorldState& world, int robot, const ActionCmd& a_rl,
                               const NeighborAssignment& assignment, const MpcConfig& config);

// Solves and applies the first action; falls back to a zero-velocity escape
// rotation when the solver fails near contact or the first step would enter
// the hard-stop margin.
FilterResult filter_action(const WorldState& world, int robot, const ActionCmd& a_rl,
                           const NeighborAssignment& assignment, const MpcConfig& config,
                           const std::optional<MpcSolution>& warm_start = std::nullopt);

// Minimum surface clearance of one robot against everything in the world
// (robots, obstacles, walls) after applying `action` for one step. Dynamic
// obstacles are advanced by one step as well.
double one_step_clearance(const WorldState& world, int robot, const ActionCmd& action,
                          double dt);

// Stateful per-robot wrapper holding the warm start between steps.
class SafetyFilter {
 public:
  SafetyFilter(MpcConfig config, int robot) : config_(std::move(config)), robot_(robot) {}

  FilterResult step(const WorldState& world, const ActionCmd& a_rl,
                    const NeighborAssignment& assignment) {
    FilterResult result = filter_action(world, robot_, a_rl, assignment, config_, previous_);
    previous_ = result.solution;
    return result;
  }

  void reset() { previous_.reset(); }
  const MpcConfig& config() const { return config_; }

 private:
  MpcConfig config_;
  int robot_;
  std::optional<MpcSolution> previous_;
};

}  // namespace formnav
