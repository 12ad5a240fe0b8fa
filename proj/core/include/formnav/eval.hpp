#pragma once

#include <functional>
#include <string>
#include <vector>

#include "formnav/checkpoint.hpp"
#include "formnav/mpc.hpp"
#include "formnav/policy.hpp"
#include "formnav/reward.hpp"
#include "formnav/scenario.hpp"

namespace formnav {

enum class EvalKind { kSingleGoal, kSingleGoalObstacles, kNamedConfig, kSPath, kGeneralize };

struct EvalScenario {
  EvalKind kind = EvalKind::kSingleGoal;
  int k_obstacles = 0;       // single-goal-obstacles
  int k_dynamic = 0;
  std::string named_config;  // named-config
  int s_path_id = 1;         // s-path
  int n_robots = 3;          // generalize
  int trials = 100;
  std::uint64_t seed = 0;

  // Parses "single-goal", "single-goal-obstacles:3", "named-config:face-to-face",
  // "s-path:2", "generalize:5".
  static EvalScenario parse(const std::string& text);
  std::string describe() const;
};

enum class PolicyMode { kCheckpoint, kRandom, kZero };

struct TrialResult {
  int trial = 0;
  std::string outcome;  // success | collision | timeout
  long steps = 0;
  double completion_time = 0.0;   // seconds
  double formation_error = 0.0;   // mean over steps
  double goals_fraction = 1.0;    // waypoints reached (s-path), else 1 for success
  double mean_deviation = 0.0;    // mean filter deviation penalty per step
};

struct EvalReport {
  int trials = 0;
  double success_rate = 0.0;
  double collision_rate = 0.0;
  double timeout_rate = 0.0;
  double completion_mean = 0.0;  // over successful trials
  double completion_std = 0.0;
  double formation_mean = 0.0;
  double formation_std = 0.0;
  double goals_reached_fraction = 0.0;
  std::vector<TrialResult> rows;

  static EvalReport aggregate(std::vector<TrialResult> rows);
};

struct EvalSetup {
  ScenarioSpec base;  // arena, radii, clearances, d_ref
  SimParams sim;
  MpcConfig mpc;
  RewardWeights reward;
  bool mpc_enabled = true;
  PolicyMode policy_mode = PolicyMode::kCheckpoint;
  std::vector<GaussianPolicy> actors;  // used when policy_mode == kCheckpoint
  int jobs = 1;
  std::string trace_dir;  // when non-empty, per-trial episode traces are written
};

// Loads the decentralized actors stored by the trainer. Robots beyond the
// stored actor count reuse them round-robin.
std::vector<GaussianPolicy> load_actors(const CheckpointReader& reader);

EvalReport run_eval(const EvalScenario& scenario, const EvalSetup& setup);

// One S-path trial: waypoints advance on reach or after 200 steps without it.
TrialResult s_path_trial(int trial_index, const EvalScenario& scenario, const EvalSetup& setup);

// Table-VI protocol: a 3-robot policy on n robots, single-goal episodes.
EvalReport generalize_n_robots(int n_robots, const EvalScenario& scenario,
                               const EvalSetup& setup);

inline constexpr long kSPathStepBudget = 200;  // steps per waypoint before moving on

}  // namespace formnav
