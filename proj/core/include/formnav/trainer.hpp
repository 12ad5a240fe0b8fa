#pragma once

#include <functional>
#include <memory>
#include <string>

#include "formnav/critic.hpp"
#include "formnav/mpc.hpp"
#include "formnav/policy.hpp"
#include "formnav/replay.hpp"
#include "formnav/reward.hpp"
#include "formnav/scenario.hpp"

namespace formnav {

struct TrainConfig {
  double lr = 3e-4;
  int batch = 128;
  double gamma = 0.99;
  double tau = 0.005;
  double target_entropy = -2.0;  // -action dimension
  long episodes = 100;
  long max_steps = 1000;  // per training episode
  bool mpc_enabled = true;
  bool attention_enabled = true;
  std::uint64_t seed = 0;
  long buffer_capacity = 1000000;
  long warmup_steps = 1000;  // uniform-random action steps before updates
  int update_every = 1;      // gradient rounds every N env steps
  int updates_per_round = 1;
  long checkpoint_every = 500;  // episodes; 0 disables periodic checkpoints
};

struct EpisodeMetrics;

// Everything a training run needs, already resolved (no file I/O here).
struct TrainerSetup {
  ScenarioSpec scenario;
  SimParams sim;
  RewardWeights reward;
  MpcConfig mpc;
  TrainConfig train;
  std::string out_dir;  // metrics.csv and checkpoints land here; empty = no output
  // Progress hook (stderr logging etc.); does not affect outputs.
  std::function<void(const EpisodeMetrics&)> on_episode;
};

struct EpisodeMetrics {
  long episode = 0;
  std::vector<double> returns;  // per agent
  double formation_error = 0.0;
  int goals_reached = 0;
  int collisions = 0;
  int timeouts = 0;
  double mean_deviation_penalty = 0.0;
  double sim_time = 0.0;  // cumulative simulated seconds across the run
};

struct UpdateLosses {
  double critic_loss = 0.0;
  std::vector<double> actor_loss;
  std::vector<double> alpha;
  std::vector<double> entropy;  // -mean log pi per agent
};

// Centralized-training / decentralized-execution soft actor-critic with the
// per-robot MPC filter in the action path. Stored transitions keep the
// policy's proposed action; the executed (filtered) action only enters the
// next observation's previous-action slot.
class Trainer {
 public:
  explicit Trainer(TrainerSetup setup);

  // Full run: episodes, metrics CSV, periodic checkpoints. Returns metrics of
  // every episode in order.
  std::vector<EpisodeMetrics> run();

  // One environment step (exposed for tests): samples actions, filters,
  // steps, stores transitions. Returns the post-step status.
  EpisodeStatus step_env();

  // One gradient round on a given batch (exposed for tests).
  UpdateLosses update(const ReplayBuffer::Batch& batch);

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

  // Evaluation access.
  const GaussianPolicy& actor(int i) const { return actors_[i]; }
  int n_agents() const { return setup_.scenario.n_robots; }
  AttentionCritic& critic() { return *critic_; }
  ReplayBuffer& buffer() { return *buffer_; }
  const TrainerSetup& setup() const { return setup_; }
  long total_env_steps() const { return total_env_steps_; }
  long episodes_done() const { return episodes_done_; }

  // Starts a fresh episode (spawns a world). Used internally and by tests.
  void begin_episode();
  const WorldState& world() const { return episode_->world(); }

  struct StepRecord {
    std::vector<ActionCmd> proposed;  // a_RL
    std::vector<ActionCmd> executed;  // a_MPC (or clamped proposal)
    EpisodeStatus status;
  };
  const StepRecord& last_step() const { return last_step_; }

 private:
  ActionCmd propose_action(int agent, const ObservationVector& obs);
  void resample_goal();
  std::vector<std::pair<std::string, Parameter*>> named_parameters();

  TrainerSetup setup_;
  ActionScaler scaler_;
  NeighborAssignment assignment_;
  Rng rng_;

  std::vector<GaussianPolicy> actors_;
  std::unique_ptr<AttentionCritic> critic_;
  std::vector<double> log_alpha_;
  std::vector<Mat> alpha_m1_, alpha_m2_;  // scalar adam moments per agent
  long alpha_steps_ = 0;

  Adam critic_opt_;
  std::vector<Adam> actor_opt_;

  std::unique_ptr<ReplayBuffer> buffer_;

  std::unique_ptr<Episode> episode_;
  std::vector<SafetyFilter> filters_;
  std::vector<ActionCmd> prev_executed_;
  std::vector<ObservationVector> current_obs_;

  // Per-episode accumulators.
  std::vector<double> ep_returns_;
  double ep_formation_sum_ = 0.0;
  double ep_deviation_sum_ = 0.0;
  long ep_steps_ = 0;
  int ep_goals_ = 0;

  StepRecord last_step_;
  long total_env_steps_ = 0;
  long episodes_done_ = 0;
  bool resumed_ = false;
};

}  // namespace formnav
