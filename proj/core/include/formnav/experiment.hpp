#pragma once

#include <string>
#include <vector>

#include "formnav/config.hpp"
#include "formnav/eval.hpp"
#include "formnav/trainer.hpp"

namespace formnav {

// Resolved run description: every module default is represented and
// overridable; unknown keys are rejected at parse time.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "runs/out";
  ScenarioSpec scenario;
  SimParams sim;
  RewardWeights reward;
  MpcConfig mpc;
  TrainConfig train;
  int eval_trials = 100;
  int eval_jobs = 1;

  TrainerSetup trainer_setup() const;
};

// Parses a config file plus dotted-path overrides ("train.mpc_enabled=false").
// The MPC horizon dt follows sim.dt unless set explicitly.
ExperimentConfig load_experiment_config(const std::string& path,
                                        const std::vector<std::string>& overrides = {});
ExperimentConfig experiment_from_doc(ConfigDoc doc,
                                     const std::vector<std::string>& overrides = {});

// Fully resolved snapshot; re-running from it reproduces the run exactly.
void write_config_snapshot(const ExperimentConfig& config, const std::string& path);
std::string config_snapshot_text(const ExperimentConfig& config);

// Applies FORMNAV_OUT_ROOT to relative output directories.
std::string resolve_out_dir(const std::string& out_dir);

}  // namespace formnav
