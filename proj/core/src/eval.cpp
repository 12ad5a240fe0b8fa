#include "formnav/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "formnav/observation.hpp"

namespace formnav {

EvalScenario EvalScenario::parse(const std::string& text) {
  EvalScenario s;
  std::string head = text;
  std::string arg;
  const std::size_t colon = text.find(':');
  if (colon != std::string::npos) {
    head = text.substr(0, colon);
    arg = text.substr(colon + 1);
  }
  auto int_arg = [&](const char* what) {
    try {
      return std::stoi(arg);
    } catch (...) {
      throw std::runtime_error(std::string("scenario '") + text + "' needs an integer " + what);
    }
  };
  if (head == "single-goal") {
    s.kind = EvalKind::kSingleGoal;
  } else if (head == "single-goal-obstacles") {
    s.kind = EvalKind::kSingleGoalObstacles;
    s.k_obstacles = arg.empty() ? 3 : int_arg("obstacle count");
  } else if (head == "named-config") {
    s.kind = EvalKind::kNamedConfig;
    if (arg.empty()) throw std::runtime_error("named-config needs a name, e.g. named-config:collinear");
    s.named_config = arg;
  } else if (head == "s-path") {
    s.kind = EvalKind::kSPath;
    s.s_path_id = arg.empty() ? 1 : int_arg("path id");
  } else if (head == "generalize") {
    s.kind = EvalKind::kGeneralize;
    s.n_robots = arg.empty() ? 5 : int_arg("robot count");
  } else {
    throw std::runtime_error("unknown evaluation scenario: " + text);
  }
  return s;
}

std::string EvalScenario::describe() const {
  switch (kind) {
    case EvalKind::kSingleGoal: return "single-goal";
    case EvalKind::kSingleGoalObstacles:
      return "single-goal-obstacles:" + std::to_string(k_obstacles);
    case EvalKind::kNamedConfig: return "named-config:" + named_config;
    case EvalKind::kSPath: return "s-path:" + std::to_string(s_path_id);
    case EvalKind::kGeneralize: return "generalize:" + std::to_string(n_robots);
  }
  return "?";
}

std::vector<GaussianPolicy> load_actors(const CheckpointReader& reader) {
  const int n = static_cast<int>(reader.get_scalar("meta/n_agents"));
  const int obs_dim = static_cast<int>(reader.get_scalar("meta/obs_dim"));
  if (obs_dim != kObservationDim) {
    throw std::runtime_error("checkpoint observation width " + std::to_string(obs_dim) +
                             " does not match " + std::to_string(kObservationDim));
  }
  std::vector<GaussianPolicy> actors;
  Rng scratch(0);
  for (int i = 0; i < n; ++i) {
    GaussianPolicy actor(obs_dim, 256, scratch);
    std::vector<std::pair<std::string, Parameter*>> named;
    actor.collect_named("actor" + std::to_string(i), named);
    for (auto& [name, p] : named) {
      const Mat& v = reader.get(name);
      if (v.rows() != p->value.rows() || v.cols() != p->value.cols()) {
        throw std::runtime_error("checkpoint array '" + name + "' has the wrong shape");
      }
      p->value = v;
    }
    actors.push_back(std::move(actor));
  }
  return actors;
}

EvalReport EvalReport::aggregate(std::vector<TrialResult> rows) {
  EvalReport r;
  r.trials = static_cast<int>(rows.size());
  if (rows.empty()) return r;
  std::vector<double> completion;
  double form_sum = 0.0, goals_sum = 0.0;
  for (const auto& row : rows) {
    if (row.outcome == "success") {
      r.success_rate += 1.0;
      completion.push_back(row.completion_time);
    } else if (row.outcome == "collision") {
      r.collision_rate += 1.0;
    } else {
      r.timeout_rate += 1.0;
    }
    form_sum += row.formation_error;
    goals_sum += row.goals_fraction;
  }
  const double n = static_cast<double>(r.trials);
  r.success_rate /= n;
  r.collision_rate /= n;
  r.timeout_rate /= n;
  r.formation_mean = form_sum / n;
  double var = 0.0;
  for (const auto& row : rows) {
    var += (row.formation_error - r.formation_mean) * (row.formation_error - r.formation_mean);
  }
  r.formation_std = std::sqrt(var / n);
  if (!completion.empty()) {
    double mean = 0.0;
    for (double c : completion) mean += c;
    mean /= static_cast<double>(completion.size());
    double cvar = 0.0;
    for (double c : completion) cvar += (c - mean) * (c - mean);
    r.completion_mean = mean;
    r.completion_std = std::sqrt(cvar / static_cast<double>(completion.size()));
  }
  r.goals_reached_fraction = goals_sum / n;
  r.rows = std::move(rows);
  return r;
}

namespace {

ScenarioSpec spawn_spec_for(const EvalScenario& scenario, const EvalSetup& setup) {
  ScenarioSpec spec = setup.base;
  switch (scenario.kind) {
    case EvalKind::kSingleGoal:
      spec.kind = ScenarioKind::kEmptyWalled;
      break;
    case EvalKind::kSingleGoalObstacles:
      spec.kind = ScenarioKind::kRandomObstacles;
      spec.n_obstacles = scenario.k_obstacles;
      spec.n_dynamic_obstacles = scenario.k_dynamic;
      break;
    case EvalKind::kNamedConfig: {
      ScenarioSpec preset = spec.fixed_poses.empty() ? named_config_preset(scenario.named_config)
                                                     : spec;
      preset.d_ref = spec.d_ref;
      preset.robot_radius = spec.robot_radius;
      spec = preset;
      break;
    }
    case EvalKind::kSPath:
      spec.kind = ScenarioKind::kSPath;
      spec.s_path_id = scenario.s_path_id;
      break;
    case EvalKind::kGeneralize:
      spec.kind = ScenarioKind::kEmptyWalled;
      spec.n_robots = scenario.n_robots;
      break;
  }
  return spec;
}

class TrialRunner {
 public:
  TrialRunner(const EvalScenario& scenario, const EvalSetup& setup, int trial)
      : scenario_(scenario),
        setup_(setup),
        trial_(trial),
        rng_(mix_seed(scenario.seed, trial, 31)) {}

  TrialResult run() {
    const ScenarioSpec spec = spawn_spec_for(scenario_, setup_);
    WorldState world = spawn_scenario(spec, mix_seed(scenario_.seed, trial_, 21));
    if (scenario_.kind == EvalKind::kSPath) {
      return run_path(spec, std::move(world));
    }
    return run_goal(spec, std::move(world));
  }

 private:
  ActionCmd propose(int robot, const ObservationVector& obs) {
    switch (setup_.policy_mode) {
      case PolicyMode::kZero: return {0.0, 0.0};
      case PolicyMode::kRandom:
        return {rng_.uniform(setup_.mpc.bounds.v_min, setup_.mpc.bounds.v_max),
                rng_.uniform(setup_.mpc.bounds.w_min, setup_.mpc.bounds.w_max)};
      case PolicyMode::kCheckpoint: {
        const auto& actor = setup_.actors[robot % setup_.actors.size()];
        ActionScaler scaler{setup_.mpc.bounds};
        return actor.act_deterministic(obs, scaler);
      }
    }
    return {0.0, 0.0};
  }

  TrialResult run_goal(const ScenarioSpec& spec, WorldState world) {
    Episode episode(std::move(world), setup_.sim);
    if (!setup_.trace_dir.empty()) episode.enable_trace();
    const int n = episode.world().n_robots();
    const NeighborAssignment assignment = NeighborAssignment::ring(n);
    std::vector<SafetyFilter> filters;
    for (int i = 0; i < n; ++i) filters.emplace_back(setup_.mpc, i);
    std::vector<ActionCmd> prev(n);

    TrialResult result;
    result.trial = trial_;
    double form_sum = 0.0, dev_sum = 0.0;
    EpisodeStatus status;
    while (true) {
      std::vector<ActionCmd> actions(n);
      for (int i = 0; i < n; ++i) {
        const ObservationVector obs = build_observation(episode.world(), i, assignment,
                                                        spec.d_ref, prev[i], setup_.sim);
        const ActionCmd a_rl = propose(i, obs);
        ActionCmd a_exec = setup_.mpc.bounds.clamp(a_rl);
        if (setup_.mpc_enabled) {
          a_exec = filters[i].step(episode.world(), a_rl, assignment).action;
        }
        dev_sum += mpc_deviation(a_rl, a_exec, setup_.mpc.bounds);
        actions[i] = a_exec;
      }
      status = episode.step(actions);
      form_sum += formation_error(episode.world(), spec.d_ref);
      prev = actions;
      if (status.terminal()) break;
    }
    result.steps = episode.world().step_count;
    result.completion_time = result.steps * setup_.sim.dt;
    result.formation_error = result.steps > 0 ? form_sum / result.steps : 0.0;
    result.mean_deviation = result.steps > 0 ? dev_sum / (result.steps * n) : 0.0;
    switch (status.state) {
      case EpisodeState::kGoalReached:
        result.outcome = "success";
        result.goals_fraction = 1.0;
        break;
      case EpisodeState::kCollision:
        result.outcome = "collision";
        result.goals_fraction = 0.0;
        break;
      default:
        result.outcome = "timeout";
        result.goals_fraction = 0.0;
        break;
    }
    write_trace_if(episode);
    return result;
  }

  TrialResult run_path(const ScenarioSpec& spec, WorldState world) {
    const auto waypoints = s_path_waypoints(spec.s_path_id, spec.arena);
    SimParams params = setup_.sim;
    // The per-waypoint budget bounds the trial; the episode never times out
    // on its own clock.
    params.max_steps = kSPathStepBudget * static_cast<long>(waypoints.size()) + 1;
    world.centroid_goal = waypoints.front();
    Episode episode(std::move(world), params);
    if (!setup_.trace_dir.empty()) episode.enable_trace();
    const int n = episode.world().n_robots();
    const NeighborAssignment assignment = NeighborAssignment::ring(n);
    std::vector<SafetyFilter> filters;
    for (int i = 0; i < n; ++i) filters.emplace_back(setup_.mpc, i);
    std::vector<ActionCmd> prev(n);

    TrialResult result;
    result.trial = trial_;
    double form_sum = 0.0, dev_sum = 0.0;
    std::size_t waypoint = 0;
    long steps_at_waypoint = 0;
    int reached = 0;
    bool collided = false;
    long total_steps = 0;

    while (waypoint < waypoints.size()) {
      std::vector<ActionCmd> actions(n);
      for (int i = 0; i < n; ++i) {
        const ObservationVector obs = build_observation(episode.world(), i, assignment,
                                                        spec.d_ref, prev[i], params);
        const ActionCmd a_rl = propose(i, obs);
        ActionCmd a_exec = setup_.mpc.bounds.clamp(a_rl);
        if (setup_.mpc_enabled) {
          a_exec = filters[i].step(episode.world(), a_rl, assignment).action;
        }
        dev_sum += mpc_deviation(a_rl, a_exec, setup_.mpc.bounds);
        actions[i] = a_exec;
      }
      const EpisodeStatus status = episode.step(actions);
      form_sum += formation_error(episode.world(), spec.d_ref);
      prev = actions;
      ++total_steps;
      ++steps_at_waypoint;

      if (status.state == EpisodeState::kCollision) {
        collided = true;
        break;
      }
      // Only reaching the waypoint or exhausting its budget advances; a stuck
      // team keeps burning budget (stationary runs take exactly 200 steps per
      // waypoint).
      bool advance = false;
      if (status.state == EpisodeState::kGoalReached) {
        ++reached;
        advance = true;
      } else if (steps_at_waypoint >= kSPathStepBudget) {
        advance = true;  // counted as a waypoint timeout
      }
      if (advance) {
        ++waypoint;
        steps_at_waypoint = 0;
        if (waypoint < waypoints.size()) {
          episode.mutable_world().centroid_goal = waypoints[waypoint];
        }
      }
      if (status.terminal() && waypoint < waypoints.size()) episode.resume();
    }

    result.steps = total_steps;
    result.completion_time = total_steps * setup_.sim.dt;
    result.formation_error = total_steps > 0 ? form_sum / total_steps : 0.0;
    result.mean_deviation = total_steps > 0 ? dev_sum / (total_steps * n) : 0.0;
    result.goals_fraction =
        static_cast<double>(reached) / static_cast<double>(waypoints.size());
    result.outcome = collided ? "collision" : "success";
    write_trace_if(episode);
    return result;
  }

  void write_trace_if(const Episode& episode) {
    if (setup_.trace_dir.empty()) return;
    std::filesystem::create_directories(setup_.trace_dir);
    std::ofstream out(setup_.trace_dir + "/trial_" + std::to_string(trial_) + "_trace.csv");
    episode.write_trace(out);
  }

  const EvalScenario& scenario_;
  const EvalSetup& setup_;
  int trial_;
  Rng rng_;
};

}  // namespace

TrialResult s_path_trial(int trial_index, const EvalScenario& scenario, const EvalSetup& setup) {
  return TrialRunner(scenario, setup, trial_index).run();
}

EvalReport run_eval(const EvalScenario& scenario, const EvalSetup& setup) {
  if (scenario.trials < 1) throw std::invalid_argument("run_eval: trials must be >= 1");
  if (setup.policy_mode == PolicyMode::kCheckpoint && setup.actors.empty()) {
    throw std::invalid_argument("run_eval: checkpoint policy requested but no actors loaded");
  }
  std::vector<TrialResult> rows(scenario.trials);
  const int jobs = std::max(1, std::min(setup.jobs, scenario.trials));
  if (jobs == 1) {
    for (int t = 0; t < scenario.trials; ++t) rows[t] = TrialRunner(scenario, setup, t).run();
  } else {
    // Trials are independent; results land in their own slots, and the
    // aggregation below is ordered by trial index.
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w]() {
        for (int t = w; t < scenario.trials; t += jobs) {
          rows[t] = TrialRunner(scenario, setup, t).run();
        }
      });
    }
    for (auto& th : workers) th.join();
  }
  return EvalReport::aggregate(std::move(rows));
}

EvalReport generalize_n_robots(int n_robots, const EvalScenario& scenario,
                               const EvalSetup& setup) {
  if (n_robots < 3 || n_robots > 8) {
    throw std::invalid_argument("generalize_n_robots: n must be in 3..8");
  }
  EvalScenario s = scenario;
  s.kind = EvalKind::kGeneralize;
  s.n_robots = n_robots;
  return run_eval(s, setup);
}

}  // namespace formnav
