#include "formnav/experiment.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "formnav/csv.hpp"

namespace formnav {

TrainerSetup ExperimentConfig::trainer_setup() const {
  TrainerSetup setup;
  setup.scenario = scenario;
  setup.sim = sim;
  setup.reward = reward;
  setup.mpc = mpc;
  setup.train = train;
  setup.train.seed = seed;
  setup.out_dir = resolve_out_dir(out_dir);
  return setup;
}

namespace {

ScenarioKind scenario_kind_from(const std::string& s, const ConfigDoc& doc) {
  if (s == "empty-walled") return ScenarioKind::kEmptyWalled;
  if (s == "random-obstacles") return ScenarioKind::kRandomObstacles;
  if (s == "named-config") return ScenarioKind::kNamedConfig;
  if (s == "s-path") return ScenarioKind::kSPath;
  throw std::runtime_error(doc.origin() + ": unknown scenario.kind '" + s + "'");
}

void bind_scenario(ConfigBinder& b, const ConfigDoc& doc, ScenarioSpec* spec) {
  std::string file;
  b.bind("scenario.file", &file);
  if (!file.empty()) *spec = load_scenario_file(file);

  std::string kind;
  b.bind("scenario.kind", &kind);
  if (!kind.empty()) spec->kind = scenario_kind_from(kind, doc);
  b.bind("scenario.n_robots", &spec->n_robots);
  b.bind("scenario.n_obstacles", &spec->n_obstacles);
  b.bind("scenario.n_dynamic_obstacles", &spec->n_dynamic_obstacles);
  b.bind("scenario.named_config", &spec->named_config);
  b.bind("scenario.s_path_id", &spec->s_path_id);
  std::vector<double> arena;
  b.bind_list("scenario.arena", &arena);
  if (!arena.empty()) {
    if (arena.size() != 4) throw std::runtime_error(doc.origin() + ": scenario.arena needs 4 numbers");
    spec->arena = {Vec2(arena[0], arena[1]), Vec2(arena[2], arena[3])};
  }
  b.bind("scenario.robot_radius", &spec->robot_radius);
  b.bind("scenario.d_ref", &spec->d_ref);
  b.bind("scenario.spawn_clearance", &spec->spawn_clearance);
  b.bind("scenario.spawn_spread", &spec->spawn_spread);
  b.bind("scenario.obstacle_clearance", &spec->obstacle_clearance);
  b.bind("scenario.wall_margin", &spec->wall_margin);
  b.bind("scenario.goal_min_dist", &spec->goal_min_dist);
  b.bind("scenario.obstacle_radius_min", &spec->obstacle_radius_min);
  b.bind("scenario.obstacle_radius_max", &spec->obstacle_radius_max);
  b.bind("scenario.dynamic_speed", &spec->dynamic_speed);
  b.bind("scenario.max_spawn_attempts", &spec->max_spawn_attempts);
  if (spec->kind == ScenarioKind::kNamedConfig && spec->fixed_poses.empty() &&
      !spec->named_config.empty()) {
    const double d_ref = spec->d_ref;
    *spec = named_config_preset(spec->named_config);
    spec->d_ref = d_ref;
  }
}

}  // namespace

ExperimentConfig experiment_from_doc(ConfigDoc doc, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) doc.apply_override(o);
  ConfigBinder b(doc);
  ExperimentConfig cfg;

  long seed = 0;
  b.bind("seed", &seed);
  cfg.seed = static_cast<std::uint64_t>(seed);
  b.bind("out_dir", &cfg.out_dir);

  bind_scenario(b, doc, &cfg.scenario);

  b.bind("sim.dt", &cfg.sim.dt);
  b.bind("sim.max_steps", &cfg.sim.max_steps);
  b.bind("sim.goal_tolerance", &cfg.sim.goal_tolerance);
  b.bind("sim.stuck_eps", &cfg.sim.stuck_eps);
  b.bind("sim.stuck_window", &cfg.sim.stuck_window);
  b.bind("sim.lidar_max_range", &cfg.sim.lidar_max_range);

  b.bind("reward.r_goal", &cfg.reward.r_goal);
  b.bind("reward.r_collision", &cfg.reward.r_collision);
  b.bind("reward.c_form", &cfg.reward.c_form);
  b.bind("reward.c_obs", &cfg.reward.c_obs);
  b.bind("reward.c_cent", &cfg.reward.c_cent);
  b.bind("reward.c_dev", &cfg.reward.c_dev);
  b.bind("reward.d_safe", &cfg.reward.d_safe);

  b.bind("mpc.horizon", &cfg.mpc.horizon);
  cfg.mpc.dt = cfg.sim.dt;
  b.bind("mpc.dt", &cfg.mpc.dt);
  double r0_v = cfg.mpc.r0_diag.x(), r0_w = cfg.mpc.r0_diag.y();
  double r_v = cfg.mpc.r_diag.x(), r_w = cfg.mpc.r_diag.y();
  b.bind("mpc.r0_v", &r0_v);
  b.bind("mpc.r0_w", &r0_w);
  b.bind("mpc.r_v", &r_v);
  b.bind("mpc.r_w", &r_w);
  cfg.mpc.r0_diag = Vec2(r0_v, r0_w);
  cfg.mpc.r_diag = Vec2(r_v, r_w);
  b.bind("mpc.distance_weight", &cfg.mpc.distance_weight);
  b.bind("mpc.v_min", &cfg.mpc.bounds.v_min);
  b.bind("mpc.v_max", &cfg.mpc.bounds.v_max);
  b.bind("mpc.w_min", &cfg.mpc.bounds.w_min);
  b.bind("mpc.w_max", &cfg.mpc.bounds.w_max);
  b.bind("mpc.max_iters", &cfg.mpc.solver.max_iters);
  b.bind("mpc.step_tol", &cfg.mpc.solver.step_tol);
  b.bind("mpc.cost_tol", &cfg.mpc.solver.cost_tol);
  b.bind("mpc.hard_stop_dist", &cfg.mpc.hard_stop_dist);
  b.bind("mpc.w_escape", &cfg.mpc.w_escape);

  b.bind("train.episodes", &cfg.train.episodes);
  b.bind("train.max_steps", &cfg.train.max_steps);
  b.bind("train.batch", &cfg.train.batch);
  b.bind("train.lr", &cfg.train.lr);
  b.bind("train.gamma", &cfg.train.gamma);
  b.bind("train.tau", &cfg.train.tau);
  b.bind("train.target_entropy", &cfg.train.target_entropy);
  b.bind("train.mpc_enabled", &cfg.train.mpc_enabled);
  b.bind("train.attention_enabled", &cfg.train.attention_enabled);
  b.bind("train.buffer_capacity", &cfg.train.buffer_capacity);
  b.bind("train.warmup_steps", &cfg.train.warmup_steps);
  b.bind("train.update_every", &cfg.train.update_every);
  b.bind("train.updates_per_round", &cfg.train.updates_per_round);
  b.bind("train.checkpoint_every", &cfg.train.checkpoint_every);

  b.bind("eval.trials", &cfg.eval_trials);
  b.bind("eval.jobs", &cfg.eval_jobs);

  b.finish();

  if (cfg.train.gamma <= 0.0 || cfg.train.gamma >= 1.0) {
    throw std::runtime_error(doc.origin() + ": train.gamma must be in (0, 1)");
  }
  cfg.mpc.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path,
                                        const std::vector<std::string>& overrides) {
  return experiment_from_doc(ConfigDoc::parse_file(path), overrides);
}

std::string config_snapshot_text(const ExperimentConfig& cfg) {
  ConfigWriter w;
  w.set("seed", static_cast<long>(cfg.seed));
  w.set("out_dir", cfg.out_dir);

  const ScenarioSpec& s = cfg.scenario;
  switch (s.kind) {
    case ScenarioKind::kEmptyWalled: w.set("scenario.kind", std::string("empty-walled")); break;
    case ScenarioKind::kRandomObstacles:
      w.set("scenario.kind", std::string("random-obstacles"));
      break;
    case ScenarioKind::kNamedConfig: w.set("scenario.kind", std::string("named-config")); break;
    case ScenarioKind::kSPath: w.set("scenario.kind", std::string("s-path")); break;
  }
  w.set("scenario.n_robots", s.n_robots);
  w.set("scenario.n_obstacles", s.n_obstacles);
  w.set("scenario.n_dynamic_obstacles", s.n_dynamic_obstacles);
  if (!s.named_config.empty()) w.set("scenario.named_config", s.named_config);
  if (s.kind == ScenarioKind::kSPath) w.set("scenario.s_path_id", s.s_path_id);
  w.set("scenario.arena", format_double(s.arena.lo.x()) + ", " + format_double(s.arena.lo.y()) +
                              ", " + format_double(s.arena.hi.x()) + ", " +
                              format_double(s.arena.hi.y()));
  w.set("scenario.robot_radius", s.robot_radius);
  w.set("scenario.d_ref", s.d_ref);
  w.set("scenario.spawn_clearance", s.spawn_clearance);
  w.set("scenario.spawn_spread", s.spawn_spread);
  w.set("scenario.obstacle_clearance", s.obstacle_clearance);
  w.set("scenario.wall_margin", s.wall_margin);
  w.set("scenario.goal_min_dist", s.goal_min_dist);
  w.set("scenario.obstacle_radius_min", s.obstacle_radius_min);
  w.set("scenario.obstacle_radius_max", s.obstacle_radius_max);
  w.set("scenario.dynamic_speed", s.dynamic_speed);
  w.set("scenario.max_spawn_attempts", s.max_spawn_attempts);

  w.set("sim.dt", cfg.sim.dt);
  w.set("sim.max_steps", cfg.sim.max_steps);
  w.set("sim.goal_tolerance", cfg.sim.goal_tolerance);
  w.set("sim.stuck_eps", cfg.sim.stuck_eps);
  w.set("sim.stuck_window", cfg.sim.stuck_window);
  w.set("sim.lidar_max_range", cfg.sim.lidar_max_range);

  w.set("reward.r_goal", cfg.reward.r_goal);
  w.set("reward.r_collision", cfg.reward.r_collision);
  w.set("reward.c_form", cfg.reward.c_form);
  w.set("reward.c_obs", cfg.reward.c_obs);
  w.set("reward.c_cent", cfg.reward.c_cent);
  w.set("reward.c_dev", cfg.reward.c_dev);
  w.set("reward.d_safe", cfg.reward.d_safe);

  w.set("mpc.horizon", cfg.mpc.horizon);
  w.set("mpc.dt", cfg.mpc.dt);
  w.set("mpc.r0_v", cfg.mpc.r0_diag.x());
  w.set("mpc.r0_w", cfg.mpc.r0_diag.y());
  w.set("mpc.r_v", cfg.mpc.r_diag.x());
  w.set("mpc.r_w", cfg.mpc.r_diag.y());
  w.set("mpc.distance_weight", cfg.mpc.distance_weight);
  w.set("mpc.v_min", cfg.mpc.bounds.v_min);
  w.set("mpc.v_max", cfg.mpc.bounds.v_max);
  w.set("mpc.w_min", cfg.mpc.bounds.w_min);
  w.set("mpc.w_max", cfg.mpc.bounds.w_max);
  w.set("mpc.max_iters", cfg.mpc.solver.max_iters);
  w.set("mpc.step_tol", cfg.mpc.solver.step_tol);
  w.set("mpc.cost_tol", cfg.mpc.solver.cost_tol);
  w.set("mpc.hard_stop_dist", cfg.mpc.hard_stop_dist);
  w.set("mpc.w_escape", cfg.mpc.w_escape);

  w.set("train.episodes", cfg.train.episodes);
  w.set("train.max_steps", cfg.train.max_steps);
  w.set("train.batch", cfg.train.batch);
  w.set("train.lr", cfg.train.lr);
  w.set("train.gamma", cfg.train.gamma);
  w.set("train.tau", cfg.train.tau);
  w.set("train.target_entropy", cfg.train.target_entropy);
  w.set("train.mpc_enabled", cfg.train.mpc_enabled);
  w.set("train.attention_enabled", cfg.train.attention_enabled);
  w.set("train.buffer_capacity", cfg.train.buffer_capacity);
  w.set("train.warmup_steps", cfg.train.warmup_steps);
  w.set("train.update_every", cfg.train.update_every);
  w.set("train.updates_per_round", cfg.train.updates_per_round);
  w.set("train.checkpoint_every", cfg.train.checkpoint_every);

  w.set("eval.trials", cfg.eval_trials);
  w.set("eval.jobs", cfg.eval_jobs);
  return w.to_string();
}

void write_config_snapshot(const ExperimentConfig& cfg, const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config snapshot: " + path);
  out << config_snapshot_text(cfg);
}

std::string resolve_out_dir(const std::string& out_dir) {
  if (out_dir.empty()) return out_dir;
  if (std::filesystem::path(out_dir).is_absolute()) return out_dir;
  const char* root = std::getenv("FORMNAV_OUT_ROOT");
  if (root == nullptr || *root == '\0') return out_dir;
  return (std::filesystem::path(root) / out_dir).string();
}

}  // namespace formnav
