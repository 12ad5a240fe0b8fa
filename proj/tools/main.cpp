#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "formnav/csv.hpp"
#include "formnav/eval.hpp"
#include "formnav/experiment.hpp"
#include "formnav/trainer.hpp"

namespace fs = std::filesystem;
using namespace formnav;

namespace {

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              std::optional<long> seed, std::optional<std::string> out,
              std::optional<std::string> resume, int progress_every) {
  ExperimentConfig cfg = load_experiment_config(config_path, overrides);
  if (seed) cfg.seed = static_cast<std::uint64_t>(*seed);
  if (out) cfg.out_dir = *out;

  TrainerSetup setup = cfg.trainer_setup();
  fs::create_directories(setup.out_dir);
  write_config_snapshot(cfg, setup.out_dir + "/config_snapshot.cfg");

  const auto t0 = std::chrono::steady_clock::now();
  if (progress_every > 0) {
    setup.on_episode = [&, progress_every](const EpisodeMetrics& m) {
      if ((m.episode + 1) % progress_every != 0) return;
      const double elapsed = std::chrono::duration<double>(
          std::chrono::steady_clock::now() - t0).count();
      std::cerr << "episode " << (m.episode + 1) << "/" << setup.train.episodes
                << "  form_err=" << m.formation_error << "  goals=" << m.goals_reached
                << "  dev=" << m.mean_deviation_penalty << "  [" << static_cast<long>(elapsed)
                << "s]\n";
    };
  }

  Trainer trainer(setup);
  if (resume) trainer.load_checkpoint(*resume);
  trainer.run();
  std::cerr << "run complete: " << setup.out_dir << "\n";
  return 0;
}

EvalSetup eval_setup_from(const ExperimentConfig& cfg) {
  EvalSetup setup;
  setup.base = cfg.scenario;
  setup.sim = cfg.sim;
  setup.mpc = cfg.mpc;
  setup.reward = cfg.reward;
  setup.jobs = cfg.eval_jobs;
  return setup;
}

void print_report(const EvalScenario& scenario, const EvalReport& report) {
  std::cout << "scenario          " << scenario.describe() << "\n"
            << "trials            " << report.trials << "\n"
            << "success           " << report.success_rate * 100.0 << "%\n"
            << "collisions        " << report.collision_rate * 100.0 << "%\n"
            << "timeouts          " << report.timeout_rate * 100.0 << "%\n"
            << "completion (s)    " << report.completion_mean << " +/- "
            << report.completion_std << "\n"
            << "avg form err (m)  " << report.formation_mean << " +/- " << report.formation_std
            << "\n"
            << "goals fraction    " << report.goals_reached_fraction << "\n";
}

void write_report(const std::string& out_dir, const EvalScenario& scenario,
                  const EvalReport& report, bool emit_plot_data) {
  fs::create_directories(out_dir);
  {
    CsvWriter rows(out_dir + "/trials.csv",
                   {"trial", "outcome", "steps", "completion_time", "formation_error",
                    "goals_fraction", "mean_deviation"});
    for (const auto& r : report.rows) {
      rows.field(r.trial);
      rows.field(r.outcome);
      rows.field(r.steps);
      rows.field(r.completion_time);
      rows.field(r.formation_error);
      rows.field(r.goals_fraction);
      rows.field(r.mean_deviation);
      rows.end_row();
    }
  }
  {
    CsvWriter summary(out_dir + "/summary.csv",
                      {"scenario", "trials", "success_rate", "collision_rate", "timeout_rate",
                       "completion_mean", "completion_std", "formation_mean", "formation_std",
                       "goals_reached_fraction"});
    summary.field(scenario.describe());
    summary.field(report.trials);
    summary.field(report.success_rate);
    summary.field(report.collision_rate);
    summary.field(report.timeout_rate);
    summary.field(report.completion_mean);
    summary.field(report.completion_std);
    summary.field(report.formation_mean);
    summary.field(report.formation_std);
    summary.field(report.goals_reached_fraction);
    summary.end_row();
  }
  if (emit_plot_data) {
    // Per-trial series shaped like the training metrics for external plotting.
    CsvWriter plot(out_dir + "/plotdata.csv",
                   {"episode", "formation_error", "goals_reached", "deviation_penalty"});
    for (const auto& r : report.rows) {
      plot.field(r.trial);
      plot.field(r.formation_error);
      plot.field(r.goals_fraction);
      plot.field(r.mean_deviation);
      plot.end_row();
    }
  }
}

int cmd_eval(const std::string& config_path, const std::vector<std::string>& overrides,
             const std::string& scenario_text, std::optional<std::string> checkpoint,
             const std::string& policy, int trials, bool no_mpc, std::optional<int> n_robots,
             std::optional<int> jobs, std::optional<long> seed, std::optional<std::string> out,
             bool emit_plot_data, bool emit_traces) {
  ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{}
                                             : load_experiment_config(config_path, overrides);
  if (config_path.empty() && !overrides.empty()) {
    ConfigDoc doc = ConfigDoc::parse_string("", "<cli>");
    for (const auto& o : overrides) doc.apply_override(o);
    cfg = experiment_from_doc(std::move(doc));
  }

  EvalScenario scenario;
  if (fs::exists(scenario_text) && fs::is_regular_file(scenario_text)) {
    cfg.scenario = load_scenario_file(scenario_text);
    switch (cfg.scenario.kind) {
      case ScenarioKind::kEmptyWalled: scenario.kind = EvalKind::kSingleGoal; break;
      case ScenarioKind::kRandomObstacles:
        scenario.kind = EvalKind::kSingleGoalObstacles;
        scenario.k_obstacles = cfg.scenario.n_obstacles;
        scenario.k_dynamic = cfg.scenario.n_dynamic_obstacles;
        break;
      case ScenarioKind::kNamedConfig:
        scenario.kind = EvalKind::kNamedConfig;
        scenario.named_config = cfg.scenario.named_config;
        break;
      case ScenarioKind::kSPath:
        scenario.kind = EvalKind::kSPath;
        scenario.s_path_id = cfg.scenario.s_path_id;
        break;
    }
  } else {
    scenario = EvalScenario::parse(scenario_text);
  }
  scenario.trials = trials > 0 ? trials : cfg.eval_trials;
  scenario.seed = seed ? static_cast<std::uint64_t>(*seed) : cfg.seed;
  if (n_robots) {
    scenario.kind = EvalKind::kGeneralize;
    scenario.n_robots = *n_robots;
  }

  EvalSetup setup = eval_setup_from(cfg);
  setup.mpc_enabled = !no_mpc;
  if (jobs) setup.jobs = *jobs;

  if (policy == "random") {
    setup.policy_mode = PolicyMode::kRandom;
  } else if (policy == "zero") {
    setup.policy_mode = PolicyMode::kZero;
  } else if (policy == "checkpoint") {
    if (!checkpoint) {
      std::cerr << "error: --policy checkpoint requires --checkpoint\n";
      return 2;
    }
    CheckpointReader reader(*checkpoint);
    setup.policy_mode = PolicyMode::kCheckpoint;
    setup.actors = load_actors(reader);
  } else {
    std::cerr << "error: unknown policy '" << policy << "'\n";
    return 2;
  }

  const std::string out_dir = resolve_out_dir(out.value_or("eval_out"));
  if (emit_traces) setup.trace_dir = out_dir + "/traces";

  const EvalReport report = run_eval(scenario, setup);
  write_report(out_dir, scenario, report, emit_plot_data);
  print_report(scenario, report);
  return 0;
}

int cmd_filter_check(const std::string& input_path, const std::string& output_path,
                     const std::string& config_path, bool validate_only) {
  MpcConfig mpc;
  double robot_radius = 0.15;
  if (!config_path.empty()) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    mpc = cfg.mpc;
    robot_radius = cfg.scenario.robot_radius;
  }
  static const std::vector<std::string> kColumns = {
      "x", "y", "theta", "v_rl", "w_rl", "n1x", "n1y", "n2x", "n2y",
      "obs_x", "obs_y", "obs_radius"};

  std::ifstream in(input_path);
  if (!in) {
    std::cerr << "error: cannot open " << input_path << "\n";
    return 2;
  }
  std::string header;
  if (!std::getline(in, header)) {
    // Empty input: emit an empty, well-formed output.
    if (!validate_only) {
      CsvWriter out(output_path, {"v_exec", "w_exec", "cost", "converged", "iters"});
    }
    return 0;
  }
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const auto header_fields = split_csv_line(header);
  if (header_fields.size() != kColumns.size()) {
    std::cerr << "error: header has " << header_fields.size() << " columns, expected "
              << kColumns.size() << "\n";
    return 2;
  }
  for (std::size_t i = 0; i < kColumns.size(); ++i) {
    if (header_fields[i] != kColumns[i]) {
      std::cerr << "error: header column " << i + 1 << " is '" << header_fields[i]
                << "', expected '" << kColumns[i] << "'\n";
      return 2;
    }
  }
  if (validate_only) {
    std::cout << "header ok\n";
    return 0;
  }

  CsvWriter out(output_path, {"v_exec", "w_exec", "cost", "converged", "iters"});
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != kColumns.size()) {
      std::cerr << "error: row " << line_no << " has " << fields.size() << " fields\n";
      return 2;
    }
    std::vector<double> v(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
      try {
        v[i] = std::stod(fields[i]);
      } catch (...) {
        std::cerr << "error: row " << line_no << " field '" << kColumns[i]
                  << "' is not numeric\n";
        return 2;
      }
    }
    MpcProblem problem;
    problem.config = mpc;
    problem.x0 = {v[0], v[1], wrap_angle(v[2])};
    problem.a_rl = mpc.bounds.clamp({v[3], v[4]});
    problem.neighbor_positions[0] = Vec2(v[5], v[6]);
    problem.neighbor_positions[1] = Vec2(v[7], v[8]);
    problem.neighbor_clearance = 2.0 * robot_radius;
    problem.obstacle_position = Vec2(v[9], v[10]);
    problem.obstacle_clearance = v[11] + robot_radius;
    const MpcSolution solution = mpc_solve(problem);
    out.field(solution.actions.front().v);
    out.field(solution.actions.front().w);
    out.field(solution.cost);
    out.field(solution.converged ? 1 : 0);
    out.field(solution.iters);
    out.end_row();
  }
  return 0;
}

int cmd_scenario_validate(const std::string& path) {
  const ScenarioSpec spec = load_scenario_file(path);
  const WorldState world = spawn_scenario(spec, 0);
  std::cout << path << ": ok (" << world.n_robots() << " robots, " << world.obstacles.size()
            << " obstacles, arena [" << world.arena.lo.x() << "," << world.arena.lo.y()
            << "]..[" << world.arena.hi.x() << "," << world.arena.hi.y() << "])\n";
  return 0;
}

int cmd_checkpoint_inspect(const std::string& path) {
  CheckpointReader reader(path);
  std::size_t total = 0;
  std::cout << "arrays in " << path << ":\n";
  for (const auto& e : reader.manifest()) {
    std::cout << "  " << e.name << "  " << e.rows << "x" << e.cols << "  @" << e.offset << "\n";
    total += e.rows * e.cols;
  }
  std::cout << reader.manifest().size() << " arrays, " << total << " values\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"formnav: safe behavior-based cooperative navigation workbench"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Run a training experiment from a config file");
  std::string train_config;
  std::vector<std::string> train_sets;
  std::optional<long> train_seed;
  std::optional<std::string> train_out, train_resume;
  int progress_every = 50;
  train->add_option("--config", train_config, "experiment config file")->required();
  train->add_option("--set", train_sets, "dotted-path override, e.g. train.mpc_enabled=false");
  train->add_option("--seed", train_seed, "override the config seed");
  train->add_option("--out", train_out, "override the output directory");
  train->add_option("--resume", train_resume, "checkpoint to load before training");
  train->add_option("--progress-every", progress_every, "stderr progress cadence (0 = quiet)");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a policy on a scenario");
  std::string eval_config, eval_scenario = "single-goal", eval_policy = "checkpoint";
  std::vector<std::string> eval_sets;
  std::optional<std::string> eval_checkpoint, eval_out;
  int eval_trials = 0;
  bool no_mpc = false, emit_plot_data = false, emit_traces = false;
  std::optional<int> eval_n_robots, eval_jobs;
  std::optional<long> eval_seed;
  eval->add_option("--config", eval_config, "experiment config file (defaults used if absent)");
  eval->add_option("--set", eval_sets, "dotted-path override");
  eval->add_option("--scenario", eval_scenario,
                   "single-goal | single-goal-obstacles:k | named-config:name | s-path:id | "
                   "generalize:n | scenario file path");
  eval->add_option("--checkpoint", eval_checkpoint, "trained checkpoint");
  eval->add_option("--policy", eval_policy, "checkpoint | random | zero");
  eval->add_option("--trials", eval_trials, "number of trials");
  eval->add_flag("--no-mpc", no_mpc, "disable the safety filter");
  eval->add_option("--n-robots", eval_n_robots, "evaluate the policy on n robots");
  eval->add_option("--jobs", eval_jobs, "parallel trial workers");
  eval->add_option("--seed", eval_seed, "evaluation seed");
  eval->add_option("--out", eval_out, "output directory (default eval_out)");
  eval->add_flag("--emit-plot-data", emit_plot_data, "write per-episode series CSV");
  eval->add_flag("--emit-traces", emit_traces, "write per-trial episode traces");

  // filter-check
  auto* fc = app.add_subcommand("filter-check",
                                "Run the safety filter on CSV rows of states and actions");
  std::string fc_input, fc_output = "filter_out.csv", fc_config;
  bool fc_validate = false;
  fc->add_option("input", fc_input, "input CSV")->required();
  fc->add_option("-o,--output", fc_output, "output CSV");
  fc->add_option("--config", fc_config, "experiment config supplying MPC parameters");
  fc->add_flag("--validate-only", fc_validate, "check the header schema and exit");

  // scenario
  auto* scen = app.add_subcommand("scenario", "Scenario file tooling");
  auto* scen_validate = scen->add_subcommand("validate", "Parse and spawn a scenario file");
  std::string scen_path;
  scen_validate->add_option("file", scen_path, "scenario file")->required();

  // checkpoint
  auto* ckpt = app.add_subcommand("checkpoint", "Checkpoint tooling");
  auto* ckpt_inspect = ckpt->add_subcommand("inspect", "Print the array manifest");
  std::string ckpt_path;
  ckpt_inspect->add_option("file", ckpt_path, "checkpoint file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      return cmd_train(train_config, train_sets, train_seed, train_out, train_resume,
                       progress_every);
    }
    if (*eval) {
      return cmd_eval(eval_config, eval_sets, eval_scenario, eval_checkpoint, eval_policy,
                      eval_trials, no_mpc, eval_n_robots, eval_jobs, eval_seed, eval_out,
                      emit_plot_data, emit_traces);
    }
    if (*fc) return cmd_filter_check(fc_input, fc_output, fc_config, fc_validate);
    if (*scen) {
      if (*scen_validate) return cmd_scenario_validate(scen_path);
      std::cerr << "error: scenario needs a subcommand (validate)\n";
      return 2;
    }
    if (*ckpt) {
      if (*ckpt_inspect) return cmd_checkpoint_inspect(ckpt_path);
      std::cerr << "error: checkpoint needs a subcommand (inspect)\n";
      return 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
