#include <benchmark/benchmark.h>

#include "formnav/critic.hpp"
#include "formnav/mpc.hpp"
#include "formnav/scenario.hpp"
#include "formnav/trainer.hpp"

using namespace formnav;

namespace {

WorldState bench_world() {
  ScenarioSpec spec;
  spec.kind = ScenarioKind::kRandomObstacles;
  spec.n_obstacles = 3;
  return spawn_scenario(spec, 7);
}

void BM_StepUnicycle(benchmark::State& state) {
  Pose2D pose{0.2, -0.4, 0.3};
  const ActionCmd action{0.2, 0.5};
  for (auto _ : state) {
    pose = step_unicycle(pose, action, 0.1);
    benchmark::DoNotOptimize(pose);
  }
}
BENCHMARK(BM_StepUnicycle);

void BM_CastLidar(benchmark::State& state) {
  const WorldState world = bench_world();
  for (auto _ : state) {
    auto ranges = cast_lidar(world, 0, 40, 3.5);
    benchmark::DoNotOptimize(ranges);
  }
}
BENCHMARK(BM_CastLidar);

void BM_MpcSolveCold(benchmark::State& state) {
  const WorldState world = bench_world();
  const NeighborAssignment assignment = NeighborAssignment::ring(world.n_robots());
  const MpcConfig config;
  const MpcProblem problem = make_filter_problem(world, 0, {0.22, 0.0}, assignment, config);
  for (auto _ : state) {
    auto solution = mpc_solve(problem);
    benchmark::DoNotOptimize(solution);
  }
}
BENCHMARK(BM_MpcSolveCold);

void BM_MpcSolveWarm(benchmark::State& state) {
  const WorldState world = bench_world();
  const NeighborAssignment assignment = NeighborAssignment::ring(world.n_robots());
  const MpcConfig config;
  const MpcProblem problem = make_filter_problem(world, 0, {0.22, 0.0}, assignment, config);
  const MpcSolution warm = mpc_solve(problem);
  for (auto _ : state) {
    auto solution = mpc_solve(problem, warm);
    benchmark::DoNotOptimize(solution);
  }
}
BENCHMARK(BM_MpcSolveWarm);

void BM_CriticForward(benchmark::State& state) {
  Rng rng(1);
  AttentionCriticConfig config;
  AttentionCritic critic(config, rng);
  const int B = static_cast<int>(state.range(0));
  std::vector<Mat> obs(3), act(3);
  for (int j = 0; j < 3; ++j) {
    obs[j] = Mat::Random(B, config.obs_dim);
    act[j] = Mat::Random(B, config.act_dim);
  }
  for (auto _ : state) {
    auto eval = critic.q_both_numeric(obs, act, 0, false);
    benchmark::DoNotOptimize(eval);
  }
}
BENCHMARK(BM_CriticForward)->Arg(1)->Arg(128);

void BM_TrainerUpdate(benchmark::State& state) {
  TrainerSetup setup;
  setup.scenario.kind = ScenarioKind::kEmptyWalled;
  setup.train.seed = 3;
  setup.train.warmup_steps = 0;
  setup.train.buffer_capacity = 4096;
  Trainer trainer(setup);
  Rng rng(5);
  while (trainer.buffer().size() < 256) trainer.step_env();
  auto batch = trainer.buffer().sample(128, rng);
  for (auto _ : state) {
    auto losses = trainer.update(batch);
    benchmark::DoNotOptimize(losses);
  }
}
BENCHMARK(BM_TrainerUpdate);

}  // namespace

BENCHMARK_MAIN();
