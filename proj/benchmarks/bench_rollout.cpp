#include <benchmark/benchmark.h>

#include "cleaner/rollout.hpp"
#include "cleaner/saar.hpp"
#include "cleaner/tasks.hpp"

namespace {

using namespace cleaner;

Task bench_task() {
  Task task;
  task.task_id = "div-9-4-3";
  task.prompt_features = {2, 9, 4, 3};
  task.target = tasks::reference_target(tasks::FamilyId::kDivision, 9, 4, 3);
  return task;
}

void BM_BaselineEpisode(benchmark::State& state) {
  const Task task = bench_task();
  const policy::PolicyParams params = policy::PolicyParams::zeros(policy::agent_shape());
  rollout::RolloutLimits limits;
  uint64_t seed = 0;
  for (auto _ : state) {
    RandomStream rng(++seed);
    benchmark::DoNotOptimize(rollout::run_episode(task, params, limits, rng));
  }
}
BENCHMARK(BM_BaselineEpisode);

void BM_PurifiedEpisode(benchmark::State& state) {
  const Task task = bench_task();
  const policy::PolicyParams params = policy::PolicyParams::zeros(policy::agent_shape());
  rollout::RolloutLimits limits;
  saar::SaarConfig config;
  config.mix_probability = 1.0;
  uint64_t seed = 0;
  for (auto _ : state) {
    RandomStream rng(++seed);
    benchmark::DoNotOptimize(saar::purify_online(task, params, limits, config, rng));
  }
}
BENCHMARK(BM_PurifiedEpisode);

void BM_RecomputeLogprobs(benchmark::State& state) {
  const Task task = bench_task();
  const policy::PolicyParams params = policy::PolicyParams::zeros(policy::agent_shape());
  rollout::RolloutLimits limits;
  RandomStream rng(7);
  const Trajectory traj = rollout::run_episode(task, params, limits, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(saar::recompute_logprobs(traj, task, params));
  }
}
BENCHMARK(BM_RecomputeLogprobs);

}  // namespace

BENCHMARK_MAIN();
