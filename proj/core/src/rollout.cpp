#include "cleaner/rollout.hpp"

namespace cleaner::rollout {

Turn generate_turn(const HistoryPrefix& history, const Task& task,
                   const policy::PolicyParams& params,
                   const minilang::ExecLimits& exec_limits, RandomStream& rng) {
  const policy::ContextFeatures features = policy::featurize(history, task);
  policy::ActionPlan plan = policy::sample_action(features, params, rng);
  Turn turn;
  turn.reasoning = std::move(plan.reasoning);
  turn.code = std::move(plan.code);
  turn.observation = minilang::run(turn.code, exec_limits);
  turn.decisions = std::move(plan.decisions);
  turn.provenance = Provenance::kNatural;
  return turn;
}

Trajectory finish_trajectory(const Task& task, const HistoryPrefix& history,
                             bool purification_applied) {
  Trajectory traj;
  traj.task_id = task.task_id;
  traj.turns = history.to_vector();
  for (auto it = traj.turns.rbegin(); it != traj.turns.rend(); ++it) {
    if (it->observation.ok()) {
      traj.final_answer = it->observation.value;
      break;
    }
  }
  traj.purification_applied = purification_applied;
  traj.stats = recompute_stats(traj.turns);
  return traj;
}

Trajectory run_episode(const Task& task, const policy::PolicyParams& params,
                       const RolloutLimits& limits, RandomStream& rng) {
  HistoryPrefix history;
  for (int t = 0; t < limits.max_turns; ++t) {
    Turn turn = generate_turn(history, task, params, limits.exec_limits, rng);
    const bool stop = turn.observation.ok() && policy::turn_requests_stop(turn);
    history = concat(history, std::move(turn));
    if (stop) break;
  }
  return finish_trajectory(task, history, /*purification_applied=*/false);
}

}  // namespace cleaner::rollout
