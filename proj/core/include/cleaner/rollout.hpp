#pragma once

#include "cleaner/minilang.hpp"
#include "cleaner/policy.hpp"
#include "cleaner/rng.hpp"
#include "cleaner/trajectory.hpp"

namespace cleaner::rollout {

struct RolloutLimits {
  int max_turns = 8;
  minilang::ExecLimits exec_limits{};
};

// One sample-execute-observe step; the committed history is never touched.
Turn generate_turn(const HistoryPrefix& history, const Task& task,
                   const policy::PolicyParams& params,
                   const minilang::ExecLimits& exec_limits, RandomStream& rng);

// Baseline episode loop: failures are recorded permanently and generation
// continues; the episode ends early when a successful turn's continuation
// decision selects stop. final_answer is the value of the last successful
// turn, if any.
Trajectory run_episode(const Task& task, const policy::PolicyParams& params,
                       const RolloutLimits& limits, RandomStream& rng);

// Assemble the trajectory record for a finished history.
Trajectory finish_trajectory(const Task& task, const HistoryPrefix& history,
                             bool purification_applied);

}  // namespace cleaner::rollout
