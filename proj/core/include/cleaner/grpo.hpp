#pragma once

#include <string>
#include <vector>

#include "cleaner/policy.hpp"
#include "cleaner/trajectory.hpp"

namespace cleaner::grpo {

enum class RatioMode { kTrajectory, kDecision };

struct GrpoConfig {
  int group_size = 8;
  double clip_low = 0.20;    // epsilon minus
  double clip_high = 0.28;   // epsilon plus
  double epsilon_std = 1e-8; // delta in the advantage denominator
  double learning_rate = 0.05;
  int rollout_batch = 16;    // groups per step
  int mini_batch = 16;       // groups per update slice
  RatioMode ratio_mode = RatioMode::kTrajectory;
};

struct Group {
  Task task;
  std::vector<Trajectory> trajectories;
  std::vector<double> rewards;
  std::vector<double> advantages;
  // Behavior log-probs frozen before the update, one flat list per
  // trajectory in turn-then-decision order. These are the recomputed
  // (purified-context) values.
  std::vector<std::vector<double>> old_logprobs;
  bool filtered = false;
};

// Outcome-only reward: +1 iff the final answer is present and correct.
double compute_reward(const Trajectory& traj, const Task& task);

struct AdvantageResult {
  std::vector<double> advantages;
  bool filtered = false;
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
};

AdvantageResult compute_advantages(const std::vector<double>& rewards, double epsilon_std);

// Assemble a group from rolled-out (and recomputed) trajectories.
Group make_group(Task task, std::vector<Trajectory> trajectories, const GrpoConfig& config);

std::vector<double> flatten_logprobs(const Trajectory& traj);

// Trajectory-level importance ratio exp(sum(new - old)) with the new
// log-probs evaluated under new_params on the committed contexts.
double importance_ratio(const Trajectory& traj, const Task& task,
                        const std::vector<double>& old_logprobs,
                        const policy::PolicyParams& new_params);

struct Objective {
  double value = 0.0;
  std::vector<double> gradient;
};

// Clipped surrogate with asymmetric bounds [1 - clip_low, 1 + clip_high].
// Gradient is zero through branches where the min selects the clipped term.
Objective surrogate_objective(const Group& group, const policy::PolicyParams& new_params,
                              const GrpoConfig& config);

struct UpdateResult {
  policy::PolicyParams params;
  int groups_used = 0;
  int minibatches = 0;
  bool all_filtered = false;
};

// Ascends the surrogate over mini-batches of the unfiltered groups.
// Deterministic given input order. All-filtered input is a warned no-op.
UpdateResult update(policy::PolicyParams params, const std::vector<Group>& groups,
                    const GrpoConfig& config);

}  // namespace cleaner::grpo
