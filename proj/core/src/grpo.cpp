#include "cleaner/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace cleaner::grpo {

double compute_reward(const Trajectory& traj, const Task& task) {
  return (traj.final_answer && *traj.final_answer == task.target) ? 1.0 : -1.0;
}

AdvantageResult compute_advantages(const std::vector<double>& rewards, double epsilon_std) {
  if (rewards.empty()) throw std::invalid_argument("compute_advantages: empty rewards");
  AdvantageResult result;
  const double n = static_cast<double>(rewards.size());
  for (const double r : rewards) result.mean += r;
  result.mean /= n;
  double variance = 0.0;
  for (const double r : rewards) variance += (r - result.mean) * (r - result.mean);
  variance /= n;
  result.stddev = std::sqrt(variance);
  if (result.stddev == 0.0) {
    result.filtered = true;
    result.advantages.assign(rewards.size(), 0.0);
    return result;
  }
  result.advantages.reserve(rewards.size());
  for (const double r : rewards) {
    result.advantages.push_back((r - result.mean) / (result.stddev + epsilon_std));
  }
  return result;
}

std::vector<double> flatten_logprobs(const Trajectory& traj) {
  std::vector<double> flat;
  for (const Turn& turn : traj.turns) {
    for (const DecisionRecord& d : turn.decisions) flat.push_back(d.behavior_logprob);
  }
  return flat;
}

Group make_group(Task task, std::vector<Trajectory> trajectories, const GrpoConfig& config) {
  Group group;
  group.task = std::move(task);
  group.trajectories = std::move(trajectories);
  group.rewards.reserve(group.trajectories.size());
  for (Trajectory& traj : group.trajectories) {
    const double reward = compute_reward(traj, group.task);
    traj.reward = reward;
    group.rewards.push_back(reward);
    group.old_logprobs.push_back(flatten_logprobs(traj));
  }
  AdvantageResult adv = compute_advantages(group.rewards, config.epsilon_std);
  group.advantages = std::move(adv.advantages);
  group.filtered = adv.filtered;
  return group;
}

namespace {

// Per-trajectory pass: new log-probs per decision and the gradient of their
// sum, both evaluated on the committed contexts.
struct TrajectoryEval {
  std::vector<double> new_logprobs;
  std::vector<double> grad_sum;  // d(sum new_logprobs)/d theta
  // Per-decision gradients only materialize in decision-ratio mode.
  std::vector<std::vector<double>> per_decision_grads;
};

TrajectoryEval eval_trajectory(const Trajectory& traj, const Task& task,
                               const policy::PolicyParams& params, bool per_decision) {
  TrajectoryEval eval;
  eval.grad_sum.assign(params.theta.size(), 0.0);
  policy::IncrementalFeaturizer featurizer(task);
  for (const Turn& turn : traj.turns) {
    const policy::ContextFeatures& features = featurizer.current();
    for (const DecisionRecord& decision : turn.decisions) {
      eval.new_logprobs.push_back(policy::action_logprob(features, {decision}, params));
      std::vector<double> grad = policy::grad_action_logprob(features, {decision}, params);
      for (size_t i = 0; i < grad.size(); ++i) eval.grad_sum[i] += grad[i];
      if (per_decision) eval.per_decision_grads.push_back(std::move(grad));
    }
    featurizer.advance(turn);
  }
  return eval;
}

double checked_ratio(double log_ratio) {
  const double rho = std::exp(log_ratio);
  if (!std::isfinite(rho)) {
    throw std::domain_error("importance ratio is not finite (log ratio " +
                            std::to_string(log_ratio) + ")");
  }
  return rho;
}

}  // namespace

double importance_ratio(const Trajectory& traj, const Task& task,
                        const std::vector<double>& old_logprobs,
                        const policy::PolicyParams& new_params) {
  const TrajectoryEval eval = eval_trajectory(traj, task, new_params, /*per_decision=*/false);
  if (eval.new_logprobs.size() != old_logprobs.size()) {
    throw std::invalid_argument("importance_ratio: old log-prob count mismatch");
  }
  double log_ratio = 0.0;
  for (size_t i = 0; i < old_logprobs.size(); ++i) {
    log_ratio += eval.new_logprobs[i] - old_logprobs[i];
  }
  return checked_ratio(log_ratio);
}

Objective surrogate_objective(const Group& group, const policy::PolicyParams& new_params,
                              const GrpoConfig& config) {
  if (group.filtered) {
    throw std::logic_error("surrogate_objective called on a filtered group");
  }
  if (group.trajectories.size() != group.advantages.size() ||
      group.trajectories.size() != group.old_logprobs.size()) {
    throw std::invalid_argument("surrogate_objective: ragged group");
  }
  const double lo = 1.0 - config.clip_low;
  const double hi = 1.0 + config.clip_high;

  Objective objective;
  objective.gradient.assign(new_params.theta.size(), 0.0);

  const bool per_decision = config.ratio_mode == RatioMode::kDecision;
  double decision_total = 0.0;
  if (per_decision) {
    for (const auto& old : group.old_logprobs) decision_total += static_cast<double>(old.size());
    if (decision_total == 0.0) return objective;
  }

  for (size_t i = 0; i < group.trajectories.size(); ++i) {
    const double advantage = group.advantages[i];
    const TrajectoryEval eval =
        eval_trajectory(group.trajectories[i], group.task, new_params, per_decision);
    const std::vector<double>& old = group.old_logprobs[i];
    if (eval.new_logprobs.size() != old.size()) {
      throw std::invalid_argument("surrogate_objective: old log-prob count mismatch");
    }

    if (!per_decision) {
      double log_ratio = 0.0;
      for (size_t d = 0; d < old.size(); ++d) log_ratio += eval.new_logprobs[d] - old[d];
      const double rho = checked_ratio(log_ratio);
      const double unclipped = rho * advantage;
      const double clipped = std::clamp(rho, lo, hi) * advantage;
      const double scale = 1.0 / static_cast<double>(group.trajectories.size());
      if (unclipped <= clipped) {
        objective.value += scale * unclipped;
        const double coeff = scale * advantage * rho;
        for (size_t p = 0; p < objective.gradient.size(); ++p) {
          objective.gradient[p] += coeff * eval.grad_sum[p];
        }
      } else {
        objective.value += scale * clipped;
      }
    } else {
      const double scale = 1.0 / decision_total;
      for (size_t d = 0; d < old.size(); ++d) {
        const double rho = checked_ratio(eval.new_logprobs[d] - old[d]);
        const double unclipped = rho * advantage;
        const double clipped = std::clamp(rho, lo, hi) * advantage;
        if (unclipped <= clipped) {
          objective.value += scale * unclipped;
          const double coeff = scale * advantage * rho;
          const std::vector<double>& grad = eval.per_decision_grads[d];
          for (size_t p = 0; p < objective.gradient.size(); ++p) {
            objective.gradient[p] += coeff * grad[p];
          }
        } else {
          objective.value += scale * clipped;
        }
      }
    }
  }
  return objective;
}

UpdateResult update(policy::PolicyParams params, const std::vector<Group>& groups,
                    const GrpoConfig& config) {
  std::vector<const Group*> unfiltered;
  for (const Group& group : groups) {
    if (!group.filtered) unfiltered.push_back(&group);
  }
  UpdateResult result{std::move(params), 0, 0, unfiltered.empty()};
  if (result.all_filtered) {
    std::cerr << "warning: all groups filtered; skipping parameter update\n";
    return result;
  }
  const size_t mini = config.mini_batch > 0 ? static_cast<size_t>(config.mini_batch)
                                            : unfiltered.size();
  for (size_t start = 0; start < unfiltered.size(); start += mini) {
    const size_t end = std::min(start + mini, unfiltered.size());
    std::vector<double> grad(result.params.theta.size(), 0.0);
    for (size_t g = start; g < end; ++g) {
      const Objective objective = surrogate_objective(*unfiltered[g], result.params, config);
      if (!std::isfinite(objective.value)) {
        throw std::domain_error("non-finite surrogate objective");
      }
      for (size_t p = 0; p < grad.size(); ++p) grad[p] += objective.gradient[p];
    }
    const double scale = config.learning_rate / static_cast<double>(end - start);
    for (size_t p = 0; p < grad.size(); ++p) result.params.theta[p] += scale * grad[p];
    ++result.minibatches;
    result.groups_used += static_cast<int>(end - start);
  }
  return result;
}

}  // namespace cleaner::grpo
