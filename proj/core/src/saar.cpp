#include "cleaner/saar.hpp"

#include <stdexcept>
#include <utility>

#include "cleaner/similarity.hpp"

namespace cleaner::saar {

namespace {

constexpr uint64_t kMixCoinTag = 0x6d69785f636f696eULL;  // "mix_coin"

void require_failure(const Turn& turn, const char* what) {
  if (turn.observation.ok()) {
    throw std::logic_error(std::string(what) + " called with a success turn");
  }
}

}  // namespace

LookaheadContext::LookaheadContext(const HistoryPrefix& history, Task task)
    : task_(std::move(task)), state_(policy::conditioning_state(history)) {}

policy::ContextFeatures LookaheadContext::features() const {
  return policy::build_features(task_, state_);
}

void LookaheadContext::extend(const Turn& failed_turn) {
  require_failure(failed_turn, "extend_context");
  state_.advance(failed_turn);
}

LookaheadContext extend_context(const HistoryPrefix& history, const Task& task,
                                const Turn& failed_turn) {
  LookaheadContext context(history, task);
  context.extend(failed_turn);
  return context;
}

LookaheadContext extend_context(LookaheadContext context, const Turn& failed_turn) {
  context.extend(failed_turn);
  return context;
}

CorrectionOutcome lookahead_correct(const HistoryPrefix& history, const Task& task,
                                    const Turn& failed_turn,
                                    const policy::PolicyParams& params,
                                    const minilang::ExecLimits& exec_limits,
                                    const SaarConfig& config, RandomStream& rng) {
  require_failure(failed_turn, "lookahead_correct");
  if (config.retry_limit < 1) throw std::invalid_argument("retry_limit must be >= 1");

  LookaheadContext context = extend_context(history, task, failed_turn);
  for (int attempt = 1; attempt <= config.retry_limit; ++attempt) {
    const policy::ContextFeatures features = context.features();
    policy::ActionPlan plan = policy::sample_action(features, params, rng);
    Observation observation = minilang::run(plan.code, exec_limits);
    if (observation.ok()) {
      double lookahead_logprob = 0.0;
      for (const DecisionRecord& d : plan.decisions) lookahead_logprob += d.behavior_logprob;
      return CorrectionOutcome{
          CorrectionStatus::kRecovered, attempt,
          Correction{std::move(plan.reasoning), std::move(plan.code),
                     std::move(observation), std::move(plan.decisions), lookahead_logprob}};
    }
    // The failed attempt stays visible to the next one, but is never committed.
    Turn attempt_turn;
    attempt_turn.reasoning = std::move(plan.reasoning);
    attempt_turn.code = std::move(plan.code);
    attempt_turn.observation = std::move(observation);
    attempt_turn.decisions = std::move(plan.decisions);
    context.extend(attempt_turn);
  }
  return CorrectionOutcome{CorrectionStatus::kExhausted, config.retry_limit, std::nullopt};
}

Turn adaptive_replace(const Turn& failed_turn, const CorrectionOutcome& outcome,
                      double gamma) {
  require_failure(failed_turn, "adaptive_replace");
  if (outcome.status != CorrectionStatus::kRecovered || !outcome.correction) {
    throw std::logic_error("adaptive_replace called with an exhausted correction");
  }
  const Correction& correction = *outcome.correction;
  const double sim = similarity::ratio(failed_turn.code, correction.code);

  Turn purified;
  purified.code = correction.code;
  purified.observation = correction.observation;
  purified.decisions = correction.decisions;  // provisional lookahead log-probs
  if (sim >= gamma) {
    purified.reasoning = failed_turn.reasoning;
    purified.provenance = Provenance::kPurifiedShallow;
  } else {
    purified.reasoning = correction.reasoning;
    purified.provenance = Provenance::kPurifiedDeep;
  }
  return purified;
}

Trajectory purify_online(const Task& task, const policy::PolicyParams& params,
                         const rollout::RolloutLimits& limits, const SaarConfig& config,
                         RandomStream& rng) {
  // The coin comes from a stream derived off the episode stream's lineage, so
  // the action sampling sequence is identical with and without mixing.
  bool active = false;
  if (config.mix_probability >= 1.0) {
    active = true;
  } else if (config.mix_probability > 0.0) {
    RandomStream coin = rng.derive(kMixCoinTag);
    active = coin.next_double() < config.mix_probability;
  }

  HistoryPrefix history;
  for (int t = 0; t < limits.max_turns; ++t) {
    Turn turn = rollout::generate_turn(history, task, params, limits.exec_limits, rng);
    if (!turn.observation.ok() && active) {
      const CorrectionOutcome outcome = lookahead_correct(
          history, task, turn, params, limits.exec_limits, config, rng);
      if (outcome.status == CorrectionStatus::kRecovered) {
        turn = adaptive_replace(turn, outcome, config.similarity_threshold);
      }
      // On exhaustion the original failed turn is committed unchanged; the
      // lookahead attempts are discarded.
    }
    const bool stop = turn.observation.ok() && policy::turn_requests_stop(turn);
    history = concat(history, std::move(turn));
    if (stop) break;
  }
  return rollout::finish_trajectory(task, history, /*purification_applied=*/active);
}

Trajectory purify_offline(const Trajectory& raw, double gamma, OfflineSummary* summary) {
  if (raw.purification_applied) {
    throw std::invalid_argument("purify_offline: input already purified");
  }
  for (const Turn& turn : raw.turns) {
    if (turn.provenance != Provenance::kNatural) {
      throw std::invalid_argument("purify_offline: input contains purified turns");
    }
  }

  OfflineSummary local;
  Trajectory out;
  out.task_id = raw.task_id;
  out.final_answer = raw.final_answer;
  out.reward = raw.reward;

  size_t i = 0;
  const size_t n = raw.turns.size();
  while (i < n) {
    if (raw.turns[i].observation.ok()) {
      out.turns.push_back(raw.turns[i]);
      ++i;
      continue;
    }
    size_t j = i;
    while (j < n && !raw.turns[j].observation.ok()) ++j;
    if (j == n) {
      // Trailing failure run with no recovery: kept verbatim.
      for (; i < n; ++i) out.turns.push_back(raw.turns[i]);
      break;
    }
    const Turn& first_failed = raw.turns[i];
    const Turn& success = raw.turns[j];
    const double sim = similarity::ratio(first_failed.code, success.code);
    Turn purified;
    purified.code = success.code;
    purified.observation = success.observation;
    purified.decisions = success.decisions;
    if (sim >= gamma) {
      purified.reasoning = first_failed.reasoning;
      purified.provenance = Provenance::kPurifiedShallow;
      ++local.shallow;
    } else {
      purified.reasoning = success.reasoning;
      purified.provenance = Provenance::kPurifiedDeep;
      ++local.deep;
    }
    out.turns.push_back(std::move(purified));
    ++local.runs_collapsed;
    i = j + 1;
  }

  out.stats = recompute_stats(out.turns);
  out.purification_applied = local.runs_collapsed > 0;
  local.errors_removed = raw.stats.tool_errors - out.stats.tool_errors;
  if (summary) *summary = local;
  return out;
}

Trajectory recompute_logprobs(const Trajectory& traj, const Task& task,
                              const policy::PolicyParams& params) {
  Trajectory out = traj;
  policy::IncrementalFeaturizer featurizer(task);
  for (Turn& turn : out.turns) {
    const policy::ContextFeatures& features = featurizer.current();
    for (DecisionRecord& decision : turn.decisions) {
      decision.behavior_logprob =
          policy::action_logprob(features, {decision}, params);
    }
    featurizer.advance(turn);
  }
  return out;
}

}  // namespace cleaner::saar
