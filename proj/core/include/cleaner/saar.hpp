#pragma once

#include <optional>
#include <string>

#include "cleaner/policy.hpp"
#include "cleaner/rollout.hpp"
#include "cleaner/trajectory.hpp"

namespace cleaner::saar {

struct SaarConfig {
  int retry_limit = 3;              // K
  double similarity_threshold = 0.5;  // gamma
  double mix_probability = 0.7;     // fraction of episodes purified online
};

enum class CorrectionStatus { kRecovered, kExhausted };

struct Correction {
  std::string reasoning;  // auxiliary repair reasoning
  std::string code;       // corrected code, executed successfully
  Observation observation;
  std::vector<DecisionRecord> decisions;
  double lookahead_logprob = 0.0;  // log prob of the decisions under the
                                   // error-extended context that sampled them
};

struct CorrectionOutcome {
  CorrectionStatus status = CorrectionStatus::kExhausted;
  int attempts_used = 0;
  std::optional<Correction> correction;
};

// Conditioning state of an error-extended context. The committed history it
// was built from stays frozen; each further failed attempt extends the
// lookahead state without ever being committed.
class LookaheadContext {
 public:
  LookaheadContext(const HistoryPrefix& history, Task task);

  policy::ContextFeatures features() const;
  const policy::ConditioningState& state() const { return state_; }
  const Task& task() const { return task_; }

  void extend(const Turn& failed_turn);  // throws std::logic_error on success turns

 private:
  Task task_;
  policy::ConditioningState state_;
};

LookaheadContext extend_context(const HistoryPrefix& history, const Task& task,
                                const Turn& failed_turn);
LookaheadContext extend_context(LookaheadContext context, const Turn& failed_turn);

// Phase I: sample corrections against the extended context, execute each, and
// stop at the first success or after retry_limit attempts. Intermediate failed
// attempts stay visible inside the lookahead but are never committed.
CorrectionOutcome lookahead_correct(const HistoryPrefix& history, const Task& task,
                                    const Turn& failed_turn,
                                    const policy::PolicyParams& params,
                                    const minilang::ExecLimits& exec_limits,
                                    const SaarConfig& config, RandomStream& rng);

// Phase II: shallow replacement (keep the failed turn's reasoning) when
// ratio(failed code, corrected code) >= gamma, deep replacement (adopt the
// auxiliary reasoning) otherwise. The returned turn's behavior log-probs are
// provisional lookahead values pending recomputation.
Turn adaptive_replace(const Turn& failed_turn, const CorrectionOutcome& outcome,
                      double gamma);

// Online purification: run_episode with the per-episode mixing coin; when
// active, failed turns go through lookahead correction and, on recovery, the
// purified turn is committed in their place. On exhaustion the original failed
// turn is committed unchanged.
Trajectory purify_online(const Task& task, const policy::PolicyParams& params,
                         const rollout::RolloutLimits& limits, const SaarConfig& config,
                         RandomStream& rng);

struct OfflineSummary {
  int64_t runs_collapsed = 0;
  int64_t shallow = 0;
  int64_t deep = 0;
  int64_t errors_removed = 0;
};

// Offline purification of a recorded raw trajectory: each maximal failure run
// followed by a success collapses to one purified turn (similarity compared
// between the run's first failed code and the succeeding success code).
// Trailing failure runs are kept verbatim. Already-purified input is rejected.
Trajectory purify_offline(const Trajectory& raw, double gamma,
                          OfflineSummary* summary = nullptr);

// Re-ground every decision's behavior log-prob in the committed (purified)
// context. Cost is one feature build per turn via the incremental featurizer.
Trajectory recompute_logprobs(const Trajectory& traj, const Task& task,
                              const policy::PolicyParams& params);

}  // namespace cleaner::saar
