#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cleaner/rng.hpp"
#include "cleaner/trajectory.hpp"

namespace cleaner::policy {

// ---------------------------------------------------------------------------
// Generic factored-categorical machinery: a parameter vector partitioned into
// per-category logit-weight matrices (arity x feature length), with exact
// log-probabilities and analytic gradients.
// ---------------------------------------------------------------------------

struct PolicyShape {
  std::vector<int> arities;
  int feature_len = 0;

  int num_categories() const { return static_cast<int>(arities.size()); }
  int param_count() const;
  // Offset of a category's weight block within the flat parameter vector.
  int block_offset(int category) const;

  bool operator==(const PolicyShape&) const = default;
};

struct PolicyParams {
  PolicyShape shape;
  std::vector<double> theta;

  static PolicyParams zeros(PolicyShape shape);

  double weight(int category, int choice, int feature) const;
  double& weight(int category, int choice, int feature);
};

struct ContextFeatures {
  std::vector<double> values;

  bool operator==(const ContextFeatures&) const = default;
};

// logits[c] = W_cat[c] . features
std::vector<double> category_logits(const PolicyParams& params, int category,
                                    const ContextFeatures& features);
std::vector<double> softmax(std::span<const double> logits);
int sample_choice(std::span<const double> probs, RandomStream& rng);

// Sum over decisions of log softmax(W_cat . features)[choice]. Throws
// std::invalid_argument when a choice is outside its category's arity.
double action_logprob(const ContextFeatures& features,
                      const std::vector<DecisionRecord>& decisions,
                      const PolicyParams& params);

// Analytic gradient of action_logprob w.r.t. theta: per category,
// (onehot(choice) - softmax(logits)) outer features, accumulated into the
// matching block; zeros elsewhere.
std::vector<double> grad_action_logprob(const ContextFeatures& features,
                                        const std::vector<DecisionRecord>& decisions,
                                        const PolicyParams& params);

// Parameter persistence: one JSON object holding the shape header, a seed
// lineage note, and the flat theta array.
void save_params(const PolicyParams& params, const std::string& path,
                 const std::string& seed_lineage);
PolicyParams load_params(const std::string& path);

// ---------------------------------------------------------------------------
// The agent policy: two decision categories over a fixed template library for
// the mini-language, conditioned on bounded history features.
// ---------------------------------------------------------------------------

inline constexpr int kCategoryTemplate = 0;
inline constexpr int kCategoryContinuation = 1;
inline constexpr int kChoiceContinue = 0;
inline constexpr int kChoiceStop = 1;

// Program templates. The faulty ones plant one error kind each; kLocalEdit
// renders a one-token fix of the previous code (reconstructed from the
// last-template feature), falling back to kDirect when there is nothing to
// fix.
enum class TemplateId : int {
  kDirect = 0,
  kStepwise = 1,
  kTypoParen = 2,
  kDivZero = 3,
  kUndefVar = 4,
  kOffByOne = 5,
  kLocalEdit = 6,
};
inline constexpr int kTemplateCount = 7;

// Feature layout. Entries are 0/1 except the two bounded counts.
inline constexpr int kFamilyCount = 3;
inline constexpr int kOperandCount = 3;
inline constexpr int kOperandValues = 13;  // one-hot over 0..12
inline constexpr int kFeatBias = 0;
inline constexpr int kFeatFamily = 1;
inline constexpr int kFeatOperands = kFeatFamily + kFamilyCount;
inline constexpr int kFeatTurnIndex = kFeatOperands + kOperandCount * kOperandValues;
inline constexpr int kFeatPriorFailures = kFeatTurnIndex + 1;
inline constexpr int kFeatLastError = kFeatPriorFailures + 1;
inline constexpr int kFeatLastTemplate = kFeatLastError + kErrorKindCount;
inline constexpr int kFeatureLen = kFeatLastTemplate + kTemplateCount;
inline constexpr int kCountCap = 8;

PolicyShape agent_shape();

// Everything featurize is allowed to see of a conditioning history.
struct ConditioningState {
  int turn_index = 0;
  int prior_failures = 0;
  std::optional<ErrorKind> last_error;
  std::optional<int> last_template;

  // Fold one more committed (or lookahead) turn into the state.
  void advance(const Turn& turn);

  bool operator==(const ConditioningState&) const = default;
};

ConditioningState conditioning_state(const HistoryPrefix& history);
int template_choice_of(const Turn& turn);
bool turn_requests_stop(const Turn& turn);

ContextFeatures build_features(const Task& task, const ConditioningState& state);
ContextFeatures featurize(const HistoryPrefix& history, const Task& task);

enum class ActionKind { kFresh, kLocalEdit };

struct ActionPlan {
  std::vector<DecisionRecord> decisions;
  std::string reasoning;
  std::string code;
  ActionKind kind = ActionKind::kFresh;
};

ActionPlan sample_action(const ContextFeatures& features, const PolicyParams& params,
                         RandomStream& rng);

// Deterministic plan construction for fixed choices (used by sampling and by
// fixtures). Rendering depends only on fields decodable from the features.
ActionPlan plan_action(const ContextFeatures& features, const PolicyParams& params,
                       int template_choice, int continuation_choice);

// Feeds features turn-by-turn while reusing the running prefix state, so a
// full-trajectory pass costs O(turns) feature builds. This is the prefix-reuse
// contract the recomputation path relies on.
class IncrementalFeaturizer {
 public:
  explicit IncrementalFeaturizer(Task task);

  const ContextFeatures& current();
  void advance(const Turn& turn);
  int64_t features_built() const { return builds_; }

 private:
  Task task_;
  ConditioningState state_;
  ContextFeatures features_;
  bool dirty_ = true;
  int64_t builds_ = 0;
};

}  // namespace cleaner::policy
