#include "cleaner/policy.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace cleaner::policy {

using nlohmann::json;

int PolicyShape::param_count() const {
  const int total_rows = std::accumulate(arities.begin(), arities.end(), 0);
  return total_rows * feature_len;
}

int PolicyShape::block_offset(int category) const {
  if (category < 0 || category >= num_categories()) {
    throw std::invalid_argument("category out of range");
  }
  int rows = 0;
  for (int c = 0; c < category; ++c) rows += arities[c];
  return rows * feature_len;
}

PolicyParams PolicyParams::zeros(PolicyShape shape) {
  PolicyParams params;
  params.theta.assign(static_cast<size_t>(shape.param_count()), 0.0);
  params.shape = std::move(shape);
  return params;
}

double PolicyParams::weight(int category, int choice, int feature) const {
  return theta[static_cast<size_t>(shape.block_offset(category) +
                                   choice * shape.feature_len + feature)];
}

double& PolicyParams::weight(int category, int choice, int feature) {
  return theta[static_cast<size_t>(shape.block_offset(category) +
                                   choice * shape.feature_len + feature)];
}

std::vector<double> category_logits(const PolicyParams& params, int category,
                                    const ContextFeatures& features) {
  if (static_cast<int>(features.values.size()) != params.shape.feature_len) {
    throw std::invalid_argument("feature length mismatch");
  }
  const int arity = params.shape.arities[static_cast<size_t>(category)];
  const int offset = params.shape.block_offset(category);
  std::vector<double> logits(static_cast<size_t>(arity), 0.0);
  for (int c = 0; c < arity; ++c) {
    double dot = 0.0;
    const double* row = params.theta.data() + offset + c * params.shape.feature_len;
    for (int f = 0; f < params.shape.feature_len; ++f) dot += row[f] * features.values[f];
    logits[static_cast<size_t>(c)] = dot;
  }
  return logits;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> probs(logits.size());
  double total = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - peak);
    total += probs[i];
  }
  for (double& p : probs) p /= total;
  return probs;
}

int sample_choice(std::span<const double> probs, RandomStream& rng) {
  const double u = rng.next_double();
  double cumulative = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    cumulative += probs[i];
    if (u < cumulative) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

namespace {

double log_softmax_at(std::span<const double> logits, int choice) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (const double logit : logits) total += std::exp(logit - peak);
  return logits[static_cast<size_t>(choice)] - peak - std::log(total);
}

void check_decision(const PolicyShape& shape, const DecisionRecord& decision) {
  if (decision.category_id < 0 || decision.category_id >= shape.num_categories()) {
    throw std::invalid_argument("decision category " +
                                std::to_string(decision.category_id) + " out of range");
  }
  const int arity = shape.arities[static_cast<size_t>(decision.category_id)];
  if (decision.choice < 0 || decision.choice >= arity) {
    throw std::invalid_argument("decision choice " + std::to_string(decision.choice) +
                                " outside arity " + std::to_string(arity));
  }
}

}  // namespace

double action_logprob(const ContextFeatures& features,
                      const std::vector<DecisionRecord>& decisions,
                      const PolicyParams& params) {
  double total = 0.0;
  for (const DecisionRecord& decision : decisions) {
    check_decision(params.shape, decision);
    const auto logits = category_logits(params, decision.category_id, features);
    total += log_softmax_at(logits, decision.choice);
  }
  return total;
}

std::vector<double> grad_action_logprob(const ContextFeatures& features,
                                        const std::vector<DecisionRecord>& decisions,
                                        const PolicyParams& params) {
  std::vector<double> grad(params.theta.size(), 0.0);
  for (const DecisionRecord& decision : decisions) {
    check_decision(params.shape, decision);
    const auto logits = category_logits(params, decision.category_id, features);
    const auto probs = softmax(logits);
    const int offset = params.shape.block_offset(decision.category_id);
    for (size_t c = 0; c < probs.size(); ++c) {
      const double coeff = (static_cast<int>(c) == decision.choice ? 1.0 : 0.0) - probs[c];
      if (coeff == 0.0) continue;
      double* row = grad.data() + offset + static_cast<int>(c) * params.shape.feature_len;
      for (int f = 0; f < params.shape.feature_len; ++f) {
        row[f] += coeff * features.values[static_cast<size_t>(f)];
      }
    }
  }
  return grad;
}

void save_params(const PolicyParams& params, const std::string& path,
                 const std::string& seed_lineage) {
  json j{{"categories", params.shape.num_categories()},
         {"arities", params.shape.arities},
         {"feature_len", params.shape.feature_len},
         {"seed_lineage", seed_lineage},
         {"theta", params.theta}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write params file: " + path);
  out << j.dump() << "\n";
}

PolicyParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read params file: " + path);
  json j;
  in >> j;
  PolicyParams params;
  params.shape.arities = j.at("arities").get<std::vector<int>>();
  params.shape.feature_len = j.at("feature_len").get<int>();
  params.theta = j.at("theta").get<std::vector<double>>();
  if (static_cast<int>(params.shape.arities.size()) != j.at("categories").get<int>()) {
    throw std::runtime_error("params file: categories disagrees with arities");
  }
  if (params.theta.size() != static_cast<size_t>(params.shape.param_count())) {
    throw std::runtime_error("params file: theta length disagrees with shape");
  }
  return params;
}

// ---------------------------------------------------------------------------
// Agent policy
// ---------------------------------------------------------------------------

PolicyShape agent_shape() {
  return PolicyShape{{kTemplateCount, 2}, kFeatureLen};
}

int template_choice_of(const Turn& turn) {
  for (const DecisionRecord& d : turn.decisions) {
    if (d.category_id == kCategoryTemplate) return d.choice;
  }
  return -1;
}

bool turn_requests_stop(const Turn& turn) {
  for (const DecisionRecord& d : turn.decisions) {
    if (d.category_id == kCategoryContinuation) return d.choice == kChoiceStop;
  }
  return false;
}

void ConditioningState::advance(const Turn& turn) {
  ++turn_index;
  if (turn.observation.ok()) {
    last_error.reset();
  } else {
    ++prior_failures;
    last_error = turn.observation.error_kind;
  }
  const int choice = template_choice_of(turn);
  if (choice >= 0 && choice < kTemplateCount) {
    last_template = choice;
  } else {
    last_template.reset();
  }
}

ConditioningState conditioning_state(const HistoryPrefix& history) {
  ConditioningState state;
  state.turn_index = static_cast<int>(history.size());
  state.prior_failures = static_cast<int>(history.failure_count());
  if (!history.empty()) {
    const Turn& last = history.back();
    if (!last.observation.ok()) state.last_error = last.observation.error_kind;
    const int choice = template_choice_of(last);
    if (choice >= 0 && choice < kTemplateCount) state.last_template = choice;
  }
  return state;
}

ContextFeatures build_features(const Task& task, const ConditioningState& state) {
  ContextFeatures features;
  features.values.assign(kFeatureLen, 0.0);
  features.values[kFeatBias] = 1.0;

  const auto feature_at = [&](size_t i) -> int64_t {
    return i < task.prompt_features.size() ? task.prompt_features[i] : 0;
  };
  const int family = static_cast<int>(std::clamp<int64_t>(feature_at(0), 0, kFamilyCount - 1));
  features.values[static_cast<size_t>(kFeatFamily + family)] = 1.0;
  for (int i = 0; i < kOperandCount; ++i) {
    const int value = static_cast<int>(
        std::clamp<int64_t>(feature_at(static_cast<size_t>(i) + 1), 0, kOperandValues - 1));
    features.values[static_cast<size_t>(kFeatOperands + i * kOperandValues + value)] = 1.0;
  }
  features.values[kFeatTurnIndex] = std::min(state.turn_index, kCountCap);
  features.values[kFeatPriorFailures] = std::min(state.prior_failures, kCountCap);
  if (state.last_error) {
    features.values[static_cast<size_t>(kFeatLastError + static_cast<int>(*state.last_error))] =
        1.0;
  }
  if (state.last_template) {
    features.values[static_cast<size_t>(kFeatLastTemplate + *state.last_template)] = 1.0;
  }
  return features;
}

ContextFeatures featurize(const HistoryPrefix& history, const Task& task) {
  return build_features(task, conditioning_state(history));
}

namespace {

struct TaskFields {
  int family = 0;
  int64_t operand[kOperandCount] = {0, 0, 0};
};

// Inverse of the one-hot encoding in build_features.
TaskFields decode_task_fields(const ContextFeatures& features) {
  TaskFields fields;
  for (int f = 0; f < kFamilyCount; ++f) {
    if (features.values[static_cast<size_t>(kFeatFamily + f)] > 0.5) fields.family = f;
  }
  for (int i = 0; i < kOperandCount; ++i) {
    for (int v = 0; v < kOperandValues; ++v) {
      if (features.values[static_cast<size_t>(kFeatOperands + i * kOperandValues + v)] > 0.5) {
        fields.operand[i] = v;
      }
    }
  }
  return fields;
}

std::optional<int> decode_last_template(const ContextFeatures& features) {
  for (int t = 0; t < kTemplateCount; ++t) {
    if (features.values[static_cast<size_t>(kFeatLastTemplate + t)] > 0.5) return t;
  }
  return std::nullopt;
}

char arith_op(int64_t selector) {
  switch (selector % 3) {
    case 1: return '-';
    case 2: return '*';
    default: return '+';
  }
}

// Whether the third parameter slot carries the family's "withheld" marker.
// For such tasks the direct form guesses the common resolution and the
// stepwise form the rare one; neither is reliably right, which is the point.
bool slot_withheld(const TaskFields& fields) {
  return fields.family == 0 ? fields.operand[2] == 12 : fields.operand[2] == 0;
}

// The canonical correct single-expression form per family.
std::string direct_expr(const TaskFields& fields) {
  const std::string p1 = std::to_string(fields.operand[0]);
  const std::string p2 = std::to_string(fields.operand[1]);
  const bool withheld = slot_withheld(fields);
  const std::string p3 = withheld ? "2" : std::to_string(fields.operand[2]);
  switch (fields.family) {
    case 1: return "(" + p1 + "+" + p2 + ")*" + p3;
    case 2: return "(" + p1 + "*" + p2 + ")/" + p3;
    default: return p1 + (withheld ? '+' : arith_op(fields.operand[2])) + p2;
  }
}

std::string stepwise_code(const TaskFields& fields) {
  const std::string p1 = std::to_string(fields.operand[0]);
  const std::string p2 = std::to_string(fields.operand[1]);
  const bool withheld = slot_withheld(fields);
  const std::string p3 = withheld ? "3" : std::to_string(fields.operand[2]);
  switch (fields.family) {
    case 1: return "x = " + p1 + "+" + p2 + "; x*" + p3;
    case 2: return "x = " + p1 + "*" + p2 + "; x/" + p3;
    default:
      return "x = " + p1 + "; x" + (withheld ? '*' : arith_op(fields.operand[2])) + p2;
  }
}

struct Rendering {
  std::string code;
  ActionKind kind = ActionKind::kFresh;
};

Rendering render_template(int choice, const TaskFields& fields,
                          std::optional<int> last_template) {
  const std::string direct = direct_expr(fields);
  const std::string p2 = std::to_string(fields.operand[1]);
  switch (static_cast<TemplateId>(choice)) {
    case TemplateId::kDirect:
      return {direct, ActionKind::kFresh};
    case TemplateId::kStepwise:
      return {stepwise_code(fields), ActionKind::kFresh};
    case TemplateId::kTypoParen:
      return {"(" + direct, ActionKind::kFresh};
    case TemplateId::kDivZero:
      return {"(" + direct + ")/(" + p2 + "-" + p2 + ")", ActionKind::kFresh};
    case TemplateId::kUndefVar:
      return {"x = " + direct + "; x+z", ActionKind::kFresh};
    case TemplateId::kOffByOne:
      return {direct + "+1", ActionKind::kFresh};
    case TemplateId::kLocalEdit:
      break;
    default:
      throw std::invalid_argument("unknown template choice " + std::to_string(choice));
  }
  // Local edit: one-token fix of the previous code, reconstructed from the
  // last-template feature. Without a repairable predecessor it degenerates to
  // a fresh direct solve.
  if (last_template) {
    switch (static_cast<TemplateId>(*last_template)) {
      case TemplateId::kTypoParen:
        return {direct, ActionKind::kLocalEdit};
      case TemplateId::kDivZero:
        return {"(" + direct + ")/1", ActionKind::kLocalEdit};
      case TemplateId::kUndefVar:
        return {"x = " + direct + "; x+0", ActionKind::kLocalEdit};
      default:
        break;
    }
  }
  return {direct, ActionKind::kFresh};
}

const char* template_phrase(int choice) {
  switch (static_cast<TemplateId>(choice)) {
    case TemplateId::kDirect: return "compute the answer in a single expression";
    case TemplateId::kStepwise: return "stage the computation through a scratch variable";
    case TemplateId::kTypoParen: return "group the whole computation and evaluate it";
    case TemplateId::kDivZero: return "normalize the result by the operand difference";
    case TemplateId::kUndefVar: return "adjust the scratch result before reporting";
    case TemplateId::kOffByOne: return "evaluate directly and correct the result upward";
    case TemplateId::kLocalEdit: return "patch the previous code at the offending token";
  }
  return "solve";
}

}  // namespace

ActionPlan plan_action(const ContextFeatures& features, const PolicyParams& params,
                       int template_choice, int continuation_choice) {
  const auto template_logits = category_logits(params, kCategoryTemplate, features);
  const auto continuation_logits = category_logits(params, kCategoryContinuation, features);

  ActionPlan plan;
  plan.decisions = {
      DecisionRecord{kCategoryTemplate, template_choice,
                     log_softmax_at(template_logits, template_choice)},
      DecisionRecord{kCategoryContinuation, continuation_choice,
                     log_softmax_at(continuation_logits, continuation_choice)},
  };

  const TaskFields fields = decode_task_fields(features);
  Rendering rendering = render_template(template_choice, fields, decode_last_template(features));
  plan.code = std::move(rendering.code);
  plan.kind = rendering.kind;
  plan.reasoning = std::string(template_phrase(template_choice)) +
                   (continuation_choice == kChoiceStop ? "; then stop" : "; then continue");
  return plan;
}

ActionPlan sample_action(const ContextFeatures& features, const PolicyParams& params,
                         RandomStream& rng) {
  const auto template_probs = softmax(category_logits(params, kCategoryTemplate, features));
  const int template_choice = sample_choice(template_probs, rng);
  const auto continuation_probs =
      softmax(category_logits(params, kCategoryContinuation, features));
  const int continuation_choice = sample_choice(continuation_probs, rng);
  return plan_action(features, params, template_choice, continuation_choice);
}

IncrementalFeaturizer::IncrementalFeaturizer(Task task) : task_(std::move(task)) {}

const ContextFeatures& IncrementalFeaturizer::current() {
  if (dirty_) {
    features_ = build_features(task_, state_);
    dirty_ = false;
    ++builds_;
  }
  return features_;
}

void IncrementalFeaturizer::advance(const Turn& turn) {
  state_.advance(turn);
  dirty_ = true;
}

}  // namespace cleaner::policy
