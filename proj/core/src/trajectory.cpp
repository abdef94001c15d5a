#include "cleaner/trajectory.hpp"

#include <json.hpp>

#include <cmath>
#include <utility>

namespace cleaner {

using nlohmann::json;

Observation Observation::success(int64_t v) {
  Observation obs;
  obs.outcome = Outcome::kSuccess;
  obs.value = v;
  obs.stdout_text = std::to_string(v);
  return obs;
}

Observation Observation::failure(ErrorKind kind, std::string msg) {
  Observation obs;
  obs.outcome = Outcome::kFailure;
  obs.error_kind = kind;
  obs.message = std::move(msg);
  return obs;
}

HistoryPrefix HistoryPrefix::append(Turn turn) const {
  const int64_t failed = turn.observation.ok() ? 0 : 1;
  auto node = std::make_shared<Node>(
      Node{std::move(turn), tip_, size() + 1, failure_count() + failed});
  return HistoryPrefix(std::move(node));
}

const Turn& HistoryPrefix::back() const {
  if (!tip_) throw std::logic_error("HistoryPrefix::back on empty prefix");
  return tip_->turn;
}

std::vector<Turn> HistoryPrefix::to_vector() const {
  std::vector<Turn> turns(size());
  const Node* node = tip_.get();
  for (size_t i = size(); i > 0; --i) {
    turns[i - 1] = node->turn;
    node = node->parent.get();
  }
  return turns;
}

HistoryPrefix concat(const HistoryPrefix& history, Turn turn) {
  return history.append(std::move(turn));
}

int64_t count_noisy_success_runs(const std::vector<Turn>& turns) {
  int64_t runs = 0;
  for (size_t i = 1; i < turns.size(); ++i) {
    if (turns[i].observation.ok() && !turns[i - 1].observation.ok()) ++runs;
  }
  return runs;
}

int64_t count_noisy_success_runs(const Trajectory& traj) {
  return count_noisy_success_runs(traj.turns);
}

TrajectoryStats recompute_stats(const std::vector<Turn>& turns) {
  TrajectoryStats stats;
  stats.tool_calls = static_cast<int64_t>(turns.size());
  for (const Turn& turn : turns) {
    if (!turn.observation.ok()) ++stats.tool_errors;
  }
  stats.noisy_success_runs = count_noisy_success_runs(turns);
  return stats;
}

namespace {

constexpr const char* kOutcomeSuccess = "success";
constexpr const char* kOutcomeFailure = "failure";

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kDivisionByZero: return "division_by_zero";
    case ErrorKind::kUndefinedVariable: return "undefined_variable";
    case ErrorKind::kStepLimit: return "step_limit";
    case ErrorKind::kOverflow: return "overflow";
  }
  throw std::logic_error("unknown error kind");
}

ErrorKind error_kind_from_name(const std::string& name, const std::string& where) {
  if (name == "parse") return ErrorKind::kParse;
  if (name == "division_by_zero") return ErrorKind::kDivisionByZero;
  if (name == "undefined_variable") return ErrorKind::kUndefinedVariable;
  if (name == "step_limit") return ErrorKind::kStepLimit;
  if (name == "overflow") return ErrorKind::kOverflow;
  throw FormatError(where + ": unknown error_kind '" + name + "'");
}

const char* provenance_name(Provenance provenance) {
  switch (provenance) {
    case Provenance::kNatural: return "natural";
    case Provenance::kPurifiedShallow: return "purified_shallow";
    case Provenance::kPurifiedDeep: return "purified_deep";
  }
  throw std::logic_error("unknown provenance");
}

Provenance provenance_from_name(const std::string& name, const std::string& where) {
  if (name == "natural") return Provenance::kNatural;
  if (name == "purified_shallow") return Provenance::kPurifiedShallow;
  if (name == "purified_deep") return Provenance::kPurifiedDeep;
  throw FormatError(where + ": unknown provenance '" + name + "'");
}

void reject_unknown_fields(const json& obj, std::initializer_list<const char*> allowed,
                           const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (const char* name : allowed) {
      if (key == name) { known = true; break; }
    }
    if (!known) throw FormatError(where + ": unknown field '" + key + "'");
  }
}

const json& require(const json& obj, const char* field, const std::string& where) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    throw FormatError(where + ": missing field '" + field + "'");
  }
  return *it;
}

json observation_to_json(const Observation& obs) {
  json j;
  j["outcome"] = obs.ok() ? kOutcomeSuccess : kOutcomeFailure;
  if (!obs.stdout_text.empty()) j["stdout"] = obs.stdout_text;
  if (obs.value) j["value"] = *obs.value;
  if (obs.error_kind) j["error_kind"] = error_kind_name(*obs.error_kind);
  if (!obs.message.empty()) j["message"] = obs.message;
  return j;
}

Observation observation_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw FormatError(where + ": expected object");
  reject_unknown_fields(j, {"outcome", "stdout", "value", "error_kind", "message"}, where);
  Observation obs;
  const std::string outcome = require(j, "outcome", where).get<std::string>();
  if (outcome == kOutcomeSuccess) {
    obs.outcome = Outcome::kSuccess;
    obs.value = require(j, "value", where).get<int64_t>();
    if (j.contains("error_kind") || j.contains("message")) {
      throw FormatError(where + ": success carries error fields");
    }
  } else if (outcome == kOutcomeFailure) {
    obs.outcome = Outcome::kFailure;
    obs.error_kind =
        error_kind_from_name(require(j, "error_kind", where).get<std::string>(), where);
    obs.message = require(j, "message", where).get<std::string>();
    if (obs.message.empty()) throw FormatError(where + ": empty failure message");
    if (j.contains("value")) throw FormatError(where + ": failure carries a value");
  } else {
    throw FormatError(where + ": unknown outcome '" + outcome + "'");
  }
  if (j.contains("stdout")) obs.stdout_text = j.at("stdout").get<std::string>();
  return obs;
}

json decision_to_json(const DecisionRecord& d) {
  return json{{"category_id", d.category_id},
              {"choice", d.choice},
              {"behavior_logprob", d.behavior_logprob}};
}

DecisionRecord decision_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw FormatError(where + ": expected object");
  reject_unknown_fields(j, {"category_id", "choice", "behavior_logprob"}, where);
  DecisionRecord d;
  d.category_id = require(j, "category_id", where).get<int>();
  d.choice = require(j, "choice", where).get<int>();
  d.behavior_logprob = require(j, "behavior_logprob", where).get<double>();
  if (d.behavior_logprob > 0.0) {
    throw FormatError(where + ": behavior_logprob must be <= 0");
  }
  return d;
}

json turn_to_json(const Turn& turn) {
  json decisions = json::array();
  for (const DecisionRecord& d : turn.decisions) decisions.push_back(decision_to_json(d));
  return json{{"reasoning", turn.reasoning},
              {"code", turn.code},
              {"observation", observation_to_json(turn.observation)},
              {"decisions", std::move(decisions)},
              {"provenance", provenance_name(turn.provenance)}};
}

Turn turn_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw FormatError(where + ": expected object");
  reject_unknown_fields(j, {"reasoning", "code", "observation", "decisions", "provenance"},
                        where);
  Turn turn;
  turn.reasoning = require(j, "reasoning", where).get<std::string>();
  turn.code = require(j, "code", where).get<std::string>();
  turn.observation = observation_from_json(require(j, "observation", where),
                                           where + ".observation");
  const json& decisions = require(j, "decisions", where);
  if (!decisions.is_array() || decisions.empty()) {
    throw FormatError(where + ".decisions: expected nonempty array");
  }
  for (size_t i = 0; i < decisions.size(); ++i) {
    turn.decisions.push_back(
        decision_from_json(decisions[i], where + ".decisions[" + std::to_string(i) + "]"));
  }
  turn.provenance =
      provenance_from_name(require(j, "provenance", where).get<std::string>(), where);
  if (turn.provenance != Provenance::kNatural && !turn.observation.ok()) {
    throw FormatError(where + ": purified turn with failure observation");
  }
  return turn;
}

}  // namespace

std::string to_wire(ErrorKind kind) { return error_kind_name(kind); }
std::string to_wire(Provenance provenance) { return provenance_name(provenance); }

std::string serialize(const Trajectory& traj) {
  json turns = json::array();
  for (const Turn& turn : traj.turns) turns.push_back(turn_to_json(turn));
  json j{{"task_id", traj.task_id},
         {"turns", std::move(turns)},
         {"final_answer", nullptr},
         {"reward", nullptr},
         {"purification_applied", traj.purification_applied},
         {"stats", json{{"tool_calls", traj.stats.tool_calls},
                        {"tool_errors", traj.stats.tool_errors},
                        {"noisy_success_runs", traj.stats.noisy_success_runs}}}};
  if (traj.final_answer) j["final_answer"] = *traj.final_answer;
  if (traj.reward) j["reward"] = *traj.reward;
  return j.dump();
}

Trajectory deserialize(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("trajectory line is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("trajectory line is not a JSON object");
  reject_unknown_fields(
      j, {"task_id", "turns", "final_answer", "reward", "purification_applied", "stats"},
      "trajectory");

  Trajectory traj;
  traj.task_id = require(j, "task_id", "trajectory").get<std::string>();
  const json& turns = require(j, "turns", "trajectory");
  if (!turns.is_array()) throw FormatError("trajectory.turns: expected array");
  for (size_t i = 0; i < turns.size(); ++i) {
    traj.turns.push_back(turn_from_json(turns[i], "turns[" + std::to_string(i) + "]"));
  }
  const json& answer = require(j, "final_answer", "trajectory");
  if (!answer.is_null()) traj.final_answer = answer.get<int64_t>();
  const json& reward = require(j, "reward", "trajectory");
  if (!reward.is_null()) {
    traj.reward = reward.get<double>();
    if (!std::isfinite(*traj.reward)) throw FormatError("trajectory.reward: not finite");
  }
  traj.purification_applied =
      require(j, "purification_applied", "trajectory").get<bool>();

  const json& stats = require(j, "stats", "trajectory");
  if (!stats.is_object()) throw FormatError("trajectory.stats: expected object");
  reject_unknown_fields(stats, {"tool_calls", "tool_errors", "noisy_success_runs"},
                        "trajectory.stats");
  traj.stats.tool_calls = require(stats, "tool_calls", "trajectory.stats").get<int64_t>();
  traj.stats.tool_errors = require(stats, "tool_errors", "trajectory.stats").get<int64_t>();
  traj.stats.noisy_success_runs =
      require(stats, "noisy_success_runs", "trajectory.stats").get<int64_t>();

  if (traj.stats != recompute_stats(traj.turns)) {
    throw FormatError("trajectory.stats: stored stats disagree with turns");
  }
  if (!traj.purification_applied) {
    for (size_t i = 0; i < traj.turns.size(); ++i) {
      if (traj.turns[i].provenance != Provenance::kNatural) {
        throw FormatError("turns[" + std::to_string(i) +
                          "]: purified provenance but purification_applied is false");
      }
    }
  }
  return traj;
}

}  // namespace cleaner
