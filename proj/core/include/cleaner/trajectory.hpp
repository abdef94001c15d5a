#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cleaner {

enum class Outcome { kSuccess, kFailure };

enum class ErrorKind {
  kParse,
  kDivisionByZero,
  kUndefinedVariable,
  kStepLimit,
  kOverflow,
};
inline constexpr int kErrorKindCount = 5;

// The environment's only voice: either a value (with its printed form) or a
// deterministic error. Success carries no error fields, failure carries no
// value.
struct Observation {
  Outcome outcome = Outcome::kFailure;
  std::string stdout_text;
  std::optional<int64_t> value;
  std::optional<ErrorKind> error_kind;
  std::string message;

  static Observation success(int64_t v);
  static Observation failure(ErrorKind kind, std::string msg);

  bool ok() const { return outcome == Outcome::kSuccess; }
  bool operator==(const Observation&) const = default;
};

// One categorical choice made by the policy, with the log-probability it had
// under the context that sampled (or re-grounded) it.
struct DecisionRecord {
  int category_id = 0;
  int choice = 0;
  double behavior_logprob = 0.0;

  bool operator==(const DecisionRecord&) const = default;
};

enum class Provenance { kNatural, kPurifiedShallow, kPurifiedDeep };

struct Turn {
  std::string reasoning;
  std::string code;
  Observation observation;
  std::vector<DecisionRecord> decisions;
  Provenance provenance = Provenance::kNatural;

  bool operator==(const Turn&) const = default;
};

struct TrajectoryStats {
  int64_t tool_calls = 0;
  int64_t tool_errors = 0;
  int64_t noisy_success_runs = 0;

  bool operator==(const TrajectoryStats&) const = default;
};

// A query instance: id, integer feature vector (family id followed by
// operands) and the ground-truth answer computed by an evaluator independent
// of the policy's program templates.
struct Task {
  std::string task_id;
  std::vector<int64_t> prompt_features;
  int64_t target = 0;

  bool operator==(const Task&) const = default;
};

struct Trajectory {
  std::string task_id;
  std::vector<Turn> turns;
  std::optional<int64_t> final_answer;
  std::optional<double> reward;
  bool purification_applied = false;
  TrajectoryStats stats;

  bool operator==(const Trajectory&) const = default;
};

// Persistent (structurally shared) history prefix. Appending returns a new
// prefix; the old one stays valid and unchanged, which is what lets the
// lookahead phase explore an extended context while the committed state is
// frozen. Immutable after construction, safe to share across threads.
class HistoryPrefix {
 public:
  HistoryPrefix() = default;

  HistoryPrefix append(Turn turn) const;
  size_t size() const { return tip_ ? tip_->length : 0; }
  bool empty() const { return !tip_; }
  // Number of Failure observations in the prefix (cached, O(1)).
  int64_t failure_count() const { return tip_ ? tip_->failures : 0; }
  const Turn& back() const;
  // Turns oldest-first.
  std::vector<Turn> to_vector() const;

 private:
  struct Node {
    Turn turn;
    std::shared_ptr<const Node> parent;
    size_t length;
    int64_t failures;
  };
  explicit HistoryPrefix(std::shared_ptr<const Node> tip) : tip_(std::move(tip)) {}
  std::shared_ptr<const Node> tip_;
};

// Persistent append: result has length+1, `history` is untouched.
HistoryPrefix concat(const HistoryPrefix& history, Turn turn);

// Number of maximal runs of consecutive Failure turns that are immediately
// followed by a Success turn (the noisy-success pattern). Trailing failure
// runs do not count.
int64_t count_noisy_success_runs(const Trajectory& traj);
int64_t count_noisy_success_runs(const std::vector<Turn>& turns);

TrajectoryStats recompute_stats(const std::vector<Turn>& turns);

// Thrown by deserialize (and the format helpers) with the offending field in
// the message.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Trajectory-lines interchange: one JSON object per line, UTF-8, exactly the
// documented fields; unknown fields are rejected, stored stats are checked
// against the turns on every deserialize.
std::string serialize(const Trajectory& traj);
Trajectory deserialize(std::string_view line);

std::string to_wire(ErrorKind kind);
std::string to_wire(Provenance provenance);

}  // namespace cleaner
