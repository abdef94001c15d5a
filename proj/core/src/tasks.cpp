#include "cleaner/tasks.hpp"

#include <json.hpp>

#include <fstream>
#include <stdexcept>

#include "cleaner/minilang.hpp"
#include "cleaner/policy.hpp"

namespace cleaner::tasks {

using nlohmann::json;

const char* family_name(FamilyId id) {
  switch (id) {
    case FamilyId::kArithmetic: return "arith";
    case FamilyId::kTwoStep: return "twostep";
    case FamilyId::kDivision: return "div";
  }
  throw std::logic_error("unknown family");
}

FamilyId family_from_name(const std::string& name) {
  if (name == "arith") return FamilyId::kArithmetic;
  if (name == "twostep") return FamilyId::kTwoStep;
  if (name == "div") return FamilyId::kDivision;
  throw std::invalid_argument("unknown task family '" + name + "'");
}

int64_t reference_target(FamilyId family, int64_t p1, int64_t p2, int64_t p3) {
  switch (family) {
    case FamilyId::kArithmetic:
      switch (p3 % 3) {
        case 1: return p1 - p2;
        case 2: return p1 * p2;
        default: return p1 + p2;
      }
    case FamilyId::kTwoStep:
      return (p1 + p2) * p3;
    case FamilyId::kDivision:
      if (p3 == 0) throw std::invalid_argument("division family with zero divisor");
      return (p1 * p2) / p3;
  }
  throw std::logic_error("unknown family");
}

namespace {

// The hidden value behind an ambiguous marker, and the marker itself, per
// family. The hidden value goes only into the target (and the task id); the
// prompt features carry the marker.
int64_t ambiguous_marker(FamilyId id) {
  return id == FamilyId::kArithmetic ? kArithAmbiguousMarker : kStageAmbiguousMarker;
}

int64_t hidden_resolution(FamilyId id, bool minority) {
  switch (id) {
    case FamilyId::kArithmetic: return minority ? 2 : 0;  // '*' vs '+'
    case FamilyId::kTwoStep: return minority ? 3 : 2;     // multiplier
    case FamilyId::kDivision: return minority ? 3 : 2;    // divisor
  }
  throw std::logic_error("unknown family");
}

}  // namespace

bool is_ambiguous(const Task& task) {
  if (task.prompt_features.size() < 4) return false;
  return task.prompt_features[3] == ambiguous_marker(family_of(task));
}

Task generate_task(const TaskFamily& family, RandomStream& rng) {
  const int64_t p1 = rng.next_int(family.operand_min, family.operand_max);
  const int64_t p2 = rng.next_int(family.operand_min, family.operand_max);

  Task task;
  if (family.ambiguous_share > 0.0 && rng.next_double() < family.ambiguous_share) {
    const bool minority = rng.next_double() < kAmbiguousMinorityShare;
    const int64_t hidden = hidden_resolution(family.id, minority);
    task.prompt_features = {static_cast<int64_t>(family.id), p1, p2,
                            ambiguous_marker(family.id)};
    task.target = reference_target(family.id, p1, p2, hidden);
    task.task_id = std::string(family_name(family.id)) + "-" + std::to_string(p1) + "-" +
                   std::to_string(p2) + "-h" + std::to_string(hidden);
    return task;
  }

  int64_t p3 = 0;
  switch (family.id) {
    case FamilyId::kArithmetic:
      p3 = rng.next_int(0, 2);
      break;
    case FamilyId::kTwoStep:
      p3 = rng.next_int(std::max<int64_t>(1, family.operand_min), family.operand_max);
      break;
    case FamilyId::kDivision:
      p3 = rng.next_int(std::max<int64_t>(1, family.operand_min), family.operand_max);
      break;
  }
  task.prompt_features = {static_cast<int64_t>(family.id), p1, p2, p3};
  task.target = reference_target(family.id, p1, p2, p3);
  task.task_id = std::string(family_name(family.id)) + "-" + std::to_string(p1) + "-" +
                 std::to_string(p2) + "-" + std::to_string(p3);
  return task;
}

void verify_family_solvability(const TaskFamily& family) {
  const minilang::ExecLimits limits;
  const policy::PolicyParams params = policy::PolicyParams::zeros(policy::agent_shape());
  const auto solved_by_some_template = [&](const Task& task) {
    const policy::ContextFeatures features = policy::featurize(HistoryPrefix{}, task);
    for (const policy::TemplateId id :
         {policy::TemplateId::kDirect, policy::TemplateId::kStepwise}) {
      const policy::ActionPlan plan = policy::plan_action(
          features, params, static_cast<int>(id), policy::kChoiceContinue);
      if (minilang::run(plan.code, limits) == Observation::success(task.target)) return true;
    }
    return false;
  };

  for (int64_t p1 = family.operand_min; p1 <= family.operand_max; ++p1) {
    for (int64_t p2 = family.operand_min; p2 <= family.operand_max; ++p2) {
      Task task;
      // Visible third parameter.
      int64_t p3_lo = 0, p3_hi = 0;
      switch (family.id) {
        case FamilyId::kArithmetic: p3_lo = 0; p3_hi = 2; break;
        case FamilyId::kTwoStep:
        case FamilyId::kDivision:
          p3_lo = std::max<int64_t>(1, family.operand_min);
          p3_hi = family.operand_max;
          break;
      }
      for (int64_t p3 = p3_lo; p3 <= p3_hi; ++p3) {
        task.prompt_features = {static_cast<int64_t>(family.id), p1, p2, p3};
        task.target = reference_target(family.id, p1, p2, p3);
        if (!solved_by_some_template(task)) {
          throw std::logic_error("unsolvable task in family grid: " +
                                 std::string(family_name(family.id)));
        }
      }
      // Both hidden resolutions of the ambiguous variant.
      for (const bool minority : {false, true}) {
        task.prompt_features = {static_cast<int64_t>(family.id), p1, p2,
                                ambiguous_marker(family.id)};
        task.target =
            reference_target(family.id, p1, p2, hidden_resolution(family.id, minority));
        if (!solved_by_some_template(task)) {
          throw std::logic_error("unsolvable ambiguous task in family grid: " +
                                 std::string(family_name(family.id)));
        }
      }
    }
  }
}

std::vector<Task> generate_task_set(std::span<const TaskFamily> families, int count,
                                    RandomStream rng) {
  if (families.empty()) throw std::invalid_argument("no task families given");
  std::vector<Task> tasks;
  tasks.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const auto& family =
        families[static_cast<size_t>(rng.next_int(0, static_cast<int64_t>(families.size()) - 1))];
    tasks.push_back(generate_task(family, rng));
  }
  return tasks;
}

FamilyId family_of(const Task& task) {
  if (task.prompt_features.empty()) throw std::invalid_argument("task has no features");
  const int64_t id = task.prompt_features[0];
  if (id < 0 || id > 2) throw std::invalid_argument("task family id out of range");
  return static_cast<FamilyId>(id);
}

void save_tasks(const std::string& path, std::span<const Task> tasks) {
  json list = json::array();
  for (const Task& task : tasks) {
    list.push_back(json{{"task_id", task.task_id},
                        {"prompt_features", task.prompt_features},
                        {"target", task.target}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write task file: " + path);
  out << list.dump() << "\n";
}

std::vector<Task> load_tasks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read task file: " + path);
  json list;
  in >> list;
  if (!list.is_array()) throw std::runtime_error("task file: expected a JSON array");
  std::vector<Task> tasks;
  for (const json& j : list) {
    Task task;
    task.task_id = j.at("task_id").get<std::string>();
    task.prompt_features = j.at("prompt_features").get<std::vector<int64_t>>();
    task.target = j.at("target").get<int64_t>();
    tasks.push_back(std::move(task));
  }
  return tasks;
}

}  // namespace cleaner::tasks
