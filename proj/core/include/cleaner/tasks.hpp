#pragma once

#include <span>
#include <string>
#include <vector>

#include "cleaner/rng.hpp"
#include "cleaner/trajectory.hpp"

namespace cleaner::tasks {

// Three task families over small integers. Operands stay within [0, 12] so
// the policy's one-hot operand features cover them exactly.
//
//   arith:   p1 (+|-|*) p2, operator selected by p3
//   twostep: (p1 + p2) * p3
//   div:     (p1 * p2) / p3, truncating - the family whose naive faulty
//            templates divide by zero, i.e. the error-prone regime
//
// Each family also generates an ambiguous share of instances whose third
// parameter is withheld from the prompt features (slot set to the family's
// reserved marker) and resolved only inside the target. The direct template
// guesses the common resolution, the stepwise template the rare one, so every
// instance stays solvable while no policy can saturate the whole
// distribution. These instances keep group rewards from collapsing to zero
// variance at convergence.
enum class FamilyId : int { kArithmetic = 0, kTwoStep = 1, kDivision = 2 };

// Prompt-feature markers for the withheld third parameter.
inline constexpr int64_t kArithAmbiguousMarker = 12;  // visible selectors are 0..2
inline constexpr int64_t kStageAmbiguousMarker = 0;   // visible operands are >= 1

// Hidden resolutions behind an ambiguous marker: one is rendered by the
// direct template, the other by the stepwise template. An even split keeps
// the induced template preference at a mixed equilibrium, so groups on these
// instances retain reward variance at any parameter setting.
inline constexpr double kAmbiguousMinorityShare = 0.5;

struct TaskFamily {
  FamilyId id = FamilyId::kArithmetic;
  int64_t operand_min = 2;
  int64_t operand_max = 12;
  double ambiguous_share = 0.25;
};

bool is_ambiguous(const Task& task);

const char* family_name(FamilyId id);
FamilyId family_from_name(const std::string& name);

// Ground truth via plain 64-bit arithmetic, independent of the policy's
// program templates.
int64_t reference_target(FamilyId family, int64_t p1, int64_t p2, int64_t p3);

Task generate_task(const TaskFamily& family, RandomStream& rng);
std::vector<Task> generate_task_set(std::span<const TaskFamily> families, int count,
                                    RandomStream rng);

FamilyId family_of(const Task& task);

// Exhaustive solvability check over the family's parameter grid, including
// the ambiguous variants: at least one policy template must hit each target.
void verify_family_solvability(const TaskFamily& family);

// Task sets persist as a JSON list for experiment reproducibility.
void save_tasks(const std::string& path, std::span<const Task> tasks);
std::vector<Task> load_tasks(const std::string& path);

}  // namespace cleaner::tasks
