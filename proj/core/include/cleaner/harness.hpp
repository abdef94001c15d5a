#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cleaner/grpo.hpp"
#include "cleaner/rollout.hpp"
#include "cleaner/saar.hpp"
#include "cleaner/tasks.hpp"

namespace cleaner::harness {

enum class Mode { kBaseline, kSaar };

const char* mode_name(Mode mode);
Mode mode_from_name(const std::string& name);

struct ExperimentConfig {
  uint64_t seed = 1;
  Mode mode = Mode::kBaseline;
  int total_steps = 300;
  std::vector<tasks::TaskFamily> families = {
      {tasks::FamilyId::kArithmetic}, {tasks::FamilyId::kTwoStep},
      {tasks::FamilyId::kDivision}};
  rollout::RolloutLimits rollout{};
  saar::SaarConfig saar{};
  grpo::GrpoConfig grpo{};
  int eval_tasks = 32;
  int eval_every = 1;
  int snapshot_every = 50;
  int save_trajectories_every = 0;  // 0 disables trajectory dumps
  int warmup_steps = 10;
  // A run aborts as vacuous when every group is filtered for this many
  // consecutive steps past warmup. Isolated fully-filtered steps are normal
  // near convergence and are just warned no-op updates.
  int vacuous_abort_steps = 25;
  int threads = 0;              // 0 = hardware concurrency
  // When set, overrides ambiguous_share on every listed family.
  std::optional<double> ambiguous_share;
  std::string init_params;      // optional params file to start from
  std::string run_dir;          // resolved under $CLEANER_RUN_ROOT if relative
};

// Flat key=value config file; '#' starts a comment; unknown keys are errors.
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& config, const std::string& path);
std::string resolve_run_dir(const std::string& run_dir);

struct MetricRow {
  int step = 0;
  double mean_tool_errors_per_traj = 0.0;
  double mean_tool_calls_per_traj = 0.0;
  double train_success_rate = 0.0;
  double eval_success_rate = 0.0;
  double mean_turns = 0.0;
  double purified_fraction = 0.0;
  double filtered_group_fraction = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricRow& row);
std::vector<MetricRow> read_metrics_csv(const std::string& path);

class TrainAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  policy::PolicyParams params;
  std::vector<MetricRow> metrics;
  std::string run_dir;
};

// One training run: per step, sample a batch of tasks, roll out G episodes
// each (purified online in saar mode), recompute behavior log-probs under the
// committed contexts, form groups, update, log a metric row. Deterministic
// per (config, seed), including with parallel rollout.
TrainResult train(const ExperimentConfig& config);

struct EvalResult {
  double pass_at_1 = 0.0;
  double pass_at_k = 0.0;
  int n_samples = 0;
  int k = 0;
};

// Unbiased pass@k estimator from n samples with c successes:
// 1 - C(n-c, k) / C(n, k). pass@1 is the k=1 case (c/n).
double pass_at_k_estimate(int n, int c, int k);

EvalResult evaluate(const policy::PolicyParams& params, std::span<const Task> task_set,
                    int n_samples, int k, uint64_t seed,
                    const rollout::RolloutLimits& limits, int threads = 0);

struct RunSummary {
  std::string run_dir;
  int steps = 0;
  double final_train_success = 0.0;
  double tail_mean_tool_errors = 0.0;  // mean over the last 10 steps
  std::optional<int> steps_to_90pct;   // first step with train success >= 0.9
};

RunSummary summarize_run(const std::string& run_dir);

// Summary text plus a plot-ready CSV of the per-step series of every given
// run (joined on step). Two runs additionally get a delta table.
std::string report(std::span<const std::string> run_dirs);

// Deterministic parallel loop: index-addressed jobs, interleaved assignment,
// results keyed by index so thread count never affects output.
void parallel_for(int jobs, int threads, const std::function<void(int)>& body);

}  // namespace cleaner::harness
