// Command-line front end: training runs, evaluation, offline purification,
// similarity cross-checks, and run reporting.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cleaner/harness.hpp"
#include "cleaner/saar.hpp"
#include "cleaner/similarity.hpp"
#include "cleaner/tasks.hpp"

namespace {

using namespace cleaner;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

int run_train(const std::string& config_path, const std::string& mode,
              std::optional<uint64_t> seed, const std::string& run_dir) {
  harness::ExperimentConfig config = harness::load_config(config_path);
  if (!mode.empty()) config.mode = harness::mode_from_name(mode);
  if (seed) config.seed = *seed;
  if (!run_dir.empty()) config.run_dir = run_dir;
  const harness::TrainResult result = harness::train(config);
  std::cout << "run_dir=" << result.run_dir << " steps=" << result.metrics.size();
  if (!result.metrics.empty()) {
    std::cout << " final_train_success=" << result.metrics.back().train_success_rate
              << " final_tool_errors=" << result.metrics.back().mean_tool_errors_per_traj;
  }
  std::cout << "\n";
  return 0;
}

int run_eval(const std::string& params_path, const std::string& tasks_path, int k,
             int samples, uint64_t seed, int max_turns) {
  const policy::PolicyParams params = policy::load_params(params_path);
  const std::vector<Task> task_set = tasks::load_tasks(tasks_path);
  rollout::RolloutLimits limits;
  limits.max_turns = max_turns;
  if (samples < k) samples = k;
  const harness::EvalResult result =
      harness::evaluate(params, task_set, samples, k, seed, limits);
  std::printf("pass@1=%.6f pass@%d=%.6f n=%d tasks=%zu\n", result.pass_at_1, k,
              result.pass_at_k, samples, task_set.size());
  return 0;
}

int run_purify(double gamma, const std::string& in_path, const std::string& out_path) {
  std::ifstream in(in_path);
  if (!in) throw std::runtime_error("cannot read file: " + in_path);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write file: " + out_path);

  saar::OfflineSummary totals;
  int64_t trajectories = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Trajectory raw;
    try {
      raw = deserialize(line);
    } catch (const FormatError& e) {
      throw std::runtime_error(in_path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    saar::OfflineSummary summary;
    Trajectory purified;
    try {
      purified = saar::purify_offline(raw, gamma, &summary);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(in_path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    out << serialize(purified) << "\n";
    totals.runs_collapsed += summary.runs_collapsed;
    totals.shallow += summary.shallow;
    totals.deep += summary.deep;
    totals.errors_removed += summary.errors_removed;
    ++trajectories;
  }
  std::printf("trajectories=%lld runs_collapsed=%lld shallow=%lld deep=%lld errors_removed=%lld\n",
              static_cast<long long>(trajectories),
              static_cast<long long>(totals.runs_collapsed),
              static_cast<long long>(totals.shallow), static_cast<long long>(totals.deep),
              static_cast<long long>(totals.errors_removed));
  return 0;
}

int run_simdiff(const std::string& path_a, const std::string& path_b) {
  const std::string a = read_file(path_a);
  const std::string b = read_file(path_b);
  std::printf("%.12f\n", similarity::ratio(a, b));
  return 0;
}

int run_report(const std::vector<std::string>& run_dirs) {
  std::cout << harness::report(run_dirs);
  return 0;
}

int run_gen_tasks(const std::string& families_csv, int count, uint64_t seed,
                  const std::string& out_path) {
  std::vector<tasks::TaskFamily> families;
  std::stringstream stream(families_csv);
  std::string item;
  while (std::getline(stream, item, ',')) {
    if (!item.empty()) families.push_back(tasks::TaskFamily{tasks::family_from_name(item)});
  }
  if (families.empty()) throw std::runtime_error("no task families given");
  const std::vector<Task> task_set =
      tasks::generate_task_set(families, count, RandomStream(seed));
  tasks::save_tasks(out_path, task_set);
  std::cout << "tasks=" << task_set.size() << " out=" << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale agentic RL with trajectory purification"};
  app.require_subcommand(1);

  // train
  std::string train_config, train_mode, train_run_dir;
  std::optional<uint64_t> train_seed;
  auto* train_cmd = app.add_subcommand("train", "run a training experiment");
  train_cmd->add_option("--config", train_config, "config file (key = value lines)")
      ->required();
  train_cmd->add_option("--mode", train_mode, "baseline|saar (overrides config)");
  train_cmd->add_option("--seed", train_seed, "seed (overrides config)");
  train_cmd->add_option("--run-dir", train_run_dir, "run directory (overrides config)");

  // eval
  std::string eval_params, eval_tasks;
  int eval_k = 1, eval_samples = 0, eval_max_turns = 8;
  uint64_t eval_seed = 1;
  auto* eval_cmd = app.add_subcommand("eval", "pass@1 / pass@k evaluation");
  eval_cmd->add_option("--params", eval_params, "policy params JSON")->required();
  eval_cmd->add_option("--tasks", eval_tasks, "task set JSON")->required();
  eval_cmd->add_option("--k", eval_k, "k for pass@k")->required();
  eval_cmd->add_option("--samples", eval_samples, "samples per task (default max(16, k))");
  eval_cmd->add_option("--seed", eval_seed, "evaluation seed");
  eval_cmd->add_option("--max-turns", eval_max_turns, "episode turn limit");

  // purify
  double purify_gamma = 0.5;
  std::string purify_in, purify_out;
  auto* purify_cmd = app.add_subcommand("purify", "offline trajectory purification");
  purify_cmd->add_option("--gamma", purify_gamma, "similarity threshold")->required();
  purify_cmd->add_option("--in", purify_in, "input trajectory lines")->required();
  purify_cmd->add_option("--out", purify_out, "output trajectory lines")->required();

  // simdiff
  std::string simdiff_a, simdiff_b;
  auto* simdiff_cmd = app.add_subcommand("simdiff", "similarity ratio of two files");
  simdiff_cmd->add_option("fileA", simdiff_a, "first file")->required();
  simdiff_cmd->add_option("fileB", simdiff_b, "second file")->required();

  // report
  std::vector<std::string> report_dirs;
  auto* report_cmd = app.add_subcommand("report", "summarize run directories");
  report_cmd->add_option("--run", report_dirs, "run directory (repeatable)")->required();

  // gen-tasks
  std::string gen_families = "arith,twostep,div", gen_out;
  int gen_count = 64;
  uint64_t gen_seed = 1;
  auto* gen_cmd = app.add_subcommand("gen-tasks", "generate a persisted task set");
  gen_cmd->add_option("--families", gen_families, "comma-separated family names");
  gen_cmd->add_option("--count", gen_count, "number of tasks");
  gen_cmd->add_option("--seed", gen_seed, "generator seed");
  gen_cmd->add_option("--out", gen_out, "output JSON path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return run_train(train_config, train_mode, train_seed, train_run_dir);
    if (*eval_cmd) {
      const int samples = eval_samples > 0 ? eval_samples : std::max(16, eval_k);
      return run_eval(eval_params, eval_tasks, eval_k, samples, eval_seed, eval_max_turns);
    }
    if (*purify_cmd) return run_purify(purify_gamma, purify_in, purify_out);
    if (*simdiff_cmd) return run_simdiff(simdiff_a, simdiff_b);
    if (*report_cmd) return run_report(report_dirs);
    if (*gen_cmd) return run_gen_tasks(gen_families, gen_count, gen_seed, gen_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}
