#include "cleaner/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace cleaner::harness {

namespace fs = std::filesystem;

namespace {

constexpr uint64_t kEvalSetTag = 0x6576616c5f736574ULL;
constexpr uint64_t kTaskTag = 0x7461736b73ULL;
constexpr uint64_t kEpisodeTag = 0x657069736f6465ULL;
constexpr uint64_t kEvalTag = 0x6576616cULL;

std::string trim(std::string_view s) {
  size_t lo = 0, hi = s.size();
  while (lo < hi && std::isspace(static_cast<unsigned char>(s[lo]))) ++lo;
  while (hi > lo && std::isspace(static_cast<unsigned char>(s[hi - 1]))) --hi;
  return std::string(s.substr(lo, hi - lo));
}

std::string format_double(double value) {
  std::ostringstream out;
  out.precision(17);
  out << value;
  std::string s = out.str();
  // Prefer the shortest representation that round-trips.
  for (int precision = 1; precision < 17; ++precision) {
    std::ostringstream probe;
    probe.precision(precision);
    probe << value;
    double back = 0.0;
    std::istringstream(probe.str()) >> back;
    if (back == value) return probe.str();
  }
  return s;
}

int64_t parse_int(const std::string& value, const std::string& key) {
  try {
    size_t idx = 0;
    const int64_t parsed = std::stoll(value, &idx);
    if (idx != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw std::runtime_error("config key '" + key + "': expected an integer, got '" +
                             value + "'");
  }
}

double parse_real(const std::string& value, const std::string& key) {
  try {
    size_t idx = 0;
    const double parsed = std::stod(value, &idx);
    if (idx != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw std::runtime_error("config key '" + key + "': expected a number, got '" + value +
                             "'");
  }
}

std::vector<tasks::TaskFamily> parse_families(const std::string& value) {
  std::vector<tasks::TaskFamily> families;
  std::stringstream stream(value);
  std::string item;
  while (std::getline(stream, item, ',')) {
    const std::string name = trim(item);
    if (name.empty()) continue;
    families.push_back(tasks::TaskFamily{tasks::family_from_name(name)});
  }
  if (families.empty()) throw std::runtime_error("config key 'families': empty list");
  return families;
}

void apply_config_key(ExperimentConfig& config, const std::string& key,
                      const std::string& value) {
  if (key == "seed") config.seed = static_cast<uint64_t>(parse_int(value, key));
  else if (key == "mode") config.mode = mode_from_name(value);
  else if (key == "total_steps") config.total_steps = static_cast<int>(parse_int(value, key));
  else if (key == "families") config.families = parse_families(value);
  else if (key == "max_turns") config.rollout.max_turns = static_cast<int>(parse_int(value, key));
  else if (key == "max_steps") config.rollout.exec_limits.max_steps = parse_int(value, key);
  else if (key == "max_abs_value") config.rollout.exec_limits.max_abs_value = parse_int(value, key);
  else if (key == "retry_limit") config.saar.retry_limit = static_cast<int>(parse_int(value, key));
  else if (key == "similarity_threshold") config.saar.similarity_threshold = parse_real(value, key);
  else if (key == "mix_probability") config.saar.mix_probability = parse_real(value, key);
  else if (key == "group_size") config.grpo.group_size = static_cast<int>(parse_int(value, key));
  else if (key == "clip_low") config.grpo.clip_low = parse_real(value, key);
  else if (key == "clip_high") config.grpo.clip_high = parse_real(value, key);
  else if (key == "epsilon_std") config.grpo.epsilon_std = parse_real(value, key);
  else if (key == "learning_rate") config.grpo.learning_rate = parse_real(value, key);
  else if (key == "rollout_batch") config.grpo.rollout_batch = static_cast<int>(parse_int(value, key));
  else if (key == "mini_batch") config.grpo.mini_batch = static_cast<int>(parse_int(value, key));
  else if (key == "ratio_mode") {
    if (value == "trajectory") config.grpo.ratio_mode = grpo::RatioMode::kTrajectory;
    else if (value == "decision") config.grpo.ratio_mode = grpo::RatioMode::kDecision;
    else throw std::runtime_error("config key 'ratio_mode': expected trajectory|decision");
  }
  else if (key == "eval_tasks") config.eval_tasks = static_cast<int>(parse_int(value, key));
  else if (key == "eval_every") config.eval_every = static_cast<int>(parse_int(value, key));
  else if (key == "snapshot_every") config.snapshot_every = static_cast<int>(parse_int(value, key));
  else if (key == "save_trajectories_every")
    config.save_trajectories_every = static_cast<int>(parse_int(value, key));
  else if (key == "warmup_steps") config.warmup_steps = static_cast<int>(parse_int(value, key));
  else if (key == "vacuous_abort_steps")
    config.vacuous_abort_steps = static_cast<int>(parse_int(value, key));
  else if (key == "threads") config.threads = static_cast<int>(parse_int(value, key));
  else if (key == "ambiguous_share") {
    const double share = parse_real(value, key);
    if (share < 0.0 || share > 1.0) {
      throw std::runtime_error("ambiguous_share must be in [0, 1]");
    }
    config.ambiguous_share = share;
  }
  else if (key == "init_params") config.init_params = value;
  else if (key == "run_dir") config.run_dir = value;
  else throw std::runtime_error("unknown config key '" + key + "'");
}

std::string families_to_string(const std::vector<tasks::TaskFamily>& families) {
  std::string out;
  for (size_t i = 0; i < families.size(); ++i) {
    if (i > 0) out += ",";
    out += tasks::family_name(families[i].id);
  }
  return out;
}

void validate(const ExperimentConfig& config) {
  if (config.total_steps < 0) throw std::runtime_error("total_steps must be >= 0");
  if (config.grpo.group_size < 2) throw std::runtime_error("group_size must be >= 2");
  if (config.grpo.rollout_batch < 1) throw std::runtime_error("rollout_batch must be >= 1");
  if (config.rollout.max_turns < 1) throw std::runtime_error("max_turns must be >= 1");
  if (config.saar.retry_limit < 1) throw std::runtime_error("retry_limit must be >= 1");
  if (config.saar.mix_probability < 0.0 || config.saar.mix_probability > 1.0) {
    throw std::runtime_error("mix_probability must be in [0, 1]");
  }
  if (config.saar.similarity_threshold < 0.0 || config.saar.similarity_threshold > 1.0) {
    throw std::runtime_error("similarity_threshold must be in [0, 1]");
  }
  if (config.grpo.epsilon_std <= 0.0) throw std::runtime_error("epsilon_std must be > 0");
  if (config.families.empty()) throw std::runtime_error("families must be nonempty");
}

int resolve_threads(int requested, int jobs) {
  int threads = requested > 0 ? requested
                              : static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  return std::min(threads, std::max(jobs, 1));
}

}  // namespace

const char* mode_name(Mode mode) {
  return mode == Mode::kBaseline ? "baseline" : "saar";
}

Mode mode_from_name(const std::string& name) {
  if (name == "baseline") return Mode::kBaseline;
  if (name == "saar") return Mode::kSaar;
  throw std::runtime_error("unknown mode '" + name + "' (expected baseline|saar)");
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file: " + path);
  ExperimentConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;
    const size_t eq = text.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected key = value");
    }
    apply_config_key(config, trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
  }
  return config;
}

void save_config(const ExperimentConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << "seed = " << config.seed << "\n"
      << "mode = " << mode_name(config.mode) << "\n"
      << "total_steps = " << config.total_steps << "\n"
      << "families = " << families_to_string(config.families) << "\n"
      << "max_turns = " << config.rollout.max_turns << "\n"
      << "max_steps = " << config.rollout.exec_limits.max_steps << "\n"
      << "max_abs_value = " << config.rollout.exec_limits.max_abs_value << "\n"
      << "retry_limit = " << config.saar.retry_limit << "\n"
      << "similarity_threshold = " << format_double(config.saar.similarity_threshold) << "\n"
      << "mix_probability = " << format_double(config.saar.mix_probability) << "\n"
      << "group_size = " << config.grpo.group_size << "\n"
      << "clip_low = " << format_double(config.grpo.clip_low) << "\n"
      << "clip_high = " << format_double(config.grpo.clip_high) << "\n"
      << "epsilon_std = " << format_double(config.grpo.epsilon_std) << "\n"
      << "learning_rate = " << format_double(config.grpo.learning_rate) << "\n"
      << "rollout_batch = " << config.grpo.rollout_batch << "\n"
      << "mini_batch = " << config.grpo.mini_batch << "\n"
      << "ratio_mode = "
      << (config.grpo.ratio_mode == grpo::RatioMode::kTrajectory ? "trajectory" : "decision")
      << "\n"
      << "eval_tasks = " << config.eval_tasks << "\n"
      << "eval_every = " << config.eval_every << "\n"
      << "snapshot_every = " << config.snapshot_every << "\n"
      << "save_trajectories_every = " << config.save_trajectories_every << "\n"
      << "warmup_steps = " << config.warmup_steps << "\n"
      << "vacuous_abort_steps = " << config.vacuous_abort_steps << "\n"
      << "threads = " << config.threads << "\n";
  if (config.ambiguous_share) {
    out << "ambiguous_share = " << format_double(*config.ambiguous_share) << "\n";
  }
  if (!config.init_params.empty()) out << "init_params = " << config.init_params << "\n";
  out << "run_dir = " << config.run_dir << "\n";
}

std::string resolve_run_dir(const std::string& run_dir) {
  if (run_dir.empty()) throw std::runtime_error("run_dir is empty");
  fs::path path(run_dir);
  if (path.is_relative()) {
    if (const char* root = std::getenv("CLEANER_RUN_ROOT"); root && *root) {
      path = fs::path(root) / path;
    }
  }
  return path.string();
}

std::string metrics_csv_header() {
  return "step,mean_tool_errors_per_traj,mean_tool_calls_per_traj,train_success_rate,"
         "eval_success_rate,mean_turns,purified_fraction,filtered_group_fraction";
}

std::string metrics_csv_row(const MetricRow& row) {
  std::string out = std::to_string(row.step);
  for (const double value :
       {row.mean_tool_errors_per_traj, row.mean_tool_calls_per_traj,
        row.train_success_rate, row.eval_success_rate, row.mean_turns,
        row.purified_fraction, row.filtered_group_fraction}) {
    out += ",";
    out += format_double(value);
  }
  return out;
}

std::vector<MetricRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read metrics file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("metrics file is empty: " + path);
  if (trim(line) != metrics_csv_header()) {
    throw std::runtime_error("metrics file has an unexpected header: " + path);
  }
  std::vector<MetricRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::stringstream stream(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(stream, field, ',')) fields.push_back(field);
    if (fields.size() != 8) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 8 CSV fields");
    }
    MetricRow row;
    row.step = static_cast<int>(parse_int(fields[0], "step"));
    row.mean_tool_errors_per_traj = parse_real(fields[1], "mean_tool_errors_per_traj");
    row.mean_tool_calls_per_traj = parse_real(fields[2], "mean_tool_calls_per_traj");
    row.train_success_rate = parse_real(fields[3], "train_success_rate");
    row.eval_success_rate = parse_real(fields[4], "eval_success_rate");
    row.mean_turns = parse_real(fields[5], "mean_turns");
    row.purified_fraction = parse_real(fields[6], "purified_fraction");
    row.filtered_group_fraction = parse_real(fields[7], "filtered_group_fraction");
    rows.push_back(row);
  }
  return rows;
}

void parallel_for(int jobs, int threads, const std::function<void(int)>& body) {
  threads = resolve_threads(threads, jobs);
  if (threads <= 1 || jobs <= 1) {
    for (int i = 0; i < jobs; ++i) body(i);
    return;
  }
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int i = t; i < jobs; i += threads) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (std::thread& worker : pool) worker.join();
  if (first_error) std::rethrow_exception(first_error);
}

double pass_at_k_estimate(int n, int c, int k) {
  if (k < 1 || k > n) throw std::invalid_argument("pass@k requires 1 <= k <= n");
  if (c < 0 || c > n) throw std::invalid_argument("pass@k requires 0 <= c <= n");
  if (n - c < k) return 1.0;
  double prod = 1.0;
  for (int i = 0; i < k; ++i) {
    prod *= static_cast<double>(n - c - i) / static_cast<double>(n - i);
  }
  return 1.0 - prod;
}

EvalResult evaluate(const policy::PolicyParams& params, std::span<const Task> task_set,
                    int n_samples, int k, uint64_t seed,
                    const rollout::RolloutLimits& limits, int threads) {
  if (task_set.empty()) throw std::invalid_argument("evaluate: empty task set");
  if (k > n_samples) throw std::invalid_argument("evaluate: k exceeds n_samples");
  const int jobs = static_cast<int>(task_set.size()) * n_samples;
  std::vector<uint8_t> solved(static_cast<size_t>(jobs), 0);
  RandomStream master(seed);
  parallel_for(jobs, threads, [&](int job) {
    const int task_index = job / n_samples;
    const int sample_index = job % n_samples;
    const Task& task = task_set[static_cast<size_t>(task_index)];
    RandomStream stream = master.derive(kEvalTag, static_cast<uint64_t>(task_index),
                                        static_cast<uint64_t>(sample_index));
    const Trajectory traj = rollout::run_episode(task, params, limits, stream);
    solved[static_cast<size_t>(job)] =
        traj.final_answer && *traj.final_answer == task.target ? 1 : 0;
  });

  EvalResult result;
  result.n_samples = n_samples;
  result.k = k;
  for (size_t t = 0; t < task_set.size(); ++t) {
    int successes = 0;
    for (int s = 0; s < n_samples; ++s) {
      successes += solved[t * static_cast<size_t>(n_samples) + static_cast<size_t>(s)];
    }
    result.pass_at_1 += pass_at_k_estimate(n_samples, successes, 1);
    result.pass_at_k += pass_at_k_estimate(n_samples, successes, k);
  }
  result.pass_at_1 /= static_cast<double>(task_set.size());
  result.pass_at_k /= static_cast<double>(task_set.size());
  return result;
}

namespace {

void dump_groups(const std::vector<grpo::Group>& groups, const fs::path& path,
                 const std::string& why) {
  std::ofstream out(path);
  out << "# " << why << "\n";
  for (const grpo::Group& group : groups) {
    for (const Trajectory& traj : group.trajectories) out << serialize(traj) << "\n";
  }
}

}  // namespace

TrainResult train(const ExperimentConfig& config_in) {
  ExperimentConfig config = config_in;
  validate(config);
  if (config.ambiguous_share) {
    for (tasks::TaskFamily& family : config.families) {
      family.ambiguous_share = *config.ambiguous_share;
    }
  }
  for (const tasks::TaskFamily& family : config.families) {
    tasks::verify_family_solvability(family);
  }
  config.run_dir = resolve_run_dir(config.run_dir);
  fs::create_directories(config.run_dir);
  const fs::path run_dir(config.run_dir);
  save_config(config, (run_dir / "config.txt").string());

  // Baseline mode is exactly saar with the mixing probability forced to zero.
  saar::SaarConfig saar_config = config.saar;
  if (config.mode == Mode::kBaseline) saar_config.mix_probability = 0.0;

  policy::PolicyParams params = policy::PolicyParams::zeros(policy::agent_shape());
  if (!config.init_params.empty()) {
    params = policy::load_params(config.init_params);
    if (!(params.shape == policy::agent_shape())) {
      throw std::runtime_error("init_params shape does not match the agent policy");
    }
  }
  RandomStream master(config.seed);

  const std::vector<Task> eval_set = tasks::generate_task_set(
      config.families, config.eval_tasks, master.derive(kEvalSetTag));

  std::ofstream metrics_out(run_dir / "metrics.csv");
  if (!metrics_out) throw std::runtime_error("cannot write metrics.csv under " + config.run_dir);
  metrics_out << metrics_csv_header() << "\n";
  metrics_out.flush();

  TrainResult result;
  result.run_dir = config.run_dir;

  const int batch = config.grpo.rollout_batch;
  const int group_size = config.grpo.group_size;
  const int jobs = batch * group_size;
  double last_eval = 0.0;
  int consecutive_all_filtered = 0;

  for (int step = 0; step < config.total_steps; ++step) {
    RandomStream task_rng = master.derive(kTaskTag, static_cast<uint64_t>(step));
    const std::vector<Task> step_tasks =
        tasks::generate_task_set(config.families, batch, task_rng);

    // Rollout wave: one independent stream per episode; results land in
    // index order so thread count cannot affect them.
    std::vector<Trajectory> episodes(static_cast<size_t>(jobs));
    parallel_for(jobs, config.threads, [&](int job) {
      const int task_index = job / group_size;
      const Task& task = step_tasks[static_cast<size_t>(task_index)];
      RandomStream stream =
          master.derive(kEpisodeTag, static_cast<uint64_t>(step), static_cast<uint64_t>(job));
      Trajectory traj = saar::purify_online(task, params, config.rollout, saar_config, stream);
      episodes[static_cast<size_t>(job)] = saar::recompute_logprobs(traj, task, params);
    });

    std::vector<grpo::Group> groups;
    groups.reserve(static_cast<size_t>(batch));
    for (int b = 0; b < batch; ++b) {
      std::vector<Trajectory> members(
          episodes.begin() + static_cast<ptrdiff_t>(b) * group_size,
          episodes.begin() + static_cast<ptrdiff_t>(b + 1) * group_size);
      groups.push_back(grpo::make_group(step_tasks[static_cast<size_t>(b)],
                                        std::move(members), config.grpo));
    }

    MetricRow row;
    row.step = step;
    int successes = 0;
    int purified = 0;
    int filtered = 0;
    int64_t errors = 0;
    int64_t calls = 0;
    for (const grpo::Group& group : groups) {
      if (group.filtered) ++filtered;
      for (const Trajectory& traj : group.trajectories) {
        errors += traj.stats.tool_errors;
        calls += traj.stats.tool_calls;
        if (traj.reward && *traj.reward > 0.0) ++successes;
        if (traj.purification_applied) ++purified;
      }
    }
    const double n = static_cast<double>(jobs);
    row.mean_tool_errors_per_traj = static_cast<double>(errors) / n;
    row.mean_tool_calls_per_traj = static_cast<double>(calls) / n;
    row.train_success_rate = static_cast<double>(successes) / n;
    row.mean_turns = static_cast<double>(calls) / n;
    row.purified_fraction = static_cast<double>(purified) / n;
    row.filtered_group_fraction = static_cast<double>(filtered) / static_cast<double>(batch);

    if (config.save_trajectories_every > 0 && step % config.save_trajectories_every == 0) {
      fs::create_directories(run_dir / "trajectories");
      std::ofstream traj_out(run_dir / "trajectories" /
                             ("step_" + std::to_string(step) + ".jsonl"));
      for (const Trajectory& traj : episodes) traj_out << serialize(traj) << "\n";
    }

    if (row.filtered_group_fraction >= 1.0 && step >= config.warmup_steps) {
      if (++consecutive_all_filtered >= config.vacuous_abort_steps) {
        const fs::path dump = run_dir / ("diagnostics_step_" + std::to_string(step) + ".jsonl");
        dump_groups(groups, dump, "all groups filtered (zero reward variance)");
        metrics_out << metrics_csv_row(row) << "\n";
        metrics_out.flush();
        throw TrainAbort("training is vacuous: every group filtered for " +
                         std::to_string(consecutive_all_filtered) +
                         " consecutive steps at step " + std::to_string(step) +
                         "; diagnostics in " + dump.string());
      }
    } else {
      consecutive_all_filtered = 0;
    }

    try {
      grpo::UpdateResult updated = grpo::update(std::move(params), groups, config.grpo);
      params = std::move(updated.params);
    } catch (const std::domain_error& e) {
      const fs::path dump = run_dir / ("diagnostics_step_" + std::to_string(step) + ".jsonl");
      dump_groups(groups, dump, e.what());
      metrics_out << metrics_csv_row(row) << "\n";
      metrics_out.flush();
      throw TrainAbort(std::string("aborting at step ") + std::to_string(step) + ": " +
                       e.what() + "; diagnostics in " + dump.string());
    }

    if (config.eval_every > 0 && step % config.eval_every == 0) {
      const EvalResult eval =
          evaluate(params, eval_set, /*n_samples=*/1, /*k=*/1,
                   master.derive(kEvalTag, static_cast<uint64_t>(step)).lineage(),
                   config.rollout, config.threads);
      last_eval = eval.pass_at_1;
    }
    row.eval_success_rate = last_eval;

    metrics_out << metrics_csv_row(row) << "\n";
    metrics_out.flush();
    result.metrics.push_back(row);

    if (config.snapshot_every > 0 && (step + 1) % config.snapshot_every == 0) {
      policy::save_params(params,
                          (run_dir / ("params_step_" + std::to_string(step) + ".json")).string(),
                          "seed=" + std::to_string(config.seed) +
                              " step=" + std::to_string(step));
    }
  }

  policy::save_params(params, (run_dir / "params_final.json").string(),
                      "seed=" + std::to_string(config.seed) +
                          " steps=" + std::to_string(config.total_steps));
  result.params = std::move(params);
  return result;
}

RunSummary summarize_run(const std::string& run_dir) {
  const fs::path dir(run_dir);
  const fs::path metrics_path = dir / "metrics.csv";
  if (!fs::exists(metrics_path)) {
    throw std::runtime_error("run directory " + run_dir +
                             " is missing expected files: metrics.csv, config.txt");
  }
  const std::vector<MetricRow> rows = read_metrics_csv(metrics_path.string());
  RunSummary summary;
  summary.run_dir = run_dir;
  summary.steps = static_cast<int>(rows.size());
  if (!rows.empty()) {
    summary.final_train_success = rows.back().train_success_rate;
    const size_t tail = std::min<size_t>(10, rows.size());
    double total = 0.0;
    for (size_t i = rows.size() - tail; i < rows.size(); ++i) {
      total += rows[i].mean_tool_errors_per_traj;
    }
    summary.tail_mean_tool_errors = total / static_cast<double>(tail);
    for (const MetricRow& row : rows) {
      if (row.train_success_rate >= 0.9) {
        summary.steps_to_90pct = row.step;
        break;
      }
    }
  }
  return summary;
}

std::string report(std::span<const std::string> run_dirs) {
  if (run_dirs.empty()) throw std::runtime_error("report: no run directories given");
  std::vector<RunSummary> summaries;
  std::vector<std::vector<MetricRow>> series;
  for (const std::string& dir : run_dirs) {
    summaries.push_back(summarize_run(dir));
    series.push_back(read_metrics_csv((fs::path(dir) / "metrics.csv").string()));
  }

  std::ostringstream out;
  for (const RunSummary& summary : summaries) {
    out << "# run " << summary.run_dir << ": steps=" << summary.steps
        << " final_train_success=" << format_double(summary.final_train_success)
        << " tail_mean_tool_errors=" << format_double(summary.tail_mean_tool_errors)
        << " steps_to_90pct=";
    if (summary.steps_to_90pct) out << *summary.steps_to_90pct;
    else out << "never";
    out << "\n";
  }
  if (summaries.size() == 2) {
    out << "# delta (" << summaries[0].run_dir << " vs " << summaries[1].run_dir << "):"
        << " tail_mean_tool_errors "
        << format_double(summaries[0].tail_mean_tool_errors) << " vs "
        << format_double(summaries[1].tail_mean_tool_errors) << "; steps_to_90pct ";
    for (size_t i = 0; i < 2; ++i) {
      if (i) out << " vs ";
      if (summaries[i].steps_to_90pct) out << *summaries[i].steps_to_90pct;
      else out << "never";
    }
    out << "\n";
  }

  // Plot-ready CSV: the runs' series joined on step.
  out << "step";
  for (size_t r = 0; r < series.size(); ++r) {
    out << ",run" << r << "_tool_errors,run" << r << "_train_success,run" << r
        << "_eval_success";
  }
  out << "\n";
  size_t longest = 0;
  for (const auto& rows : series) longest = std::max(longest, rows.size());
  for (size_t i = 0; i < longest; ++i) {
    out << i;
    for (const auto& rows : series) {
      if (i < rows.size()) {
        out << "," << format_double(rows[i].mean_tool_errors_per_traj) << ","
            << format_double(rows[i].train_success_rate) << ","
            << format_double(rows[i].eval_success_rate);
      } else {
        out << ",,,";
      }
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace cleaner::harness
