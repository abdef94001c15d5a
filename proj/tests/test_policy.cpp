#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "cleaner/minilang.hpp"
#include "cleaner/policy.hpp"
#include "cleaner/rng.hpp"
#include "cleaner/similarity.hpp"
#include "cleaner/tasks.hpp"

using namespace cleaner;
using namespace cleaner::policy;

namespace {

Task arith_task(int64_t p1 = 2, int64_t p2 = 3, int64_t op = 0) {
  Task task;
  task.task_id = "arith-test";
  task.prompt_features = {0, p1, p2, op};
  task.target = tasks::reference_target(tasks::FamilyId::kArithmetic, p1, p2, op);
  return task;
}

Turn failed_parse_turn() {
  Turn turn;
  turn.reasoning = "attempt";
  turn.code = "(2+3";
  turn.observation = Observation::failure(ErrorKind::kParse, "parse error at position 4");
  turn.decisions = {{kCategoryTemplate, static_cast<int>(TemplateId::kTypoParen), -1.0},
                    {kCategoryContinuation, kChoiceContinue, -0.7}};
  return turn;
}

double max_rel_error(const std::vector<double>& analytic, const std::vector<double>& fd) {
  double analytic_norm = 0.0, fd_norm = 0.0, diff_norm = 0.0;
  for (size_t i = 0; i < analytic.size(); ++i) {
    analytic_norm += analytic[i] * analytic[i];
    fd_norm += fd[i] * fd[i];
    diff_norm += (analytic[i] - fd[i]) * (analytic[i] - fd[i]);
  }
  const double denom = std::max({std::sqrt(analytic_norm), std::sqrt(fd_norm), 1e-12});
  return std::sqrt(diff_norm) / denom;
}

}  // namespace

TEST_CASE("featurize encodes history through the declared feature set") {
  const Task task = arith_task();
  HistoryPrefix history;

  ContextFeatures features = featurize(history, task);
  CHECK(features.values.size() == kFeatureLen);
  CHECK(features.values[kFeatBias] == 1.0);
  CHECK(features.values[kFeatPriorFailures] == 0.0);
  for (int e = 0; e < kErrorKindCount; ++e) CHECK(features.values[kFeatLastError + e] == 0.0);

  history = concat(history, failed_parse_turn());
  features = featurize(history, task);
  CHECK(features.values[kFeatPriorFailures] == 1.0);
  CHECK(features.values[kFeatLastError + static_cast<int>(ErrorKind::kParse)] == 1.0);
  CHECK(features.values[kFeatTurnIndex] == 1.0);
  CHECK(features.values[kFeatLastTemplate + static_cast<int>(TemplateId::kTypoParen)] == 1.0);

  // A purified history shows no trace of the failure that occurred during
  // lookahead: the committed turn is a success.
  HistoryPrefix purified;
  Turn committed = failed_parse_turn();
  committed.code = "2+3";
  committed.observation = Observation::success(5);
  committed.provenance = Provenance::kPurifiedShallow;
  committed.decisions = {{kCategoryTemplate, static_cast<int>(TemplateId::kLocalEdit), -1.0},
                         {kCategoryContinuation, kChoiceStop, -0.7}};
  purified = concat(purified, committed);
  features = featurize(purified, task);
  CHECK(features.values[kFeatPriorFailures] == 0.0);
  for (int e = 0; e < kErrorKindCount; ++e) CHECK(features.values[kFeatLastError + e] == 0.0);
}

TEST_CASE("theta zero samples every category uniformly") {
  const Task task = arith_task();
  const PolicyParams params = PolicyParams::zeros(agent_shape());
  const ContextFeatures features = featurize(HistoryPrefix{}, task);
  RandomStream rng(0x7e57);

  const int draws = 100000;
  std::vector<int> counts(kTemplateCount, 0);
  for (int i = 0; i < draws; ++i) {
    const ActionPlan plan = sample_action(features, params, rng);
    ++counts[static_cast<size_t>(plan.decisions[0].choice)];
  }
  const double expected = static_cast<double>(draws) / kTemplateCount;
  const double sigma = std::sqrt(draws * (1.0 / kTemplateCount) * (1.0 - 1.0 / kTemplateCount));
  for (const int count : counts) {
    CHECK(std::abs(count - expected) <= 3.0 * sigma);
  }
}

TEST_CASE("a dominant logit is sampled almost surely") {
  const Task task = arith_task();
  PolicyParams params = PolicyParams::zeros(agent_shape());
  params.weight(kCategoryTemplate, static_cast<int>(TemplateId::kStepwise), kFeatBias) = 20.0;
  const ContextFeatures features = featurize(HistoryPrefix{}, task);

  const auto probs = softmax(category_logits(params, kCategoryTemplate, features));
  CHECK(probs[static_cast<size_t>(TemplateId::kStepwise)] > 0.999);

  RandomStream rng(0xd0);
  for (int i = 0; i < 10000; ++i) {
    const ActionPlan plan = sample_action(features, params, rng);
    CHECK(plan.decisions[0].choice == static_cast<int>(TemplateId::kStepwise));
  }
}

TEST_CASE("identical features, params and seed give identical plans") {
  const Task task = arith_task(5, 7, 2);
  const PolicyParams params = PolicyParams::zeros(agent_shape());
  const ContextFeatures features = featurize(HistoryPrefix{}, task);
  RandomStream rng_a(42);
  RandomStream rng_b(42);
  for (int i = 0; i < 100; ++i) {
    const ActionPlan a = sample_action(features, params, rng_a);
    const ActionPlan b = sample_action(features, params, rng_b);
    CHECK(a.decisions == b.decisions);
    CHECK(a.code == b.code);
    CHECK(a.reasoning == b.reasoning);
  }
}

TEST_CASE("action_logprob factorizes exactly") {
  PolicyShape binary_shape{{2}, 1};
  PolicyParams params = PolicyParams::zeros(binary_shape);
  ContextFeatures features{{1.0}};
  CHECK(action_logprob(features, {{0, 0, 0.0}}, params) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-15));

  PolicyShape two_binary{{2, 2}, 1};
  PolicyParams params2 = PolicyParams::zeros(two_binary);
  CHECK(action_logprob(features, {{0, 1, 0.0}, {1, 0, 0.0}}, params2) ==
        doctest::Approx(2.0 * std::log(0.5)).epsilon(1e-15));

  // exp(logprob) equals the product of explicitly computed softmax entries.
  RandomStream rng(0xab5);
  PolicyShape shape{{3, 4, 2}, 5};
  PolicyParams random_params = PolicyParams::zeros(shape);
  for (double& w : random_params.theta) w = rng.next_double() * 4.0 - 2.0;
  ContextFeatures random_features{{1.0, 0.0, 1.0, 2.0, 0.0}};
  const std::vector<DecisionRecord> decisions = {{0, 2, 0.0}, {1, 0, 0.0}, {2, 1, 0.0}};
  double product = 1.0;
  for (const DecisionRecord& d : decisions) {
    product *= softmax(category_logits(random_params, d.category_id, random_features))
        [static_cast<size_t>(d.choice)];
  }
  CHECK(std::exp(action_logprob(random_features, decisions, random_params)) ==
        doctest::Approx(product).epsilon(1e-12));

  CHECK_THROWS_AS(action_logprob(features, {{0, 5, 0.0}}, params), std::invalid_argument);
}

TEST_CASE("softmax normalizes for arbitrary params") {
  RandomStream rng(0x50f7);
  for (int i = 0; i < 200; ++i) {
    PolicyShape shape{{static_cast<int>(rng.next_int(2, 8))}, 4};
    PolicyParams params = PolicyParams::zeros(shape);
    for (double& w : params.theta) w = rng.next_double() * 40.0 - 20.0;
    ContextFeatures features{{rng.next_double(), rng.next_double(), rng.next_double(),
                              rng.next_double()}};
    const auto probs = softmax(category_logits(params, 0, features));
    double total = 0.0;
    for (const double p : probs) total += p;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("gradient matches the hand softmax derivative") {
  PolicyShape shape{{2}, 1};
  PolicyParams params = PolicyParams::zeros(shape);
  ContextFeatures features{{1.0}};
  const auto grad = grad_action_logprob(features, {{0, 0, 0.0}}, params);
  REQUIRE(grad.size() == 2);
  CHECK(grad[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(grad[1] == doctest::Approx(-0.5).epsilon(1e-15));

  // All-zero features kill the gradient by the chain rule.
  ContextFeatures zeros{{0.0}};
  const auto zero_grad = grad_action_logprob(zeros, {{0, 0, 0.0}}, params);
  CHECK(zero_grad == std::vector<double>{0.0, 0.0});
}

TEST_CASE("gradient matches central finite differences at random points") {
  RandomStream rng(0x97ad);
  const double step = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    PolicyShape shape{{static_cast<int>(rng.next_int(2, 5)),
                       static_cast<int>(rng.next_int(2, 4))},
                      3};
    PolicyParams params = PolicyParams::zeros(shape);
    for (double& w : params.theta) w = rng.next_double() * 2.0 - 1.0;
    ContextFeatures features{{rng.next_double(), rng.next_double() * 2.0, 1.0}};
    const std::vector<DecisionRecord> decisions = {
        {0, static_cast<int>(rng.next_int(0, shape.arities[0] - 1)), 0.0},
        {1, static_cast<int>(rng.next_int(0, shape.arities[1] - 1)), 0.0}};

    const auto analytic = grad_action_logprob(features, decisions, params);
    std::vector<double> fd(params.theta.size());
    for (size_t p = 0; p < params.theta.size(); ++p) {
      PolicyParams plus = params;
      PolicyParams minus = params;
      plus.theta[p] += step;
      minus.theta[p] -= step;
      fd[p] = (action_logprob(features, decisions, plus) -
               action_logprob(features, decisions, minus)) /
              (2.0 * step);
    }
    CHECK(max_rel_error(analytic, fd) < 1e-4);
  }
}

TEST_CASE("template rendering produces the planted behaviors") {
  const PolicyParams params = PolicyParams::zeros(agent_shape());
  const minilang::ExecLimits limits;

  const auto check_family = [&](const Task& task) {
    const ContextFeatures features = featurize(HistoryPrefix{}, task);
    const auto obs_for = [&](TemplateId id) {
      return minilang::run(
          plan_action(features, params, static_cast<int>(id), kChoiceContinue).code, limits);
    };
    CHECK(obs_for(TemplateId::kDirect) == Observation::success(task.target));
    CHECK(obs_for(TemplateId::kStepwise) == Observation::success(task.target));
    CHECK(obs_for(TemplateId::kTypoParen).error_kind == ErrorKind::kParse);
    CHECK(obs_for(TemplateId::kDivZero).error_kind == ErrorKind::kDivisionByZero);
    CHECK(obs_for(TemplateId::kUndefVar).error_kind == ErrorKind::kUndefinedVariable);
    CHECK(obs_for(TemplateId::kOffByOne) == Observation::success(task.target + 1));
    // Without a repairable predecessor, local edit degenerates to direct.
    const ActionPlan fallback = plan_action(features, params,
                                            static_cast<int>(TemplateId::kLocalEdit),
                                            kChoiceContinue);
    CHECK(fallback.kind == ActionKind::kFresh);
    CHECK(minilang::run(fallback.code, limits) == Observation::success(task.target));
  };

  check_family(arith_task(5, 3, 0));   // 5+3
  check_family(arith_task(5, 3, 1));   // 5-3
  check_family(arith_task(5, 3, 2));   // 5*3
  Task twostep;
  twostep.prompt_features = {1, 4, 6, 7};
  twostep.target = tasks::reference_target(tasks::FamilyId::kTwoStep, 4, 6, 7);
  check_family(twostep);
  Task division;
  division.prompt_features = {2, 9, 4, 5};
  division.target = tasks::reference_target(tasks::FamilyId::kDivision, 9, 4, 5);
  check_family(division);
}

TEST_CASE("local edit repairs each planted fault with a near-identical fix") {
  const PolicyParams params = PolicyParams::zeros(agent_shape());
  const Task task = arith_task(8, 2, 2);  // 8*2
  const minilang::ExecLimits limits;

  for (const TemplateId fault :
       {TemplateId::kTypoParen, TemplateId::kDivZero, TemplateId::kUndefVar}) {
    const ContextFeatures clean = featurize(HistoryPrefix{}, task);
    const ActionPlan faulty =
        plan_action(clean, params, static_cast<int>(fault), kChoiceContinue);
    Turn failed;
    failed.code = faulty.code;
    failed.observation = minilang::run(faulty.code, limits);
    failed.decisions = faulty.decisions;
    REQUIRE(!failed.observation.ok());

    const HistoryPrefix history = concat(HistoryPrefix{}, failed);
    const ContextFeatures after = featurize(history, task);
    const ActionPlan repair = plan_action(after, params,
                                          static_cast<int>(TemplateId::kLocalEdit),
                                          kChoiceContinue);
    CHECK(repair.kind == ActionKind::kLocalEdit);
    CHECK(minilang::run(repair.code, limits) == Observation::success(task.target));
    // A local edit is a one-token fix: high similarity to the failed code.
    CHECK(similarity::ratio(failed.code, repair.code) >= 0.5);
  }

  // A fresh rewrite after the same failure restructures the code: low
  // similarity.
  const ContextFeatures clean = featurize(HistoryPrefix{}, task);
  const ActionPlan faulty = plan_action(clean, params,
                                        static_cast<int>(TemplateId::kTypoParen),
                                        kChoiceContinue);
  Turn failed;
  failed.code = faulty.code;
  failed.observation = minilang::run(faulty.code, limits);
  failed.decisions = faulty.decisions;
  const ContextFeatures after = featurize(concat(HistoryPrefix{}, failed), task);
  const ActionPlan fresh = plan_action(after, params,
                                       static_cast<int>(TemplateId::kStepwise),
                                       kChoiceContinue);
  CHECK(fresh.kind == ActionKind::kFresh);
  CHECK(similarity::ratio(failed.code, fresh.code) < 0.5);
}

TEST_CASE("conditioning locality: equal features imply equal behavior") {
  const Task task = arith_task(4, 9, 1);
  const PolicyParams params = PolicyParams::zeros(agent_shape());

  // Two different histories with the same declared feature summary.
  Turn success_a = failed_parse_turn();
  success_a.reasoning = "one way";
  success_a.code = "4-9";
  success_a.observation = Observation::success(-5);
  success_a.decisions = {{kCategoryTemplate, static_cast<int>(TemplateId::kDirect), -1.9},
                         {kCategoryContinuation, kChoiceContinue, -0.6}};
  Turn success_b = success_a;
  success_b.reasoning = "another way entirely";

  const ContextFeatures fa = featurize(concat(HistoryPrefix{}, success_a), task);
  const ContextFeatures fb = featurize(concat(HistoryPrefix{}, success_b), task);
  REQUIRE(fa == fb);

  RandomStream rng_a(7), rng_b(7);
  for (int i = 0; i < 20; ++i) {
    CHECK(sample_action(fa, params, rng_a).code == sample_action(fb, params, rng_b).code);
  }
}

TEST_CASE("params persist with their shape header") {
  RandomStream rng(0x9a9e);
  PolicyParams params = PolicyParams::zeros(agent_shape());
  for (double& w : params.theta) w = rng.next_double() * 2.0 - 1.0;

  const std::string path =
      (std::filesystem::temp_directory_path() / "cleaner_params_test.json").string();
  save_params(params, path, "seed=123 step=7");
  const PolicyParams loaded = load_params(path);
  CHECK(loaded.shape == params.shape);
  CHECK(loaded.theta == params.theta);
  std::filesystem::remove(path);
}

TEST_CASE("incremental featurizer builds once per turn") {
  const Task task = arith_task();
  IncrementalFeaturizer featurizer(task);
  const ContextFeatures first = featurizer.current();
  CHECK(first == featurize(HistoryPrefix{}, task));
  featurizer.current();
  featurizer.current();
  CHECK(featurizer.features_built() == 1);

  HistoryPrefix history;
  for (int i = 0; i < 5; ++i) {
    const Turn turn = failed_parse_turn();
    featurizer.advance(turn);
    history = concat(history, turn);
    CHECK(featurizer.current() == featurize(history, task));
  }
  CHECK(featurizer.features_built() == 6);
}
