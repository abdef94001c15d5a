#include <benchmark/benchmark.h>

#include "cleaner/minilang.hpp"

namespace {

using cleaner::minilang::ExecLimits;

void BM_ParseAndRun(benchmark::State& state) {
  const ExecLimits limits;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cleaner::minilang::run("x = 12*7; (x+3)/5", limits));
  }
}
BENCHMARK(BM_ParseAndRun);

void BM_ParseFailure(benchmark::State& state) {
  const ExecLimits limits;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cleaner::minilang::run("((12+7)*3", limits));
  }
}
BENCHMARK(BM_ParseFailure);

void BM_DeepExpression(benchmark::State& state) {
  std::string source = "1";
  for (int i = 0; i < 200; ++i) source += "+1";
  const ExecLimits limits;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cleaner::minilang::run(source, limits));
  }
}
BENCHMARK(BM_DeepExpression);

}  // namespace
