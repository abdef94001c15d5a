#include <benchmark/benchmark.h>

#include <string>

#include "cleaner/rng.hpp"
#include "cleaner/similarity.hpp"

namespace {

std::string random_ascii(cleaner::RandomStream& rng, int len) {
  std::string s(static_cast<size_t>(len), ' ');
  for (char& c : s) c = static_cast<char>(rng.next_int(32, 126));
  return s;
}

void BM_RatioRandom(benchmark::State& state) {
  cleaner::RandomStream rng(42);
  const int len = static_cast<int>(state.range(0));
  const std::string a = random_ascii(rng, len);
  const std::string b = random_ascii(rng, len);
  for (auto _ : state) {
    benchmark::DoNotOptimize(cleaner::similarity::ratio(a, b));
  }
}
BENCHMARK(BM_RatioRandom)->Arg(16)->Arg(64)->Arg(200);

void BM_RatioRelated(benchmark::State& state) {
  cleaner::RandomStream rng(43);
  const int len = static_cast<int>(state.range(0));
  const std::string a = random_ascii(rng, len);
  std::string b = a;
  b[b.size() / 2] = '#';
  for (auto _ : state) {
    benchmark::DoNotOptimize(cleaner::similarity::ratio(a, b));
  }
}
BENCHMARK(BM_RatioRelated)->Arg(16)->Arg(64)->Arg(200);

void BM_MatchingBlocks(benchmark::State& state) {
  cleaner::RandomStream rng(44);
  const std::string a = random_ascii(rng, static_cast<int>(state.range(0)));
  const std::string b = random_ascii(rng, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(cleaner::similarity::matching_blocks(a, b));
  }
}
BENCHMARK(BM_MatchingBlocks)->Arg(64)->Arg(200);

}  // namespace
