// Serial reference vs OpenMP for the Monte Carlo and resampling kernels.
// The parallel runs use every available thread; outputs are identical.

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "selfcheck/parsing.hpp"
#include "selfcheck/rng.hpp"
#include "selfcheck/sim.hpp"
#include "selfcheck/vote.hpp"

namespace {

using selfcheck::Execution;

Execution execution_of(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

void set_label(benchmark::State& state) {
  state.SetLabel(state.range(0) == 0 ? "serial" : "openmp");
}

void BM_SimulateMajority(benchmark::State& state) {
  const selfcheck::AnswerDistribution dist{0.4, 0.3, 3};
  const int n = static_cast<int>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(selfcheck::simulate_majority(dist, n, 200000, 7, execution_of(state)));
  }
  state.SetItemsProcessed(state.iterations() * 200000);
  set_label(state);
}
BENCHMARK(BM_SimulateMajority)->ArgsProduct({{0, 1}, {5, 25}})->Unit(benchmark::kMillisecond);

void BM_SimulateWeighted(benchmark::State& state) {
  const selfcheck::AnswerDistribution dist{0.3, 0.4, 3};
  const selfcheck::CheckerModel checker;
  const int n = static_cast<int>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        selfcheck::simulate_weighted(dist, checker, n, 200000, 7, execution_of(state)));
  }
  state.SetItemsProcessed(state.iterations() * 200000);
  set_label(state);
}
BENCHMARK(BM_SimulateWeighted)->ArgsProduct({{0, 1}, {5, 25}})->Unit(benchmark::kMillisecond);

std::vector<selfcheck::QuestionPool> make_pools(int questions, int samples) {
  selfcheck::Rng rng(13);
  std::vector<selfcheck::QuestionPool> pools(questions);
  for (auto& pool : pools) {
    pool.gold = selfcheck::normalize_answer("0", selfcheck::DatasetKind::numeric);
    for (int i = 0; i < samples; ++i) {
      selfcheck::CheckedSolution c;
      c.solution.question_id = "q";
      c.solution.sample_index = i;
      c.solution.extracted_answer = selfcheck::normalize_answer(
          std::to_string(selfcheck::uniform_index(rng, 4)), selfcheck::DatasetKind::numeric);
      c.confidence.value = selfcheck::uniform01(rng);
      pool.samples.push_back(std::move(c));
    }
  }
  return pools;
}

void BM_AccuracyVsSamples(benchmark::State& state) {
  static const auto pools = make_pools(200, 16);
  const std::vector<int> ns = {1, 2, 4, 8, 16};
  for (auto _ : state) {
    benchmark::DoNotOptimize(selfcheck::accuracy_vs_samples(pools, ns, 200, 3, execution_of(state)));
  }
  set_label(state);
}
BENCHMARK(BM_AccuracyVsSamples)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
