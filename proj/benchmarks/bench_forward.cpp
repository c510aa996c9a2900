#include <benchmark/benchmark.h>

#include "selfens/ensemble.hpp"
#include "selfens/verification.hpp"

namespace {

using namespace selfens;

struct Fixture {
  Transformer model{init_weights(ModelConfig{}, 1)};
  EquivalenceCase sample;
  GroupPartition partition;
  PromptTemplate tmpl;

  explicit Fixture(std::size_t k)
      : sample(make_equivalence_case(options_for(k), 0)),
        partition(partition_choices(sample.choices, 4, 7)) {}

  static EquivalenceOptions options_for(std::size_t k) {
    EquivalenceOptions opts;
    opts.min_choices = opts.max_choices = k;
    return opts;
  }
};

// Fused: one forward with the group mask.
void BM_TrialSinglePass(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_trial(f.model, f.sample.question, f.sample.choices, f.partition,
                                       f.tmpl, ProbMode::FullVocab));
  }
}
BENCHMARK(BM_TrialSinglePass)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

// One causal forward per group.
void BM_TrialSeparatePasses(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_trial_separately(f.model, f.sample.question, f.sample.choices,
                                                  f.partition, f.tmpl, ProbMode::FullVocab));
  }
}
BENCHMARK(BM_TrialSeparatePasses)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Partition(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(partition_indices(k, 4, seed++));
}
BENCHMARK(BM_Partition)->Arg(8)->Arg(64)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
