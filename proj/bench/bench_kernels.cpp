// Serial reference vs OpenMP kernels for dataset generation and batch inference.
#include "tmm/experiment.hpp"

#include <benchmark/benchmark.h>

namespace {

const tmm::Scenario &scenario(int which) {
  static const tmm::Scenario protamine = tmm::protamine::make_scenario();
  static const tmm::Scenario tools = tmm::tool_delivery::make_scenario();
  return which == 0 ? protamine : tools;
}

tmm::SimConfig config(const tmm::Scenario &sc) { return {.episode_cap = 200, .seed = 7, .profile_sampler = sc.sampler}; }

template <tmm::Execution Exec> void BM_Generate(benchmark::State &state) {
  const auto &sc = scenario(static_cast<int>(state.range(0)));
  const auto count = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) {
    auto data = tmm::generate_dataset(sc.model, sc.policies, config(sc), count, Exec);
    benchmark::DoNotOptimize(data.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

template <tmm::Execution Exec> void BM_Infer(benchmark::State &state) {
  const auto &sc = scenario(static_cast<int>(state.range(0)));
  const auto count = static_cast<std::size_t>(state.range(1));
  const auto data = tmm::generate_dataset(sc.model, sc.policies, config(sc), count, tmm::Execution::serial);
  for (auto _ : state) {
    auto out = tmm::infer_batch(sc.model, sc.policies, sc.prior, data, Exec);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

} // namespace

BENCHMARK(BM_Generate<tmm::Execution::serial>)->Args({0, 300})->Args({1, 300})->Args({1, 3000});
BENCHMARK(BM_Generate<tmm::Execution::parallel>)->Args({0, 300})->Args({1, 300})->Args({1, 3000});
BENCHMARK(BM_Infer<tmm::Execution::serial>)->Args({0, 300})->Args({1, 300})->Args({1, 3000});
BENCHMARK(BM_Infer<tmm::Execution::parallel>)->Args({0, 300})->Args({1, 300})->Args({1, 3000});

BENCHMARK_MAIN();
