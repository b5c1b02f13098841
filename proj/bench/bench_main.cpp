#include <benchmark/benchmark.h>
#include <omp.h>

#include <map>
#include <random>

#include "guide/scenario_runner.hpp"

using namespace guide;

namespace {

Embedding random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> v(kDefaultEmbeddingDim);
  for (auto& x : v) x = g(rng);
  return normalized(std::move(v));
}

const VectorStore& store(std::size_t n) {
  static std::map<std::size_t, VectorStore> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    std::mt19937_64 rng(n);
    VectorStore s(StoreKind::kEnvironment);
    for (std::size_t i = 0; i < n; ++i) {
      s.insert({"r" + std::to_string(i), random_unit(rng),
                {NodeId("N" + std::to_string(i % 97)), Heading::from_degrees(90 * (i % 4)), StoreKind::kEnvironment,
                 "bench"}});
    }
    it = cache.emplace(n, std::move(s)).first;
  }
  return it->second;
}

void BM_TopKParallel(benchmark::State& state) {
  const VectorStore& s = store(static_cast<std::size_t>(state.range(0)));
  std::mt19937_64 rng(1);
  const Embedding probe = random_unit(rng);
  for (auto _ : state) benchmark::DoNotOptimize(s.query_top_k(probe, 10));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_TopKSerial(benchmark::State& state) {
  const VectorStore& s = store(static_cast<std::size_t>(state.range(0)));
  std::mt19937_64 rng(1);
  const Embedding probe = random_unit(rng);
  for (auto _ : state) benchmark::DoNotOptimize(s.query_top_k_reference(probe, 10));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

// Scenario suite with the OpenMP run loop limited to state.range(0) threads.
void BM_NoisyKidnapSuite(benchmark::State& state) {
  const int saved = omp_get_max_threads();
  omp_set_num_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_suite(std::string(GUIDE_DATA_DIR) + "/scenarios/kidnap_noisy", 10, 7));
  }
  omp_set_num_threads(saved);
}

}  // namespace

BENCHMARK(BM_TopKSerial)->Arg(1000)->Arg(10000)->Arg(100000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_TopKParallel)->Arg(1000)->Arg(10000)->Arg(100000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_NoisyKidnapSuite)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
