#include <benchmark/benchmark.h>

#include <numeric>

#include "marco/memory.hpp"
#include "marco/rng.hpp"

using namespace marco;

namespace {

BinarySolution random_bits(int n, Rng& rng) {
  BinarySolution s(n);
  for (auto& b : s.bits) b = rng.bernoulli(0.5) ? 1 : 0;
  return s;
}

std::vector<int> random_perm(int n, Rng& rng) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  rng.shuffle(p);
  return p;
}

// Args: nodes, stored entries, k.
void BM_NodeRetrieve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int size = static_cast<int>(state.range(1));
  const int k = static_cast<int>(state.range(2));
  Rng rng(1);
  NodeMemory memory(n, static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) memory.store(random_bits(n, rng), static_cast<int>(rng.below(static_cast<std::size_t>(n))));
  const BinarySolution query = random_bits(n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(memory.retrieve(k, query));
  state.SetItemsProcessed(state.iterations() * size);
}
BENCHMARK(BM_NodeRetrieve)->Args({50, 1000, 20})->Args({50, 10000, 20})->Args({100, 10000, 20})->Args({200, 10000, 20})
    ->Args({50, 10000, 1});

void BM_NodeStore(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(2);
  NodeMemory memory(n, 10000);
  std::vector<BinarySolution> pool;
  for (int i = 0; i < 256; ++i) pool.push_back(random_bits(n, rng));
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(memory.store(pool[i++ % pool.size()], 0));
}
BENCHMARK(BM_NodeStore)->Arg(50)->Arg(200);

// Args: cities, stored tours, partial length.
void BM_EdgeRetrieve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(3);
  EdgeMemory memory(n, static_cast<std::size_t>(state.range(1)));
  for (int i = 0; i < state.range(1); ++i) memory.store(Tour(random_perm(n, rng)));
  auto seq = random_perm(n, rng);
  seq.resize(static_cast<std::size_t>(state.range(2)));
  const EdgeSet partial = partial_edge_set(seq);
  for (auto _ : state) benchmark::DoNotOptimize(memory.retrieve(20, partial));
}
BENCHMARK(BM_EdgeRetrieve)->Args({20, 1000, 10})->Args({50, 1000, 25})->Args({100, 1000, 50});

void BM_AvgSim(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(4);
  EdgeMemory memory(n, 1000);
  for (int i = 0; i < 1000; ++i) memory.store(Tour(random_perm(n, rng)));
  const Tour tour(random_perm(n, rng));
  for (auto _ : state) benchmark::DoNotOptimize(memory.avg_sim_topk(tour, 20));
}
BENCHMARK(BM_AvgSim)->Arg(20)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
