#include <benchmark/benchmark.h>

#include "marco/instances.hpp"
#include "marco/search.hpp"

using namespace marco;

namespace {

// Full improvement search per memory mode; range(0) is the node count.
void run_improve(benchmark::State& state, MemoryMode mode) {
  const int n = static_cast<int>(state.range(0));
  const Policy policy = Policy::improvement(Problem::MaxCut, EncoderConfig::desk(Problem::MaxCut), layout_for(mode), 1);
  const auto g = gen_erdos_renyi(n, 0.15, 2);
  SearchConfig cfg = SearchConfig::desk(Problem::MaxCut);
  cfg.memory_mode = mode;
  cfg.record_trace = false;
  for (auto _ : state) benchmark::DoNotOptimize(marco_improve(g, policy, cfg).best_objective);
  state.SetComplexityN(n);
}

void BM_ImproveNone(benchmark::State& state) { run_improve(state, MemoryMode::None); }
void BM_ImproveIndependent(benchmark::State& state) { run_improve(state, MemoryMode::Independent); }
void BM_ImproveShared(benchmark::State& state) { run_improve(state, MemoryMode::Shared); }
BENCHMARK(BM_ImproveNone)->Arg(25)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ImproveIndependent)->Arg(25)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ImproveShared)->Arg(25)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_Construct(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Policy policy = Policy::constructive(EncoderConfig::desk(Problem::Tsp), 3);
  const auto g = gen_tsp_uniform(n, 4);
  SearchConfig cfg = SearchConfig::desk(Problem::Tsp);
  cfg.constructions = 2;
  cfg.threads = n;
  for (auto _ : state) benchmark::DoNotOptimize(marco_construct(g, policy, cfg).best_objective);
  state.SetComplexityN(n);
}
BENCHMARK(BM_Construct)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
