#include <benchmark/benchmark.h>

#include "marco/instances.hpp"
#include "marco/policy.hpp"
#include "marco/rng.hpp"

using namespace marco;

namespace {

// Encoder plus improvement head, desk-sized model; range(0) is the node count
// so consecutive rows show n vs 2n scaling.
void BM_ImprovementForward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Policy policy = Policy::improvement(Problem::MaxCut, EncoderConfig::desk(Problem::MaxCut), FeatureLayout::Retrieved, 1);
  const auto g = gen_erdos_renyi(n, 0.15, 2);
  const auto edges = policy.edge_features(g);
  Rng rng(3);
  ad::Matrix x(n, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.bernoulli(0.5) ? 1.0 : 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(policy.improvement_logits(x, edges));
  state.SetComplexityN(n);
}
BENCHMARK(BM_ImprovementForward)->RangeMultiplier(2)->Range(25, 200)->Complexity(benchmark::oNSquared);

void BM_ImprovementForwardBackward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Policy policy = Policy::improvement(Problem::MaxCut, EncoderConfig::desk(Problem::MaxCut), FeatureLayout::Retrieved, 1);
  const auto g = gen_erdos_renyi(n, 0.15, 2);
  const auto edges = policy.edge_features(g);
  const ad::Matrix x = ad::Matrix::Ones(n, 3);
  const std::vector<std::uint8_t> all(static_cast<std::size_t>(n), 1);
  for (auto _ : state) {
    ad::Tape tape(true);
    ad::Var lp = ad::log_softmax_masked(policy.improvement_logits(tape, x, edges), all);
    tape.backward(ad::pick(lp, 0, 0));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_ImprovementForwardBackward)->RangeMultiplier(2)->Range(25, 100)->Complexity(benchmark::oNSquared);

// One decoder step after encoding; range(0) is the city count.
void BM_DecoderStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Policy policy = Policy::constructive(EncoderConfig::desk(Problem::Tsp), 4);
  const auto g = gen_tsp_uniform(n, 5);
  ad::Tape tape(false);
  const auto ctx = policy.prepare_decoder(tape, g, policy.edge_features(g));
  PartialTour partial(n, 0);
  partial.push(1);
  const ad::Matrix mem = ad::Matrix::Constant(n, n, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(policy.decoder_logits(tape, ctx, partial, &mem).value());
  state.SetComplexityN(n);
}
BENCHMARK(BM_DecoderStep)->RangeMultiplier(2)->Range(25, 200)->Complexity();

}  // namespace

BENCHMARK_MAIN();
