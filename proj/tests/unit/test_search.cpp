#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "marco/baselines.hpp"
#include "marco/search.hpp"
#include "oracles.hpp"

using namespace marco;

namespace {

EncoderConfig tiny() { return {8, 1, 2, 16, 10.0, AttentionVariant::Modulated}; }

SearchConfig quick(Problem problem, MemoryMode mode) {
  SearchConfig cfg = SearchConfig::desk(problem);
  cfg.memory_mode = mode;
  cfg.threads = 4;
  return cfg;
}

}  // namespace

TEST(SelectAction, GreedyAndTies) {
  Rng rng(1);
  EXPECT_EQ(select_action(std::vector<double>{1, 5, 3}, {}, ActionSelection::Greedy, rng), 1);
  EXPECT_EQ(select_action(std::vector<double>{2, 2, 2}, {}, ActionSelection::Greedy, rng), 0);
  const std::vector<std::uint8_t> mask{1, 0, 1};
  EXPECT_EQ(select_action(std::vector<double>{1, 5, 3}, mask, ActionSelection::Greedy, rng), 2);
}

TEST(SelectAction, SampleWithSingleAllowedEntry) {
  Rng rng(2);
  const std::vector<std::uint8_t> mask{0, 0, 1, 0};
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(select_action(std::vector<double>{9, 9, -9, 9}, mask, ActionSelection::Sample, rng), 2);
  }
  EXPECT_THROW(select_action(std::vector<double>{1, 2}, std::vector<std::uint8_t>{0, 0}, ActionSelection::Greedy, rng),
               std::invalid_argument);
}

TEST(RevisitRate, HandCountedTraces) {
  using State = std::vector<std::uint8_t>;
  const State a{0, 1}, b{1, 1}, c{1, 0};
  std::vector<std::vector<State>> alternating{{a, b, a, b, a, b, a, b, a, b}};
  EXPECT_EQ(oracle::count_revisits(alternating), 8);
  SearchResult r;
  r.revisit_count = 8;
  r.thread_steps = 10;
  EXPECT_DOUBLE_EQ(revisit_rate(r), 0.8);
  std::vector<std::vector<State>> distinct{{a, b, c}};
  EXPECT_EQ(oracle::count_revisits(distinct), 0);
  std::vector<std::vector<State>> mixed{{a, b, c, b}, {c, c, a, c}};
  EXPECT_EQ(oracle::count_revisits(mixed), 3);
  r.problem = Problem::Tsp;
  EXPECT_THROW(revisit_rate(r), std::invalid_argument);
}

// Re-runs the memory-free search loop step by step and compares the
// revisit count and best objective.
TEST(MarcoImprove, MatchesIndependentReplay) {
  for (Problem problem : {Problem::MaxCut, Problem::MaxIndependentSet}) {
    const auto g = gen_erdos_renyi(14, 0.25, 21);
    const Policy p = Policy::improvement(problem, tiny(), FeatureLayout::None, 5);
    SearchConfig cfg = quick(problem, MemoryMode::None);
    cfg.seed = 9;
    const SearchResult res = marco_improve(g, p, cfg);

    const auto edges = p.edge_features(g);
    std::vector<std::vector<std::vector<std::uint8_t>>> visits(4);
    int best = std::numeric_limits<int>::min();
    for (int l = 0; l < 4; ++l) {
      Rng init(derive_seed(9, 1, l));
      BinarySolution s = initial_solution(g, problem, init);
      BinarySolution best_lane = s;
      best = std::max(best, binary_objective(g, s, problem));
      for (int t = 0; t < 28; ++t) {
        visits[l].push_back(s.bits);
        const std::vector<double> zeros(14, 0.0);
        const auto logits = p.improvement_logits(improvement_node_features(s, best_lane, zeros), edges);
        Eigen::Index a;
        logits.maxCoeff(&a);
        const int before = binary_objective(g, best_lane, problem);
        s = apply_flip(g, s, static_cast<int>(a), problem);
        if (binary_objective(g, s, problem) > before) best_lane = s;
        best = std::max(best, binary_objective(g, s, problem));
      }
    }
    EXPECT_EQ(res.revisit_count, oracle::count_revisits(visits)) << to_string(problem);
    EXPECT_EQ(res.best_objective, best) << to_string(problem);
    EXPECT_EQ(res.thread_steps, 4 * 28);
  }
}

TEST(MarcoImprove, ZeroStepsReturnsBestInitialSolution) {
  const auto g = gen_erdos_renyi(12, 0.3, 4);
  const Policy p = Policy::improvement(Problem::MaxCut, tiny(), FeatureLayout::Retrieved, 1);
  SearchConfig cfg = quick(Problem::MaxCut, MemoryMode::Shared);
  cfg.max_steps = 0;
  cfg.seed = 3;
  const auto res = marco_improve(g, p, cfg);
  int best = 0;
  for (int l = 0; l < cfg.threads; ++l) {
    Rng init(derive_seed(3, 1, l));
    best = std::max(best, mc_objective(g, initial_solution(g, Problem::MaxCut, init)));
  }
  EXPECT_EQ(res.best_objective, best);
  EXPECT_EQ(res.memory_entries, 0u);
  EXPECT_EQ(res.thread_steps, 0);
}

TEST(MarcoImprove, SharedMemoryNeverRevisitsMoreThanNoMemoryUntrained) {
  const Policy p = Policy::improvement(Problem::MaxCut, EncoderConfig::desk(Problem::MaxCut), FeatureLayout::Retrieved, 42);
  std::int64_t none = 0, shared = 0;
  for (int i = 0; i < 100; ++i) {
    const auto g = gen_erdos_renyi(20, 0.15, 500 + i);
    SearchConfig cfg = SearchConfig::desk(Problem::MaxCut);
    cfg.seed = i;
    cfg.memory_mode = MemoryMode::None;
    none += marco_improve(g, p, cfg).revisit_count;
    cfg.memory_mode = MemoryMode::Shared;
    shared += marco_improve(g, p, cfg).revisit_count;
  }
  EXPECT_LE(shared, none);
}

TEST(MarcoImprove, InvariantsAcrossModes) {
  const auto g = gen_erdos_renyi(18, 0.3, 8);
  for (Problem problem : {Problem::MaxCut, Problem::MaxIndependentSet}) {
    for (MemoryMode mode : {MemoryMode::None, MemoryMode::OpBased, MemoryMode::Independent, MemoryMode::Shared}) {
      const Policy p = Policy::improvement(problem, tiny(), layout_for(mode), 2);
      SearchConfig cfg = quick(problem, mode);
      cfg.selection = ActionSelection::Sample;
      const auto a = marco_improve(g, p, cfg);
      const auto b = marco_improve(g, p, cfg);
      EXPECT_EQ(a.best_solution, b.best_solution);
      EXPECT_EQ(a.best_trace, b.best_trace);
      EXPECT_EQ(a.revisit_count, b.revisit_count);
      EXPECT_EQ(binary_objective(g, a.best_solution, problem), a.best_objective);
      if (problem == Problem::MaxIndependentSet) EXPECT_TRUE(mis_is_independent(g, a.best_solution));
      for (std::size_t t = 1; t < a.best_trace.size(); ++t) EXPECT_GE(a.best_trace[t], a.best_trace[t - 1]);
      ASSERT_EQ(a.trace.size(), 4u);
      for (const auto& lane : a.trace) {
        for (double v : lane) EXPECT_LE(v, a.best_objective);
      }
      const std::size_t expected = mode == MemoryMode::Shared || mode == MemoryMode::Independent ? 4u * 36 : 0u;
      EXPECT_EQ(a.memory_entries, expected);
    }
  }
}

TEST(MarcoImprove, LayoutMismatchRejected) {
  const auto g = gen_erdos_renyi(8, 0.3, 1);
  const Policy op = Policy::improvement(Problem::MaxCut, tiny(), FeatureLayout::OpBased, 2);
  EXPECT_THROW(marco_improve(g, op, quick(Problem::MaxCut, MemoryMode::Shared)), std::invalid_argument);
  EXPECT_NO_THROW(marco_improve(g, op, quick(Problem::MaxCut, MemoryMode::None)));
  SearchConfig bad = quick(Problem::MaxCut, MemoryMode::None);
  bad.k = 0;
  EXPECT_THROW(marco_improve(g, op, bad), std::invalid_argument);
}

TEST(MarcoImprove, KLargerThanMemoryEarlyOn) {
  const auto g = gen_erdos_renyi(10, 0.3, 3);
  const Policy p = Policy::improvement(Problem::MaxCut, tiny(), FeatureLayout::Retrieved, 2);
  SearchConfig cfg = quick(Problem::MaxCut, MemoryMode::Shared);
  cfg.k = 1000;
  EXPECT_NO_THROW(marco_improve(g, p, cfg));
}

TEST(MarcoImprove, MemoryDumpAndJson) {
  const auto g = gen_erdos_renyi(6, 0.5, 3);
  const Policy p = Policy::improvement(Problem::MaxCut, tiny(), FeatureLayout::Retrieved, 2);
  SearchConfig cfg = quick(Problem::MaxCut, MemoryMode::Shared);
  cfg.threads = 2;
  cfg.dump_memory = true;
  const auto res = marco_improve(g, p, cfg);
  EXPECT_EQ(std::count(res.memory_dump.begin(), res.memory_dump.end(), '\n'), 24);
  const auto j = to_json(res);
  EXPECT_EQ(j["problem"], "mc");
  EXPECT_EQ(j["memory_mode"], "shared");
  EXPECT_EQ(j["best_solution"].get<std::string>().size(), 6u);
  EXPECT_EQ(j["threads"], 2);
  std::ostringstream csv;
  write_trace_csv(res, csv);
  const std::string text = csv.str();
  EXPECT_EQ(text.substr(0, 22), "thread,step,objective\n");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 2 * 12);
}

TEST(MarcoConstruct, UnitSquareFindsPerimeter) {
  const auto g = GraphInstance::complete_metric({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Policy p = Policy::constructive(tiny(), seed);
    SearchConfig cfg = SearchConfig::desk(Problem::Tsp);
    cfg.constructions = 1;
    EXPECT_NEAR(marco_construct(g, p, cfg).best_objective, 4.0, 1e-12);
  }
  EXPECT_NEAR(brute_force_tsp(g).length, 4.0, 1e-12);
}

TEST(MarcoConstruct, FirstConstructionIgnoresEmptyMemory) {
  const auto g = gen_tsp_uniform(9, 4);
  const Policy p = Policy::constructive(tiny(), 6);
  SearchConfig cfg = SearchConfig::desk(Problem::Tsp);
  cfg.constructions = 1;
  cfg.selection = ActionSelection::Sample;
  cfg.memory_mode = MemoryMode::Shared;
  const auto with = marco_construct(g, p, cfg);
  cfg.memory_mode = MemoryMode::None;
  const auto without = marco_construct(g, p, cfg);
  EXPECT_EQ(with.best_tour, without.best_tour);
  EXPECT_EQ(with.trace, without.trace);
}

TEST(MarcoConstruct, ToursValidAndBestMonotone) {
  const auto g = gen_tsp_uniform(8, 5);
  const Policy p = Policy::constructive(tiny(), 7);
  SearchConfig cfg = SearchConfig::desk(Problem::Tsp);
  cfg.constructions = 5;
  cfg.selection = ActionSelection::Sample;
  const auto res = marco_construct(g, p, cfg);
  EXPECT_TRUE(is_valid_tour(res.best_tour, 8));
  EXPECT_NEAR(tsp_tour_length(g, res.best_tour), res.best_objective, 1e-12);
  EXPECT_GE(res.best_objective, brute_force_tsp(g).length - 1e-12);
  for (std::size_t t = 1; t < res.best_trace.size(); ++t) EXPECT_LE(res.best_trace[t], res.best_trace[t - 1]);
  EXPECT_EQ(res.memory_entries, 5u * 8);
  const auto again = marco_construct(g, p, cfg);
  EXPECT_EQ(again.trace, res.trace);
}

TEST(MarcoConstruct, FewerThreadsThanCities) {
  const auto g = gen_tsp_uniform(12, 6);
  const Policy p = Policy::constructive(tiny(), 8);
  SearchConfig cfg = SearchConfig::desk(Problem::Tsp);
  cfg.threads = 5;
  cfg.constructions = 2;
  const auto res = marco_construct(g, p, cfg);
  EXPECT_EQ(res.threads, 5);
  ASSERT_EQ(res.trace.size(), 5u);
  EXPECT_EQ(res.trace[0].size(), 2u);
}

TEST(SearchConfig, Presets) {
  const auto paper = SearchConfig::paper(Problem::MaxCut);
  EXPECT_EQ(paper.threads, 50);
  EXPECT_EQ(paper.k, 20);
  EXPECT_EQ(paper.steps_for(30), 60);
  const auto tsp = SearchConfig::paper(Problem::Tsp);
  EXPECT_EQ(tsp.threads, 100);
  EXPECT_EQ(tsp.k, 3);
  EXPECT_EQ(tsp.retrieval_frequency, 10);
}
