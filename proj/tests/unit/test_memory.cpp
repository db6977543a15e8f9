#include <gtest/gtest.h>

#include <sstream>

#include "marco/memory.hpp"
#include "marco/rng.hpp"
#include "oracles.hpp"

using namespace marco;

namespace {

BinarySolution bits(std::vector<std::uint8_t> v) { return BinarySolution(std::move(v)); }

BinarySolution random_bits(int n, Rng& rng) {
  BinarySolution s(n);
  for (auto& b : s.bits) b = rng.bernoulli(0.5) ? 1 : 0;
  return s;
}

std::vector<int> random_perm(int n, Rng& rng) {
  std::vector<int> p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) p[i] = i;
  rng.shuffle(p);
  return p;
}

}  // namespace

TEST(Similarity, NodeExamples) {
  EXPECT_EQ(similarity_nodes(bits({1, 0, 1}), bits({1, 1, 1})), 2);
  EXPECT_EQ(similarity_nodes(bits({1, 0, 1}), bits({1, 0, 1})), 2);
  EXPECT_EQ(similarity_nodes(bits({1, 1, 0}), bits({0, 0, 1})), 0);
}

TEST(Similarity, EdgeExamples) {
  const std::vector<int> tour{0, 1, 2, 3};
  EXPECT_EQ(similarity_edges({edge_key(0, 1)}, tour_edge_set(tour)), 1);
  EXPECT_EQ(similarity_edges({}, tour_edge_set(tour)), 0);
}

TEST(Similarity, EdgeMatchesDenseIncidence) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_perm(6, rng);
    const auto b = random_perm(6, rng);
    EXPECT_EQ(similarity_edges(tour_edge_set(a), tour_edge_set(b)),
              oracle::incidence_dot(oracle::tour_incidence(a, 6), oracle::tour_incidence(b, 6)));
  }
}

TEST(Similarity, Normalization) {
  EXPECT_DOUBLE_EQ(norm_similarity(2, 4), 0.5);
  EXPECT_DOUBLE_EQ(norm_similarity(3, 3), 1.0);
  EXPECT_DOUBLE_EQ(norm_similarity(0, 0), 0.0);
}

TEST(NodeMemory, RingBufferEvictsOldest) {
  NodeMemory m(3, 3);
  m.store(bits({1, 0, 0}));
  m.store(bits({0, 1, 0}));
  m.store(bits({0, 0, 1}));
  m.store(bits({1, 1, 1}));
  EXPECT_EQ(m.size(), 3u);
  EXPECT_EQ(m.solution_at(0), bits({0, 1, 0}));
  EXPECT_FALSE(m.contains_exact(bits({1, 0, 0})));
  EXPECT_TRUE(m.contains_exact(bits({1, 1, 1})));
}

TEST(NodeMemory, EvictionOrderIsFifo) {
  NodeMemory m(8, 5);
  Rng rng(1);
  std::vector<BinarySolution> stored;
  for (int i = 0; i < 23; ++i) {
    stored.push_back(random_bits(8, rng));
    m.store(stored.back(), i % 8);
  }
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(m.solution_at(i), stored[18 + i]);
    EXPECT_EQ(m.action_at(i), static_cast<int>((18 + i) % 8));
  }
}

TEST(NodeMemory, DuplicatesKeptAndWeighted) {
  NodeMemory m(4, 10);
  m.store(bits({1, 1, 0, 0}), 0);
  m.store(bits({1, 1, 0, 0}), 3);
  EXPECT_EQ(m.size(), 2u);
  EXPECT_TRUE(m.contains_exact(bits({1, 1, 0, 0})));
  const auto ctx = m.retrieve(5, bits({1, 1, 0, 0}));
  EXPECT_EQ(ctx.matched_count, 2);
  EXPECT_DOUBLE_EQ(ctx.node_values[0], 0.5);
  EXPECT_DOUBLE_EQ(ctx.node_values[3], 0.5);
}

TEST(NodeMemory, SizeGrowsOnePerStore) {
  NodeMemory m(10, 1000);
  Rng rng(2);
  for (int t = 1; t <= 300; ++t) {
    m.store(random_bits(10, rng));
    ASSERT_EQ(m.size(), static_cast<std::size_t>(t));
  }
}

TEST(NodeMemory, SingleIdenticalNeighbour) {
  NodeMemory m(5, 10);
  m.store(bits({1, 0, 1, 1, 0}), 3);
  const auto ctx = m.retrieve(20, bits({1, 0, 1, 1, 0}));
  EXPECT_EQ(ctx.matched_count, 1);
  EXPECT_EQ(ctx.node_values, (std::vector<double>{0, 0, 0, 1, 0}));
}

TEST(NodeMemory, WeightsFollowNormalizedSimilarity) {
  NodeMemory m(6, 10);
  m.store(bits({1, 1, 1, 1, 0, 0}), 2);
  m.store(bits({1, 1, 0, 0, 0, 0}), 2);
  const auto ctx = m.retrieve(2, bits({1, 1, 1, 1, 0, 0}));
  EXPECT_EQ(ctx.matched_count, 2);
  EXPECT_DOUBLE_EQ(ctx.node_values[2], 1.0);
  NodeMemory split(6, 10);
  split.store(bits({1, 1, 1, 1, 0, 0}), 0);
  split.store(bits({1, 1, 0, 0, 0, 0}), 1);
  const auto w = split.retrieve(2, bits({1, 1, 1, 1, 0, 0}));
  EXPECT_NEAR(w.node_values[0], 1.0 / 1.5, 1e-15);
  EXPECT_NEAR(w.node_values[1], 0.5 / 1.5, 1e-15);
}

TEST(NodeMemory, MatchesBruteForceKnn) {
  Rng rng(5);
  NodeMemory m(12, 1000);
  std::vector<oracle::KnnEntry> entries;
  for (int i = 0; i < 50; ++i) {
    auto s = random_bits(12, rng);
    const int a = static_cast<int>(rng.below(12));
    m.store(s, a);
    entries.push_back({s.bits, a});
  }
  for (int q = 0; q < 20; ++q) {
    const auto query = random_bits(12, rng);
    const auto got = m.retrieve(5, query);
    const auto want = oracle::knn_node(entries, query.bits, 5);
    EXPECT_EQ(got.matched_count, want.matched);
    for (int i = 0; i < 12; ++i) EXPECT_NEAR(got.node_values[i], want.values[i], 1e-12);
  }
}

TEST(NodeMemory, EmptyAndZeroQuery) {
  NodeMemory m(4, 10);
  auto ctx = m.retrieve(3, bits({1, 0, 0, 1}));
  EXPECT_EQ(ctx.matched_count, 0);
  EXPECT_EQ(ctx.node_values, std::vector<double>(4, 0.0));
  m.store(bits({1, 1, 1, 1}), 1);
  ctx = m.retrieve(3, bits({0, 0, 0, 0}));
  EXPECT_EQ(ctx.matched_count, 1);
  EXPECT_EQ(ctx.node_values, std::vector<double>(4, 0.0));
  EXPECT_THROW(m.retrieve(0, bits({1, 0, 0, 0})), std::invalid_argument);
}

TEST(NodeMemory, PendingActionAndExclusion) {
  NodeMemory m(3, 10);
  m.store(bits({1, 1, 0}), 2);
  const auto id = m.store(bits({1, 1, 0}));
  auto ctx = m.retrieve(1, bits({1, 1, 0}));
  EXPECT_EQ(ctx.node_values, std::vector<double>(3, 0.0));
  ctx = m.retrieve(1, bits({1, 1, 0}), id);
  EXPECT_DOUBLE_EQ(ctx.node_values[2], 1.0);
  m.set_action(id, 0);
  ctx = m.retrieve(1, bits({1, 1, 0}));
  EXPECT_DOUBLE_EQ(ctx.node_values[0], 1.0);
}

TEST(NodeMemory, ContainsExactUsesRawBits) {
  NodeMemory m(4, 2);
  const auto s = bits({1, 0, 1, 0});
  m.store(s);
  EXPECT_TRUE(m.contains_exact(s));
  EXPECT_FALSE(m.contains_exact(complement(s)));
  m.store(bits({0, 0, 0, 1}));
  m.store(bits({0, 0, 1, 1}));
  EXPECT_FALSE(m.contains_exact(s));
}

TEST(NodeMemory, DumpFormat) {
  NodeMemory m(3, 4);
  m.store(bits({1, 0, 1}), 2);
  std::ostringstream out;
  m.dump(out);
  EXPECT_EQ(out.str(), "101 2\n");
}

TEST(EdgeMemory, AvgSimExamples) {
  EdgeMemory m(5, 10);
  const Tour t({0, 1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(m.avg_sim_topk(t, 1), 0.0);
  m.store(t);
  EXPECT_DOUBLE_EQ(m.avg_sim_topk(t, 1), 1.0);
  EdgeMemory disjoint(5, 10);
  disjoint.store(Tour({0, 2, 4, 1, 3}));
  EXPECT_DOUBLE_EQ(disjoint.avg_sim_topk(t, 1), 0.0);
}

TEST(EdgeMemory, AvgSimMatchesSortOracle) {
  Rng rng(8);
  EdgeMemory m(9, 100);
  std::vector<std::vector<int>> stored;
  for (int i = 0; i < 20; ++i) {
    stored.push_back(random_perm(9, rng));
    m.store(Tour(stored.back()));
  }
  for (int q = 0; q < 20; ++q) {
    const auto tour = random_perm(9, rng);
    EXPECT_NEAR(m.avg_sim_topk(Tour(tour), 3), oracle::avg_sim_topk(stored, tour, 3), 1e-12);
  }
}

TEST(EdgeMemory, RetrieveMatchesOracle) {
  Rng rng(13);
  EdgeMemory m(10, 100);
  std::vector<std::vector<int>> stored;
  for (int i = 0; i < 30; ++i) {
    stored.push_back(random_perm(10, rng));
    m.store(Tour(stored.back()));
  }
  for (int q = 0; q < 20; ++q) {
    auto seq = random_perm(10, rng);
    seq.resize(1 + rng.below(9));
    const auto got = m.retrieve(3, partial_edge_set(seq));
    const auto want = oracle::knn_edges(stored, seq, 3, 10);
    EXPECT_LT((got.edge_values - want).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(got.matched_count, 3);
  }
}

TEST(EdgeMemory, RingBufferAndTourRecovery) {
  EdgeMemory m(4, 2);
  m.store(Tour({0, 1, 2, 3}));
  m.store(Tour({0, 2, 1, 3}));
  m.store(Tour({3, 1, 0, 2}));
  EXPECT_EQ(m.size(), 2u);
  EXPECT_EQ(m.tour_at(0).perm(), (std::vector<int>{0, 2, 1, 3}));
  EXPECT_EQ(m.tour_at(1).perm(), (std::vector<int>{3, 1, 0, 2}));
  EXPECT_THROW(m.store(Tour({0, 1, 2})), std::invalid_argument);
}

TEST(OpMemory, StepsSinceLastFlip) {
  OpMemory ops(6);
  ops.record(2, 5);
  EXPECT_DOUBLE_EQ(ops.features(5)[2], 0.0);
  EXPECT_DOUBLE_EQ(ops.features(5)[0], 1.0);
  EXPECT_DOUBLE_EQ(ops.features(5 + 6)[2], 0.5);
  EXPECT_DOUBLE_EQ(ops.features(5 + 12)[2], 1.0);
  EXPECT_DOUBLE_EQ(ops.features(5 + 40)[2], 1.0);
}

TEST(MemoryAccounting, PayloadBytesLinearInEntries) {
  NodeMemory m(50, 100000);
  Rng rng(4);
  m.store(random_bits(50, rng));
  const double per_entry = static_cast<double>(m.payload_bytes());
  for (int i = 1; i < 1000; ++i) m.store(random_bits(50, rng));
  EXPECT_DOUBLE_EQ(static_cast<double>(m.payload_bytes()) / m.size(), per_entry);
}
