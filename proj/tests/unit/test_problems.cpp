#include <gtest/gtest.h>

#include <cmath>

#include "marco/baselines.hpp"
#include "marco/problems.hpp"
#include "oracles.hpp"

using namespace marco;

namespace {

GraphInstance triangle() { return GraphInstance::sparse(3, {{0, 1}, {1, 2}, {0, 2}}); }
GraphInstance path3() { return GraphInstance::sparse(3, {{0, 1}, {1, 2}}); }
GraphInstance unit_square() { return GraphInstance::complete_metric({{0, 0}, {1, 0}, {1, 1}, {0, 1}}); }

BinarySolution bits(std::vector<std::uint8_t> v) { return BinarySolution(std::move(v)); }

}  // namespace

TEST(MaxCut, TriangleCut) {
  EXPECT_EQ(mc_objective(triangle(), bits({0, 0, 1})), 2);
  EXPECT_EQ(mc_objective(triangle(), bits({0, 0, 0})), 0);
}

TEST(MaxCut, OptimumMatchesExhaustiveEnumeration) {
  const auto g = gen_erdos_renyi(12, 0.3, 1);
  const auto exact = brute_force_mc(g);
  EXPECT_EQ(mc_objective(g, exact.solution), exact.value);
  EXPECT_EQ(exact.value, oracle::exhaustive_mc(g));
}

TEST(MaxCut, FlipGainMatchesRecomputation) {
  const auto g = gen_erdos_renyi(20, 0.3, 4);
  Rng rng(1);
  BinarySolution s(20);
  for (auto& b : s.bits) b = rng.bernoulli(0.5) ? 1 : 0;
  for (int i = 0; i < 20; ++i) {
    EXPECT_EQ(mc_objective(g, apply_flip(g, s, i, Problem::MaxCut)) - mc_objective(g, s), mc_flip_gain(g, s, i));
  }
}

TEST(Mis, ObjectiveAndIndependence) {
  EXPECT_EQ(mis_objective(path3(), bits({1, 0, 1})), 2);
  EXPECT_EQ(mis_objective(path3(), bits({0, 0, 0})), 0);
  EXPECT_FALSE(mis_is_independent(triangle(), bits({1, 1, 0})));
  EXPECT_TRUE(mis_is_independent(triangle(), bits({0, 0, 0})));
  const auto star = GraphInstance::sparse(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  EXPECT_TRUE(mis_is_independent(star, bits({0, 1, 1, 1, 1})));
  EXPECT_THROW(mis_objective(triangle(), bits({1, 1, 0})), ContractViolation);
}

TEST(Mis, OptimumMatchesExhaustiveEnumeration) {
  const auto g = gen_erdos_renyi(12, 0.3, 1);
  const auto exact = brute_force_mis(g);
  EXPECT_EQ(mis_objective(g, exact.solution), exact.value);
  EXPECT_EQ(exact.value, oracle::exhaustive_mis(g));
}

TEST(Flip, MaxCutFlipsOneBit) {
  const auto g = GraphInstance::sparse(2, {{0, 1}});
  EXPECT_EQ(apply_flip(g, bits({0, 0}), 1, Problem::MaxCut), bits({0, 1}));
}

TEST(Flip, MisRepairClearsNeighbours) {
  EXPECT_EQ(apply_flip(path3(), bits({1, 0, 1}), 1, Problem::MaxIndependentSet), bits({0, 1, 0}));
}

TEST(Flip, MisStaysIndependentUnderRandomFlips) {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = gen_erdos_renyi(25, 0.2, 100 + trial);
    BinarySolution s(25);
    int f = 0;
    for (int step = 0; step < 200; ++step) {
      f += apply_flip_in_place(g, s, static_cast<int>(rng.below(25)), Problem::MaxIndependentSet);
      ASSERT_TRUE(mis_is_independent(g, s));
      ASSERT_EQ(f, mis_objective(g, s));
    }
  }
}

TEST(Tsp, UnitSquareBoundaryTour) {
  EXPECT_DOUBLE_EQ(tsp_tour_length(unit_square(), Tour({0, 1, 2, 3})), 4.0);
}

TEST(Tsp, TriangleLengthIndependentOfOrder) {
  const auto g = gen_tsp_uniform(3, 21);
  std::vector<int> p{0, 1, 2};
  const double ref = tsp_tour_length(g, Tour(p));
  do {
    EXPECT_NEAR(tsp_tour_length(g, Tour(p)), ref, 1e-12);
  } while (std::next_permutation(p.begin(), p.end()));
}

TEST(Tsp, OptimumMatchesExhaustivePermutations) {
  const auto g = gen_tsp_uniform(9, 33);
  const auto exact = brute_force_tsp(g);
  EXPECT_NEAR(exact.length, oracle::exhaustive_tsp(g), 1e-9);
  EXPECT_NEAR(tsp_tour_length(g, exact.tour), exact.length, 1e-12);
}

TEST(Tsp, TourValidity) {
  EXPECT_TRUE(is_valid_tour(Tour({2, 0, 1}), 3));
  EXPECT_FALSE(is_valid_tour(Tour({0, 1}), 3));
  EXPECT_THROW(Tour({0, 0, 1}), std::invalid_argument);
}

TEST(EdgeSets, TourAndPartial) {
  const std::vector<int> perm{0, 1, 2};
  EXPECT_EQ(tour_edge_set(perm), (EdgeSet{edge_key(0, 1), edge_key(0, 2), edge_key(1, 2)}));
  const std::vector<int> seq{2, 0};
  EXPECT_EQ(partial_edge_set(seq), (EdgeSet{edge_key(0, 2)}));
  const std::vector<int> one{4};
  EXPECT_TRUE(partial_edge_set(one).empty());
}

TEST(PartialTour, TracksVisits) {
  PartialTour t(4, 2);
  t.push(0);
  EXPECT_TRUE(t.visited(2));
  EXPECT_TRUE(t.visited(0));
  EXPECT_FALSE(t.visited(1));
  EXPECT_EQ(t.last(), 0);
  EXPECT_THROW(t.push(2), std::invalid_argument);
  t.push(1);
  t.push(3);
  EXPECT_TRUE(t.complete());
  EXPECT_EQ(t.to_tour().perm(), (std::vector<int>{2, 0, 1, 3}));
}
