#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "marco/instances.hpp"

using namespace marco;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("marco_test_" + name);
}

}  // namespace

TEST(ErdosRenyi, ZeroAndOneProbability) {
  EXPECT_EQ(gen_erdos_renyi(5, 0.0, 7).edge_count(), 0u);
  EXPECT_EQ(gen_erdos_renyi(5, 1.0, 7).edge_count(), 10u);
}

TEST(ErdosRenyi, MeanEdgeCountMatchesBinomialExpectation) {
  double total = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) total += static_cast<double>(gen_erdos_renyi(200, 0.15, s).edge_count());
  const double expected = 0.15 * 200 * 199 / 2;
  EXPECT_NEAR(total / 100, expected, 0.03 * expected);
}

TEST(ErdosRenyi, SeedDeterminesGraph) {
  EXPECT_TRUE(gen_erdos_renyi(30, 0.2, 11) == gen_erdos_renyi(30, 0.2, 11));
  EXPECT_FALSE(gen_erdos_renyi(30, 0.2, 11) == gen_erdos_renyi(30, 0.2, 12));
}

TEST(ErdosRenyi, RejectsBadArguments) {
  EXPECT_THROW(gen_erdos_renyi(5, 1.5, 1), std::invalid_argument);
  EXPECT_THROW(gen_erdos_renyi(5, -0.1, 1), std::invalid_argument);
}

TEST(TspUniform, TwoCitiesOneEdge) {
  const auto g = gen_tsp_uniform(2, 3);
  ASSERT_EQ(g.edge_count(), 1u);
  const auto& c = g.coords();
  EXPECT_DOUBLE_EQ(g.edges()[0].weight, std::hypot(c[0].x - c[1].x, c[0].y - c[1].y));
}

TEST(TspUniform, WeightsBoundedByDiagonal) {
  const auto g = gen_tsp_uniform(4, 99);
  ASSERT_EQ(g.edge_count(), 6u);
  for (const auto& e : g.edges()) {
    EXPECT_GE(e.weight, 0.0);
    EXPECT_LE(e.weight, std::sqrt(2.0));
  }
}

TEST(TspUniform, CoordsInSquareAndSymmetricDistances) {
  const auto g = gen_tsp_uniform(100, 5);
  for (const auto& p : g.coords()) {
    EXPECT_GE(p.x, 0.0);
    EXPECT_LE(p.x, 1.0);
    EXPECT_GE(p.y, 0.0);
    EXPECT_LE(p.y, 1.0);
  }
  const auto& d = g.distances();
  EXPECT_TRUE(d.isApprox(d.transpose(), 0.0));
  EXPECT_EQ(d.diagonal().norm(), 0.0);
}

TEST(InstanceIo, RoundTripPreservesEdges) {
  const auto path = temp_path("roundtrip.txt");
  const auto g = gen_erdos_renyi(40, 0.2, 3);
  save_instance(g, path);
  const auto back = load_instance(path);
  EXPECT_EQ(back.edges(), g.edges());
  EXPECT_TRUE(back == g);
  std::filesystem::remove(path);
}

TEST(InstanceIo, RoundTripTsp) {
  std::stringstream ss;
  const auto g = gen_tsp_uniform(12, 8);
  write_instance(ss, g);
  const auto back = read_instance(ss);
  ASSERT_EQ(back.n(), 12);
  EXPECT_EQ(back.kind(), GraphKind::CompleteMetric);
  for (int i = 0; i < 12; ++i) {
    EXPECT_NEAR(back.coords()[i].x, g.coords()[i].x, 1e-15);
    EXPECT_NEAR(back.coords()[i].y, g.coords()[i].y, 1e-15);
  }
}

TEST(InstanceIo, SelfLoopRejected) {
  std::stringstream ss("4 1 sparse\n3 3 1\n");
  EXPECT_THROW(read_instance(ss), ValidationError);
  EXPECT_THROW(GraphInstance::sparse(4, {{3, 3}}), ValidationError);
}

TEST(InstanceIo, DuplicateEdgeRejected) {
  EXPECT_THROW(GraphInstance::sparse(4, {{0, 1}, {1, 0}}), ValidationError);
}

TEST(InstanceIo, MalformedLineReportsLineNumber) {
  std::stringstream ss("# header\n3 1 sparse\n0 x 1\n");
  try {
    read_instance(ss);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(InstanceIo, LoadsRbBenchmarkFile) {
  const auto g = load_instance(std::filesystem::path(MARCO_TEST_DATA_DIR) / "rb_n250.dimacs");
  EXPECT_EQ(g.n(), 250);
  EXPECT_EQ(g.edge_count(), 6500u);
  for (int v = 0; v < 25; ++v) {
    for (int a = 0; a < 10; ++a) {
      for (int b = a + 1; b < 10; ++b) EXPECT_TRUE(g.adjacent(v * 10 + a, v * 10 + b));
    }
  }
}

TEST(GraphInstance, AdjacencyMatrixMatchesEdges) {
  const auto g = gen_erdos_renyi(15, 0.4, 2);
  const auto a = g.adjacency_matrix();
  EXPECT_EQ(static_cast<std::size_t>(a.sum()), 2 * g.edge_count());
  for (const auto& e : g.edges()) EXPECT_EQ(a(e.u, e.v), 1.0);
  EXPECT_THROW(g.distances(), std::logic_error);
}
