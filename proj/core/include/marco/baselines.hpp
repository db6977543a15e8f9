#pragma once

#include "marco/instances.hpp"
#include "marco/problems.hpp"
#include "marco/rng.hpp"

namespace marco {

inline constexpr int kBruteForceBinaryLimit = 22;
inline constexpr int kBruteForceTspLimit = 11;

struct ExactBinary {
  BinarySolution solution;
  int value = 0;
};

struct ExactTour {
  Tour tour;
  double length = 0.0;
};

/// Minimum-residual-degree greedy independent set (ties to the lowest index).
BinarySolution greedy_mis(const GraphInstance& g);

/// Maximal independent set built by scanning nodes in a random order.
BinarySolution random_maximal_independent_set(const GraphInstance& g, Rng& rng);

/// Nearest-neighbour tour from `start` (ties to the lowest index).
Tour nearest_neighbor_tsp(const GraphInstance& g, int start);
/// Shortest nearest-neighbour tour over all start nodes.
Tour nearest_neighbor_tsp_best(const GraphInstance& g);

/// Exhaustive MC over the 2^(n-1) assignments with bit 0 fixed to 0.
ExactBinary brute_force_mc(const GraphInstance& g);
/// Exhaustive MIS by branch and bound over independent subsets.
ExactBinary brute_force_mis(const GraphInstance& g);
/// Exhaustive TSP over tours starting at node 0 with fixed orientation.
ExactTour brute_force_tsp(const GraphInstance& g);

}  // namespace marco
