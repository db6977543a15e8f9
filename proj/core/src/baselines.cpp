#include "marco/baselines.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>

namespace marco {

namespace {

void require_size(const GraphInstance& g, int limit, const char* what) {
  if (g.n() > limit) {
    throw std::invalid_argument(std::string(what) + ": n=" + std::to_string(g.n()) + " exceeds the limit of " +
                                std::to_string(limit));
  }
}

std::vector<std::uint32_t> neighbor_masks(const GraphInstance& g) {
  std::vector<std::uint32_t> masks(static_cast<std::size_t>(g.n()), 0);
  for (const auto& e : g.edges()) {
    masks[static_cast<std::size_t>(e.u)] |= 1u << e.v;
    masks[static_cast<std::size_t>(e.v)] |= 1u << e.u;
  }
  return masks;
}

BinarySolution from_mask(int n, std::uint64_t mask) {
  BinarySolution s(n);
  for (int i = 0; i < n; ++i) s.bits[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((mask >> i) & 1u);
  return s;
}

}  // namespace

BinarySolution greedy_mis(const GraphInstance& g) {
  const int n = g.n();
  std::vector<std::uint8_t> alive(static_cast<std::size_t>(n), 1);
  std::vector<int> degree(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) degree[static_cast<std::size_t>(i)] = g.degree(i);
  BinarySolution s(n);
  auto remove = [&](int v) {
    alive[static_cast<std::size_t>(v)] = 0;
    for (int u : g.neighbors(v)) {
      if (alive[static_cast<std::size_t>(u)]) --degree[static_cast<std::size_t>(u)];
    }
  };
  while (true) {
    int pick = -1;
    for (int i = 0; i < n; ++i) {
      if (alive[static_cast<std::size_t>(i)] &&
          (pick < 0 || degree[static_cast<std::size_t>(i)] < degree[static_cast<std::size_t>(pick)])) {
        pick = i;
      }
    }
    if (pick < 0) break;
    s.bits[static_cast<std::size_t>(pick)] = 1;
    std::vector<int> removed{pick};
    for (int u : g.neighbors(pick)) {
      if (alive[static_cast<std::size_t>(u)]) removed.push_back(u);
    }
    for (int v : removed) {
      if (alive[static_cast<std::size_t>(v)]) remove(v);
    }
  }
  return s;
}

BinarySolution random_maximal_independent_set(const GraphInstance& g, Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(g.n()));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  BinarySolution s(g.n());
  std::vector<std::uint8_t> blocked(static_cast<std::size_t>(g.n()), 0);
  for (int v : order) {
    if (blocked[static_cast<std::size_t>(v)]) continue;
    s.bits[static_cast<std::size_t>(v)] = 1;
    blocked[static_cast<std::size_t>(v)] = 1;
    for (int u : g.neighbors(v)) blocked[static_cast<std::size_t>(u)] = 1;
  }
  return s;
}

Tour nearest_neighbor_tsp(const GraphInstance& g, int start) {
  const int n = g.n();
  if (start < 0 || start >= n) throw std::invalid_argument("nearest_neighbor_tsp: start out of range");
  const auto& d = g.distances();
  PartialTour partial(n, start);
  while (!partial.complete()) {
    int best = -1;
    for (int j = 0; j < n; ++j) {
      if (partial.visited(j)) continue;
      if (best < 0 || d(partial.last(), j) < d(partial.last(), best)) best = j;
    }
    partial.push(best);
  }
  return partial.to_tour();
}

Tour nearest_neighbor_tsp_best(const GraphInstance& g) {
  Tour best = nearest_neighbor_tsp(g, 0);
  double best_len = tsp_tour_length(g, best);
  for (int s = 1; s < g.n(); ++s) {
    Tour t = nearest_neighbor_tsp(g, s);
    const double len = tsp_tour_length(g, t);
    if (len < best_len) {
      best = std::move(t);
      best_len = len;
    }
  }
  return best;
}

ExactBinary brute_force_mc(const GraphInstance& g) {
  require_size(g, kBruteForceBinaryLimit, "brute_force_mc");
  const int n = g.n();
  const auto nbr = neighbor_masks(g);
  // Gray-code walk over bits 1..n-1; each step flips one node and updates the cut.
  std::uint32_t mask = 0;
  int cut = 0;
  int best = 0;
  std::uint32_t best_mask = 0;
  const std::uint64_t total = n > 1 ? (std::uint64_t{1} << (n - 1)) : 1;
  for (std::uint64_t step = 1; step < total; ++step) {
    const int node = std::countr_zero(step) + 1;
    const std::uint32_t bit = 1u << node;
    // Before the flip, neighbours on the same side as `node` are uncut.
    const bool side = (mask & bit) != 0;
    const std::uint32_t others = nbr[static_cast<std::size_t>(node)];
    const int on_one = std::popcount(others & mask);
    const int deg = std::popcount(others);
    const int same_side = side ? on_one : deg - on_one;
    cut += same_side - (deg - same_side);
    mask ^= bit;
    if (cut > best || (cut == best && mask < best_mask)) {
      best = cut;
      best_mask = mask;
    }
  }
  return {from_mask(n, best_mask), best};
}

ExactBinary brute_force_mis(const GraphInstance& g) {
  require_size(g, kBruteForceBinaryLimit, "brute_force_mis");
  const int n = g.n();
  const auto nbr = neighbor_masks(g);
  std::uint32_t best_mask = 0;
  int best = 0;
  // Branch on the lowest candidate: include it (dropping its neighbours) or exclude it.
  auto search = [&](auto&& self, std::uint32_t candidates, std::uint32_t chosen, int size) -> void {
    if (size + std::popcount(candidates) < best) return;
    if (candidates == 0) {
      if (size > best || (size == best && chosen < best_mask)) {
        best = size;
        best_mask = chosen;
      }
      return;
    }
    const int v = std::countr_zero(candidates);
    const std::uint32_t bit = 1u << v;
    self(self, candidates & ~bit & ~nbr[static_cast<std::size_t>(v)], chosen | bit, size + 1);
    self(self, candidates & ~bit, chosen, size);
  };
  const std::uint32_t all = n == 32 ? ~0u : ((1u << n) - 1u);
  search(search, all, 0u, 0);
  return {from_mask(n, best_mask), best};
}

ExactTour brute_force_tsp(const GraphInstance& g) {
  require_size(g, kBruteForceTspLimit, "brute_force_tsp");
  const int n = g.n();
  const auto& d = g.distances();
  if (n <= 3) {
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Tour t(perm);
    return {t, tsp_tour_length(g, t)};
  }
  std::vector<int> path{0};
  std::vector<std::uint8_t> used(static_cast<std::size_t>(n), 0);
  used[0] = 1;
  std::vector<int> best_perm;
  double best = std::numeric_limits<double>::infinity();
  auto search = [&](auto&& self, double length) -> void {
    if (length >= best) return;
    if (static_cast<int>(path.size()) == n) {
      // Orientation fixed by requiring perm[1] < perm[n-1].
      if (path[1] > path.back()) return;
      const double total = length + d(path.back(), 0);
      if (total < best) {
        best = total;
        best_perm = path;
      }
      return;
    }
    for (int j = 1; j < n; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      used[static_cast<std::size_t>(j)] = 1;
      const double next = length + d(path.back(), j);
      path.push_back(j);
      self(self, next);
      path.pop_back();
      used[static_cast<std::size_t>(j)] = 0;
    }
  };
  search(search, 0.0);
  Tour tour(best_perm);
  return {tour, tsp_tour_length(g, tour)};
}

}  // namespace marco
