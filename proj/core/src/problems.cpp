#include "marco/problems.hpp"

#include <algorithm>
#include <numeric>

namespace marco {

namespace {

void check_length(const GraphInstance& g, const BinarySolution& s) {
  if (s.size() != g.n()) {
    throw std::invalid_argument("solution length " + std::to_string(s.size()) + " does not match n=" +
                                std::to_string(g.n()));
  }
}

}  // namespace

std::string to_string(Problem problem) {
  switch (problem) {
    case Problem::MaxCut: return "mc";
    case Problem::MaxIndependentSet: return "mis";
    case Problem::Tsp: return "tsp";
  }
  return "?";
}

Problem problem_from_string(const std::string& name) {
  if (name == "mc") return Problem::MaxCut;
  if (name == "mis") return Problem::MaxIndependentSet;
  if (name == "tsp") return Problem::Tsp;
  throw std::invalid_argument("unknown problem '" + name + "' (expected mc, mis or tsp)");
}

BinarySolution::BinarySolution(std::vector<std::uint8_t> values) : bits(std::move(values)) {
  for (auto b : bits) {
    if (b > 1) throw std::invalid_argument("binary solution entries must be 0 or 1");
  }
}

int BinarySolution::popcount() const {
  return static_cast<int>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

BinarySolution complement(const BinarySolution& s) {
  BinarySolution out = s;
  for (auto& b : out.bits) b = static_cast<std::uint8_t>(1 - b);
  return out;
}

EdgeSet partial_edge_set(std::span<const int> seq) {
  std::vector<int> sorted(seq.begin(), seq.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("partial tour repeats a node");
  }
  EdgeSet edges;
  if (seq.size() < 2) return edges;
  edges.reserve(seq.size());
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) edges.push_back(edge_key(seq[i], seq[i + 1]));
  std::sort(edges.begin(), edges.end());
  return edges;
}

EdgeSet tour_edge_set(std::span<const int> perm) {
  EdgeSet edges = partial_edge_set(perm);
  if (perm.size() >= 2) {
    edges.push_back(edge_key(perm.back(), perm.front()));
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  }
  return edges;
}

int edge_set_intersection(const EdgeSet& a, const EdgeSet& b) {
  int count = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++count;
      ++ia;
      ++ib;
    }
  }
  return count;
}

Tour::Tour(std::vector<int> perm) : perm_(std::move(perm)) {
  if (!is_valid_tour(*this, size())) throw std::invalid_argument("tour is not a permutation of [0, n)");
}

bool is_valid_tour(const Tour& tour, int n) {
  if (tour.size() != n) return false;
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(n), 0);
  for (int v : tour.perm()) {
    if (v < 0 || v >= n || seen[static_cast<std::size_t>(v)]) return false;
    seen[static_cast<std::size_t>(v)] = 1;
  }
  return true;
}

PartialTour::PartialTour(int n, int start) : visited_(static_cast<std::size_t>(n), 0) {
  if (start < 0 || start >= n) throw std::out_of_range("start node out of range");
  seq_.reserve(static_cast<std::size_t>(n));
  push(start);
}

void PartialTour::push(int node) {
  if (node < 0 || node >= n()) throw std::out_of_range("node out of range");
  if (visited(node)) throw std::invalid_argument("node " + std::to_string(node) + " already visited");
  visited_[static_cast<std::size_t>(node)] = 1;
  seq_.push_back(node);
}

Tour PartialTour::to_tour() const {
  if (!complete()) throw std::logic_error("partial tour is not complete");
  return Tour(seq_);
}

int mc_objective(const GraphInstance& g, const BinarySolution& s) {
  check_length(g, s);
  int cut = 0;
  for (const Edge& e : g.edges()) cut += s[e.u] != s[e.v] ? 1 : 0;
  return cut;
}

int mc_flip_gain(const GraphInstance& g, const BinarySolution& s, int i) {
  int gain = 0;
  for (int j : g.neighbors(i)) gain += s[i] == s[j] ? 1 : -1;
  return gain;
}

bool mis_is_independent(const GraphInstance& g, const BinarySolution& s) {
  check_length(g, s);
  return std::none_of(g.edges().begin(), g.edges().end(),
                      [&](const Edge& e) { return s[e.u] == 1 && s[e.v] == 1; });
}

int mis_objective(const GraphInstance& g, const BinarySolution& s) {
  if (!mis_is_independent(g, s)) throw ContractViolation("MIS objective requested for a dependent set");
  return s.popcount();
}

int binary_objective(const GraphInstance& g, const BinarySolution& s, Problem problem) {
  switch (problem) {
    case Problem::MaxCut: return mc_objective(g, s);
    case Problem::MaxIndependentSet: return mis_objective(g, s);
    case Problem::Tsp: break;
  }
  throw std::invalid_argument("binary_objective: TSP is not a binary problem");
}

int apply_flip_in_place(const GraphInstance& g, BinarySolution& s, int i, Problem problem) {
  if (i < 0 || i >= s.size()) throw std::out_of_range("flip index out of range");
  auto& bits = s.bits;
  if (problem == Problem::MaxCut) {
    const int gain = mc_flip_gain(g, s, i);
    bits[i] ^= 1;
    return gain;
  }
  if (problem != Problem::MaxIndependentSet) throw std::invalid_argument("apply_flip: binary problems only");
  if (bits[i] == 1) {
    bits[i] = 0;
    return -1;
  }
  int removed = 0;
  for (int j : g.neighbors(i)) {
    if (bits[j] == 1) {
      bits[j] = 0;
      ++removed;
    }
  }
  bits[i] = 1;
  return 1 - removed;
}

BinarySolution apply_flip(const GraphInstance& g, const BinarySolution& s, int i, Problem problem) {
  check_length(g, s);
  BinarySolution out = s;
  apply_flip_in_place(g, out, i, problem);
  return out;
}

double tsp_tour_length(const GraphInstance& g, const Tour& tour) {
  const auto& d = g.distances();
  if (tour.size() != g.n()) throw std::invalid_argument("tour size does not match instance");
  const auto& p = tour.perm();
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += d(p[i], p[(i + 1) % p.size()]);
  return total;
}

}  // namespace marco
