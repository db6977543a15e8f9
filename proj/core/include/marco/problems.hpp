#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "marco/instances.hpp"

namespace marco {

enum class Problem { MaxCut, MaxIndependentSet, Tsp };

/// "mc", "mis", "tsp".
std::string to_string(Problem problem);
Problem problem_from_string(const std::string& name);
inline bool is_binary(Problem p) { return p != Problem::Tsp; }

/// Raised when a caller breaks a documented precondition (e.g. asking for the
/// MIS objective of a dependent set).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// 0/1 assignment over the nodes of an instance.
struct BinarySolution {
  std::vector<std::uint8_t> bits;

  BinarySolution() = default;
  explicit BinarySolution(int n) : bits(static_cast<std::size_t>(n), 0) {}
  explicit BinarySolution(std::vector<std::uint8_t> values);

  int size() const { return static_cast<int>(bits.size()); }
  int popcount() const;
  std::uint8_t operator[](int i) const { return bits[static_cast<std::size_t>(i)]; }
  bool operator==(const BinarySolution&) const = default;
};

BinarySolution complement(const BinarySolution& s);

/// Undirected edge packed as (min << 32) | max.
using EdgeKey = std::uint64_t;
inline EdgeKey edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(a < b ? a : b);
  const auto hi = static_cast<std::uint64_t>(a < b ? b : a);
  return (lo << 32) | hi;
}
inline int edge_lo(EdgeKey key) { return static_cast<int>(key >> 32); }
inline int edge_hi(EdgeKey key) { return static_cast<int>(key & 0xffffffffULL); }

/// Sorted, duplicate-free set of undirected edges.
using EdgeSet = std::vector<EdgeKey>;

/// Consecutive pairs of `perm` plus the closing edge. Throws on repeated nodes.
EdgeSet tour_edge_set(std::span<const int> perm);
/// Consecutive pairs of `seq`, no closing edge.
EdgeSet partial_edge_set(std::span<const int> seq);
/// |a ∩ b| for sorted edge sets.
int edge_set_intersection(const EdgeSet& a, const EdgeSet& b);

/// Complete visiting order over [0, n).
class Tour {
 public:
  Tour() = default;
  explicit Tour(std::vector<int> perm);

  const std::vector<int>& perm() const { return perm_; }
  int size() const { return static_cast<int>(perm_.size()); }
  EdgeSet edge_set() const { return tour_edge_set(perm_); }
  bool operator==(const Tour&) const = default;

 private:
  std::vector<int> perm_;
};

/// Tour under construction: distinct nodes in visiting order.
class PartialTour {
 public:
  PartialTour(int n, int start);

  void push(int node);
  int n() const { return static_cast<int>(visited_.size()); }
  int length() const { return static_cast<int>(seq_.size()); }
  bool complete() const { return length() == n(); }
  bool visited(int node) const { return visited_[static_cast<std::size_t>(node)] != 0; }
  int first() const { return seq_.front(); }
  int last() const { return seq_.back(); }
  const std::vector<int>& seq() const { return seq_; }
  EdgeSet edge_set() const { return partial_edge_set(seq_); }
  Tour to_tour() const;

 private:
  std::vector<int> seq_;
  std::vector<std::uint8_t> visited_;
};

/// Number of edges crossing the partition.
int mc_objective(const GraphInstance& g, const BinarySolution& s);
/// Change in cut size if node i is flipped: O(deg i).
int mc_flip_gain(const GraphInstance& g, const BinarySolution& s, int i);

bool mis_is_independent(const GraphInstance& g, const BinarySolution& s);
/// Size of the selected set. Throws ContractViolation if it is not independent.
int mis_objective(const GraphInstance& g, const BinarySolution& s);

/// Objective of a binary problem (MC or MIS).
int binary_objective(const GraphInstance& g, const BinarySolution& s, Problem problem);

/// Bit-flip move. For MIS a 0->1 flip also clears every selected neighbour,
/// so the result stays independent.
BinarySolution apply_flip(const GraphInstance& g, const BinarySolution& s, int i, Problem problem);
/// In-place variant; returns the objective delta.
int apply_flip_in_place(const GraphInstance& g, BinarySolution& s, int i, Problem problem);

double tsp_tour_length(const GraphInstance& g, const Tour& tour);
bool is_valid_tour(const Tour& tour, int n);

}  // namespace marco
