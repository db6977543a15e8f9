#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "marco/problems.hpp"

namespace marco {

inline constexpr std::size_t kDefaultMemoryCapacity = 100000;

/// Similarity-weighted aggregate of the k nearest stored entries.
struct RetrievedContext {
  /// Node-wise memories: length n, weighted mean of one-hot actions.
  std::vector<double> node_values;
  /// Edge-wise memories: symmetric n x n, weighted mean of edge incidences.
  Eigen::MatrixXd edge_values;
  /// Number of neighbours that took part (min(k, size)).
  int matched_count = 0;
};

/// Inner product of two 0/1 vectors.
int similarity_nodes(const BinarySolution& a, const BinarySolution& b);
/// |partial ∩ stored| for normalized edge sets.
int similarity_edges(const EdgeSet& partial, const EdgeSet& stored);
/// sim divided by the query's self-similarity; 0 when the query is empty.
double norm_similarity(int sim, int query_self_similarity);

/// Ring buffer of visited binary solutions, each paired with the flip that
/// was executed from it. The action payload may be written after the store
/// (set_action), matching store-then-retrieve step ordering.
class NodeMemory {
 public:
  static constexpr int kNoAction = -1;
  using EntryId = std::uint64_t;

  explicit NodeMemory(int n, std::size_t capacity = kDefaultMemoryCapacity);

  int n() const { return n_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }
  /// Total number of stores ever made.
  std::uint64_t stores() const { return next_id_; }

  EntryId store(const BinarySolution& solution, int action = kNoAction);
  /// Records the action taken from entry `id`; ignored if it has been evicted.
  void set_action(EntryId id, int action);

  /// Top-min(k, size) entries by similarity (ties: newer first), weighted mean
  /// of their one-hot actions with weights sim / popcount(query).
  RetrievedContext retrieve(int k, const BinarySolution& query,
                            std::optional<EntryId> exclude = std::nullopt) const;

  bool contains_exact(const BinarySolution& solution) const;

  /// Live entries oldest first.
  BinarySolution solution_at(std::size_t index) const;
  int action_at(std::size_t index) const;
  EntryId id_at(std::size_t index) const;

  /// Bytes held by live payloads (packed solution words + action slot).
  std::size_t payload_bytes() const;

  /// One line per entry, oldest first: "<bits> <action>".
  void dump(std::ostream& out) const;

 private:
  using Key = std::vector<std::uint64_t>;
  struct KeyHash {
    std::size_t operator()(const Key& key) const noexcept;
  };

  Key pack(const BinarySolution& s) const;
  std::size_t slot_of(std::size_t index) const { return (head_ + index) % capacity_; }
  const std::uint64_t* words_of_slot(std::size_t slot) const { return &words_[slot * words_per_entry_]; }

  int n_;
  std::size_t capacity_;
  std::size_t words_per_entry_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
  EntryId next_id_ = 0;
  std::vector<std::uint64_t> words_;
  std::vector<int> actions_;
  std::vector<EntryId> ids_;
  std::unordered_map<Key, int, KeyHash> exact_index_;
};

/// Ring buffer of completed tours. The value of each entry is the tour's own
/// edge set; tours are kept as successor/predecessor arrays so edge lookups
/// are O(1).
class EdgeMemory {
 public:
  explicit EdgeMemory(int n, std::size_t capacity = kDefaultMemoryCapacity);

  int n() const { return n_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }

  void store(const Tour& tour);

  /// Weighted mean edge incidence of the top-min(k, size) tours by
  /// |partial ∩ tour|, weights normalized by |partial|.
  RetrievedContext retrieve(int k, const EdgeSet& partial) const;

  /// Mean of the min(k, size) largest normalized similarities of `tour`
  /// against stored tours; 0 when empty.
  double avg_sim_topk(const Tour& tour, int k) const;

  Tour tour_at(std::size_t index) const;
  std::size_t payload_bytes() const;
  void dump(std::ostream& out) const;

 private:
  std::size_t slot_of(std::size_t index) const { return (head_ + index) % capacity_; }
  bool slot_has_edge(std::size_t slot, int a, int b) const;
  std::vector<int> top_similarities(const EdgeSet& query, int k, std::vector<std::size_t>* slots) const;

  int n_;
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
  std::vector<int> succ_;
  std::vector<int> pred_;
  std::vector<int> first_;
};

/// Operation-based memory: steps since each flip was last executed, capped
/// at 2n and scaled to [0, 1]. Never-executed actions read 1.
class OpMemory {
 public:
  explicit OpMemory(int n);

  void record(int node, int step);
  std::vector<double> features(int current_step) const;
  int cap() const { return 2 * n_; }

 private:
  int n_;
  std::vector<int> last_step_;
};

}  // namespace marco
