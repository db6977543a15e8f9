#include "marco/memory.hpp"

#include <algorithm>
#include <bit>
#include <ostream>
#include <stdexcept>

#include "marco/rng.hpp"

namespace marco {

int similarity_nodes(const BinarySolution& a, const BinarySolution& b) {
  if (a.size() != b.size()) throw std::invalid_argument("similarity_nodes: length mismatch");
  int sim = 0;
  for (int i = 0; i < a.size(); ++i) sim += a[i] & b[i];
  return sim;
}

int similarity_edges(const EdgeSet& partial, const EdgeSet& stored) {
  return edge_set_intersection(partial, stored);
}

double norm_similarity(int sim, int query_self_similarity) {
  if (sim < 0) throw std::invalid_argument("norm_similarity: negative similarity");
  if (query_self_similarity <= 0) return 0.0;
  return static_cast<double>(sim) / static_cast<double>(query_self_similarity);
}

namespace {

struct Candidate {
  int sim;
  std::uint64_t order;  // larger = newer
  std::size_t slot;
};

// Highest similarity first, newer entry first on ties.
bool ranks_before(const Candidate& a, const Candidate& b) {
  return a.sim != b.sim ? a.sim > b.sim : a.order > b.order;
}

void keep_top(std::vector<Candidate>& candidates, std::size_t k) {
  k = std::min(k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k), candidates.end(),
                    ranks_before);
  candidates.resize(k);
}

}  // namespace

// ---------------------------------------------------------------------------
// NodeMemory

std::size_t NodeMemory::KeyHash::operator()(const Key& key) const noexcept {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (auto w : key) h = splitmix64(h ^ w);
  return static_cast<std::size_t>(h);
}

NodeMemory::NodeMemory(int n, std::size_t capacity)
    : n_(n), capacity_(capacity), words_per_entry_((static_cast<std::size_t>(n) + 63) / 64) {
  if (n < 1) throw std::invalid_argument("NodeMemory: n must be >= 1");
  if (capacity < 1) throw std::invalid_argument("NodeMemory: capacity must be >= 1");
}

NodeMemory::Key NodeMemory::pack(const BinarySolution& s) const {
  if (s.size() != n_) throw std::invalid_argument("NodeMemory: solution length does not match memory");
  Key key(words_per_entry_, 0);
  for (int i = 0; i < n_; ++i) {
    if (s[i]) key[static_cast<std::size_t>(i) / 64] |= std::uint64_t{1} << (i % 64);
  }
  return key;
}

NodeMemory::EntryId NodeMemory::store(const BinarySolution& solution, int action) {
  if (action < kNoAction || action >= n_) throw std::out_of_range("NodeMemory: action out of range");
  Key key = pack(solution);
  std::size_t slot;
  if (count_ < capacity_) {
    slot = slot_of(count_);
    if (words_.size() < (slot + 1) * words_per_entry_) {
      words_.resize((slot + 1) * words_per_entry_);
      actions_.resize(slot + 1);
      ids_.resize(slot + 1);
    }
    ++count_;
  } else {
    // Evict the oldest entry.
    slot = head_;
    Key old(words_of_slot(slot), words_of_slot(slot) + words_per_entry_);
    auto it = exact_index_.find(old);
    if (--it->second == 0) exact_index_.erase(it);
    head_ = (head_ + 1) % capacity_;
  }
  std::copy(key.begin(), key.end(), words_.begin() + static_cast<std::ptrdiff_t>(slot * words_per_entry_));
  actions_[slot] = action;
  ids_[slot] = next_id_;
  ++exact_index_[std::move(key)];
  return next_id_++;
}

void NodeMemory::set_action(EntryId id, int action) {
  if (action < kNoAction || action >= n_) throw std::out_of_range("NodeMemory: action out of range");
  if (count_ == 0 || id >= next_id_) return;
  const EntryId oldest = ids_[head_];
  if (id < oldest) return;
  actions_[slot_of(static_cast<std::size_t>(id - oldest))] = action;
}

RetrievedContext NodeMemory::retrieve(int k, const BinarySolution& query, std::optional<EntryId> exclude) const {
  if (k < 1) throw std::invalid_argument("retrieve: k must be >= 1");
  RetrievedContext ctx;
  ctx.node_values.assign(static_cast<std::size_t>(n_), 0.0);
  if (count_ == 0) return ctx;

  const Key q = pack(query);
  int self_sim = 0;
  for (auto w : q) self_sim += std::popcount(w);

  std::vector<Candidate> candidates;
  candidates.reserve(count_);
  for (std::size_t i = 0; i < count_; ++i) {
    const std::size_t slot = slot_of(i);
    if (exclude && ids_[slot] == *exclude) continue;
    const std::uint64_t* words = words_of_slot(slot);
    int sim = 0;
    for (std::size_t w = 0; w < words_per_entry_; ++w) sim += std::popcount(words[w] & q[w]);
    candidates.push_back({sim, ids_[slot], slot});
  }
  keep_top(candidates, static_cast<std::size_t>(k));
  ctx.matched_count = static_cast<int>(candidates.size());

  double total = 0.0;
  for (const auto& c : candidates) {
    const double w = norm_similarity(c.sim, self_sim);
    total += w;
    const int action = actions_[c.slot];
    if (action != kNoAction) ctx.node_values[static_cast<std::size_t>(action)] += w;
  }
  if (total <= 0.0) {
    std::fill(ctx.node_values.begin(), ctx.node_values.end(), 0.0);
    return ctx;
  }
  for (auto& v : ctx.node_values) v /= total;
  return ctx;
}

bool NodeMemory::contains_exact(const BinarySolution& solution) const {
  return exact_index_.contains(pack(solution));
}

BinarySolution NodeMemory::solution_at(std::size_t index) const {
  if (index >= count_) throw std::out_of_range("NodeMemory: entry index out of range");
  const std::uint64_t* words = words_of_slot(slot_of(index));
  BinarySolution s(n_);
  for (int i = 0; i < n_; ++i) s.bits[i] = static_cast<std::uint8_t>((words[i / 64] >> (i % 64)) & 1U);
  return s;
}

int NodeMemory::action_at(std::size_t index) const {
  if (index >= count_) throw std::out_of_range("NodeMemory: entry index out of range");
  return actions_[slot_of(index)];
}

NodeMemory::EntryId NodeMemory::id_at(std::size_t index) const {
  if (index >= count_) throw std::out_of_range("NodeMemory: entry index out of range");
  return ids_[slot_of(index)];
}

std::size_t NodeMemory::payload_bytes() const {
  return count_ * (words_per_entry_ * sizeof(std::uint64_t) + sizeof(int));
}

void NodeMemory::dump(std::ostream& out) const {
  for (std::size_t i = 0; i < count_; ++i) {
    const BinarySolution s = solution_at(i);
    for (auto b : s.bits) out << static_cast<char>('0' + b);
    out << ' ' << action_at(i) << '\n';
  }
}

// ---------------------------------------------------------------------------
// EdgeMemory

EdgeMemory::EdgeMemory(int n, std::size_t capacity) : n_(n), capacity_(capacity) {
  if (n < 1) throw std::invalid_argument("EdgeMemory: n must be >= 1");
  if (capacity < 1) throw std::invalid_argument("EdgeMemory: capacity must be >= 1");
}

void EdgeMemory::store(const Tour& tour) {
  if (!is_valid_tour(tour, n_)) throw std::invalid_argument("EdgeMemory: payload is not a tour over n nodes");
  std::size_t slot;
  if (count_ < capacity_) {
    slot = slot_of(count_);
    const std::size_t need = (slot + 1) * static_cast<std::size_t>(n_);
    if (succ_.size() < need) {
      succ_.resize(need);
      pred_.resize(need);
      first_.resize(slot + 1);
    }
    ++count_;
  } else {
    slot = head_;
    head_ = (head_ + 1) % capacity_;
  }
  const auto& p = tour.perm();
  int* succ = &succ_[slot * static_cast<std::size_t>(n_)];
  int* pred = &pred_[slot * static_cast<std::size_t>(n_)];
  for (int i = 0; i < n_; ++i) {
    const int a = p[static_cast<std::size_t>(i)];
    const int b = p[static_cast<std::size_t>((i + 1) % n_)];
    succ[a] = b;
    pred[b] = a;
  }
  first_[slot] = p.front();
}

bool EdgeMemory::slot_has_edge(std::size_t slot, int a, int b) const {
  const std::size_t base = slot * static_cast<std::size_t>(n_);
  return succ_[base + a] == b || pred_[base + a] == b;
}

std::vector<int> EdgeMemory::top_similarities(const EdgeSet& query, int k, std::vector<std::size_t>* slots) const {
  std::vector<Candidate> candidates;
  candidates.reserve(count_);
  for (std::size_t i = 0; i < count_; ++i) {
    const std::size_t slot = slot_of(i);
    int sim = 0;
    for (EdgeKey e : query) sim += slot_has_edge(slot, edge_lo(e), edge_hi(e)) ? 1 : 0;
    candidates.push_back({sim, i, slot});
  }
  keep_top(candidates, static_cast<std::size_t>(k));
  std::vector<int> sims;
  for (const auto& c : candidates) {
    sims.push_back(c.sim);
    if (slots) slots->push_back(c.slot);
  }
  return sims;
}

RetrievedContext EdgeMemory::retrieve(int k, const EdgeSet& partial) const {
  if (k < 1) throw std::invalid_argument("retrieve: k must be >= 1");
  RetrievedContext ctx;
  ctx.edge_values = Eigen::MatrixXd::Zero(n_, n_);
  if (count_ == 0) return ctx;
  for (EdgeKey e : partial) {
    if (edge_hi(e) >= n_) throw std::out_of_range("EdgeMemory: query edge out of range");
  }

  std::vector<std::size_t> slots;
  const std::vector<int> sims = top_similarities(partial, k, &slots);
  ctx.matched_count = static_cast<int>(sims.size());
  const int self_sim = static_cast<int>(partial.size());
  double total = 0.0;
  for (std::size_t j = 0; j < sims.size(); ++j) {
    const double w = norm_similarity(sims[j], self_sim);
    if (w <= 0.0) continue;
    total += w;
    const int* succ = &succ_[slots[j] * static_cast<std::size_t>(n_)];
    for (int a = 0; a < n_; ++a) {
      const int b = succ[a];
      if (a == b) continue;
      ctx.edge_values(a, b) += w;
      if (n_ > 2) ctx.edge_values(b, a) += w;
    }
  }
  if (total <= 0.0) {
    ctx.edge_values.setZero();
    return ctx;
  }
  ctx.edge_values /= total;
  return ctx;
}

double EdgeMemory::avg_sim_topk(const Tour& tour, int k) const {
  if (k < 1) throw std::invalid_argument("avg_sim_topk: k must be >= 1");
  if (count_ == 0) return 0.0;
  const EdgeSet edges = tour.edge_set();
  const std::vector<int> sims = top_similarities(edges, k, nullptr);
  double total = 0.0;
  for (int s : sims) total += norm_similarity(s, static_cast<int>(edges.size()));
  return total / static_cast<double>(sims.size());
}

Tour EdgeMemory::tour_at(std::size_t index) const {
  if (index >= count_) throw std::out_of_range("EdgeMemory: entry index out of range");
  const std::size_t slot = slot_of(index);
  const int* succ = &succ_[slot * static_cast<std::size_t>(n_)];
  std::vector<int> perm;
  perm.reserve(static_cast<std::size_t>(n_));
  int v = first_[slot];
  for (int i = 0; i < n_; ++i) {
    perm.push_back(v);
    v = succ[v];
  }
  return Tour(std::move(perm));
}

std::size_t EdgeMemory::payload_bytes() const {
  return count_ * (2 * static_cast<std::size_t>(n_) * sizeof(int) + sizeof(int));
}

void EdgeMemory::dump(std::ostream& out) const {
  for (std::size_t i = 0; i < count_; ++i) {
    const Tour t = tour_at(i);
    for (std::size_t j = 0; j < t.perm().size(); ++j) out << (j ? " " : "") << t.perm()[j];
    out << " |";
    for (EdgeKey e : t.edge_set()) out << ' ' << edge_lo(e) << '-' << edge_hi(e);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// OpMemory

OpMemory::OpMemory(int n) : n_(n), last_step_(static_cast<std::size_t>(n), -1) {
  if (n < 1) throw std::invalid_argument("OpMemory: n must be >= 1");
}

void OpMemory::record(int node, int step) {
  if (node < 0 || node >= n_) throw std::out_of_range("OpMemory: node out of range");
  last_step_[static_cast<std::size_t>(node)] = step;
}

std::vector<double> OpMemory::features(int current_step) const {
  const double c = static_cast<double>(cap());
  std::vector<double> out(static_cast<std::size_t>(n_), 1.0);
  for (int i = 0; i < n_; ++i) {
    const int last = last_step_[static_cast<std::size_t>(i)];
    if (last < 0) continue;
    const int since = std::max(0, current_step - last);
    out[static_cast<std::size_t>(i)] = std::min(static_cast<double>(since), c) / c;
  }
  return out;
}

}  // namespace marco
