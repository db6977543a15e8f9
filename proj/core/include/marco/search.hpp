#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "marco/instances.hpp"
#include "marco/memory.hpp"
#include "marco/policy.hpp"
#include "marco/problems.hpp"
#include "marco/rng.hpp"

namespace marco {

enum class MemoryMode { None, OpBased, Independent, Shared };
enum class ActionSelection { Greedy, Sample };

std::string to_string(MemoryMode mode);
MemoryMode memory_mode_from_string(const std::string& name);
std::string to_string(ActionSelection selection);
ActionSelection action_selection_from_string(const std::string& name);

/// Feature layout a policy needs to run under a memory mode.
FeatureLayout layout_for(MemoryMode mode);

struct SearchConfig {
  MemoryMode memory_mode = MemoryMode::Shared;
  int threads = 50;
  int k = 20;
  /// Improvement steps; a negative value means 2n.
  int max_steps = -1;
  int constructions = 10;
  int retrieval_frequency = 10;
  ActionSelection selection = ActionSelection::Greedy;
  bool exclude_self = false;
  std::size_t capacity = kDefaultMemoryCapacity;
  bool record_trace = true;
  /// Keep a text dump of the final memory contents in the result.
  bool dump_memory = false;
  std::uint64_t seed = 0;

  void validate() const;
  int steps_for(int n) const { return max_steps < 0 ? 2 * n : max_steps; }

  static SearchConfig paper(Problem problem);
  static SearchConfig desk(Problem problem);
};

struct SearchResult {
  Problem problem = Problem::MaxCut;
  MemoryMode memory_mode = MemoryMode::Shared;
  /// Best binary solution (MC/MIS) or best tour (TSP).
  BinarySolution best_solution;
  Tour best_tour;
  double best_objective = 0.0;
  /// Improvement: objective after each step, one row per thread.
  /// Construction: tour length of each construction, one row per start.
  std::vector<std::vector<double>> trace;
  /// Best objective over all threads after each step (improvement) or
  /// construction iteration (TSP).
  std::vector<double> best_trace;
  std::int64_t revisit_count = 0;
  std::int64_t thread_steps = 0;
  int steps = 0;
  int threads = 0;
  std::size_t memory_entries = 0;
  std::size_t memory_bytes = 0;
  double wall_seconds = 0.0;
  /// Final memory contents, one entry per line (shared memory, or every
  /// thread's memory in turn); filled when SearchConfig::dump_memory is set.
  std::string memory_dump;
};

/// Fraction of improvement steps whose current solution had already been
/// visited by the same thread.
double revisit_rate(const SearchResult& result);

nlohmann::json to_json(const SearchResult& result);
void write_trace_csv(const SearchResult& result, std::ostream& out);

/// Index of the largest unmasked logit (lowest index on ties) or a sample
/// from the softmax over unmasked entries. `mask` may be empty (all allowed);
/// otherwise non-zero marks an allowed entry.
int select_action(std::span<const double> logits, std::span<const std::uint8_t> mask, ActionSelection mode, Rng& rng);

/// Masked softmax probabilities.
std::vector<double> softmax(std::span<const double> logits, std::span<const std::uint8_t> mask = {});

/// Starting solution of an improvement thread: uniform random bits for MC,
/// a random-order maximal independent set for MIS.
BinarySolution initial_solution(const GraphInstance& g, Problem problem, Rng& rng);

/// Called once per improvement step after the store barrier with the live
/// entry count and payload bytes summed over all memories.
using StepObserver = std::function<void(int step, std::size_t entries, std::size_t bytes)>;

/// Improvement search with one lock-step lane per thread.
SearchResult marco_improve(const GraphInstance& g, const Policy& policy, const SearchConfig& cfg,
                           const StepObserver& observer = {});

/// Multi-start constructive search repeated for cfg.constructions iterations.
SearchResult marco_construct(const GraphInstance& g, const Policy& policy, const SearchConfig& cfg);

/// Dispatches on the policy kind.
SearchResult marco_search(const GraphInstance& g, const Policy& policy, const SearchConfig& cfg);

}  // namespace marco
