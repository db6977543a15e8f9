#include "marco/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <set>
#include <sstream>
#include <unordered_set>

#include "marco/baselines.hpp"

namespace marco {

namespace {

std::string bits_key(const BinarySolution& s) { return std::string(s.bits.begin(), s.bits.end()); }

std::string bits_string(const BinarySolution& s) {
  std::string out;
  out.reserve(s.bits.size());
  for (auto b : s.bits) out.push_back(b ? '1' : '0');
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void check_layout(const Policy& policy, MemoryMode mode) {
  if (mode == MemoryMode::None) return;
  if (policy.layout() != layout_for(mode)) {
    throw std::invalid_argument("policy with feature layout '" + to_string(policy.layout()) +
                                "' cannot run with memory mode '" + to_string(mode) + "'");
  }
}

}  // namespace

std::string to_string(MemoryMode mode) {
  switch (mode) {
    case MemoryMode::None: return "none";
    case MemoryMode::OpBased: return "op";
    case MemoryMode::Independent: return "independent";
    case MemoryMode::Shared: return "shared";
  }
  return "?";
}

MemoryMode memory_mode_from_string(const std::string& name) {
  if (name == "none") return MemoryMode::None;
  if (name == "op") return MemoryMode::OpBased;
  if (name == "independent") return MemoryMode::Independent;
  if (name == "shared") return MemoryMode::Shared;
  throw std::invalid_argument("unknown memory mode '" + name + "'");
}

std::string to_string(ActionSelection selection) {
  return selection == ActionSelection::Greedy ? "greedy" : "sample";
}

ActionSelection action_selection_from_string(const std::string& name) {
  if (name == "greedy") return ActionSelection::Greedy;
  if (name == "sample") return ActionSelection::Sample;
  throw std::invalid_argument("unknown action selection '" + name + "'");
}

FeatureLayout layout_for(MemoryMode mode) {
  switch (mode) {
    case MemoryMode::None: return FeatureLayout::None;
    case MemoryMode::OpBased: return FeatureLayout::OpBased;
    default: return FeatureLayout::Retrieved;
  }
}

void SearchConfig::validate() const {
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (retrieval_frequency < 1) throw std::invalid_argument("retrieval_frequency must be >= 1");
  if (constructions < 1) throw std::invalid_argument("constructions must be >= 1");
  if (capacity < 1) throw std::invalid_argument("capacity must be >= 1");
}

SearchConfig SearchConfig::paper(Problem problem) {
  SearchConfig cfg;
  if (problem == Problem::Tsp) {
    cfg.threads = 100;
    cfg.k = 3;
    cfg.constructions = 10;
    cfg.retrieval_frequency = 10;
  } else {
    cfg.threads = 50;
    cfg.k = 20;
  }
  return cfg;
}

SearchConfig SearchConfig::desk(Problem problem) {
  SearchConfig cfg = paper(problem);
  if (problem == Problem::Tsp) {
    cfg.threads = 100;
    cfg.constructions = 20;
    cfg.retrieval_frequency = 1;
  } else {
    cfg.threads = 8;
  }
  return cfg;
}

double revisit_rate(const SearchResult& result) {
  if (result.problem == Problem::Tsp) throw std::invalid_argument("revisit_rate needs an improvement-mode result");
  if (result.thread_steps == 0) return 0.0;
  return static_cast<double>(result.revisit_count) / static_cast<double>(result.thread_steps);
}

nlohmann::json to_json(const SearchResult& r) {
  nlohmann::json j;
  j["problem"] = to_string(r.problem);
  j["memory_mode"] = to_string(r.memory_mode);
  if (r.problem == Problem::Tsp) {
    j["best_tour"] = r.best_tour.perm();
  } else {
    j["best_solution"] = bits_string(r.best_solution);
  }
  j["best_objective"] = r.best_objective;
  j["best_trace"] = r.best_trace;
  j["revisit_count"] = r.revisit_count;
  j["thread_steps"] = r.thread_steps;
  if (r.problem != Problem::Tsp) j["revisit_rate"] = revisit_rate(r);
  j["steps"] = r.steps;
  j["threads"] = r.threads;
  j["memory_entries"] = r.memory_entries;
  j["memory_bytes"] = r.memory_bytes;
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

void write_trace_csv(const SearchResult& result, std::ostream& out) {
  out << "thread,step,objective\n";
  for (std::size_t t = 0; t < result.trace.size(); ++t) {
    for (std::size_t s = 0; s < result.trace[t].size(); ++s) {
      out << t << ',' << s << ',' << result.trace[t][s] << '\n';
    }
  }
}

std::vector<double> softmax(std::span<const double> logits, std::span<const std::uint8_t> mask) {
  if (!mask.empty() && mask.size() != logits.size()) throw std::invalid_argument("softmax: mask length mismatch");
  auto allowed = [&](std::size_t i) { return mask.empty() || mask[i] != 0; };
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (allowed(i)) top = std::max(top, logits[i]);
  }
  if (!std::isfinite(top)) throw std::invalid_argument("softmax: no allowed entry");
  std::vector<double> p(logits.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (allowed(i)) total += p[i] = std::exp(logits[i] - top);
  }
  for (auto& v : p) v /= total;
  return p;
}

int select_action(std::span<const double> logits, std::span<const std::uint8_t> mask, ActionSelection mode, Rng& rng) {
  if (!mask.empty() && mask.size() != logits.size()) {
    throw std::invalid_argument("select_action: mask length mismatch");
  }
  if (mode == ActionSelection::Sample) return static_cast<int>(rng.categorical(softmax(logits, mask)));
  int best = -1;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!mask.empty() && mask[i] == 0) continue;
    if (best < 0 || logits[i] > logits[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  if (best < 0) throw std::invalid_argument("select_action: every entry is masked");
  return best;
}

BinarySolution initial_solution(const GraphInstance& g, Problem problem, Rng& rng) {
  if (problem == Problem::MaxIndependentSet) return random_maximal_independent_set(g, rng);
  BinarySolution s(g.n());
  for (auto& b : s.bits) b = rng.bernoulli(0.5) ? 1 : 0;
  return s;
}

SearchResult marco_improve(const GraphInstance& g, const Policy& policy, const SearchConfig& cfg,
                           const StepObserver& observer) {
  cfg.validate();
  if (policy.kind() != PolicyKind::Improvement) throw std::invalid_argument("marco_improve needs an improvement policy");
  check_layout(policy, cfg.memory_mode);
  const auto start_time = std::chrono::steady_clock::now();
  const Problem problem = policy.problem();
  const int n = g.n();
  const int lanes = cfg.threads;
  const int steps = cfg.steps_for(n);
  const auto edge_feats = policy.edge_features(g);

  SearchResult result;
  result.problem = problem;
  result.memory_mode = cfg.memory_mode;
  result.threads = lanes;
  result.steps = steps;

  std::vector<BinarySolution> current;
  std::vector<BinarySolution> lane_best;
  std::vector<int> objective;
  std::vector<int> lane_best_objective;
  std::vector<Rng> rngs;
  for (int l = 0; l < lanes; ++l) {
    Rng init(derive_seed(cfg.seed, 1, static_cast<std::uint64_t>(l)));
    current.push_back(initial_solution(g, problem, init));
    objective.push_back(binary_objective(g, current.back(), problem));
    lane_best.push_back(current.back());
    lane_best_objective.push_back(objective.back());
    rngs.emplace_back(derive_seed(cfg.seed, 2, static_cast<std::uint64_t>(l)));
  }
  int best_lane = static_cast<int>(std::max_element(objective.begin(), objective.end()) - objective.begin());
  result.best_solution = current[static_cast<std::size_t>(best_lane)];
  int best_objective = objective[static_cast<std::size_t>(best_lane)];

  std::vector<NodeMemory> memories;
  if (cfg.memory_mode == MemoryMode::Shared) memories.emplace_back(n, cfg.capacity);
  if (cfg.memory_mode == MemoryMode::Independent) {
    for (int l = 0; l < lanes; ++l) memories.emplace_back(n, cfg.capacity);
  }
  auto memory_of = [&](int lane) -> NodeMemory& {
    return memories[cfg.memory_mode == MemoryMode::Shared ? 0 : static_cast<std::size_t>(lane)];
  };
  std::vector<OpMemory> op_memories;
  if (cfg.memory_mode == MemoryMode::OpBased) op_memories.assign(static_cast<std::size_t>(lanes), OpMemory(n));
  std::vector<std::unordered_set<std::string>> visited(static_cast<std::size_t>(lanes));
  if (cfg.record_trace) result.trace.assign(static_cast<std::size_t>(lanes), {});

  std::vector<NodeMemory::EntryId> ids(static_cast<std::size_t>(lanes), 0);
  std::vector<int> actions(static_cast<std::size_t>(lanes), 0);
  const std::vector<double> zeros(static_cast<std::size_t>(n), 0.0);
  for (int t = 0; t < steps; ++t) {
    for (int l = 0; l < lanes; ++l) {
      const auto lane = static_cast<std::size_t>(l);
      if (!visited[lane].insert(bits_key(current[lane])).second) ++result.revisit_count;
      if (!memories.empty()) ids[lane] = memory_of(l).store(current[lane]);
    }
    if (observer) {
      std::size_t entries = 0;
      std::size_t bytes = 0;
      for (const auto& m : memories) {
        entries += m.size();
        bytes += m.payload_bytes();
      }
      observer(t, entries, bytes);
    }
    for (int l = 0; l < lanes; ++l) {
      const auto lane = static_cast<std::size_t>(l);
      std::vector<double> feature;
      if (cfg.memory_mode == MemoryMode::OpBased) {
        feature = op_memories[lane].features(t);
      } else if (!memories.empty()) {
        std::optional<NodeMemory::EntryId> exclude;
        if (cfg.exclude_self) exclude = ids[lane];
        feature = memory_of(l).retrieve(cfg.k, current[lane], exclude).node_values;
      }
      const auto x = improvement_node_features(current[lane], lane_best[lane], feature.empty() ? zeros : feature);
      const Eigen::RowVectorXd logits = policy.improvement_logits(x, edge_feats);
      actions[lane] = select_action(std::span<const double>(logits.data(), static_cast<std::size_t>(logits.size())),
                                    {}, cfg.selection, rngs[lane]);
    }
    for (int l = 0; l < lanes; ++l) {
      const auto lane = static_cast<std::size_t>(l);
      const int a = actions[lane];
      if (!memories.empty()) memory_of(l).set_action(ids[lane], a);
      if (!op_memories.empty()) op_memories[lane].record(a, t);
      objective[lane] += apply_flip_in_place(g, current[lane], a, problem);
      if (objective[lane] > lane_best_objective[lane]) {
        lane_best_objective[lane] = objective[lane];
        lane_best[lane] = current[lane];
      }
      if (objective[lane] > best_objective) {
        best_objective = objective[lane];
        result.best_solution = current[lane];
      }
      if (cfg.record_trace) result.trace[lane].push_back(objective[lane]);
    }
    result.best_trace.push_back(best_objective);
  }
  result.thread_steps = static_cast<std::int64_t>(lanes) * steps;
  result.best_objective = best_objective;
  for (const auto& m : memories) {
    result.memory_entries += m.size();
    result.memory_bytes += m.payload_bytes();
  }
  result.wall_seconds = seconds_since(start_time);
  if (cfg.dump_memory) {
    std::ostringstream dump;
    for (const auto& m : memories) m.dump(dump);
    result.memory_dump = dump.str();
  }
  return result;
}

SearchResult marco_construct(const GraphInstance& g, const Policy& policy, const SearchConfig& cfg) {
  cfg.validate();
  if (policy.kind() != PolicyKind::Constructive) throw std::invalid_argument("marco_construct needs a constructive policy");
  if (cfg.memory_mode == MemoryMode::OpBased) throw std::invalid_argument("op-based memory applies to improvement only");
  if (g.kind() != GraphKind::CompleteMetric) throw std::invalid_argument("marco_construct needs a complete metric instance");
  const auto start_time = std::chrono::steady_clock::now();
  const int n = g.n();
  const int lanes = std::min(n, cfg.threads);

  std::vector<int> starts(static_cast<std::size_t>(n));
  std::iota(starts.begin(), starts.end(), 0);
  if (lanes < n) {
    Rng pick(derive_seed(cfg.seed, 3));
    pick.shuffle(starts);
    starts.resize(static_cast<std::size_t>(lanes));
  }

  SearchResult result;
  result.problem = Problem::Tsp;
  result.memory_mode = cfg.memory_mode;
  result.threads = lanes;
  result.steps = cfg.constructions;
  result.best_objective = std::numeric_limits<double>::infinity();
  if (cfg.record_trace) result.trace.assign(static_cast<std::size_t>(lanes), {});

  std::vector<EdgeMemory> memories;
  if (cfg.memory_mode == MemoryMode::Shared) memories.emplace_back(n, cfg.capacity);
  if (cfg.memory_mode == MemoryMode::Independent) {
    for (int l = 0; l < lanes; ++l) memories.emplace_back(n, cfg.capacity);
  }
  auto memory_of = [&](int lane) -> EdgeMemory* {
    if (memories.empty()) return nullptr;
    return &memories[cfg.memory_mode == MemoryMode::Shared ? 0 : static_cast<std::size_t>(lane)];
  };

  std::vector<Rng> rngs;
  for (int l = 0; l < lanes; ++l) rngs.emplace_back(derive_seed(cfg.seed, 2, static_cast<std::uint64_t>(l)));

  ad::Tape tape(false);
  const DecoderContext ctx = policy.prepare_decoder(tape, g, policy.edge_features(g));
  const std::size_t mark = tape.size();
  std::vector<std::uint8_t> allowed(static_cast<std::size_t>(n));
  std::vector<std::set<std::vector<int>>> seen(static_cast<std::size_t>(lanes));

  for (int it = 0; it < cfg.constructions; ++it) {
    std::vector<Tour> tours;
    for (int l = 0; l < lanes; ++l) {
      const auto lane = static_cast<std::size_t>(l);
      const EdgeMemory* memory = memory_of(l);
      PartialTour partial(n, starts[lane]);
      ad::Matrix features;
      bool has_features = false;
      while (!partial.complete()) {
        if (memory != nullptr && !memory->empty() && partial.length() % cfg.retrieval_frequency == 0) {
          features = memory->retrieve(cfg.k, partial.edge_set()).edge_values;
          has_features = true;
        }
        const ad::Var logits = policy.decoder_logits(tape, ctx, partial, has_features ? &features : nullptr);
        for (int j = 0; j < n; ++j) allowed[static_cast<std::size_t>(j)] = partial.visited(j) ? 0 : 1;
        const ad::Matrix& values = logits.value();
        const int next = select_action(std::span<const double>(values.data(), static_cast<std::size_t>(n)), allowed,
                                       cfg.selection, rngs[lane]);
        tape.truncate(mark);
        partial.push(next);
      }
      Tour tour = partial.to_tour();
      const double length = tsp_tour_length(g, tour);
      if (!seen[lane].insert(tour.perm()).second) ++result.revisit_count;
      if (cfg.record_trace) result.trace[lane].push_back(length);
      if (length < result.best_objective) {
        result.best_objective = length;
        result.best_tour = tour;
      }
      tours.push_back(std::move(tour));
    }
    for (int l = 0; l < lanes; ++l) {
      if (EdgeMemory* memory = memory_of(l)) memory->store(tours[static_cast<std::size_t>(l)]);
    }
    result.best_trace.push_back(result.best_objective);
  }
  result.thread_steps = static_cast<std::int64_t>(lanes) * cfg.constructions;
  for (const auto& m : memories) {
    result.memory_entries += m.size();
    result.memory_bytes += m.payload_bytes();
  }
  result.wall_seconds = seconds_since(start_time);
  if (cfg.dump_memory) {
    std::ostringstream dump;
    for (const auto& m : memories) m.dump(dump);
    result.memory_dump = dump.str();
  }
  return result;
}

SearchResult marco_search(const GraphInstance& g, const Policy& policy, const SearchConfig& cfg) {
  if (policy.kind() == PolicyKind::Constructive) return marco_construct(g, policy, cfg);
  return marco_improve(g, policy, cfg);
}

}  // namespace marco
