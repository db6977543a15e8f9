#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "marco/search.hpp"
#include "marco/training.hpp"

namespace marco {

struct BenchRow {
  std::string method;
  std::string instance_set;
  /// Swept parameter ("k", "penalty") and its value; empty for ablations.
  std::string parameter;
  double value = 0.0;
  int runs = 0;
  double mean_objective = 0.0;
  double std_objective = 0.0;
  /// Relative gap to the exact optimum when every instance is small enough,
  /// otherwise to the best objective any method reached on that instance.
  double mean_gap = 0.0;
  std::string gap_reference;
  double mean_wall_seconds = 0.0;
  /// Improvement methods only; negative when not applicable.
  double revisit_rate = -1.0;
  /// Per-instance objectives in instance order, kept for paired comparisons.
  std::vector<double> objectives;
  std::vector<double> wall_seconds;
  std::vector<double> revisit_rates;
};

struct BenchReport {
  std::vector<BenchRow> rows;

  const BenchRow& row(const std::string& method) const;
  void write_csv(std::ostream& out) const;
  nlohmann::json to_json() const;
};

struct BenchSettings {
  /// Base search settings; memory_mode and k are overridden per method.
  SearchConfig search;
  std::uint64_t seed = 0;
  std::string instance_set = "bench";
  bool warmup = true;
  /// Solve small instances exactly to report gaps against the optimum.
  bool exact_gaps = true;
  /// Worker threads over instances; 0 reads MARCO_THREADS (default 1).
  int workers = 0;
};

/// Worker count from MARCO_THREADS, capped by hardware concurrency, at least 1.
int worker_count_from_env();

struct AblationModels {
  Policy nim;
  Policy op_nim;
  Policy marco;
};

/// NIM, Op-NIM, MARCO-ind and MARCO on the same instances with paired seeds.
BenchReport run_ablation(Problem problem, const std::vector<GraphInstance>& instances, const AblationModels& models,
                         const BenchSettings& settings);

/// One row per k with the shared-memory MARCO policy.
BenchReport sweep_k(const std::vector<GraphInstance>& instances, const Policy& policy, const std::vector<int>& ks,
                    const BenchSettings& settings);

/// Trains `models_per_value` improvement models per penalty with a fixed
/// budget (`base` with the penalty and seed replaced) and evaluates each with
/// shared-memory MARCO. Rows report the mean and spread over models.
BenchReport sweep_penalty(const TrainConfig& base, const std::vector<double>& penalties, int models_per_value,
                          const std::vector<GraphInstance>& instances, const BenchSettings& settings);

struct GrowthRow {
  int step = 0;
  std::size_t entries = 0;
  std::size_t bytes = 0;
};

/// Entry count and payload bytes after the store barrier of every step.
std::vector<GrowthRow> memory_growth_profile(const GraphInstance& g, const Policy& policy, const SearchConfig& cfg);
void write_growth_csv(const std::vector<GrowthRow>& rows, std::ostream& out);

/// Evaluates one configuration over `instances`; seeds are paired by instance index.
BenchRow evaluate(const std::string& method, const std::vector<GraphInstance>& instances, const Policy& policy,
                  const SearchConfig& cfg, const BenchSettings& settings);

}  // namespace marco
