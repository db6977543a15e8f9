#include "marco/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "marco/baselines.hpp"

namespace marco {

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, count); ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

bool maximizes(Problem p) { return p != Problem::Tsp; }

// Relative gap of `objective` to `reference` in the problem's direction.
double relative_gap(Problem p, double objective, double reference) {
  if (reference == 0.0) return 0.0;
  const double gap = maximizes(p) ? (reference - objective) / std::abs(reference)
                                  : (objective - reference) / std::abs(reference);
  return std::max(gap, 0.0);
}

std::vector<double> exact_optima(Problem problem, const std::vector<GraphInstance>& instances) {
  std::vector<double> out;
  for (const auto& g : instances) {
    const int limit = problem == Problem::Tsp ? kBruteForceTspLimit : kBruteForceBinaryLimit;
    if (g.n() > limit) return {};
    switch (problem) {
      case Problem::MaxCut: out.push_back(brute_force_mc(g).value); break;
      case Problem::MaxIndependentSet: out.push_back(brute_force_mis(g).value); break;
      case Problem::Tsp: out.push_back(brute_force_tsp(g).length); break;
    }
  }
  return out;
}

// Fills mean_gap and gap_reference of every row, against optima when given
// or the best objective across rows per instance otherwise.
void fill_gaps(Problem problem, std::vector<BenchRow>& rows, const std::vector<double>& optima) {
  if (rows.empty()) return;
  const std::size_t count = rows.front().objectives.size();
  std::vector<double> reference = optima;
  const bool exact = !optima.empty();
  if (!exact) {
    reference.assign(count, maximizes(problem) ? -std::numeric_limits<double>::infinity()
                                               : std::numeric_limits<double>::infinity());
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < count; ++i) {
        reference[i] = maximizes(problem) ? std::max(reference[i], row.objectives[i])
                                          : std::min(reference[i], row.objectives[i]);
      }
    }
  }
  for (auto& row : rows) {
    std::vector<double> gaps;
    for (std::size_t i = 0; i < count; ++i) gaps.push_back(relative_gap(problem, row.objectives[i], reference[i]));
    row.mean_gap = mean_of(gaps);
    row.gap_reference = exact ? "exact" : "best-known";
  }
}

}  // namespace

int worker_count_from_env() {
  int workers = 1;
  if (const char* env = std::getenv("MARCO_THREADS")) {
    try {
      workers = std::stoi(env);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("MARCO_THREADS is not an integer: '") + env + "'");
    }
  }
  const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return std::clamp(workers, 1, hw);
}

const BenchRow& BenchReport::row(const std::string& method) const {
  for (const auto& r : rows) {
    if (r.method == method) return r;
  }
  throw std::out_of_range("no report row for method '" + method + "'");
}

void BenchReport::write_csv(std::ostream& out) const {
  out << "method,instance_set,parameter,value,runs,mean_objective,std_objective,mean_gap,gap_reference,"
         "mean_wall_seconds,revisit_rate\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.instance_set << ',' << r.parameter << ',' << r.value << ',' << r.runs << ','
        << r.mean_objective << ',' << r.std_objective << ',' << r.mean_gap << ',' << r.gap_reference << ','
        << r.mean_wall_seconds << ',';
    if (r.revisit_rate >= 0.0) out << r.revisit_rate;
    out << '\n';
  }
}

nlohmann::json BenchReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j;
    j["method"] = r.method;
    j["instance_set"] = r.instance_set;
    j["parameter"] = r.parameter;
    j["value"] = r.value;
    j["runs"] = r.runs;
    j["mean_objective"] = r.mean_objective;
    j["std_objective"] = r.std_objective;
    j["mean_gap"] = r.mean_gap;
    j["gap_reference"] = r.gap_reference;
    j["mean_wall_seconds"] = r.mean_wall_seconds;
    if (r.revisit_rate >= 0.0) j["revisit_rate"] = r.revisit_rate;
    j["objectives"] = r.objectives;
    rows_json.push_back(std::move(j));
  }
  return nlohmann::json{{"rows", rows_json}};
}

namespace {

struct Variant {
  std::string method;
  const Policy* policy;
  SearchConfig cfg;
};

// Runs every variant on every instance. Per instance the variants run back to
// back in an order rotated by the instance index, so wall times are paired
// like the seeds and slow drift in machine speed hits all variants alike.
std::vector<BenchRow> evaluate_paired(const std::vector<Variant>& variants, const std::vector<GraphInstance>& instances,
                                      const BenchSettings& settings) {
  std::vector<BenchRow> rows(variants.size());
  for (std::size_t v = 0; v < variants.size(); ++v) {
    rows[v].method = variants[v].method;
    rows[v].instance_set = settings.instance_set;
    rows[v].runs = static_cast<int>(instances.size());
    rows[v].objectives.assign(instances.size(), 0.0);
    rows[v].wall_seconds.assign(instances.size(), 0.0);
    rows[v].revisit_rates.assign(instances.size(), 0.0);
  }
  if (instances.empty()) return rows;
  if (settings.warmup) {
    for (const auto& v : variants) {
      SearchConfig warm = v.cfg;
      warm.seed = derive_seed(settings.seed, 0xffff);
      static_cast<void>(marco_search(instances.front(), *v.policy, warm));
    }
  }
  const int workers = settings.workers > 0 ? settings.workers : worker_count_from_env();
  parallel_for(instances.size(), workers, [&](std::size_t i) {
    for (std::size_t j = 0; j < variants.size(); ++j) {
      const std::size_t v = (i + j) % variants.size();
      SearchConfig run = variants[v].cfg;
      run.seed = derive_seed(settings.seed, i);
      run.record_trace = false;
      const SearchResult result = marco_search(instances[i], *variants[v].policy, run);
      rows[v].objectives[i] = result.best_objective;
      rows[v].wall_seconds[i] = result.wall_seconds;
      if (result.problem != Problem::Tsp) rows[v].revisit_rates[i] = revisit_rate(result);
    }
  });
  for (std::size_t v = 0; v < variants.size(); ++v) {
    BenchRow& row = rows[v];
    row.mean_objective = mean_of(row.objectives);
    row.std_objective = stddev_of(row.objectives);
    row.mean_wall_seconds = mean_of(row.wall_seconds);
    row.revisit_rate = variants[v].policy->problem() == Problem::Tsp ? -1.0 : mean_of(row.revisit_rates);
  }
  return rows;
}

}  // namespace

BenchRow evaluate(const std::string& method, const std::vector<GraphInstance>& instances, const Policy& policy,
                  const SearchConfig& cfg, const BenchSettings& settings) {
  return evaluate_paired({{method, &policy, cfg}}, instances, settings).front();
}

BenchReport run_ablation(Problem problem, const std::vector<GraphInstance>& instances, const AblationModels& models,
                         const BenchSettings& settings) {
  if (!is_binary(problem)) throw std::invalid_argument("ablations cover MC and MIS");
  auto require = [&](const Policy& p, FeatureLayout layout, const char* name) {
    if (p.problem() != problem || p.kind() != PolicyKind::Improvement || p.layout() != layout) {
      throw std::invalid_argument(std::string("incompatible checkpoint for ") + name + ": expected a " +
                                  to_string(problem) + " improvement policy with feature layout '" +
                                  to_string(layout) + "'");
    }
  };
  require(models.nim, FeatureLayout::None, "NIM");
  require(models.op_nim, FeatureLayout::OpBased, "Op-NIM");
  require(models.marco, FeatureLayout::Retrieved, "MARCO");

  auto with_mode = [&](MemoryMode mode) {
    SearchConfig cfg = settings.search;
    cfg.memory_mode = mode;
    return cfg;
  };
  const std::vector<Variant> variants{{"NIM", &models.nim, with_mode(MemoryMode::None)},
                                      {"Op-NIM", &models.op_nim, with_mode(MemoryMode::OpBased)},
                                      {"MARCO-ind", &models.marco, with_mode(MemoryMode::Independent)},
                                      {"MARCO", &models.marco, with_mode(MemoryMode::Shared)}};
  BenchReport report;
  report.rows = evaluate_paired(variants, instances, settings);
  fill_gaps(problem, report.rows, settings.exact_gaps ? exact_optima(problem, instances) : std::vector<double>{});
  return report;
}

BenchReport sweep_k(const std::vector<GraphInstance>& instances, const Policy& policy, const std::vector<int>& ks,
                    const BenchSettings& settings) {
  std::vector<Variant> variants;
  for (int k : ks) {
    SearchConfig cfg = settings.search;
    cfg.k = k;
    if (policy.kind() == PolicyKind::Improvement) cfg.memory_mode = MemoryMode::Shared;
    variants.push_back({"MARCO", &policy, cfg});
  }
  BenchReport report;
  report.rows = evaluate_paired(variants, instances, settings);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    report.rows[i].parameter = "k";
    report.rows[i].value = ks[i];
  }
  fill_gaps(policy.problem(), report.rows,
            settings.exact_gaps ? exact_optima(policy.problem(), instances) : std::vector<double>{});
  return report;
}

BenchReport sweep_penalty(const TrainConfig& base, const std::vector<double>& penalties, int models_per_value,
                          const std::vector<GraphInstance>& instances, const BenchSettings& settings) {
  if (!is_binary(base.problem)) throw std::invalid_argument("penalty sweeps cover MC and MIS");
  if (models_per_value < 1) throw std::invalid_argument("models_per_value must be >= 1");
  BenchReport report;
  for (std::size_t pi = 0; pi < penalties.size(); ++pi) {
    std::vector<double> model_means;
    std::vector<double> model_revisits;
    std::vector<double> model_walls;
    BenchRow row;
    for (int m = 0; m < models_per_value; ++m) {
      TrainConfig cfg = base;
      cfg.penalty = penalties[pi];
      cfg.layout = FeatureLayout::Retrieved;
      cfg.seed = derive_seed(base.seed, 7, static_cast<std::uint64_t>(m));
      const Checkpoint ckpt = train_improvement(cfg);
      SearchConfig search = settings.search;
      search.memory_mode = MemoryMode::Shared;
      const BenchRow eval = evaluate("MARCO", instances, ckpt.policy, search, settings);
      model_means.push_back(eval.mean_objective);
      model_revisits.push_back(eval.revisit_rate);
      model_walls.push_back(eval.mean_wall_seconds);
      if (row.objectives.empty()) {
        row.objectives = eval.objectives;
      } else {
        for (std::size_t i = 0; i < row.objectives.size(); ++i) row.objectives[i] += eval.objectives[i];
      }
    }
    for (auto& o : row.objectives) o /= models_per_value;
    row.method = "MARCO";
    row.instance_set = settings.instance_set;
    row.parameter = "penalty";
    row.value = penalties[pi];
    row.runs = models_per_value * static_cast<int>(instances.size());
    row.mean_objective = mean_of(model_means);
    row.std_objective = stddev_of(model_means);
    row.revisit_rate = mean_of(model_revisits);
    row.revisit_rates = model_revisits;
    row.mean_wall_seconds = mean_of(model_walls);
    report.rows.push_back(std::move(row));
  }
  fill_gaps(base.problem, report.rows,
            settings.exact_gaps ? exact_optima(base.problem, instances) : std::vector<double>{});
  return report;
}

std::vector<GrowthRow> memory_growth_profile(const GraphInstance& g, const Policy& policy, const SearchConfig& cfg) {
  if (policy.kind() != PolicyKind::Improvement) throw std::invalid_argument("memory growth is profiled in improvement mode");
  if (cfg.memory_mode != MemoryMode::Shared && cfg.memory_mode != MemoryMode::Independent) {
    throw std::invalid_argument("memory growth needs a solution memory (shared or independent)");
  }
  std::vector<GrowthRow> rows;
  SearchConfig run = cfg;
  run.record_trace = false;
  static_cast<void>(marco_improve(g, policy, run, [&](int step, std::size_t entries, std::size_t bytes) {
    rows.push_back({step + 1, entries, bytes});
  }));
  return rows;
}

void write_growth_csv(const std::vector<GrowthRow>& rows, std::ostream& out) {
  out << "step,entries,bytes\n";
  for (const auto& r : rows) out << r.step << ',' << r.entries << ',' << r.bytes << '\n';
}

}  // namespace marco
