#include "commands.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "marco/baselines.hpp"
#include "marco/bench.hpp"
#include "marco/checkpoint.hpp"
#include "marco/instances.hpp"
#include "run_config.hpp"

namespace marco::cli {

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string problem = "mc";
  std::string profile = "desk";
  std::string config_file;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool needs_problem) {
  auto* p = cmd->add_option("--problem", o.problem, "Problem: mc, mis or tsp");
  if (needs_problem) p->required();
  cmd->add_option("--profile", o.profile, "Default settings: desk or paper")->capture_default_str();
  cmd->add_option("--config", o.config_file, "Config file with 'key = value' lines");
  cmd->add_option("--set", o.overrides, "Override a config key (key=value), repeatable");
}

Problem parse_problem(const std::string& name) {
  try {
    return problem_from_string(name);
  } catch (const std::exception&) {
    throw UsageError("unknown problem '" + name + "' (expected mc, mis or tsp)");
  }
}

RunConfig load_run_config(const CommonOptions& o, Problem problem, const std::vector<std::string>& extra) {
  RunConfig cfg = RunConfig::defaults(problem, profile_from_string(o.profile));
  std::vector<std::pair<std::string, std::string>> file_entries;
  if (!o.config_file.empty()) file_entries = read_config_file(o.config_file);
  std::vector<std::string> overrides = extra;
  overrides.insert(overrides.end(), o.overrides.begin(), o.overrides.end());
  apply_settings(cfg, file_entries, overrides);
  return cfg;
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

template <typename Fn>
void write_file(const fs::path& path, Fn&& fn) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  fn(out);
}

Checkpoint require_checkpoint(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " needs --checkpoint");
  if (!fs::exists(path)) throw UsageError("checkpoint '" + path + "' does not exist");
  try {
    return load_checkpoint(path);
  } catch (const CheckpointError& e) {
    throw UsageError(e.what());
  }
}

std::vector<fs::path> expand_instances(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(in)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") found.push_back(entry.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::exists(in)) {
      files.emplace_back(in);
    } else {
      throw UsageError("instance path '" + in + "' does not exist");
    }
  }
  if (files.empty()) throw UsageError("no instance files given");
  return files;
}

std::vector<GraphInstance> load_all(const std::vector<fs::path>& files) {
  std::vector<GraphInstance> out;
  for (const auto& f : files) out.push_back(load_instance(f));
  return out;
}

// --- generate ---------------------------------------------------------------

struct GenerateOptions {
  CommonOptions common;
  int n = 50;
  double p = 0.15;
  int count = 1;
  std::uint64_t seed = 0;
  std::string out_dir = "instances";
};

int cmd_generate(const GenerateOptions& o, std::ostream& out) {
  const Problem problem = parse_problem(o.common.problem);
  if (o.n < 1 || (problem == Problem::Tsp && o.n < 2)) throw UsageError("--n too small");
  if (!(o.p >= 0.0 && o.p <= 1.0)) throw UsageError("--p must lie in [0, 1]");
  if (o.count < 1) throw UsageError("--count must be >= 1");
  fs::create_directories(o.out_dir);
  nlohmann::json manifest;
  manifest["problem"] = to_string(problem);
  manifest["n"] = o.n;
  if (problem != Problem::Tsp) manifest["p"] = o.p;
  manifest["seed"] = o.seed;
  manifest["instances"] = nlohmann::json::array();
  for (int i = 0; i < o.count; ++i) {
    const std::uint64_t seed = derive_seed(o.seed, static_cast<std::uint64_t>(i));
    const GraphInstance g = problem == Problem::Tsp ? gen_tsp_uniform(o.n, seed) : gen_erdos_renyi(o.n, o.p, seed);
    std::ostringstream name;
    name << to_string(problem) << "_n" << o.n << "_" << std::setw(4) << std::setfill('0') << i << ".txt";
    save_instance(g, fs::path(o.out_dir) / name.str());
    manifest["instances"].push_back({{"file", name.str()}, {"seed", seed}});
  }
  write_json(manifest, fs::path(o.out_dir) / "manifest.json");
  out << "wrote " << o.count << " instances to " << o.out_dir << '\n';
  return 0;
}

// --- train ------------------------------------------------------------------

struct TrainOptions {
  CommonOptions common;
  std::string layout;
  int phase = 1;
  std::string out = "model.ckpt";
  std::string metrics = "metrics.csv";
  std::string resume;
  std::string init;
  int checkpoint_every = 50;
};

int cmd_train(const TrainOptions& o, std::ostream& out) {
  const Problem problem = parse_problem(o.common.problem);
  std::vector<std::string> extra;
  if (!o.layout.empty()) extra.push_back("train.layout=" + o.layout);
  RunConfig cfg = load_run_config(o.common, problem, extra);
  echo_config(cfg, out);
  if (o.phase != 1 && o.phase != 2) throw UsageError("--phase must be 1 or 2");
  if (problem != Problem::Tsp && o.phase != 1) throw UsageError("--phase 2 applies to tsp only");

  std::optional<Checkpoint> start;
  if (!o.resume.empty()) start = require_checkpoint(o.resume, "--resume");
  if (!o.init.empty()) {
    if (start) throw UsageError("--resume and --init are exclusive");
    start = require_checkpoint(o.init, "--init");
    if (start->phase != 1) throw UsageError("--init expects a phase-1 checkpoint");
  }
  if (problem == Problem::Tsp && o.phase == 2 && !start) {
    throw UsageError("phase 2 needs a phase-1 checkpoint (--init or --resume)");
  }

  const bool append = !o.resume.empty() && fs::exists(o.metrics);
  std::ofstream metrics(o.metrics, append ? std::ios::app : std::ios::trunc);
  if (!metrics) throw std::runtime_error("cannot write '" + o.metrics + "'");
  if (!append) write_metrics_header(metrics);

  TrainHooks hooks;
  hooks.on_episode = [&](const EpisodeMetrics& m) {
    write_metrics_row(metrics, m);
    metrics.flush();
    if (!m.applied) out << "episode " << m.episode << ": update skipped (loss " << m.loss << ")\n";
  };
  hooks.checkpoint_every = o.checkpoint_every;
  hooks.on_checkpoint = [&](const Checkpoint& c) { save_checkpoint(c, o.out); };

  const Checkpoint result = problem == Problem::Tsp
                                ? train_constructive(cfg.train, o.phase, hooks, start ? &*start : nullptr)
                                : train_improvement(cfg.train, hooks, start ? &*start : nullptr);
  save_checkpoint(result, o.out);
  out << "trained " << result.episode << " episodes; checkpoint " << o.out << ", metrics " << o.metrics << '\n';
  return 0;
}

// --- solve ------------------------------------------------------------------

struct SolveOptions {
  CommonOptions common;
  std::string method = "marco";
  std::string checkpoint;
  std::vector<std::string> instances;
  std::string out_dir = "results";
  int threads = 0;
  int k = 0;
  std::string max_steps;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool trace = false;
  bool dump_memory = false;
};

nlohmann::json binary_json(Problem problem, const BinarySolution& s, double value, double seconds) {
  std::string bits;
  for (auto b : s.bits) bits.push_back(b ? '1' : '0');
  return {{"problem", to_string(problem)}, {"best_solution", bits}, {"best_objective", value},
          {"wall_seconds", seconds}};
}

int cmd_solve(const SolveOptions& o, std::ostream& out) {
  const std::string& m = o.method;
  const bool neural = m == "marco" || m == "marco-ind" || m == "nim" || m == "op-nim";
  if (!neural && m != "greedy" && m != "nn" && m != "exact") throw UsageError("unknown method '" + m + "'");

  std::optional<Checkpoint> ckpt;
  if (neural) ckpt = require_checkpoint(o.checkpoint, "neural methods");
  const Problem problem = ckpt ? ckpt->policy.problem() : parse_problem(o.common.problem);
  if (ckpt && !o.common.problem.empty() && parse_problem(o.common.problem) != problem) {
    throw UsageError("checkpoint is for " + to_string(problem) + ", not " + o.common.problem);
  }
  if (m == "greedy" && problem != Problem::MaxIndependentSet) throw UsageError("--method greedy applies to mis");
  if (m == "nn" && problem != Problem::Tsp) throw UsageError("--method nn applies to tsp");
  if (problem == Problem::Tsp && (m == "nim" || m == "op-nim")) throw UsageError("--method " + m + " applies to mc/mis");

  std::vector<std::string> extra;
  if (o.threads > 0) extra.push_back("search.threads=" + std::to_string(o.threads));
  if (o.k > 0) extra.push_back("search.k=" + std::to_string(o.k));
  if (!o.max_steps.empty() && o.max_steps != "2n") extra.push_back("search.max_steps=" + o.max_steps);
  if (o.max_steps == "2n") extra.push_back("search.max_steps=-1");
  if (o.seed_set) extra.push_back("search.seed=" + std::to_string(o.seed));
  if (m == "nim") extra.push_back("search.memory_mode=none");
  if (m == "op-nim") extra.push_back("search.memory_mode=op");
  if (m == "marco-ind") extra.push_back("search.memory_mode=independent");
  if (m == "marco") extra.push_back("search.memory_mode=shared");
  RunConfig cfg = load_run_config(o.common, problem, extra);
  echo_config(cfg, out);
  if (ckpt && cfg.search.memory_mode != MemoryMode::None &&
      ckpt->policy.layout() != layout_for(cfg.search.memory_mode) && problem != Problem::Tsp) {
    throw UsageError("checkpoint feature layout '" + to_string(ckpt->policy.layout()) + "' does not fit method '" + m + "'");
  }

  fs::create_directories(o.out_dir);
  const auto files = expand_instances(o.instances);
  for (std::size_t i = 0; i < files.size(); ++i) {
    const GraphInstance g = load_instance(files[i]);
    const auto start = std::chrono::steady_clock::now();
    nlohmann::json result;
    if (neural) {
      SearchConfig search = cfg.search;
      search.seed = derive_seed(cfg.search.seed, i);
      search.dump_memory = o.dump_memory;
      const SearchResult r = marco_search(g, ckpt->policy, search);
      result = to_json(r);
      if (o.trace) {
        write_file(fs::path(o.out_dir) / (files[i].stem().string() + "_trace.csv"),
                   [&](std::ostream& f) { write_trace_csv(r, f); });
      }
      if (o.dump_memory) {
        write_file(fs::path(o.out_dir) / (files[i].stem().string() + "_memory.txt"),
                   [&](std::ostream& f) { f << r.memory_dump; });
      }
    } else if (m == "greedy") {
      const BinarySolution s = greedy_mis(g);
      result = binary_json(problem, s, mis_objective(g, s), 0.0);
    } else if (m == "nn") {
      const Tour t = nearest_neighbor_tsp_best(g);
      result = {{"problem", "tsp"}, {"best_tour", t.perm()}, {"best_objective", tsp_tour_length(g, t)}};
    } else if (problem == Problem::Tsp) {
      const ExactTour e = brute_force_tsp(g);
      result = {{"problem", "tsp"}, {"best_tour", e.tour.perm()}, {"best_objective", e.length}};
    } else {
      const ExactBinary e = problem == Problem::MaxCut ? brute_force_mc(g) : brute_force_mis(g);
      result = binary_json(problem, e.solution, e.value, 0.0);
    }
    if (!neural) result["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result["method"] = m;
    result["instance"] = files[i].string();
    const fs::path path = fs::path(o.out_dir) / (files[i].stem().string() + "_" + m + ".json");
    write_json(result, path);
    out << files[i].string() << ": " << m << " objective " << result["best_objective"].get<double>() << '\n';
  }
  return 0;
}

// --- ablate / bench ---------------------------------------------------------

struct AblateOptions {
  CommonOptions common;
  std::string nim, op_nim, marco;
  std::vector<std::string> instances;
  std::string out = "ablation";
  std::string set_name = "bench";
};

void write_report(const BenchReport& report, const std::string& prefix) {
  write_file(prefix + ".csv", [&](std::ostream& f) { report.write_csv(f); });
  write_json(report.to_json(), prefix + ".json");
}

int cmd_ablate(const AblateOptions& o, std::ostream& out) {
  const Problem problem = parse_problem(o.common.problem);
  RunConfig cfg = load_run_config(o.common, problem, {});
  echo_config(cfg, out);
  AblationModels models{require_checkpoint(o.nim, "--nim").policy, require_checkpoint(o.op_nim, "--op-nim").policy,
                        require_checkpoint(o.marco, "--marco").policy};
  BenchSettings settings;
  settings.search = cfg.search;
  settings.seed = cfg.search.seed;
  settings.instance_set = o.set_name;
  BenchReport report;
  try {
    report = run_ablation(problem, load_all(expand_instances(o.instances)), models, settings);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  write_report(report, o.out);
  report.write_csv(out);
  return 0;
}

struct BenchOptions {
  CommonOptions common;
  std::string sweep = "k";
  std::string values;
  std::string checkpoint;
  std::vector<std::string> instances;
  std::string out = "bench";
  std::string set_name = "bench";
};

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<T>(v));
    } catch (const std::exception&) {
      throw UsageError("bad list element '" + item + "' in --values");
    }
  }
  if (out.empty()) throw UsageError("--values must list at least one value");
  return out;
}

int cmd_bench(const BenchOptions& o, std::ostream& out) {
  const Problem problem = parse_problem(o.common.problem);
  RunConfig cfg = load_run_config(o.common, problem, {});
  echo_config(cfg, out);
  BenchSettings settings;
  settings.search = cfg.search;
  settings.seed = cfg.search.seed;
  settings.instance_set = o.set_name;
  if (o.sweep == "k") {
    const Checkpoint ckpt = require_checkpoint(o.checkpoint, "--sweep k");
    const auto ks = parse_list<int>(o.values.empty() ? "1,2,5,10,20" : o.values);
    write_report(sweep_k(load_all(expand_instances(o.instances)), ckpt.policy, ks, settings), o.out);
  } else if (o.sweep == "penalty") {
    if (!is_binary(problem)) throw UsageError("--sweep penalty applies to mc/mis");
    const auto penalties = parse_list<double>(o.values.empty() ? "0,0.01,0.1,1,10" : o.values);
    write_report(sweep_penalty(cfg.train, penalties, cfg.bench_models, load_all(expand_instances(o.instances)), settings),
                 o.out);
  } else if (o.sweep == "growth") {
    const Checkpoint ckpt = require_checkpoint(o.checkpoint, "--sweep growth");
    const auto files = expand_instances(o.instances);
    SearchConfig search = cfg.search;
    if (search.memory_mode != MemoryMode::Independent) search.memory_mode = MemoryMode::Shared;
    const auto rows = memory_growth_profile(load_instance(files.front()), ckpt.policy, search);
    write_file(o.out + ".csv", [&](std::ostream& f) { write_growth_csv(rows, f); });
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) j.push_back({{"step", r.step}, {"entries", r.entries}, {"bytes", r.bytes}});
    write_json(j, o.out + ".json");
  } else {
    throw UsageError("unknown sweep '" + o.sweep + "' (expected k, penalty or growth)");
  }
  out << "wrote " << o.out << ".csv and " << o.out << ".json\n";
  return 0;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Memory-augmented neural search for MaxCut, MIS and TSP"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "marco 0.1.0");

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Write random instances and a manifest");
  add_common(g, gen.common, true);
  g->add_option("--n", gen.n, "Node count")->capture_default_str();
  g->add_option("--p", gen.p, "ER edge probability (mc/mis)")->capture_default_str();
  g->add_option("--count", gen.count, "Number of instances")->capture_default_str();
  g->add_option("--seed", gen.seed, "Root seed")->capture_default_str();
  g->add_option("--out", gen.out_dir, "Output directory")->capture_default_str();

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train a policy and write a checkpoint plus metrics CSV");
  add_common(t, tr.common, true);
  t->add_option("--layout", tr.layout, "Improvement feature layout: none, op or retrieved");
  t->add_option("--phase", tr.phase, "Constructive training phase (1 or 2)")->capture_default_str();
  t->add_option("--out", tr.out, "Checkpoint path")->capture_default_str();
  t->add_option("--metrics", tr.metrics, "Metrics CSV path")->capture_default_str();
  t->add_option("--resume", tr.resume, "Continue from a checkpoint of the same phase");
  t->add_option("--init", tr.init, "Phase-1 checkpoint to start phase 2 from");
  t->add_option("--checkpoint-every", tr.checkpoint_every, "Episodes between checkpoint writes")->capture_default_str();

  SolveOptions so;
  auto* s = app.add_subcommand("solve", "Solve instances and write one JSON result each");
  add_common(s, so.common, false);
  so.common.problem.clear();
  s->add_option("--method", so.method, "marco, marco-ind, nim, op-nim, greedy, nn or exact")->capture_default_str();
  s->add_option("--checkpoint", so.checkpoint, "Checkpoint for neural methods");
  s->add_option("--instance", so.instances, "Instance files or directories")->required();
  s->add_option("--out", so.out_dir, "Output directory")->capture_default_str();
  s->add_option("--threads", so.threads, "Search threads");
  s->add_option("--k", so.k, "Retrieval neighbours");
  s->add_option("--max-steps", so.max_steps, "Improvement steps, a number or 2n");
  auto* seed_opt = s->add_option("--seed", so.seed, "Root seed");
  s->add_flag("--trace", so.trace, "Also write a per-step trace CSV");
  s->add_flag("--dump-memory", so.dump_memory, "Also write the final memory contents");

  AblateOptions ab;
  auto* a = app.add_subcommand("ablate", "Run NIM, Op-NIM, MARCO-ind and MARCO on an instance set");
  add_common(a, ab.common, true);
  a->add_option("--nim", ab.nim, "NIM checkpoint")->required();
  a->add_option("--op-nim", ab.op_nim, "Op-NIM checkpoint")->required();
  a->add_option("--marco", ab.marco, "MARCO checkpoint")->required();
  a->add_option("--instances", ab.instances, "Instance files or directories")->required();
  a->add_option("--out", ab.out, "Report path prefix")->capture_default_str();
  a->add_option("--set-name", ab.set_name, "Instance-set label")->capture_default_str();

  BenchOptions be;
  auto* b = app.add_subcommand("bench", "Parameter sweeps and memory profiling");
  add_common(b, be.common, true);
  b->add_option("--sweep", be.sweep, "k, penalty or growth")->capture_default_str();
  b->add_option("--values", be.values, "Comma-separated sweep values");
  b->add_option("--checkpoint", be.checkpoint, "Checkpoint (k and growth sweeps)");
  b->add_option("--instances", be.instances, "Instance files or directories")->required();
  b->add_option("--out", be.out, "Report path prefix")->capture_default_str();
  b->add_option("--set-name", be.set_name, "Instance-set label")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    so.seed_set = seed_opt->count() > 0;
    if (g->parsed()) return cmd_generate(gen, out);
    if (t->parsed()) return cmd_train(tr, out);
    if (s->parsed()) return cmd_solve(so, out);
    if (a->parsed()) return cmd_ablate(ab, out);
    if (b->parsed()) return cmd_bench(be, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace marco::cli
