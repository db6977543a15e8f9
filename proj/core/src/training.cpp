#include "marco/training.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "marco/baselines.hpp"
#include "marco/instances.hpp"
#include "marco/search.hpp"

namespace marco {

using ad::Matrix;
using ad::Tape;
using ad::Var;

std::vector<std::string> TrainConfig::problems() const {
  std::vector<std::string> out;
  auto check = [&](bool ok, const std::string& message) {
    if (!ok) out.push_back(message);
  };
  try {
    encoder.validate();
  } catch (const std::exception& e) {
    out.push_back(e.what());
  }
  check(n_min >= (problem == Problem::Tsp ? 2 : 1), "n_min too small");
  check(n_max >= n_min, "n_max must be >= n_min");
  check(edge_p_min >= 0.0 && edge_p_max <= 1.0 && edge_p_min <= edge_p_max, "edge_p range must lie in [0, 1]");
  check(lr > 0.0, "lr must be positive");
  check(batch_size >= 1, "batch_size must be >= 1");
  check(episodes_per_epoch >= 1, "episodes_per_epoch must be >= 1");
  check(epochs >= 0, "epochs must be >= 0");
  check(phase2_epochs >= 0, "phase2_epochs must be >= 0");
  check(penalty >= 0.0, "penalty must be >= 0");
  check(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  check(episode_length >= 1, "episode_length must be >= 1");
  check(k >= 1, "k must be >= 1");
  check(constructions >= 1, "constructions must be >= 1");
  check(retrieval_frequency >= 1, "retrieval_frequency must be >= 1");
  check(start_cap >= 1, "start_cap must be >= 1");
  check(clip > 0.0, "clip must be positive");
  check(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "betas must lie in [0, 1)");
  check(eps > 0.0, "eps must be positive");
  check(weight_decay >= 0.0, "weight_decay must be >= 0");
  check(capacity >= 1, "capacity must be >= 1");
  return out;
}

void TrainConfig::validate() const {
  const auto errors = problems();
  if (errors.empty()) return;
  std::ostringstream msg;
  msg << "invalid training config:";
  for (const auto& e : errors) msg << "\n  " << e;
  throw std::invalid_argument(msg.str());
}

TrainConfig TrainConfig::paper(Problem problem) {
  TrainConfig cfg;
  cfg.problem = problem;
  cfg.encoder = EncoderConfig::paper(problem);
  switch (problem) {
    case Problem::MaxCut:
      cfg.penalty = 1.0;
      break;
    case Problem::MaxIndependentSet:
      cfg.penalty = 0.01;
      break;
    case Problem::Tsp:
      cfg.n_min = 20;
      cfg.n_max = 100;
      cfg.penalty = 0.1;
      cfg.epochs = 200;
      cfg.phase2_epochs = 50;
      cfg.k = 3;
      cfg.retrieval_frequency = 10;
      break;
  }
  return cfg;
}

TrainConfig TrainConfig::desk(Problem problem) {
  TrainConfig cfg = paper(problem);
  cfg.encoder = EncoderConfig::desk(problem);
  cfg.lr = 1e-3;
  cfg.batch_size = 16;
  cfg.episodes_per_epoch = 50;
  cfg.return_baseline = true;
  cfg.capacity = 10000;
  if (problem == Problem::Tsp) {
    cfg.n_min = 5;
    cfg.n_max = 15;
    cfg.epochs = 40;
    cfg.phase2_epochs = 4;
    // At n <= 15 a penalty of 0.1 is small next to tour-length spread and phase 2
    // learns to ignore memory.
    cfg.penalty = 3.0;
    cfg.retrieval_frequency = 1;
  } else {
    cfg.n_min = 15;
    cfg.n_max = 30;
    cfg.edge_p_min = 0.1;
    cfg.edge_p_max = 0.3;
    cfg.epochs = 4;
  }
  return cfg;
}

void write_metrics_header(std::ostream& out) { out << "episode,mean_reward,revisit_rate,loss\n"; }

void write_metrics_row(std::ostream& out, const EpisodeMetrics& m) {
  out << m.episode << ',' << m.mean_reward << ',' << m.revisit_rate << ',' << m.loss << '\n';
}

double improvement_reward(double f_t, double f_best, bool revisited, double penalty) {
  return std::max(f_t - f_best, 0.0) - (revisited ? penalty : 0.0);
}

double constructive_reward(double tour_len, double baseline, double avg_sim, double penalty) {
  return (-tour_len - baseline) - penalty * avg_sim;
}

double pomo_baseline(std::span<const double> rewards) {
  if (rewards.empty()) throw std::invalid_argument("pomo_baseline: no rewards");
  return std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
}

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("discounted_returns: gamma must lie in (0, 1]");
  std::vector<double> out(rewards.size());
  double running = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    running = rewards[i] + gamma * running;
    out[i] = running;
  }
  return out;
}

double global_grad_norm(const ParameterSet& params) {
  double total = 0.0;
  for (const auto& p : params.all()) {
    if (p.trainable && p.grad.size() != 0) total += p.grad.squaredNorm();
  }
  return std::sqrt(total);
}

double clip_grad_norm(ParameterSet& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (auto& p : params.all()) {
      if (p.trainable && p.grad.size() != 0) p.grad *= factor;
    }
  }
  return norm;
}

AdamW::AdamW(ParameterSet& params, double beta1, double beta2, double eps, double weight_decay)
    : params_(&params), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {
  for (const auto& p : params.all()) {
    m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  }
}

void AdamW::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  std::size_t i = 0;
  for (auto& p : params_->all()) {
    Matrix& m = m_[i];
    Matrix& v = v_[i];
    ++i;
    if (!p.trainable || p.grad.size() == 0) continue;
    p.value *= 1.0 - lr * weight_decay_;
    m = beta1_ * m + (1.0 - beta1_) * p.grad;
    v = beta2_ * v + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }
}

OptimizerState AdamW::state() const { return {t_, m_, v_}; }

void AdamW::load_state(const OptimizerState& state) {
  t_ = state.step;
  if (state.first_moment.empty()) return;
  if (state.first_moment.size() != m_.size() || state.second_moment.size() != v_.size()) {
    throw std::invalid_argument("optimizer state does not match the parameter set");
  }
  for (std::size_t i = 0; i < m_.size(); ++i) {
    if (state.first_moment[i].rows() != m_[i].rows() || state.first_moment[i].cols() != m_[i].cols()) {
      throw std::invalid_argument("optimizer state shape mismatch");
    }
  }
  m_ = state.first_moment;
  v_ = state.second_moment;
}

UpdateResult reinforce_update(ParameterSet& params, AdamW& optimizer, double loss, double lr, double clip) {
  UpdateResult result;
  result.grad_norm = global_grad_norm(params);
  const bool finite = std::isfinite(loss) && std::isfinite(result.grad_norm);
  if (finite && result.grad_norm > 0.0) {
    clip_grad_norm(params, clip);
    optimizer.step(lr);
    result.applied = true;
  }
  params.zero_grad();
  return result;
}

namespace {

std::vector<std::uint8_t> all_allowed(int n) { return std::vector<std::uint8_t>(static_cast<std::size_t>(n), 1); }

std::vector<std::uint8_t> unvisited_mask(const PartialTour& partial) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(partial.n()));
  for (int j = 0; j < partial.n(); ++j) mask[static_cast<std::size_t>(j)] = partial.visited(j) ? 0 : 1;
  return mask;
}

int sample_index(const Matrix& row, std::span<const std::uint8_t> mask, Rng& rng, ActionSelection mode) {
  return select_action(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), mask, mode, rng);
}

// One improvement lane of an episode, recorded for the replay pass.
struct ImprovementLane {
  GraphInstance graph = GraphInstance::sparse(1, {});
  std::vector<Matrix> edge_features;
  std::vector<Matrix> node_features;
  std::vector<int> actions;
  std::vector<double> rewards;
  int revisits = 0;
};

ImprovementLane rollout_improvement(const Policy& policy, const TrainConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  const int n = rng.range(cfg.n_min, cfg.n_max);
  const double p = rng.uniform(cfg.edge_p_min, cfg.edge_p_max);
  ImprovementLane lane;
  lane.graph = gen_erdos_renyi(n, p, rng.next());
  const GraphInstance& g = lane.graph;
  lane.edge_features = policy.edge_features(g);

  BinarySolution current = initial_solution(g, cfg.problem, rng);
  BinarySolution best = current;
  double f = binary_objective(g, current, cfg.problem);
  double f_best = f;
  NodeMemory memory(n, cfg.capacity);
  OpMemory ops(n);
  const std::vector<double> zeros(static_cast<std::size_t>(n), 0.0);
  for (int t = 0; t < cfg.episode_length; ++t) {
    const auto id = memory.store(current);
    std::vector<double> feature;
    if (policy.layout() == FeatureLayout::Retrieved) feature = memory.retrieve(cfg.k, current).node_values;
    if (policy.layout() == FeatureLayout::OpBased) feature = ops.features(t);
    Matrix x = improvement_node_features(current, best, feature.empty() ? zeros : feature);
    const Eigen::RowVectorXd logits = policy.improvement_logits(x, lane.edge_features);
    const int a = select_action(std::span<const double>(logits.data(), static_cast<std::size_t>(n)), {},
                                ActionSelection::Sample, rng);
    memory.set_action(id, a);
    ops.record(a, t);
    f += apply_flip_in_place(g, current, a, cfg.problem);
    const bool revisited = memory.contains_exact(current);
    lane.revisits += revisited ? 1 : 0;
    lane.rewards.push_back(improvement_reward(f, f_best, revisited, cfg.penalty));
    if (f > f_best) {
      f_best = f;
      best = current;
    }
    lane.node_features.push_back(std::move(x));
    lane.actions.push_back(a);
  }
  return lane;
}

struct Trainer {
  Policy policy;
  AdamW optimizer;
  std::uint64_t episode;

  Trainer(Policy p, const TrainConfig& cfg, std::uint64_t start_episode)
      : policy(std::move(p)),
        optimizer(policy.params(), cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay),
        episode(start_episode) {}

  Checkpoint snapshot(int phase) const { return Checkpoint{policy, episode, phase, optimizer.state()}; }
};

void finish_episode(Trainer& trainer, const TrainConfig& cfg, const TrainHooks& hooks, EpisodeMetrics metrics,
                    int phase) {
  const UpdateResult update = reinforce_update(trainer.policy.params(), trainer.optimizer, metrics.loss, cfg.lr, cfg.clip);
  metrics.grad_norm = update.grad_norm;
  metrics.applied = update.applied;
  ++trainer.episode;
  metrics.episode = trainer.episode;
  if (hooks.on_episode) hooks.on_episode(metrics);
  if (hooks.on_checkpoint && hooks.checkpoint_every > 0 &&
      trainer.episode % static_cast<std::uint64_t>(hooks.checkpoint_every) == 0) {
    hooks.on_checkpoint(trainer.snapshot(phase));
  }
}

}  // namespace

Checkpoint train_improvement(const TrainConfig& cfg, const TrainHooks& hooks, const Checkpoint* resume) {
  cfg.validate();
  if (!is_binary(cfg.problem)) throw std::invalid_argument("train_improvement is for MC/MIS");
  Policy initial = resume != nullptr ? resume->policy
                                     : Policy::improvement(cfg.problem, cfg.encoder, cfg.layout, derive_seed(cfg.seed, 0));
  if (initial.kind() != PolicyKind::Improvement || initial.problem() != cfg.problem) {
    throw std::invalid_argument("resume checkpoint does not match the training problem");
  }
  Trainer trainer(std::move(initial), cfg, resume != nullptr ? resume->episode : 0);
  if (resume != nullptr) trainer.optimizer.load_state(resume->optimizer);
  trainer.policy.params().zero_grad();

  const int batch = cfg.batch_size;
  const int steps = cfg.episode_length;
  while (trainer.episode < cfg.total_episodes()) {
    const std::uint64_t episode_seed = derive_seed(cfg.seed, 1, trainer.episode);
    std::vector<ImprovementLane> lanes;
    lanes.reserve(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) {
      lanes.push_back(rollout_improvement(trainer.policy, cfg, derive_seed(episode_seed, static_cast<std::uint64_t>(b))));
    }

    std::vector<std::vector<double>> returns;
    for (const auto& lane : lanes) returns.push_back(discounted_returns(lane.rewards, cfg.gamma));
    std::vector<double> step_mean(static_cast<std::size_t>(steps), 0.0);
    if (cfg.return_baseline) {
      for (const auto& g : returns) {
        for (int t = 0; t < steps; ++t) step_mean[static_cast<std::size_t>(t)] += g[static_cast<std::size_t>(t)] / batch;
      }
    }

    EpisodeMetrics metrics;
    double reward_sum = 0.0;
    int revisits = 0;
    for (int b = 0; b < batch; ++b) {
      const auto& lane = lanes[static_cast<std::size_t>(b)];
      revisits += lane.revisits;
      reward_sum += std::accumulate(lane.rewards.begin(), lane.rewards.end(), 0.0);
      const auto allowed = all_allowed(lane.graph.n());
      for (int t = 0; t < steps; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        const double advantage = returns[static_cast<std::size_t>(b)][ts] - step_mean[ts];
        if (advantage == 0.0) continue;
        Tape tape;
        Var logits = trainer.policy.improvement_logits(tape, lane.node_features[ts], lane.edge_features);
        Var log_prob = pick(log_softmax_masked(logits, allowed), 0, lane.actions[ts]);
        const double weight = -advantage / batch;
        metrics.loss += weight * log_prob.scalar();
        tape.backward(log_prob, weight);
      }
    }
    metrics.mean_reward = reward_sum / (static_cast<double>(batch) * steps);
    metrics.revisit_rate = static_cast<double>(revisits) / (static_cast<double>(batch) * steps);
    finish_episode(trainer, cfg, hooks, metrics, 0);
  }
  return trainer.snapshot(0);
}

namespace {

struct Rollout {
  Tour tour;
  double length = 0.0;
  Var log_prob_sum;
};

// Builds one tour from `start`; log-probabilities are kept on `tape` when `keep_graph` is set.
Rollout construct_tour(const Policy& policy, Tape& tape, const DecoderContext& ctx, const GraphInstance& g, int start,
                       ActionSelection mode, Rng& rng, const EdgeMemory* memory, const TrainConfig& cfg,
                       bool keep_graph) {
  const int n = g.n();
  PartialTour partial(n, start);
  std::vector<Var> log_probs;
  Matrix features;
  bool has_features = false;
  const std::size_t mark = tape.size();
  while (!partial.complete()) {
    if (memory != nullptr && !memory->empty() && partial.length() % cfg.retrieval_frequency == 0) {
      features = memory->retrieve(cfg.k, partial.edge_set()).edge_values;
      has_features = true;
    }
    const auto mask = unvisited_mask(partial);
    Var lp = policy.decoder_log_probs(tape, ctx, partial, has_features ? &features : nullptr);
    const int next = sample_index(lp.value(), mask, rng, mode);
    if (keep_graph) {
      log_probs.push_back(pick(lp, 0, next));
    } else {
      tape.truncate(mark);
    }
    partial.push(next);
  }
  Rollout r;
  r.tour = partial.to_tour();
  r.length = tsp_tour_length(g, r.tour);
  if (keep_graph) {
    if (log_probs.empty()) {
      r.log_prob_sum = tape.constant(Matrix::Zero(1, 1));
    } else {
      const std::vector<double> ones(log_probs.size(), 1.0);
      r.log_prob_sum = linear_combination(log_probs, ones);
    }
  }
  return r;
}

std::vector<int> start_nodes(int n, int cap, Rng& rng) {
  std::vector<int> starts(static_cast<std::size_t>(n));
  std::iota(starts.begin(), starts.end(), 0);
  if (cap < n) {
    rng.shuffle(starts);
    starts.resize(static_cast<std::size_t>(cap));
  }
  return starts;
}

}  // namespace

Checkpoint train_constructive(const TrainConfig& cfg, int phase, const TrainHooks& hooks, const Checkpoint* start) {
  cfg.validate();
  if (cfg.problem != Problem::Tsp) throw std::invalid_argument("train_constructive is for TSP");
  if (phase != 1 && phase != 2) throw std::invalid_argument("phase must be 1 or 2");
  if (phase == 2 && start == nullptr) throw std::invalid_argument("phase 2 needs a phase-1 checkpoint");
  if (start != nullptr && start->policy.kind() != PolicyKind::Constructive) {
    throw std::invalid_argument("checkpoint is not a constructive policy");
  }
  if (start != nullptr && start->phase > phase) {
    throw std::invalid_argument("checkpoint is from a later phase");
  }
  Policy initial = start != nullptr ? start->policy : Policy::constructive(cfg.encoder, derive_seed(cfg.seed, 0));
  const bool resuming = start != nullptr && start->phase == phase;
  if (phase == 2) {
    initial.freeze_backbone();
  } else {
    initial.unfreeze_all();
  }
  Trainer trainer(std::move(initial), cfg, resuming ? start->episode : 0);
  if (resuming) trainer.optimizer.load_state(start->optimizer);
  trainer.policy.params().zero_grad();

  const std::uint64_t total = phase == 1 ? cfg.total_episodes() : cfg.phase2_episodes();
  const int batch = cfg.batch_size;
  while (trainer.episode < total) {
    const std::uint64_t episode_seed = derive_seed(cfg.seed, 10 + static_cast<std::uint64_t>(phase), trainer.episode);
    EpisodeMetrics metrics;
    double reward_sum = 0.0;
    double reward_count = 0.0;
    int duplicates = 0;
    for (int b = 0; b < batch; ++b) {
      Rng rng(derive_seed(episode_seed, static_cast<std::uint64_t>(b)));
      const int n = rng.range(cfg.n_min, cfg.n_max);
      const GraphInstance g = gen_tsp_uniform(n, rng.next());
      const auto starts = start_nodes(n, cfg.start_cap, rng);
      const double starts_count = static_cast<double>(starts.size());
      Tape tape;
      const DecoderContext ctx = trainer.policy.prepare_decoder(tape, g, trainer.policy.edge_features(g));

      if (phase == 1) {
        std::vector<Rollout> rollouts;
        std::vector<double> rewards;
        for (int s : starts) {
          rollouts.push_back(construct_tour(trainer.policy, tape, ctx, g, s, ActionSelection::Sample, rng, nullptr, cfg, true));
          rewards.push_back(-rollouts.back().length);
        }
        const double baseline = pomo_baseline(rewards);
        std::vector<Var> sums;
        std::vector<double> weights;
        for (std::size_t i = 0; i < rollouts.size(); ++i) {
          const double advantage = constructive_reward(rollouts[i].length, baseline, 0.0, 0.0);
          const double weight = -advantage / (batch * starts_count);
          sums.push_back(rollouts[i].log_prob_sum);
          weights.push_back(weight);
          metrics.loss += weight * rollouts[i].log_prob_sum.scalar();
          reward_sum += rewards[i];
          reward_count += 1.0;
        }
        tape.backward(linear_combination(sums, weights));
        continue;
      }

      EdgeMemory memory(n, cfg.capacity);
      std::vector<Tour> greedy;
      for (int s : starts) {
        greedy.push_back(construct_tour(trainer.policy, tape, ctx, g, s, ActionSelection::Greedy, rng, nullptr, cfg, false).tour);
      }
      for (const auto& t : greedy) memory.store(t);
      for (int it = 0; it < cfg.constructions; ++it) {
        const std::size_t mark = tape.size();
        std::vector<Rollout> rollouts;
        std::vector<double> rewards;
        for (int s : starts) {
          rollouts.push_back(construct_tour(trainer.policy, tape, ctx, g, s, ActionSelection::Sample, rng, &memory, cfg, true));
          rewards.push_back(-rollouts.back().length);
        }
        const double baseline = pomo_baseline(rewards);
        std::vector<Var> sums;
        std::vector<double> weights;
        for (std::size_t i = 0; i < rollouts.size(); ++i) {
          const double avg_sim = memory.avg_sim_topk(rollouts[i].tour, cfg.k);
          duplicates += avg_sim >= 1.0 ? 1 : 0;
          const double advantage = constructive_reward(rollouts[i].length, baseline, avg_sim, cfg.penalty);
          const double weight = -advantage / (batch * starts_count * cfg.constructions);
          sums.push_back(rollouts[i].log_prob_sum);
          weights.push_back(weight);
          metrics.loss += weight * rollouts[i].log_prob_sum.scalar();
          reward_sum += rewards[i] - cfg.penalty * avg_sim;
          reward_count += 1.0;
        }
        tape.backward(linear_combination(sums, weights));
        tape.truncate(mark);
        for (const auto& r : rollouts) memory.store(r.tour);
      }
    }
    metrics.mean_reward = reward_count > 0 ? reward_sum / reward_count : 0.0;
    metrics.revisit_rate = reward_count > 0 && phase == 2 ? duplicates / reward_count : 0.0;
    finish_episode(trainer, cfg, hooks, metrics, phase);
  }
  return trainer.snapshot(phase);
}

}  // namespace marco
