#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "marco/checkpoint.hpp"
#include "marco/memory.hpp"
#include "marco/policy.hpp"

namespace marco {

struct TrainConfig {
  Problem problem = Problem::MaxCut;
  /// Third node feature of improvement policies (ignored for TSP).
  FeatureLayout layout = FeatureLayout::Retrieved;
  EncoderConfig encoder = EncoderConfig::paper(Problem::MaxCut);
  int n_min = 50;
  int n_max = 200;
  /// ER edge probability is drawn uniformly from [edge_p_min, edge_p_max].
  double edge_p_min = 0.15;
  double edge_p_max = 0.15;
  double lr = 1e-4;
  int batch_size = 128;
  int episodes_per_epoch = 1000;
  int epochs = 100;
  double penalty = 1.0;
  double gamma = 0.95;
  int episode_length = 20;
  /// Retrieval neighbours used while training.
  int k = 20;
  /// Constructive phase 2: memory-aware constructions per instance.
  int constructions = 5;
  int phase2_epochs = 50;
  int retrieval_frequency = 10;
  int start_cap = 100;
  double clip = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  /// Subtract the batch-mean return at each step (improvement only).
  bool return_baseline = false;
  std::size_t capacity = kDefaultMemoryCapacity;
  std::uint64_t seed = 0;

  /// Episodes of improvement training or constructive phase 1.
  std::uint64_t total_episodes() const {
    return static_cast<std::uint64_t>(epochs) * static_cast<std::uint64_t>(episodes_per_epoch);
  }
  std::uint64_t phase2_episodes() const {
    return static_cast<std::uint64_t>(phase2_epochs) * static_cast<std::uint64_t>(episodes_per_epoch);
  }
  /// Every violated constraint, empty when valid.
  std::vector<std::string> problems() const;
  void validate() const;

  static TrainConfig paper(Problem problem);
  static TrainConfig desk(Problem problem);
};

struct EpisodeMetrics {
  std::uint64_t episode = 0;
  double mean_reward = 0.0;
  double revisit_rate = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
  bool applied = false;
};

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const EpisodeMetrics& m);

/// r = max(f_t - f_best, 0) minus w_p when the solution was seen before.
double improvement_reward(double f_t, double f_best, bool revisited, double penalty);
/// (-tour_len - baseline) - w_p * avg_sim.
double constructive_reward(double tour_len, double baseline, double avg_sim, double penalty);
double pomo_baseline(std::span<const double> rewards);
std::vector<double> discounted_returns(std::span<const double> rewards, double gamma);

double global_grad_norm(const ParameterSet& params);
/// Scales trainable gradients so their global norm is at most `max_norm`;
/// returns the norm before clipping.
double clip_grad_norm(ParameterSet& params, double max_norm);

/// Adam with decoupled weight decay; frozen parameters are left untouched.
class AdamW {
 public:
  AdamW(ParameterSet& params, double beta1, double beta2, double eps, double weight_decay);
  void step(double lr);
  OptimizerState state() const;
  void load_state(const OptimizerState& state);
  std::uint64_t steps() const { return t_; }

 private:
  ParameterSet* params_;
  double beta1_, beta2_, eps_, weight_decay_;
  std::uint64_t t_ = 0;
  std::vector<ad::Matrix> m_;
  std::vector<ad::Matrix> v_;
};

struct UpdateResult {
  double grad_norm = 0.0;
  bool applied = false;
};

/// One optimizer step on gradients already accumulated in `params`:
/// a non-finite loss or gradient skips the step, an all-zero gradient leaves
/// the parameters unchanged, otherwise the global norm is clipped to `clip`.
/// Gradients are cleared afterwards.
UpdateResult reinforce_update(ParameterSet& params, AdamW& optimizer, double loss, double lr, double clip);

struct TrainHooks {
  std::function<void(const EpisodeMetrics&)> on_episode;
  /// Called every `checkpoint_every` episodes with the current state.
  std::function<void(const Checkpoint&)> on_checkpoint;
  int checkpoint_every = 0;
};

/// REINFORCE over lock-step improvement episodes. `resume` continues a
/// previous run from its episode counter and optimizer state.
Checkpoint train_improvement(const TrainConfig& cfg, const TrainHooks& hooks = {}, const Checkpoint* resume = nullptr);

/// Phase 1 (cfg-selected by `phase`): multi-start REINFORCE with a shared
/// baseline and no memory. Phase 2: backbone frozen, only the memory
/// projection trains; each instance gets a greedy rollout with empty memory
/// and then `constructions` sampled, memory-aware constructions penalized by
/// their top-k similarity to stored tours. Phase 2 requires `start`.
Checkpoint train_constructive(const TrainConfig& cfg, int phase, const TrainHooks& hooks = {},
                              const Checkpoint* start = nullptr);

}  // namespace marco
