#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "marco/autodiff.hpp"
#include "marco/instances.hpp"
#include "marco/problems.hpp"

namespace marco {

/// How edge biases enter attention.
///   Modulated: (softmax(QK^T/sqrt(d_k) + E) ⊙ E) V   -- encoder form
///   Additive:  softmax(QK^T/sqrt(d_k) + E) V          -- decoder form
enum class AttentionVariant { Modulated, Additive };

std::string to_string(AttentionVariant v);
AttentionVariant attention_variant_from_string(const std::string& name);

struct EncoderConfig {
  int embed_dim = 32;
  int layers = 2;
  int heads = 4;
  int ffn_hidden = 64;
  double tanh_clip = 10.0;
  AttentionVariant encoder_attention = AttentionVariant::Modulated;

  int head_dim() const { return embed_dim / heads; }
  void validate() const;

  /// Hyperparameter-table sizes (64/3/8/512 for MC and MIS, 512/6/16/2048 for TSP).
  static EncoderConfig paper(Problem problem);
  /// Small model used for desk-scale training.
  static EncoderConfig desk(Problem problem);
  bool operator==(const EncoderConfig&) const = default;
};

/// Source of the third node feature of improvement policies.
enum class FeatureLayout { None, OpBased, Retrieved };

std::string to_string(FeatureLayout layout);
FeatureLayout feature_layout_from_string(const std::string& name);

enum class PolicyKind { Improvement, Constructive };

/// Named parameters with stable addresses.
class ParameterSet {
 public:
  ad::Parameter& add(const std::string& name, int rows, int cols);
  ad::Parameter& get(const std::string& name);
  const ad::Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  std::deque<ad::Parameter>& all() { return params_; }
  const std::deque<ad::Parameter>& all() const { return params_; }

  void zero_grad();

 private:
  std::deque<ad::Parameter> params_;
};

/// One attention head: q (m x dk), k and v (n x dk), bias (m x n). `mask`
/// (m x n, 0 or a large negative number) is added to the scores only.
ad::Var edge_aware_attention(ad::Var q, ad::Var k, ad::Var v, ad::Var bias, AttentionVariant variant,
                             const ad::Var* mask = nullptr);

/// SwiGLU feed-forward: (silu(x W1) ⊙ (x W3)) W2.
ad::Var swiglu(ad::Var x, ad::Var w1, ad::Var w3, ad::Var w2);

/// Per-instance handles for repeated decoder steps.
struct DecoderContext {
  ad::Var embeddings;  // n x d
  ad::Var graph;       // 1 x d
  ad::Var glimpse_keys;
  ad::Var glimpse_values;
  ad::Var pointer_keys;
};

/// Graph-transformer policy with either an improvement head (per-node flip
/// scores) or a pointer decoder (next city). Parameters are read-only during
/// forward passes; gradients land in Parameter::grad when the tape records.
class Policy {
 public:
  static Policy improvement(Problem problem, const EncoderConfig& cfg, FeatureLayout layout, std::uint64_t seed);
  static Policy constructive(const EncoderConfig& cfg, std::uint64_t seed);

  Problem problem() const { return problem_; }
  PolicyKind kind() const { return kind_; }
  FeatureLayout layout() const { return layout_; }
  const EncoderConfig& config() const { return cfg_; }
  int node_feature_count() const { return node_features_; }
  int edge_feature_count() const { return edge_features_; }
  int memory_hidden() const { return memory_hidden_; }

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  /// Static edge features of an instance: adjacency for binary problems,
  /// distances for TSP.
  std::vector<ad::Matrix> edge_features(const GraphInstance& g) const;

  /// Encoder: input projection followed by `layers` blocks of edge-aware
  /// multi-head attention and SwiGLU, each with residual + layer norm.
  ad::Var encode(ad::Tape& tape, const ad::Matrix& node_features, const std::vector<ad::Matrix>& edge_features) const;

  /// C * tanh(head(embeddings)) as a 1 x n row.
  ad::Var improvement_logits(ad::Tape& tape, ad::Var embeddings) const;
  ad::Var improvement_logits(ad::Tape& tape, const ad::Matrix& node_features,
                             const std::vector<ad::Matrix>& edge_features) const;
  /// No-grad convenience.
  Eigen::RowVectorXd improvement_logits(const ad::Matrix& node_features,
                                        const std::vector<ad::Matrix>& edge_features) const;

  DecoderContext prepare_decoder(ad::Tape& tape, const GraphInstance& g,
                                 const std::vector<ad::Matrix>& edge_features) const;
  /// Clipped pointer logits (1 x n) for the next node; visited nodes are not
  /// masked here, use decoder_log_probs for that. `memory_edge_features` may be
  /// null or all-zero, in which case the memory path is skipped.
  ad::Var decoder_logits(ad::Tape& tape, const DecoderContext& ctx, const PartialTour& partial,
                         const ad::Matrix* memory_edge_features) const;
  ad::Var decoder_log_probs(ad::Tape& tape, const DecoderContext& ctx, const PartialTour& partial,
                            const ad::Matrix* memory_edge_features) const;

  /// Parameters of the memory-feature projection (trained in phase 2).
  std::vector<std::string> memory_projection_names() const;
  /// Marks every parameter except the memory projection as frozen.
  void freeze_backbone();
  void unfreeze_all();

 private:
  Policy() = default;
  void init_encoder(std::uint64_t seed);

  Problem problem_ = Problem::MaxCut;
  PolicyKind kind_ = PolicyKind::Improvement;
  FeatureLayout layout_ = FeatureLayout::None;
  EncoderConfig cfg_;
  int node_features_ = 0;
  int edge_features_ = 0;
  int memory_hidden_ = 0;
  ParameterSet params_;

  friend Policy make_policy_shell(Problem, PolicyKind, FeatureLayout, const EncoderConfig&);
};

/// Empty policy with the given shape; used by checkpoint loading.
Policy make_policy_shell(Problem problem, PolicyKind kind, FeatureLayout layout, const EncoderConfig& cfg);

/// Node features for improvement policies: [bit, best-so-far bit, memory feature].
ad::Matrix improvement_node_features(const BinarySolution& current, const BinarySolution& best,
                                     const std::vector<double>& memory_feature);

/// Node features for TSP: coordinates.
ad::Matrix tsp_node_features(const GraphInstance& g);

}  // namespace marco
