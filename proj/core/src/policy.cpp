#include "marco/policy.hpp"

#include <cmath>
#include <stdexcept>

#include "marco/rng.hpp"

namespace marco {

using ad::Matrix;
using ad::Tape;
using ad::Var;

namespace {

constexpr double kMaskValue = -1e9;
constexpr int kMemoryHidden = 16;

std::string layer_name(int layer, const char* suffix) {
  return "enc" + std::to_string(layer) + "." + suffix;
}

}  // namespace

std::string to_string(AttentionVariant v) {
  return v == AttentionVariant::Modulated ? "modulated" : "additive";
}

AttentionVariant attention_variant_from_string(const std::string& name) {
  if (name == "modulated") return AttentionVariant::Modulated;
  if (name == "additive") return AttentionVariant::Additive;
  throw std::invalid_argument("unknown attention variant '" + name + "'");
}

std::string to_string(FeatureLayout layout) {
  switch (layout) {
    case FeatureLayout::None: return "none";
    case FeatureLayout::OpBased: return "op";
    case FeatureLayout::Retrieved: return "retrieved";
  }
  return "?";
}

FeatureLayout feature_layout_from_string(const std::string& name) {
  if (name == "none") return FeatureLayout::None;
  if (name == "op") return FeatureLayout::OpBased;
  if (name == "retrieved") return FeatureLayout::Retrieved;
  throw std::invalid_argument("unknown feature layout '" + name + "'");
}

void EncoderConfig::validate() const {
  if (embed_dim < 1 || layers < 0 || heads < 1 || ffn_hidden < 1) {
    throw std::invalid_argument("encoder dimensions must be positive");
  }
  if (embed_dim % heads != 0) throw std::invalid_argument("embed_dim must be divisible by heads");
  if (!(tanh_clip > 0.0)) throw std::invalid_argument("tanh_clip must be positive");
}

EncoderConfig EncoderConfig::paper(Problem problem) {
  if (problem == Problem::Tsp) return {512, 6, 16, 2048, 10.0, AttentionVariant::Modulated};
  return {64, 3, 8, 512, 10.0, AttentionVariant::Modulated};
}

EncoderConfig EncoderConfig::desk(Problem problem) {
  if (problem == Problem::Tsp) return {32, 2, 4, 64, 10.0, AttentionVariant::Modulated};
  return {32, 2, 4, 64, 10.0, AttentionVariant::Modulated};
}

// ---------------------------------------------------------------------------

ad::Parameter& ParameterSet::add(const std::string& name, int rows, int cols) {
  if (contains(name)) throw std::logic_error("duplicate parameter '" + name + "'");
  params_.push_back(ad::Parameter{name, Matrix::Zero(rows, cols), Matrix(), true});
  return params_.back();
}

ad::Parameter& ParameterSet::get(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("no parameter '" + name + "'");
}

const ad::Parameter& ParameterSet::get(const std::string& name) const {
  return const_cast<ParameterSet*>(this)->get(name);
}

bool ParameterSet::contains(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return true;
  }
  return false;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += static_cast<std::size_t>(p.value.size());
  return total;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

// ---------------------------------------------------------------------------

Var edge_aware_attention(Var q, Var k, Var v, Var bias, AttentionVariant variant, const Var* mask) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Var scores = add(ad::scale(matmul(q, transpose(k)), scale), bias);
  if (mask != nullptr) scores = add(scores, *mask);
  Var weights = softmax_rows(scores);
  if (variant == AttentionVariant::Modulated) weights = hadamard(weights, bias);
  return matmul(weights, v);
}

Var swiglu(Var x, Var w1, Var w3, Var w2) {
  return matmul(hadamard(silu(matmul(x, w1)), matmul(x, w3)), w2);
}

// ---------------------------------------------------------------------------

Policy make_policy_shell(Problem problem, PolicyKind kind, FeatureLayout layout, const EncoderConfig& cfg) {
  cfg.validate();
  if ((kind == PolicyKind::Constructive) != (problem == Problem::Tsp)) {
    throw std::invalid_argument("constructive policies are for TSP, improvement policies for MC/MIS");
  }
  Policy p;
  p.problem_ = problem;
  p.kind_ = kind;
  p.layout_ = kind == PolicyKind::Constructive ? FeatureLayout::None : layout;
  p.cfg_ = cfg;
  p.node_features_ = kind == PolicyKind::Improvement ? 3 : 2;
  p.edge_features_ = 1;
  p.memory_hidden_ = kind == PolicyKind::Constructive ? kMemoryHidden : 0;

  const int d = cfg.embed_dim;
  auto& ps = p.params_;
  ps.add("in.w", p.node_features_, d);
  ps.add("in.b", 1, d);
  for (int l = 0; l < cfg.layers; ++l) {
    for (const char* w : {"wq", "wk", "wv", "wo"}) ps.add(layer_name(l, w), d, d);
    ps.add(layer_name(l, "we"), p.edge_features_, cfg.heads);
    ps.add(layer_name(l, "ln1.g"), 1, d);
    ps.add(layer_name(l, "ln1.b"), 1, d);
    ps.add(layer_name(l, "ffn.w1"), d, cfg.ffn_hidden);
    ps.add(layer_name(l, "ffn.w3"), d, cfg.ffn_hidden);
    ps.add(layer_name(l, "ffn.w2"), cfg.ffn_hidden, d);
    ps.add(layer_name(l, "ln2.g"), 1, d);
    ps.add(layer_name(l, "ln2.b"), 1, d);
  }
  if (kind == PolicyKind::Improvement) {
    ps.add("head.w1", d, d);
    ps.add("head.b1", 1, d);
    ps.add("head.w2", d, 1);
    ps.add("head.b2", 1, 1);
  } else {
    ps.add("dec.wctx", 3 * d, d);
    for (const char* w : {"dec.wk", "dec.wv", "dec.wo", "dec.wptr"}) ps.add(w, d, d);
    ps.add("mem.w1", 1, p.memory_hidden_);
    ps.add("mem.w2", p.memory_hidden_, cfg.heads + 1);
  }
  return p;
}

void Policy::init_encoder(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& p : params_.all()) {
    const bool is_norm_gain = p.name.ends_with(".g");
    const bool is_norm_bias = p.name.find(".ln") != std::string::npos && p.name.ends_with(".b");
    if (is_norm_gain) {
      p.value.setOnes();
      continue;
    }
    if (is_norm_bias) {
      p.value.setZero();
      continue;
    }
    // uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases use the fan-in of their layer.
    double fan_in = static_cast<double>(p.value.rows());
    if (p.name == "in.b") fan_in = node_features_;
    if (p.name == "head.b1" || p.name == "head.b2") fan_in = cfg_.embed_dim;
    const double bound = 1.0 / std::sqrt(fan_in);
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value(i) = rng.uniform(-bound, bound);
  }
}

Policy Policy::improvement(Problem problem, const EncoderConfig& cfg, FeatureLayout layout, std::uint64_t seed) {
  if (!is_binary(problem)) throw std::invalid_argument("improvement policies are for MC/MIS");
  Policy p = make_policy_shell(problem, PolicyKind::Improvement, layout, cfg);
  p.init_encoder(seed);
  return p;
}

Policy Policy::constructive(const EncoderConfig& cfg, std::uint64_t seed) {
  Policy p = make_policy_shell(Problem::Tsp, PolicyKind::Constructive, FeatureLayout::None, cfg);
  p.init_encoder(seed);
  return p;
}

std::vector<Matrix> Policy::edge_features(const GraphInstance& g) const {
  if (problem_ == Problem::Tsp) return {g.distances()};
  return {g.adjacency_matrix()};
}

Var Policy::encode(Tape& tape, const Matrix& node_features, const std::vector<Matrix>& edge_features) const {
  if (node_features.cols() != node_features_) throw std::invalid_argument("encode: wrong node feature count");
  if (static_cast<int>(edge_features.size()) != edge_features_) {
    throw std::invalid_argument("encode: wrong edge feature count");
  }
  const Eigen::Index n = node_features.rows();
  for (const auto& f : edge_features) {
    if (f.rows() != n || f.cols() != n) throw std::invalid_argument("encode: edge feature shape mismatch");
  }
  if (!node_features.allFinite()) throw std::domain_error("encode: non-finite node features");

  const int dk = cfg_.head_dim();
  std::vector<Var> edges;
  for (const auto& f : edge_features) edges.push_back(tape.constant(f));

  Var h = add_row(matmul(tape.constant(node_features), tape.param(params_.get("in.w"))),
                  tape.param(params_.get("in.b")));
  for (int l = 0; l < cfg_.layers; ++l) {
    Var q = matmul(h, tape.param(params_.get(layer_name(l, "wq"))));
    Var k = matmul(h, tape.param(params_.get(layer_name(l, "wk"))));
    Var v = matmul(h, tape.param(params_.get(layer_name(l, "wv"))));
    Var we = tape.param(params_.get(layer_name(l, "we")));
    std::vector<Var> heads;
    heads.reserve(static_cast<std::size_t>(cfg_.heads));
    for (int hh = 0; hh < cfg_.heads; ++hh) {
      Var bias = edge_bias(edges, we, hh);
      heads.push_back(edge_aware_attention(slice_cols(q, hh * dk, dk), slice_cols(k, hh * dk, dk),
                                           slice_cols(v, hh * dk, dk), bias, cfg_.encoder_attention));
    }
    Var mha = matmul(concat_cols(heads), tape.param(params_.get(layer_name(l, "wo"))));
    h = layer_norm_rows(add(h, mha), tape.param(params_.get(layer_name(l, "ln1.g"))),
                        tape.param(params_.get(layer_name(l, "ln1.b"))));
    Var ff = swiglu(h, tape.param(params_.get(layer_name(l, "ffn.w1"))),
                    tape.param(params_.get(layer_name(l, "ffn.w3"))),
                    tape.param(params_.get(layer_name(l, "ffn.w2"))));
    h = layer_norm_rows(add(h, ff), tape.param(params_.get(layer_name(l, "ln2.g"))),
                        tape.param(params_.get(layer_name(l, "ln2.b"))));
  }
  if (!h.value().allFinite()) throw std::domain_error("encode: non-finite embeddings");
  return h;
}

Var Policy::improvement_logits(Tape& tape, Var embeddings) const {
  if (kind_ != PolicyKind::Improvement) throw std::logic_error("improvement_logits on a constructive policy");
  Var hidden = silu(add_row(matmul(embeddings, tape.param(params_.get("head.w1"))),
                            tape.param(params_.get("head.b1"))));
  Var raw = add_row(matmul(hidden, tape.param(params_.get("head.w2"))), tape.param(params_.get("head.b2")));
  return scale(ad::tanh(transpose(raw)), cfg_.tanh_clip);
}

Var Policy::improvement_logits(Tape& tape, const Matrix& node_features, const std::vector<Matrix>& edge_features) const {
  return improvement_logits(tape, encode(tape, node_features, edge_features));
}

Eigen::RowVectorXd Policy::improvement_logits(const Matrix& node_features,
                                              const std::vector<Matrix>& edge_features) const {
  Tape tape(false);
  return improvement_logits(tape, node_features, edge_features).value();
}

DecoderContext Policy::prepare_decoder(Tape& tape, const GraphInstance& g, const std::vector<Matrix>& edge_features) const {
  if (kind_ != PolicyKind::Constructive) throw std::logic_error("prepare_decoder on an improvement policy");
  Var h = encode(tape, tsp_node_features(g), edge_features);
  DecoderContext ctx;
  ctx.embeddings = h;
  ctx.graph = mean_rows(h);
  ctx.glimpse_keys = matmul(h, tape.param(params_.get("dec.wk")));
  ctx.glimpse_values = matmul(h, tape.param(params_.get("dec.wv")));
  ctx.pointer_keys = matmul(h, tape.param(params_.get("dec.wptr")));
  return ctx;
}

Var Policy::decoder_logits(Tape& tape, const DecoderContext& ctx, const PartialTour& partial,
                           const Matrix* memory_edge_features) const {
  const Eigen::Index n = ctx.embeddings.rows();
  if (partial.n() != n) throw std::invalid_argument("decoder: partial tour size mismatch");
  if (partial.complete()) throw std::logic_error("decoder: all nodes visited");
  const int d = cfg_.embed_dim;
  const int dk = cfg_.head_dim();

  std::vector<Var> parts{ctx.graph, row(ctx.embeddings, partial.first()), row(ctx.embeddings, partial.last())};
  Var query = matmul(concat_cols(parts), tape.param(params_.get("dec.wctx")));

  // Memory edge features of the current node, projected to one bias per
  // glimpse head plus one for the pointer.
  Var mem_bias;
  const bool use_memory = memory_edge_features != nullptr && !memory_edge_features->isZero(0.0);
  if (use_memory) {
    if (memory_edge_features->rows() != n || memory_edge_features->cols() != n) {
      throw std::invalid_argument("decoder: memory feature shape mismatch");
    }
    Var m = tape.constant(memory_edge_features->row(partial.last()).transpose());
    Var hidden = silu(matmul(m, tape.param(params_.get("mem.w1"))));
    mem_bias = transpose(matmul(hidden, tape.param(params_.get("mem.w2"))));  // (H+1) x n
  }

  Matrix mask_row = Matrix::Zero(1, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (partial.visited(static_cast<int>(j))) mask_row(0, j) = kMaskValue;
  }
  Var mask = tape.constant(mask_row);
  Var zero_bias = tape.constant(Matrix::Zero(1, n));

  std::vector<Var> heads;
  heads.reserve(static_cast<std::size_t>(cfg_.heads));
  for (int hh = 0; hh < cfg_.heads; ++hh) {
    Var bias = use_memory ? row(mem_bias, hh) : zero_bias;
    heads.push_back(edge_aware_attention(slice_cols(query, hh * dk, dk), slice_cols(ctx.glimpse_keys, hh * dk, dk),
                                         slice_cols(ctx.glimpse_values, hh * dk, dk), bias,
                                         AttentionVariant::Additive, &mask));
  }
  Var glimpse = matmul(concat_cols(heads), tape.param(params_.get("dec.wo")));
  Var u = scale(matmul(glimpse, transpose(ctx.pointer_keys)), 1.0 / std::sqrt(static_cast<double>(d)));
  if (use_memory) u = add(u, row(mem_bias, cfg_.heads));
  return scale(ad::tanh(u), cfg_.tanh_clip);
}

Var Policy::decoder_log_probs(Tape& tape, const DecoderContext& ctx, const PartialTour& partial,
                              const Matrix* memory_edge_features) const {
  Var logits = decoder_logits(tape, ctx, partial, memory_edge_features);
  std::vector<std::uint8_t> allowed(static_cast<std::size_t>(partial.n()));
  for (int j = 0; j < partial.n(); ++j) allowed[static_cast<std::size_t>(j)] = partial.visited(j) ? 0 : 1;
  return log_softmax_masked(logits, allowed);
}

std::vector<std::string> Policy::memory_projection_names() const {
  if (kind_ != PolicyKind::Constructive) return {};
  return {"mem.w1", "mem.w2"};
}

void Policy::freeze_backbone() {
  const auto names = memory_projection_names();
  for (auto& p : params_.all()) {
    p.trainable = std::find(names.begin(), names.end(), p.name) != names.end();
  }
}

void Policy::unfreeze_all() {
  for (auto& p : params_.all()) p.trainable = true;
}

Matrix improvement_node_features(const BinarySolution& current, const BinarySolution& best,
                                 const std::vector<double>& memory_feature) {
  const int n = current.size();
  if (best.size() != n || static_cast<int>(memory_feature.size()) != n) {
    throw std::invalid_argument("improvement_node_features: length mismatch");
  }
  Matrix x(n, 3);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = current[i];
    x(i, 1) = best[i];
    x(i, 2) = memory_feature[static_cast<std::size_t>(i)];
  }
  return x;
}

Matrix tsp_node_features(const GraphInstance& g) {
  if (!g.has_coords()) throw std::invalid_argument("TSP features need coordinates");
  Matrix x(g.n(), 2);
  for (int i = 0; i < g.n(); ++i) {
    x(i, 0) = g.coords()[static_cast<std::size_t>(i)].x;
    x(i, 1) = g.coords()[static_cast<std::size_t>(i)].y;
  }
  return x;
}

}  // namespace marco
