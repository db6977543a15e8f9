#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace marco::ad {

using Matrix = Eigen::MatrixXd;

/// Learnable tensor with its accumulated gradient.
/// `grad` is mutable so that read-only forward passes can still be recorded
/// for backpropagation.
struct Parameter {
  std::string name;
  Matrix value;
  mutable Matrix grad;
  bool trainable = true;

  void zero_grad() const { grad = Matrix::Zero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  Tape* tape() const { return tape_; }
  int index() const { return index_; }

 private:
  friend class Tape;
  Var(Tape* tape, int index) : tape_(tape), index_(index) {}
  Tape* tape_ = nullptr;
  int index_ = -1;
};

/// Eager reverse-mode tape. Every op computes its value immediately; when
/// recording, it also registers a backward closure. backward() walks nodes in
/// reverse creation order and accumulates into Parameter::grad of trainable
/// leaves.
class Tape {
 public:
  using Backward = std::function<void(Tape&, int)>;

  explicit Tape(bool recording = true) : recording_(recording) { nodes_.reserve(512); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  Var constant(Matrix value);
  /// Leaf bound to `p`; repeated calls with the same parameter share one node.
  Var param(const Parameter& p);

  /// Seeds d(out)/d(out) = seed (out must be 1x1) and propagates.
  void backward(Var out, double seed = 1.0);
  /// Drops every node recorded after the first `size`; Vars pointing past it
  /// become invalid.
  void truncate(std::size_t size);

  std::size_t size() const { return nodes_.size(); }

  // Op plumbing.
  Var push(Matrix value, bool needs_grad, Backward backward);
  bool needs_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.index_)].needs_grad; }
  const Matrix& value(int i) const { return nodes_[static_cast<std::size_t>(i)].value; }
  const Matrix& grad(int i) const { return nodes_[static_cast<std::size_t>(i)].grad; }
  /// grad(i) += g, allocating on first touch. No-op for nodes without grad.
  void accumulate(int i, const Matrix& g);
  template <typename Expr>
  void accumulate_expr(int i, const Expr& g) {
    Node& node = nodes_[static_cast<std::size_t>(i)];
    if (!node.needs_grad) return;
    if (node.grad.size() == 0) {
      node.grad = g;
    } else {
      node.grad += g;
    }
  }

 private:
  friend class Var;
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Backward backward;
    const Parameter* param = nullptr;
  };
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
  bool recording_;
};

// Elementwise and linear algebra ops. All shapes are checked.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// a + row, with row (1 x cols) broadcast over rows.
Var add_row(Var a, Var row);
Var hadamard(Var a, Var b);
Var scale(Var a, double factor);
Var tanh(Var a);
Var sigmoid(Var a);
/// x * sigmoid(x).
Var silu(Var a);
Var transpose(Var a);
Var softmax_rows(Var a);
/// Row-wise layer normalization with affine gamma/beta (1 x cols).
Var layer_norm_rows(Var x, Var gamma, Var beta, double eps = 1e-5);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var row(Var a, Eigen::Index r);
Var col(Var a, Eigen::Index c);
/// 1 x cols mean over rows.
Var mean_rows(Var a);
Var sum(Var a);
/// Entry (r, c) as a 1x1 node.
Var pick(Var a, Eigen::Index r, Eigen::Index c);
/// Σ coeffs[i] * scalars[i] over 1x1 nodes.
Var linear_combination(std::span<const Var> scalars, std::span<const double> coeffs);
/// Log-softmax over the allowed entries of a 1 x n row; disallowed entries
/// read -inf and receive no gradient.
Var log_softmax_masked(Var logits, std::span<const std::uint8_t> allowed);
/// Σ_f weights(f, head) * features[f] for same-shaped feature matrices.
Var edge_bias(std::span<const Var> features, Var weights, Eigen::Index head);

}  // namespace marco::ad
