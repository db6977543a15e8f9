#include "marco/autodiff.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace marco::ad {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

Tape& tape_of(Var a) {
  require(a.tape() != nullptr, "autodiff: uninitialized Var");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  require(a.tape() != nullptr && a.tape() == b.tape(), "autodiff: Vars from different tapes");
  return *a.tape();
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(index_); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), false, nullptr, nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(const Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  const bool grad = recording_ && p.trainable;
  nodes_.push_back(Node{p.value, Matrix(), grad, nullptr, &p});
  const int index = static_cast<int>(nodes_.size()) - 1;
  param_nodes_.emplace(&p, index);
  return Var(this, index);
}

Var Tape::push(Matrix value, bool needs_grad, Backward backward) {
  const bool grad = recording_ && needs_grad;
  nodes_.push_back(Node{std::move(value), Matrix(), grad, grad ? std::move(backward) : nullptr, nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::truncate(std::size_t size) {
  if (size >= nodes_.size()) return;
  nodes_.resize(size);
  std::erase_if(param_nodes_, [size](const auto& entry) { return static_cast<std::size_t>(entry.second) >= size; });
}

void Tape::accumulate(int i, const Matrix& g) { accumulate_expr(i, g); }

void Tape::backward(Var out, double seed) {
  require(out.tape() == this, "backward: Var belongs to another tape");
  require(out.rows() == 1 && out.cols() == 1, "backward: output must be 1x1");
  if (!recording_) throw std::logic_error("backward on a non-recording tape");
  if (!nodes_[static_cast<std::size_t>(out.index_)].needs_grad) return;
  accumulate(out.index_, Matrix::Constant(1, 1, seed));
  for (int i = out.index_; i >= 0; --i) {
    Node& node = nodes_[static_cast<std::size_t>(i)];
    if (node.grad.size() == 0) continue;
    if (node.backward) node.backward(*this, i);
    if (node.param != nullptr && node.param->trainable) {
      if (node.param->grad.size() == 0) node.param->zero_grad();
      node.param->grad += node.grad;
    }
    // Gradients of consumed nodes are no longer needed.
    if (node.param == nullptr) node.grad.resize(0, 0);
  }
  for (auto& [p, index] : param_nodes_) nodes_[static_cast<std::size_t>(index)].grad.resize(0, 0);
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  const int ia = a.index();
  const int ib = b.index();
  return t.push(a.value() * b.value(), t.needs_grad(a) || t.needs_grad(b), [ia, ib](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    tp.accumulate_expr(ia, g * tp.value(ib).transpose());
    tp.accumulate_expr(ib, tp.value(ia).transpose() * g);
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  const int ia = a.index();
  const int ib = b.index();
  return t.push(a.value() + b.value(), t.needs_grad(a) || t.needs_grad(b), [ia, ib](Tape& tp, int self) {
    tp.accumulate(ia, tp.grad(self));
    tp.accumulate(ib, tp.grad(self));
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  const int ia = a.index();
  const int ib = b.index();
  return t.push(a.value() - b.value(), t.needs_grad(a) || t.needs_grad(b), [ia, ib](Tape& tp, int self) {
    tp.accumulate(ia, tp.grad(self));
    tp.accumulate_expr(ib, -tp.grad(self));
  });
}

Var add_row(Var a, Var r) {
  Tape& t = tape_of(a, r);
  require(r.rows() == 1 && r.cols() == a.cols(), "add_row: row shape mismatch");
  const int ia = a.index();
  const int ir = r.index();
  Matrix out = a.value().rowwise() + r.value().row(0);
  return t.push(std::move(out), t.needs_grad(a) || t.needs_grad(r), [ia, ir](Tape& tp, int self) {
    tp.accumulate(ia, tp.grad(self));
    tp.accumulate_expr(ir, tp.grad(self).colwise().sum());
  });
}

Var hadamard(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard: shape mismatch");
  const int ia = a.index();
  const int ib = b.index();
  return t.push(a.value().cwiseProduct(b.value()), t.needs_grad(a) || t.needs_grad(b),
                [ia, ib](Tape& tp, int self) {
                  const Matrix& g = tp.grad(self);
                  tp.accumulate_expr(ia, g.cwiseProduct(tp.value(ib)));
                  tp.accumulate_expr(ib, g.cwiseProduct(tp.value(ia)));
                });
}

Var scale(Var a, double factor) {
  Tape& t = tape_of(a);
  const int ia = a.index();
  return t.push(a.value() * factor, t.needs_grad(a),
                [ia, factor](Tape& tp, int self) { tp.accumulate_expr(ia, tp.grad(self) * factor); });
}

Var tanh(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.index();
  return t.push(a.value().array().tanh().matrix(), t.needs_grad(a), [ia](Tape& tp, int self) {
    const auto y = tp.value(self).array();
    tp.accumulate_expr(ia, (tp.grad(self).array() * (1.0 - y * y)).matrix());
  });
}

Var sigmoid(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.index();
  Matrix y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return t.push(std::move(y), t.needs_grad(a), [ia](Tape& tp, int self) {
    const auto y = tp.value(self).array();
    tp.accumulate_expr(ia, (tp.grad(self).array() * y * (1.0 - y)).matrix());
  });
}

Var silu(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.index();
  const auto x = a.value().array();
  Matrix y = (x / (1.0 + (-x).exp())).matrix();
  return t.push(std::move(y), t.needs_grad(a), [ia](Tape& tp, int self) {
    const auto x = tp.value(ia).array();
    const auto s = 1.0 / (1.0 + (-x).exp());
    tp.accumulate_expr(ia, (tp.grad(self).array() * s * (1.0 + x * (1.0 - s))).matrix());
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.index();
  return t.push(a.value().transpose(), t.needs_grad(a),
                [ia](Tape& tp, int self) { tp.accumulate_expr(ia, tp.grad(self).transpose()); });
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.index();
  Matrix y = a.value();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const double m = y.row(r).maxCoeff();
    y.row(r) = (y.row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  return t.push(std::move(y), t.needs_grad(a), [ia](Tape& tp, int self) {
    const Matrix& y = tp.value(self);
    const Matrix& g = tp.grad(self);
    const Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
    Matrix dx = y.cwiseProduct(g.colwise() - dot);
    tp.accumulate(ia, dx);
  });
}

Var layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
  Tape& t = tape_of(x, gamma);
  require(gamma.tape() == beta.tape(), "layer_norm_rows: Vars from different tapes");
  require(gamma.rows() == 1 && gamma.cols() == x.cols() && beta.rows() == 1 && beta.cols() == x.cols(),
          "layer_norm_rows: affine shape mismatch");
  const Eigen::Index d = x.cols();
  const Matrix& xv = x.value();
  Matrix xhat(xv.rows(), d);
  Eigen::VectorXd inv_std(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const double mu = xv.row(r).mean();
    const double var = (xv.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mu) * inv_std(r);
  }
  Matrix y = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
  y.rowwise() += beta.value().row(0);
  const int ix = x.index();
  const int ig = gamma.index();
  const int ib = beta.index();
  const bool grad = t.needs_grad(x) || t.needs_grad(gamma) || t.needs_grad(beta);
  return t.push(std::move(y), grad, [ix, ig, ib, xhat = std::move(xhat), inv_std](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    tp.accumulate_expr(ig, g.cwiseProduct(xhat).colwise().sum());
    tp.accumulate_expr(ib, g.colwise().sum());
    const Matrix dxhat = (g.array().rowwise() * tp.value(ig).row(0).array()).matrix();
    const double inv_d = 1.0 / static_cast<double>(dxhat.cols());
    Matrix dx(dxhat.rows(), dxhat.cols());
    for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
      const double mean_g = dxhat.row(r).sum() * inv_d;
      const double mean_gx = dxhat.row(r).dot(xhat.row(r)) * inv_d;
      dx.row(r) = inv_std(r) * (dxhat.row(r).array() - mean_g - xhat.row(r).array() * mean_gx).matrix();
    }
    tp.accumulate(ix, dx);
  });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  Tape& t = tape_of(parts.front());
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  bool grad = false;
  std::vector<int> idx;
  std::vector<Eigen::Index> widths;
  for (const Var& p : parts) {
    require(p.tape() == &t && p.rows() == rows, "concat_cols: mismatched inputs");
    cols += p.cols();
    grad = grad || t.needs_grad(p);
    idx.push_back(p.index());
    widths.push_back(p.cols());
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return t.push(std::move(out), grad, [idx = std::move(idx), widths = std::move(widths)](Tape& tp, int self) {
    Eigen::Index at = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      tp.accumulate_expr(idx[k], tp.grad(self).middleCols(at, widths[k]));
      at += widths[k];
    }
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = tape_of(a);
  require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols: out of range");
  const int ia = a.index();
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = a.cols();
  return t.push(a.value().middleCols(start, count), t.needs_grad(a),
                [ia, start, count, rows, cols](Tape& tp, int self) {
                  Matrix g = Matrix::Zero(rows, cols);
                  g.middleCols(start, count) = tp.grad(self);
                  tp.accumulate(ia, g);
                });
}

Var row(Var a, Eigen::Index r) {
  Tape& t = tape_of(a);
  require(r >= 0 && r < a.rows(), "row: out of range");
  const int ia = a.index();
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = a.cols();
  return t.push(a.value().row(r), t.needs_grad(a), [ia, r, rows, cols](Tape& tp, int self) {
    Matrix g = Matrix::Zero(rows, cols);
    g.row(r) = tp.grad(self);
    tp.accumulate(ia, g);
  });
}

Var col(Var a, Eigen::Index c) { return slice_cols(a, c, 1); }

Var mean_rows(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.index();
  const Eigen::Index rows = a.rows();
  return t.push(a.value().colwise().mean(), t.needs_grad(a), [ia, rows](Tape& tp, int self) {
    Matrix g = tp.grad(self).replicate(rows, 1) / static_cast<double>(rows);
    tp.accumulate(ia, g);
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.index();
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = a.cols();
  return t.push(Matrix::Constant(1, 1, a.value().sum()), t.needs_grad(a), [ia, rows, cols](Tape& tp, int self) {
    tp.accumulate(ia, Matrix::Constant(rows, cols, tp.grad(self)(0, 0)));
  });
}

Var pick(Var a, Eigen::Index r, Eigen::Index c) {
  Tape& t = tape_of(a);
  require(r >= 0 && r < a.rows() && c >= 0 && c < a.cols(), "pick: out of range");
  const int ia = a.index();
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = a.cols();
  return t.push(Matrix::Constant(1, 1, a.value()(r, c)), t.needs_grad(a), [ia, r, c, rows, cols](Tape& tp, int self) {
    Matrix g = Matrix::Zero(rows, cols);
    g(r, c) = tp.grad(self)(0, 0);
    tp.accumulate(ia, g);
  });
}

Var linear_combination(std::span<const Var> scalars, std::span<const double> coeffs) {
  require(!scalars.empty() && scalars.size() == coeffs.size(), "linear_combination: size mismatch");
  Tape& t = tape_of(scalars.front());
  double value = 0.0;
  bool grad = false;
  std::vector<int> idx;
  std::vector<double> cs(coeffs.begin(), coeffs.end());
  for (std::size_t k = 0; k < scalars.size(); ++k) {
    require(scalars[k].tape() == &t && scalars[k].rows() == 1 && scalars[k].cols() == 1,
            "linear_combination: inputs must be 1x1 on one tape");
    value += coeffs[k] * scalars[k].scalar();
    grad = grad || t.needs_grad(scalars[k]);
    idx.push_back(scalars[k].index());
  }
  return t.push(Matrix::Constant(1, 1, value), grad, [idx = std::move(idx), cs = std::move(cs)](Tape& tp, int self) {
    const double g = tp.grad(self)(0, 0);
    for (std::size_t k = 0; k < idx.size(); ++k) tp.accumulate(idx[k], Matrix::Constant(1, 1, g * cs[k]));
  });
}

Var log_softmax_masked(Var logits, std::span<const std::uint8_t> allowed) {
  Tape& t = tape_of(logits);
  require(logits.rows() == 1 && static_cast<std::size_t>(logits.cols()) == allowed.size(),
          "log_softmax_masked: expects a 1 x n row and n mask entries");
  const Matrix& x = logits.value();
  double m = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (allowed[static_cast<std::size_t>(j)]) m = std::max(m, x(0, j));
  }
  require(std::isfinite(m), "log_softmax_masked: no allowed entry or non-finite logits");
  double z = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (allowed[static_cast<std::size_t>(j)]) z += std::exp(x(0, j) - m);
  }
  const double lse = m + std::log(z);
  Matrix out(1, x.cols());
  std::vector<std::uint8_t> mask(allowed.begin(), allowed.end());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    out(0, j) = mask[static_cast<std::size_t>(j)] ? x(0, j) - lse : -std::numeric_limits<double>::infinity();
  }
  const int ia = logits.index();
  return t.push(std::move(out), t.needs_grad(logits), [ia, mask = std::move(mask)](Tape& tp, int self) {
    const Matrix& y = tp.value(self);
    const Matrix& g = tp.grad(self);
    double total = 0.0;
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      if (mask[static_cast<std::size_t>(j)]) total += g(0, j);
    }
    Matrix dx = Matrix::Zero(1, y.cols());
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      if (mask[static_cast<std::size_t>(j)]) dx(0, j) = g(0, j) - std::exp(y(0, j)) * total;
    }
    tp.accumulate(ia, dx);
  });
}

Var edge_bias(std::span<const Var> features, Var weights, Eigen::Index head) {
  require(!features.empty(), "edge_bias: no features");
  Tape& t = tape_of(features.front(), weights);
  require(weights.rows() == static_cast<Eigen::Index>(features.size()) && head >= 0 && head < weights.cols(),
          "edge_bias: weight shape mismatch");
  Matrix out = Matrix::Zero(features.front().rows(), features.front().cols());
  bool grad = t.needs_grad(weights);
  std::vector<int> idx;
  for (std::size_t f = 0; f < features.size(); ++f) {
    require(features[f].tape() == &t && features[f].rows() == out.rows() && features[f].cols() == out.cols(),
            "edge_bias: feature shape mismatch");
    out += weights.value()(static_cast<Eigen::Index>(f), head) * features[f].value();
    grad = grad || t.needs_grad(features[f]);
    idx.push_back(features[f].index());
  }
  const int iw = weights.index();
  const Eigen::Index w_rows = weights.rows();
  const Eigen::Index w_cols = weights.cols();
  return t.push(std::move(out), grad, [idx = std::move(idx), iw, head, w_rows, w_cols](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    Matrix dw = Matrix::Zero(w_rows, w_cols);
    for (std::size_t f = 0; f < idx.size(); ++f) {
      dw(static_cast<Eigen::Index>(f), head) = g.cwiseProduct(tp.value(idx[f])).sum();
      tp.accumulate_expr(idx[f], g * tp.value(iw)(static_cast<Eigen::Index>(f), head));
    }
    tp.accumulate(iw, dw);
  });
}

}  // namespace marco::ad
