#pragma once

// Reverse-mode differentiation over matrix-valued operations. A Tape records
// operations as they are evaluated; backward() walks them in reverse. The op
// set covers the encoders, the cycle-consistency loss and the policy losses.

#include <cstddef>
#include <functional>
#include <vector>

#include "eil/matrix.hpp"

namespace eil::ad {

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

class Tape {
 public:
  /// Differentiable input (parameters, or inputs under a gradient check).
  Var leaf(Matrix value);
  /// Input carrying no gradient.
  Var constant(Matrix value);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient accumulated by the last backward(); zero-sized for constants.
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }
  double scalar(Var v) const { return nodes_[v.id].value(0, 0); }

  /// Seeds d(out)/d(out) = 1 for a 1x1 output and propagates to every leaf.
  void backward(Var out);

  std::size_t size() const { return nodes_.size(); }

  // x: n x in, weight: out x in, bias: 1 x out -> n x out
  Var affine(Var x, Var weight, Var bias);
  Var tanh(Var x);
  Var concat_cols(Var a, Var b);
  // a: n x d, b: m x d -> n x m of squared Euclidean distances
  Var pairwise_sqdist(Var a, Var b);
  /// Row-wise softmax with the row maximum subtracted before exponentiation.
  Var softmax_rows(Var x);
  Var log_softmax_rows(Var x);
  Var matmul(Var a, Var b);
  Var select_rows(Var x, std::vector<std::size_t> rows);
  Var scale(Var x, double c);
  Var add_scalar(Var x, double c);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  /// a: n x m minus column c: n x 1, broadcast across columns.
  Var sub_col(Var a, Var c);
  Var square(Var x);
  Var log(Var x);
  /// max(x, floor) elementwise; the gradient is zero where the floor binds.
  Var floor_at(Var x, double floor);
  Var row_sum(Var x);
  Var sum(Var x);
  Var mean(Var x);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    std::function<void(Tape&, std::size_t self)> backprop;
  };

  Var push(Matrix value, bool needs_grad, std::function<void(Tape&, std::size_t)> backprop);
  Var unary(Var x, Matrix value, std::function<void(Tape&, std::size_t)> backprop);
  Node& node(Var v) { return nodes_[v.id]; }
  bool wants(Var v) const { return nodes_[v.id].needs_grad; }
  Matrix& grad_of(Var v);

  std::vector<Node> nodes_;
};

}  // namespace eil::ad
