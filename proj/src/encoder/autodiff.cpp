#include "eil/autodiff.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "eil/error.hpp"
#include "eil/kernels.hpp"

namespace eil::ad {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw UsageError(std::string("shape mismatch in ") + op);
  }
}

}  // namespace

Var Tape::push(Matrix value, bool needs_grad, std::function<void(Tape&, std::size_t)> backprop) {
  nodes_.push_back(Node{std::move(value), Matrix{}, needs_grad, needs_grad ? std::move(backprop) : nullptr});
  return Var{nodes_.size() - 1};
}

Var Tape::leaf(Matrix value) { return push(std::move(value), true, [](Tape&, std::size_t) {}); }

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::unary(Var x, Matrix value, std::function<void(Tape&, std::size_t)> backprop) {
  return push(std::move(value), wants(x), std::move(backprop));
}

Matrix& Tape::grad_of(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.rows() != n.value.rows() || n.grad.cols() != n.value.cols()) {
    n.grad = Matrix(n.value.rows(), n.value.cols(), 0.0);
  }
  return n.grad;
}

void Tape::backward(Var out) {
  if (value(out).rows() != 1 || value(out).cols() != 1) throw UsageError("backward needs a 1x1 output");
  for (auto& n : nodes_) n.grad = Matrix(n.value.rows(), n.value.cols(), 0.0);
  nodes_[out.id].grad(0, 0) = 1.0;
  for (std::size_t i = out.id + 1; i-- > 0;) {
    if (nodes_[i].needs_grad && nodes_[i].backprop) nodes_[i].backprop(*this, i);
  }
}

Var Tape::affine(Var x, Var weight, Var bias) {
  const Matrix& X = value(x);
  const Matrix& W = value(weight);
  const Matrix& b = value(bias);
  if (X.cols() != W.cols() || b.rows() != 1 || b.cols() != W.rows()) {
    throw UsageError("shape mismatch in affine");
  }
  const std::size_t n = X.rows(), out = W.rows(), in = W.cols();
  Matrix Y(n, out);
  const auto dot = kernels::active().dot;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t o = 0; o < out; ++o) Y(i, o) = dot(X.data() + i * in, W.data() + o * in, in) + b(0, o);
  }
  const bool g = wants(x) || wants(weight) || wants(bias);
  return push(std::move(Y), g, [x, weight, bias, n, out, in](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    const auto axpy = kernels::active().axpy;
    if (t.wants(x)) {
      Matrix& gX = t.grad_of(x);
      const Matrix& W = t.value(weight);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < out; ++o) axpy(G(i, o), W.data() + o * in, gX.data() + i * in, in);
      }
    }
    if (t.wants(weight)) {
      Matrix& gW = t.grad_of(weight);
      const Matrix& X = t.value(x);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < out; ++o) axpy(G(i, o), X.data() + i * in, gW.data() + o * in, in);
      }
    }
    if (t.wants(bias)) {
      Matrix& gb = t.grad_of(bias);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < out; ++o) gb(0, o) += G(i, o);
      }
    }
  });
}

Var Tape::tanh(Var x) {
  Matrix Y = value(x);
  for (double& v : Y.values()) v = std::tanh(v);
  return unary(x, std::move(Y), [x](Tape& t, std::size_t self) {
    const Matrix& Y = t.nodes_[self].value;
    const Matrix& G = t.nodes_[self].grad;
    Matrix& gX = t.grad_of(x);
    for (std::size_t k = 0; k < Y.size(); ++k) gX.values()[k] += G.values()[k] * (1.0 - Y.values()[k] * Y.values()[k]);
  });
}

Var Tape::concat_cols(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.rows() != B.rows()) throw UsageError("row mismatch in concat_cols");
  const std::size_t n = A.rows(), ca = A.cols(), cb = B.cols();
  Matrix Y(n, ca + cb);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(A.row(i).begin(), A.row(i).end(), Y.row(i).begin());
    std::copy(B.row(i).begin(), B.row(i).end(), Y.row(i).begin() + static_cast<std::ptrdiff_t>(ca));
  }
  return push(std::move(Y), wants(a) || wants(b), [a, b, n, ca, cb](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    if (t.wants(a)) {
      Matrix& gA = t.grad_of(a);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < ca; ++c) gA(i, c) += G(i, c);
    }
    if (t.wants(b)) {
      Matrix& gB = t.grad_of(b);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < cb; ++c) gB(i, c) += G(i, ca + c);
    }
  });
}

Var Tape::pairwise_sqdist(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.cols() != B.cols()) throw UsageError("dimension mismatch in pairwise_sqdist");
  const std::size_t n = A.rows(), m = B.rows(), d = A.cols();
  Matrix D(n, m);
  kernels::pairwise_squared_distances(A.data(), n, B.data(), m, d, D.data());
  return push(std::move(D), wants(a) || wants(b), [a, b, n, m, d](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    const Matrix& A = t.value(a);
    const Matrix& B = t.value(b);
    std::vector<double> diff(d);
    Matrix* gA = t.wants(a) ? &t.grad_of(a) : nullptr;
    Matrix* gB = t.wants(b) ? &t.grad_of(b) : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double g2 = 2.0 * G(i, j);
        if (g2 == 0.0) continue;
        for (std::size_t c = 0; c < d; ++c) diff[c] = A(i, c) - B(j, c);
        if (gA) kernels::active().axpy(g2, diff.data(), gA->data() + i * d, d);
        if (gB) kernels::active().axpy(-g2, diff.data(), gB->data() + j * d, d);
      }
    }
  });
}

Var Tape::softmax_rows(Var x) {
  Matrix Y = value(x);
  for (std::size_t i = 0; i < Y.rows(); ++i) {
    auto r = Y.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double s = 0.0;
    for (double& v : r) {
      v = std::exp(v - mx);
      s += v;
    }
    for (double& v : r) v /= s;
  }
  return unary(x, std::move(Y), [x](Tape& t, std::size_t self) {
    const Matrix& Y = t.nodes_[self].value;
    const Matrix& G = t.nodes_[self].grad;
    Matrix& gX = t.grad_of(x);
    for (std::size_t i = 0; i < Y.rows(); ++i) {
      double inner = 0.0;
      for (std::size_t j = 0; j < Y.cols(); ++j) inner += G(i, j) * Y(i, j);
      for (std::size_t j = 0; j < Y.cols(); ++j) gX(i, j) += Y(i, j) * (G(i, j) - inner);
    }
  });
}

Var Tape::log_softmax_rows(Var x) {
  Matrix Y = value(x);
  for (std::size_t i = 0; i < Y.rows(); ++i) {
    auto r = Y.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double s = 0.0;
    for (double v : r) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    for (double& v : r) v -= lse;
  }
  return unary(x, std::move(Y), [x](Tape& t, std::size_t self) {
    const Matrix& Y = t.nodes_[self].value;
    const Matrix& G = t.nodes_[self].grad;
    Matrix& gX = t.grad_of(x);
    for (std::size_t i = 0; i < Y.rows(); ++i) {
      double gsum = 0.0;
      for (std::size_t j = 0; j < Y.cols(); ++j) gsum += G(i, j);
      for (std::size_t j = 0; j < Y.cols(); ++j) gX(i, j) += G(i, j) - std::exp(Y(i, j)) * gsum;
    }
  });
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.cols() != B.rows()) throw UsageError("shape mismatch in matmul");
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  Matrix C(n, m, 0.0);
  const auto axpy = kernels::active().axpy;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) axpy(A(i, p), B.data() + p * m, C.data() + i * m, m);
  }
  return push(std::move(C), wants(a) || wants(b), [a, b, n, k, m](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    const auto& kt = kernels::active();
    if (t.wants(a)) {
      Matrix& gA = t.grad_of(a);
      const Matrix& B = t.value(b);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) gA(i, p) += kt.dot(G.data() + i * m, B.data() + p * m, m);
    }
    if (t.wants(b)) {
      Matrix& gB = t.grad_of(b);
      const Matrix& A = t.value(a);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) kt.axpy(A(i, p), G.data() + i * m, gB.data() + p * m, m);
    }
  });
}

Var Tape::select_rows(Var x, std::vector<std::size_t> rows) {
  const Matrix& X = value(x);
  Matrix Y(rows.size(), X.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= X.rows()) throw UsageError("row index out of range in select_rows");
    std::copy(X.row(rows[r]).begin(), X.row(rows[r]).end(), Y.row(r).begin());
  }
  return unary(x, std::move(Y), [x, rows = std::move(rows)](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    Matrix& gX = t.grad_of(x);
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < G.cols(); ++c) gX(rows[r], c) += G(r, c);
  });
}

Var Tape::scale(Var x, double c) {
  Matrix Y = value(x);
  for (double& v : Y.values()) v *= c;
  return unary(x, std::move(Y), [x, c](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    Matrix& gX = t.grad_of(x);
    for (std::size_t k = 0; k < G.size(); ++k) gX.values()[k] += c * G.values()[k];
  });
}

Var Tape::add_scalar(Var x, double c) {
  Matrix Y = value(x);
  for (double& v : Y.values()) v += c;
  return unary(x, std::move(Y), [x](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    Matrix& gX = t.grad_of(x);
    for (std::size_t k = 0; k < G.size(); ++k) gX.values()[k] += G.values()[k];
  });
}

#define EIL_BINARY_OP(NAME, FWD, GA, GB)                                              \
  Var Tape::NAME(Var a, Var b) {                                                            \
    require_same_shape(value(a), value(b), #NAME);                                          \
    Matrix Y(value(a).rows(), value(a).cols());                                             \
    {                                                                                       \
      const auto& A = value(a).values();                                                    \
      const auto& B = value(b).values();                                                    \
      for (std::size_t k = 0; k < Y.size(); ++k) {                                          \
        const double av = A[k], bv = B[k];                                                  \
        Y.values()[k] = (FWD);                                                              \
      }                                                                                     \
    }                                                                                       \
    return push(std::move(Y), wants(a) || wants(b), [a, b](Tape& t, std::size_t self) {     \
      const auto& G = t.nodes_[self].grad.values();                                         \
      const auto& A = t.value(a).values();                                                  \
      const auto& B = t.value(b).values();                                                  \
      if (t.wants(a)) {                                                                     \
        auto& gA = t.grad_of(a).values();                                                   \
        for (std::size_t k = 0; k < G.size(); ++k) {                                        \
          const double av = A[k], bv = B[k], g = G[k];                                      \
          (void)av;                                                                         \
          (void)bv;                                                                         \
          gA[k] += (GA);                                                                    \
        }                                                                                   \
      }                                                                                     \
      if (t.wants(b)) {                                                                     \
        auto& gB = t.grad_of(b).values();                                                   \
        for (std::size_t k = 0; k < G.size(); ++k) {                                        \
          const double av = A[k], bv = B[k], g = G[k];                                      \
          (void)av;                                                                         \
          (void)bv;                                                                         \
          gB[k] += (GB);                                                                    \
        }                                                                                   \
      }                                                                                     \
    });                                                                                     \
  }

EIL_BINARY_OP(add, av + bv, g, g)
EIL_BINARY_OP(sub, av - bv, g, -g)
EIL_BINARY_OP(mul, av * bv, g * bv, g * av)
EIL_BINARY_OP(div, av / bv, g / bv, -g * av / (bv * bv))

#undef EIL_BINARY_OP

Var Tape::sub_col(Var a, Var c) {
  const Matrix& A = value(a);
  const Matrix& C = value(c);
  if (C.rows() != A.rows() || C.cols() != 1) throw UsageError("shape mismatch in sub_col");
  Matrix Y = A;
  for (std::size_t i = 0; i < Y.rows(); ++i)
    for (std::size_t j = 0; j < Y.cols(); ++j) Y(i, j) -= C(i, 0);
  return push(std::move(Y), wants(a) || wants(c), [a, c](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    if (t.wants(a)) {
      Matrix& gA = t.grad_of(a);
      for (std::size_t k = 0; k < G.size(); ++k) gA.values()[k] += G.values()[k];
    }
    if (t.wants(c)) {
      Matrix& gC = t.grad_of(c);
      for (std::size_t i = 0; i < G.rows(); ++i)
        for (std::size_t j = 0; j < G.cols(); ++j) gC(i, 0) -= G(i, j);
    }
  });
}

Var Tape::square(Var x) {
  Matrix Y = value(x);
  for (double& v : Y.values()) v *= v;
  return unary(x, std::move(Y), [x](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    const Matrix& X = t.value(x);
    Matrix& gX = t.grad_of(x);
    for (std::size_t k = 0; k < G.size(); ++k) gX.values()[k] += 2.0 * X.values()[k] * G.values()[k];
  });
}

Var Tape::log(Var x) {
  Matrix Y = value(x);
  for (double& v : Y.values()) v = std::log(v);
  return unary(x, std::move(Y), [x](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    const Matrix& X = t.value(x);
    Matrix& gX = t.grad_of(x);
    for (std::size_t k = 0; k < G.size(); ++k) gX.values()[k] += G.values()[k] / X.values()[k];
  });
}

Var Tape::floor_at(Var x, double floor) {
  Matrix Y = value(x);
  for (double& v : Y.values()) v = std::max(v, floor);
  return unary(x, std::move(Y), [x, floor](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    const Matrix& X = t.value(x);
    Matrix& gX = t.grad_of(x);
    for (std::size_t k = 0; k < G.size(); ++k) {
      if (X.values()[k] > floor) gX.values()[k] += G.values()[k];
    }
  });
}

Var Tape::row_sum(Var x) {
  const Matrix& X = value(x);
  Matrix Y(X.rows(), 1, 0.0);
  for (std::size_t i = 0; i < X.rows(); ++i)
    for (double v : X.row(i)) Y(i, 0) += v;
  return unary(x, std::move(Y), [x](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    Matrix& gX = t.grad_of(x);
    for (std::size_t i = 0; i < gX.rows(); ++i)
      for (double& v : gX.row(i)) v += G(i, 0);
  });
}

Var Tape::sum(Var x) {
  double s = 0.0;
  for (double v : value(x).values()) s += v;
  return unary(x, Matrix(1, 1, s), [x](Tape& t, std::size_t self) {
    const double g = t.nodes_[self].grad(0, 0);
    for (double& v : t.grad_of(x).values()) v += g;
  });
}

Var Tape::mean(Var x) {
  const double n = static_cast<double>(value(x).size());
  if (n == 0) throw UsageError("mean of an empty matrix");
  return scale(sum(x), 1.0 / n);
}

}  // namespace eil::ad
