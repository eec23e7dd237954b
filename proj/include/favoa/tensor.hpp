// SPDX-License-Identifier: Apache-2.0
//
// Dense f64 tensors with tape-based reverse-mode differentiation.
//
// Every op builds a node holding its value, its inputs and a local gradient
// rule. backward() records the reachable nodes in topological order (the
// tape) and replays the rules in reverse. Shapes never broadcast implicitly;
// use reshape / repeat_rows / concat to adapt them.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "favoa/errors.hpp"

namespace favoa {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

class Tensor;

namespace detail {

struct Node;
using GradientRule = std::function<void(Node&)>;

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  GradientRule rule;

  bool is_leaf() const { return inputs.empty(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

inline void accumulate(Node& input, std::size_t i, double value) {
  if (!input.requires_grad) return;
  input.ensure_grad();
  input.grad[i] += value;
}

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false) {
    if (element_count(shape) != values.size()) {
      throw DimensionError(detail::concat_message("tensor shape ", shape_string(shape), " holds ",
                                                  element_count(shape), " elements but ",
                                                  values.size(), " values were given"));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }
  static Tensor filled(Shape shape, double value, bool requires_grad = false) {
    const auto n = element_count(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
  }
  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return filled(std::move(shape), 0.0, requires_grad);
  }
  static Tensor scalar(double value, bool requires_grad = false) {
    return from({}, {value}, requires_grad);
  }
  static Tensor vector(std::vector<double> values, bool requires_grad = false) {
    const auto n = values.size();
    return from({n}, std::move(values), requires_grad);
  }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false) {
    return from({rows, cols}, std::move(values), requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->data.size(); }

  std::span<const double> data() const { return node_->data; }
  std::vector<double> to_vector() const { return node_->data; }
  double operator[](std::size_t i) const { return node_->data[i]; }
  double at(std::size_t row, std::size_t col) const {
    return node_->data[row * node_->shape.at(1) + col];
  }
  double item() const {
    if (size() != 1) {
      throw DimensionError("item() requires a single-element tensor, got " + shape_string(shape()));
    }
    return node_->data[0];
  }

  /// Writable view of a leaf's values; used by optimizers and perturbation checks.
  std::span<double> mutable_data() {
    require(node_->is_leaf(), "mutable_data() is only available on leaf tensors, not '",
            node_->op, "' results");
    return node_->data;
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) {
    require(node_->is_leaf(), "requires_grad can only be toggled on leaf tensors");
    node_->requires_grad = flag;
  }
  bool has_grad() const { return node_->grad.size() == node_->data.size(); }
  /// Accumulated gradient; empty when nothing has flowed into this tensor yet.
  std::span<const double> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  const char* op() const { return node_->op; }
  bool is_leaf() const { return node_->is_leaf(); }

  /// Fresh leaf with copied values and no history.
  Tensor detach(bool requires_grad = false) const {
    return from(shape(), node_->data, requires_grad);
  }

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Thread-local switch: while false, ops record no history.
inline bool& grad_mode_enabled() {
  thread_local bool enabled = true;
  return enabled;
}

class NoGradGuard {
 public:
  NoGradGuard() : previous_(grad_mode_enabled()) { grad_mode_enabled() = false; }
  ~NoGradGuard() { grad_mode_enabled() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

inline Tensor make_result(const char* op, Shape shape, std::vector<double> values,
                          std::initializer_list<const Tensor*> inputs, GradientRule rule) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->shape = std::move(shape);
  node->data = std::move(values);
  if (grad_mode_enabled()) {
    for (const Tensor* input : inputs) node->requires_grad |= input->requires_grad();
  }
  if (node->requires_grad) {
    for (const Tensor* input : inputs) node->inputs.push_back(input->node());
    node->rule = std::move(rule);
  }
  return Tensor(std::move(node));
}

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(concat_message(op, ": shape mismatch between ", shape_string(a.shape()),
                                        " and ", shape_string(b.shape())));
  }
}

inline void require_rank(const char* op, const Tensor& a, std::size_t rank) {
  if (a.rank() != rank) {
    throw DimensionError(concat_message(op, ": expected rank ", rank, ", got ",
                                        shape_string(a.shape())));
  }
}

}  // namespace detail

namespace test_hooks {

/// Name of an op whose gradient rule is deliberately corrupted (upstream
/// gradient doubled). Empty in normal operation; gradient-check tooling sets
/// it to prove that a broken rule is detected.
inline std::string& corrupted_rule() {
  thread_local std::string name;
  return name;
}

class ScopedRuleCorruption {
 public:
  explicit ScopedRuleCorruption(std::string op) : previous_(corrupted_rule()) {
    corrupted_rule() = std::move(op);
  }
  ~ScopedRuleCorruption() { corrupted_rule() = previous_; }
  ScopedRuleCorruption(const ScopedRuleCorruption&) = delete;
  ScopedRuleCorruption& operator=(const ScopedRuleCorruption&) = delete;

 private:
  std::string previous_;
};

}  // namespace test_hooks

// ---------------------------------------------------------------------------
// Elementwise ops

enum class ElementwiseOp { add, sub, hadamard, sigmoid, tanh, relu };

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape("add", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return detail::make_result("add", a.shape(), std::move(out), {&a, &b}, [](detail::Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      detail::accumulate(*self.inputs[0], i, self.grad[i]);
      detail::accumulate(*self.inputs[1], i, self.grad[i]);
    }
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return detail::make_result("sub", a.shape(), std::move(out), {&a, &b}, [](detail::Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      detail::accumulate(*self.inputs[0], i, self.grad[i]);
      detail::accumulate(*self.inputs[1], i, -self.grad[i]);
    }
  });
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
  detail::require_same_shape("hadamard", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return detail::make_result("hadamard", a.shape(), std::move(out), {&a, &b},
                             [](detail::Node& self) {
                               auto& lhs = *self.inputs[0];
                               auto& rhs = *self.inputs[1];
                               for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                 detail::accumulate(lhs, i, self.grad[i] * rhs.data[i]);
                                 detail::accumulate(rhs, i, self.grad[i] * lhs.data[i]);
                               }
                             });
}

inline Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x[i];
    // Branch keeps exp() from overflowing for large |v|.
    out[i] = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return detail::make_result("sigmoid", x.shape(), std::move(out), {&x}, [](detail::Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.data[i];
      detail::accumulate(*self.inputs[0], i, self.grad[i] * y * (1.0 - y));
    }
  });
}

inline Tensor tanh(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x[i]);
  return detail::make_result("tanh", x.shape(), std::move(out), {&x}, [](detail::Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.data[i];
      detail::accumulate(*self.inputs[0], i, self.grad[i] * (1.0 - y * y));
    }
  });
}

inline Tensor relu(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return detail::make_result("relu", x.shape(), std::move(out), {&x}, [](detail::Node& self) {
    auto& in = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (in.data[i] > 0.0) detail::accumulate(in, i, self.grad[i]);
    }
  });
}

inline Tensor elementwise(ElementwiseOp op, const Tensor& x) {
  switch (op) {
    case ElementwiseOp::sigmoid: return sigmoid(x);
    case ElementwiseOp::tanh: return tanh(x);
    case ElementwiseOp::relu: return relu(x);
    default: throw ContractError("elementwise: binary op called with one operand");
  }
}

inline Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b) {
  switch (op) {
    case ElementwiseOp::add: return add(a, b);
    case ElementwiseOp::sub: return sub(a, b);
    case ElementwiseOp::hadamard: return hadamard(a, b);
    default: throw ContractError("elementwise: unary op called with two operands");
  }
}

inline Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return detail::make_result("scale", x.shape(), std::move(out), {&x},
                             [factor](detail::Node& self) {
                               for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                 detail::accumulate(*self.inputs[0], i, self.grad[i] * factor);
                               }
                             });
}

/// 1 - x, elementwise.
inline Tensor complement(const Tensor& x) { return sub(Tensor::filled(x.shape(), 1.0), x); }

// ---------------------------------------------------------------------------
// Linear algebra

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError(detail::concat_message("matmul: cannot multiply ", shape_string(a.shape()),
                                                " by ", shape_string(b.shape())));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  const auto lhs = a.data();
  const auto rhs = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = lhs[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * rhs[p * n + j];
    }
  }
  return detail::make_result("matmul", {m, n}, std::move(out), {&a, &b},
                             [m, k, n](detail::Node& self) {
                               auto& A = *self.inputs[0];
                               auto& B = *self.inputs[1];
                               const auto& dz = self.grad;
                               if (A.requires_grad) {
                                 A.ensure_grad();
                                 for (std::size_t i = 0; i < m; ++i)
                                   for (std::size_t p = 0; p < k; ++p) {
                                     double acc = 0.0;
                                     for (std::size_t j = 0; j < n; ++j)
                                       acc += dz[i * n + j] * B.data[p * n + j];
                                     A.grad[i * k + p] += acc;
                                   }
                               }
                               if (B.requires_grad) {
                                 B.ensure_grad();
                                 for (std::size_t i = 0; i < m; ++i)
                                   for (std::size_t p = 0; p < k; ++p) {
                                     const double av = A.data[i * k + p];
                                     for (std::size_t j = 0; j < n; ++j)
                                       B.grad[p * n + j] += av * dz[i * n + j];
                                   }
                               }
                             });
}

/// W[m x k] * x[k] -> [m].
inline Tensor matvec(const Tensor& w, const Tensor& x) {
  if (w.rank() != 2 || x.rank() != 1 || w.dim(1) != x.dim(0)) {
    throw DimensionError(detail::concat_message("matvec: cannot multiply ", shape_string(w.shape()),
                                                " by ", shape_string(x.shape())));
  }
  const std::size_t m = w.dim(0), k = w.dim(1);
  std::vector<double> out(m, 0.0);
  const auto W = w.data();
  const auto v = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += W[i * k + p] * v[p];
    out[i] = acc;
  }
  return detail::make_result("matvec", {m}, std::move(out), {&w, &x}, [m, k](detail::Node& self) {
    auto& W = *self.inputs[0];
    auto& v = *self.inputs[1];
    if (W.requires_grad) {
      W.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) W.grad[i * k + p] += self.grad[i] * v.data[p];
    }
    if (v.requires_grad) {
      v.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) v.grad[p] += self.grad[i] * W.data[i * k + p];
    }
  });
}

inline Tensor transpose(const Tensor& a) {
  detail::require_rank("transpose", a, 2);
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  return detail::make_result("transpose", {n, m}, std::move(out), {&a},
                             [m, n](detail::Node& self) {
                               for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t j = 0; j < n; ++j)
                                   detail::accumulate(*self.inputs[0], i * n + j,
                                                      self.grad[j * m + i]);
                             });
}

// ---------------------------------------------------------------------------
// Shape manipulation

inline Tensor reshape(const Tensor& a, Shape shape) {
  if (element_count(shape) != a.size()) {
    throw DimensionError(detail::concat_message("reshape: cannot view ", shape_string(a.shape()),
                                                " as ", shape_string(shape)));
  }
  return detail::make_result("reshape", std::move(shape), a.to_vector(), {&a},
                             [](detail::Node& self) {
                               for (std::size_t i = 0; i < self.grad.size(); ++i)
                                 detail::accumulate(*self.inputs[0], i, self.grad[i]);
                             });
}

inline Tensor flatten(const Tensor& a) { return reshape(a, {a.size()}); }

/// Concatenation along `axis`; every other dimension must agree. An operand
/// with zero elements is the identity.
inline Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis = 0) {
  if (b.size() == 0 && a.size() != 0) return a;
  if (a.size() == 0 && b.size() != 0) return b;
  bool compatible = a.rank() == b.rank() && axis < a.rank();
  for (std::size_t d = 0; compatible && d < a.rank(); ++d) {
    if (d != axis && a.dim(d) != b.dim(d)) compatible = false;
  }
  if (!compatible) {
    throw DimensionError(detail::concat_message("concat: incompatible shapes ",
                                                shape_string(a.shape()), " and ",
                                                shape_string(b.shape()), " along axis ", axis));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= a.dim(d);
  for (std::size_t d = axis + 1; d < a.rank(); ++d) inner *= a.dim(d);
  const std::size_t block_a = a.dim(axis) * inner;
  const std::size_t block_b = b.dim(axis) * inner;
  Shape shape = a.shape();
  shape[axis] += b.dim(axis);
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  for (std::size_t o = 0; o < outer; ++o) {
    auto da = a.data().subspan(o * block_a, block_a);
    auto db = b.data().subspan(o * block_b, block_b);
    out.insert(out.end(), da.begin(), da.end());
    out.insert(out.end(), db.begin(), db.end());
  }
  return detail::make_result(
      "concat", std::move(shape), std::move(out), {&a, &b},
      [outer, block_a, block_b](detail::Node& self) {
        for (std::size_t o = 0; o < outer; ++o) {
          const std::size_t base = o * (block_a + block_b);
          for (std::size_t i = 0; i < block_a; ++i)
            detail::accumulate(*self.inputs[0], o * block_a + i, self.grad[base + i]);
          for (std::size_t i = 0; i < block_b; ++i)
            detail::accumulate(*self.inputs[1], o * block_b + i, self.grad[base + block_a + i]);
        }
      });
}

/// Stacks rank-1 tensors of equal length into a [count x length] matrix.
inline Tensor stack_rows(std::span<const Tensor> rows) {
  require(!rows.empty(), "stack_rows: no rows given");
  const std::size_t n = rows.front().size();
  std::vector<double> out;
  out.reserve(rows.size() * n);
  for (const auto& r : rows) {
    if (r.rank() != 1 || r.size() != n) {
      throw DimensionError(detail::concat_message("stack_rows: row of shape ",
                                                  shape_string(r.shape()), " does not match [",
                                                  n, "]"));
    }
    out.insert(out.end(), r.data().begin(), r.data().end());
  }
  auto node = std::make_shared<detail::Node>();
  node->op = "stack_rows";
  node->shape = {rows.size(), n};
  node->data = std::move(out);
  if (grad_mode_enabled()) {
    for (const auto& r : rows) node->requires_grad |= r.requires_grad();
  }
  if (node->requires_grad) {
    for (const auto& r : rows) node->inputs.push_back(r.node());
    node->rule = [n](detail::Node& self) {
      for (std::size_t r = 0; r < self.inputs.size(); ++r)
        for (std::size_t j = 0; j < n; ++j)
          detail::accumulate(*self.inputs[r], j, self.grad[r * n + j]);
    };
  }
  return Tensor(std::move(node));
}

/// Row `index` of a matrix, as a rank-1 tensor.
inline Tensor row(const Tensor& a, std::size_t index) {
  detail::require_rank("row", a, 2);
  if (index >= a.dim(0)) {
    throw DimensionError(detail::concat_message("row: index ", index, " out of range for ",
                                                shape_string(a.shape())));
  }
  const std::size_t n = a.dim(1);
  auto values = a.data().subspan(index * n, n);
  return detail::make_result("row", {n}, std::vector<double>(values.begin(), values.end()), {&a},
                             [index, n](detail::Node& self) {
                               for (std::size_t j = 0; j < n; ++j)
                                 detail::accumulate(*self.inputs[0], index * n + j, self.grad[j]);
                             });
}

/// Explicit broadcast of a vector[n] to a matrix[count x n].
inline Tensor repeat_rows(const Tensor& v, std::size_t count) {
  detail::require_rank("repeat_rows", v, 1);
  const std::size_t n = v.size();
  std::vector<double> out;
  out.reserve(count * n);
  for (std::size_t r = 0; r < count; ++r) out.insert(out.end(), v.data().begin(), v.data().end());
  return detail::make_result("repeat_rows", {count, n}, std::move(out), {&v},
                             [count, n](detail::Node& self) {
                               for (std::size_t r = 0; r < count; ++r)
                                 for (std::size_t j = 0; j < n; ++j)
                                   detail::accumulate(*self.inputs[0], j, self.grad[r * n + j]);
                             });
}

// ---------------------------------------------------------------------------
// Reductions

inline Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return detail::make_result("sum", {}, {total}, {&x}, [](detail::Node& self) {
    auto& in = *self.inputs[0];
    for (std::size_t i = 0; i < in.data.size(); ++i) detail::accumulate(in, i, self.grad[0]);
  });
}

/// Numerically stable softmax along `axis` (max subtracted before exp).
inline Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank() || x.dim(axis) == 0) {
    throw DimensionError(detail::concat_message("softmax: axis ", axis, " is empty or absent in ",
                                                shape_string(x.shape())));
  }
  for (double v : x.data()) {
    if (std::isnan(v)) throw NumericError("softmax: NaN in input");
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= x.dim(d);
  for (std::size_t d = axis + 1; d < x.rank(); ++d) inner *= x.dim(d);
  const std::size_t n = x.dim(axis);
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double peak = x[base];
      for (std::size_t j = 1; j < n; ++j) peak = std::max(peak, x[base + j * inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        out[base + j * inner] = std::exp(x[base + j * inner] - peak);
        total += out[base + j * inner];
      }
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] /= total;
    }
  }
  return detail::make_result("softmax", x.shape(), std::move(out), {&x},
                             [outer, inner, n](detail::Node& self) {
                               for (std::size_t o = 0; o < outer; ++o) {
                                 for (std::size_t in = 0; in < inner; ++in) {
                                   const std::size_t base = o * n * inner + in;
                                   double dot = 0.0;
                                   for (std::size_t j = 0; j < n; ++j)
                                     dot += self.grad[base + j * inner] * self.data[base + j * inner];
                                   for (std::size_t j = 0; j < n; ++j) {
                                     const std::size_t k = base + j * inner;
                                     detail::accumulate(*self.inputs[0], k,
                                                        self.data[k] * (self.grad[k] - dot));
                                   }
                                 }
                               }
                             });
}

// ---------------------------------------------------------------------------
// Tape

/// Topologically ordered record of the ops reachable from a root tensor.
class Tape {
 public:
  struct Entry {
    std::string op;
    std::vector<std::size_t> inputs;  // positions of recorded inputs
  };

  static Tape record(const Tensor& root) {
    Tape tape;
    if (!root.requires_grad()) return tape;
    std::unordered_map<const detail::Node*, bool> visited;
    // Iterative post-order DFS; LSTM chains get deep enough to matter.
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    visited[root.node().get()] = true;
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->inputs.size()) {
        detail::Node* child = node->inputs[next++].get();
        if (child->requires_grad && !visited[child]) {
          visited[child] = true;
          stack.emplace_back(child, 0);
        }
        continue;
      }
      tape.order_.push_back(node);
      stack.pop_back();
    }
    tape.root_ = root.node();
    return tape;
  }

  std::size_t size() const { return order_.size(); }

  std::vector<Entry> entries() const {
    std::unordered_map<const detail::Node*, std::size_t> position;
    for (std::size_t i = 0; i < order_.size(); ++i) position[order_[i]] = i;
    std::vector<Entry> out;
    out.reserve(order_.size());
    for (const auto* node : order_) {
      Entry e{node->op, {}};
      for (const auto& in : node->inputs) {
        if (auto it = position.find(in.get()); it != position.end()) e.inputs.push_back(it->second);
      }
      out.push_back(std::move(e));
    }
    return out;
  }

  /// Seeds d(root)/d(root) = 1 and applies every local rule in reverse order.
  /// Leaf gradients accumulate across calls; intermediate gradients are reset.
  void replay() {
    if (order_.empty()) return;
    for (auto* node : order_) {
      if (!node->is_leaf()) node->grad.assign(node->data.size(), 0.0);
    }
    root_->ensure_grad();
    root_->grad[0] += 1.0;
    const std::string& corrupted = test_hooks::corrupted_rule();
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
      detail::Node* node = *it;
      if (!node->rule) continue;
      if (!corrupted.empty() && corrupted == node->op) {
        for (double& g : node->grad) g *= 2.0;
      }
      node->rule(*node);
    }
  }

 private:
  std::vector<detail::Node*> order_;
  std::shared_ptr<detail::Node> root_;
};

/// Populates grad() of every requires_grad leaf reachable from `loss`.
inline void backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " + shape_string(loss.shape()));
  }
  Tape::record(loss).replay();
}

}  // namespace favoa
