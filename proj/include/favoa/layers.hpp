// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "favoa/gradcheck.hpp"
#include "favoa/tensor.hpp"

namespace favoa {

using Rng = std::mt19937_64;

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
inline Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng, bool requires_grad = true) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(element_count(shape));
  for (double& v : values) v = dist(rng);
  return Tensor::from(std::move(shape), std::move(values), requires_grad);
}

// ---------------------------------------------------------------------------

struct LinearParams {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]
  bool trainable = true;

  std::size_t in_dim() const { return weight.dim(1); }
  std::size_t out_dim() const { return weight.dim(0); }

  static LinearParams init(std::size_t in, std::size_t out, Rng& rng, bool trainable = true) {
    LinearParams p;
    p.weight = uniform_init({out, in}, in, rng, trainable);
    p.bias = uniform_init({out}, in, rng, trainable);
    p.trainable = trainable;
    return p;
  }

  std::vector<NamedTensor> named_tensors(const std::string& prefix) const {
    return {{prefix + ".weight", weight}, {prefix + ".bias", bias}};
  }
};

/// W x + b along the last axis of a vector[in] or a matrix[N x in].
inline Tensor linear_forward(const LinearParams& p, const Tensor& x) {
  if (x.rank() == 1) {
    if (x.dim(0) != p.in_dim()) {
      throw DimensionError(detail::concat_message("linear: input ", shape_string(x.shape()),
                                                  " does not match weight ",
                                                  shape_string(p.weight.shape())));
    }
    return add(matvec(p.weight, x), p.bias);
  }
  if (x.rank() != 2 || x.dim(1) != p.in_dim()) {
    throw DimensionError(detail::concat_message("linear: input ", shape_string(x.shape()),
                                                " does not match weight ",
                                                shape_string(p.weight.shape())));
  }
  return add(matmul(x, transpose(p.weight)), repeat_rows(p.bias, x.dim(0)));
}

// ---------------------------------------------------------------------------

struct LstmParams {
  // Each gate weight is [hidden x (input + hidden)] acting on (x_t || h_{t-1}).
  Tensor w_input, w_forget, w_output, w_cell;
  Tensor b_input, b_forget, b_output, b_cell;

  std::size_t hidden_dim() const { return w_input.dim(0); }
  std::size_t input_dim() const { return w_input.dim(1) - w_input.dim(0); }

  static LstmParams init(std::size_t input, std::size_t hidden, Rng& rng) {
    const std::size_t fan_in = input + hidden;
    LstmParams p;
    for (Tensor* w : {&p.w_input, &p.w_forget, &p.w_output, &p.w_cell})
      *w = uniform_init({hidden, fan_in}, fan_in, rng);
    for (Tensor* b : {&p.b_input, &p.b_forget, &p.b_output, &p.b_cell})
      *b = uniform_init({hidden}, fan_in, rng);
    return p;
  }

  std::vector<NamedTensor> named_tensors(const std::string& prefix) const {
    return {{prefix + ".w_input", w_input},   {prefix + ".w_forget", w_forget},
            {prefix + ".w_output", w_output}, {prefix + ".w_cell", w_cell},
            {prefix + ".b_input", b_input},   {prefix + ".b_forget", b_forget},
            {prefix + ".b_output", b_output}, {prefix + ".b_cell", b_cell}};
  }
};

/// Hidden state at every step of a zero-initialised LSTM over seq[T x input].
inline Tensor lstm_forward(const LstmParams& p, const Tensor& seq) {
  if (seq.rank() != 2 || seq.dim(0) == 0 || seq.dim(1) != p.input_dim()) {
    throw DimensionError(detail::concat_message("lstm: sequence ", shape_string(seq.shape()),
                                                " does not match input dim ", p.input_dim()));
  }
  const std::size_t hidden = p.hidden_dim();
  Tensor h = Tensor::zeros({hidden});
  Tensor c = Tensor::zeros({hidden});
  std::vector<Tensor> outputs;
  outputs.reserve(seq.dim(0));
  for (std::size_t t = 0; t < seq.dim(0); ++t) {
    const Tensor xh = concat(row(seq, t), h);
    const Tensor i = sigmoid(add(matvec(p.w_input, xh), p.b_input));
    const Tensor f = sigmoid(add(matvec(p.w_forget, xh), p.b_forget));
    const Tensor o = sigmoid(add(matvec(p.w_output, xh), p.b_output));
    const Tensor g = tanh(add(matvec(p.w_cell, xh), p.b_cell));
    c = add(hadamard(f, c), hadamard(i, g));
    h = hadamard(o, tanh(c));
    outputs.push_back(h);
  }
  return stack_rows(outputs);
}

// ---------------------------------------------------------------------------

struct AttentionParams {
  Tensor query;   // [d_k x d_in]
  Tensor key;     // [d_k x d_in]
  Tensor value;   // [d_k x d_in]
  Tensor output;  // [d_in x d_k]

  std::size_t key_dim() const { return query.dim(0); }
  std::size_t model_dim() const { return query.dim(1); }

  static AttentionParams init(std::size_t d_in, std::size_t d_k, Rng& rng) {
    require(d_k > 0 && d_in > 0, "attention: dimensions must be positive");
    AttentionParams p;
    p.query = uniform_init({d_k, d_in}, d_in, rng);
    p.key = uniform_init({d_k, d_in}, d_in, rng);
    p.value = uniform_init({d_k, d_in}, d_in, rng);
    p.output = uniform_init({d_in, d_k}, d_k, rng);
    return p;
  }

  std::vector<NamedTensor> named_tensors(const std::string& prefix) const {
    return {{prefix + ".query", query},
            {prefix + ".key", key},
            {prefix + ".value", value},
            {prefix + ".output", output}};
  }
};

struct AttentionOutput {
  Tensor out;      // [N x d_in]
  Tensor weights;  // [N x N], row i = distribution of query i over keys
};

/// Single-head scaled dot-product self-attention over tokens[N x d_in].
inline AttentionOutput attention(const AttentionParams& p, const Tensor& tokens) {
  if (tokens.rank() != 2 || tokens.dim(0) == 0 || tokens.dim(1) != p.model_dim()) {
    throw DimensionError(detail::concat_message("attention: tokens ", shape_string(tokens.shape()),
                                                " do not match model dim ", p.model_dim()));
  }
  const Tensor q = matmul(tokens, transpose(p.query));
  const Tensor k = matmul(tokens, transpose(p.key));
  const Tensor v = matmul(tokens, transpose(p.value));
  const Tensor scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(double(p.key_dim())));
  const Tensor weights = softmax(scores, 1);
  const Tensor mixed = matmul(weights, v);
  return {matmul(mixed, transpose(p.output)), weights};
}

inline Tensor attention_forward(const AttentionParams& p, const Tensor& tokens) {
  return attention(p, tokens).out;
}

// ---------------------------------------------------------------------------

/// Two-class cross-entropy over raw logits, index 1 being the positive class.
/// Computed as logsumexp(logits) - logits[label].
inline Tensor softmax_cross_entropy(const Tensor& logits, int label) {
  if (logits.rank() != 1 || logits.size() != 2) {
    throw DimensionError("softmax_cross_entropy: expected two logits, got " +
                         shape_string(logits.shape()));
  }
  require(label == 0 || label == 1, "softmax_cross_entropy: label must be 0 or 1, got ", label);
  const double peak = std::max(logits[0], logits[1]);
  const double lse = peak + std::log(std::exp(logits[0] - peak) + std::exp(logits[1] - peak));
  const double value = lse - logits[static_cast<std::size_t>(label)];
  const double q1 = std::exp(logits[1] - lse);
  const double q0 = std::exp(logits[0] - lse);
  return detail::make_result("softmax_cross_entropy", {}, {value}, {&logits},
                             [q0, q1, label](detail::Node& self) {
                               const double g = self.grad[0];
                               detail::accumulate(*self.inputs[0], 0, g * (q0 - (label == 0)));
                               detail::accumulate(*self.inputs[0], 1, g * (q1 - (label == 1)));
                             });
}

}  // namespace favoa
