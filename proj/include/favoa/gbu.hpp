// SPDX-License-Identifier: Apache-2.0
//
// Gated bimodal unit:
//   h1 = tanh(W1 e1 + b1)
//   h2 = tanh(W2 e2 + b2)
//   p  = sigmoid(Wp (e1 || e2) + bp)
//   z  = p * h1 + (1 - p) * h2
//
// p is kept in the output because downstream analysis reads it as the
// per-element weight given to modality 1.
#pragma once

#include <string>
#include <vector>

#include "favoa/layers.hpp"

namespace favoa {

struct GbuParams {
  Tensor gate_weight;  // [d x 2d]
  Tensor gate_bias;    // [d]
  Tensor w1, b1;       // [d x d], [d]
  Tensor w2, b2;

  std::size_t dim() const { return w1.dim(0); }

  /// Weights uniform in +-1/sqrt(fan_in); biases start at zero.
  static GbuParams init(std::size_t d, Rng& rng) {
    GbuParams p;
    p.gate_weight = uniform_init({d, 2 * d}, 2 * d, rng);
    p.gate_bias = Tensor::zeros({d}, true);
    p.w1 = uniform_init({d, d}, d, rng);
    p.b1 = Tensor::zeros({d}, true);
    p.w2 = uniform_init({d, d}, d, rng);
    p.b2 = Tensor::zeros({d}, true);
    return p;
  }

  std::vector<NamedTensor> named_tensors(const std::string& prefix) const {
    return {{prefix + ".gate_weight", gate_weight}, {prefix + ".gate_bias", gate_bias},
            {prefix + ".w1", w1},                   {prefix + ".b1", b1},
            {prefix + ".w2", w2},                   {prefix + ".b2", b2}};
  }

  void validate() const {
    const std::size_t d = dim();
    const bool ok = gate_weight.shape() == Shape{d, 2 * d} && gate_bias.shape() == Shape{d} &&
                    w1.shape() == Shape{d, d} && b1.shape() == Shape{d} &&
                    w2.shape() == Shape{d, d} && b2.shape() == Shape{d};
    if (!ok) throw DimensionError(detail::concat_message("gbu: parameters inconsistent with d=", d));
  }
};

struct GbuOutput {
  Tensor z;
  Tensor p;
  Tensor h1;
  Tensor h2;
};

inline GbuOutput gbu_forward(const GbuParams& params, const Tensor& e1, const Tensor& e2) {
  const std::size_t d = params.dim();
  if (e1.shape() != Shape{d} || e2.shape() != Shape{d}) {
    throw DimensionError(detail::concat_message("gbu: inputs ", shape_string(e1.shape()), " and ",
                                                shape_string(e2.shape()), " do not match d=", d));
  }
  GbuOutput out;
  out.h1 = tanh(add(matvec(params.w1, e1), params.b1));
  out.h2 = tanh(add(matvec(params.w2, e2), params.b2));
  out.p = sigmoid(add(matvec(params.gate_weight, concat(e1, e2)), params.gate_bias));
  out.z = add(hadamard(out.p, out.h1), hadamard(complement(out.p), out.h2));
  return out;
}

/// Parameters for the mirrored unit: running it on (e2, e1) reproduces z and
/// yields gate 1 - p. Modality transforms are exchanged, the two column blocks
/// of the gate weight are exchanged and the whole gate is negated.
inline GbuParams swap_params(const GbuParams& params) {
  const std::size_t d = params.dim();
  std::vector<double> gate(d * 2 * d);
  const auto src = params.gate_weight.data();
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      gate[r * 2 * d + c] = -src[r * 2 * d + d + c];
      gate[r * 2 * d + d + c] = -src[r * 2 * d + c];
    }
  }
  std::vector<double> bias(d);
  for (std::size_t i = 0; i < d; ++i) bias[i] = -params.gate_bias[i];

  GbuParams out;
  out.gate_weight = Tensor::from({d, 2 * d}, std::move(gate), params.gate_weight.requires_grad());
  out.gate_bias = Tensor::from({d}, std::move(bias), params.gate_bias.requires_grad());
  out.w1 = params.w2.detach(params.w2.requires_grad());
  out.b1 = params.b2.detach(params.b2.requires_grad());
  out.w2 = params.w1.detach(params.w1.requires_grad());
  out.b2 = params.b1.detach(params.b1.requires_grad());
  return out;
}

}  // namespace favoa
