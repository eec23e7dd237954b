// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference checks for every layer and for the full detector.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "favoa/gbu.hpp"
#include "favoa/gradcheck.hpp"
#include "favoa/layers.hpp"
#include "favoa/model.hpp"
#include "favoa/synth.hpp"

namespace favoa {

struct GradientSuiteOptions {
  ModelConfig dims;                  // desk dimensions by default
  double step = 1e-5;
  // The full graph is deep enough that f64 rounding at step 1e-5 swamps its
  // smallest gradients; a larger step keeps truncation and rounding balanced.
  double model_step = 6e-4;
  double tolerance = 1e-4;
  std::size_t layer_max_per_leaf = 256;
  std::size_t model_max_per_leaf = 48;
};

struct GradientCase {
  std::string name;
  GradientCheckReport report;
};

namespace detail {

inline Tensor random_leaf(Shape shape, Rng& rng) { return uniform_init(std::move(shape), 1, rng); }

inline std::vector<NamedTensor> with(std::vector<NamedTensor> leaves, const std::string& name,
                                     const Tensor& t) {
  leaves.push_back({name, t});
  return leaves;
}

}  // namespace detail

inline GradientCase check_linear(std::uint64_t seed, const GradientSuiteOptions& o = {}) {
  Rng rng(seed);
  const auto params = LinearParams::init(o.dims.voice_dim, o.dims.fused_dim(), rng);
  const Tensor x = detail::random_leaf({o.dims.voice_dim}, rng);
  const Tensor r = uniform_init({o.dims.fused_dim()}, 1, rng, false);
  return {"linear", finite_difference_check([&] { return sum(hadamard(linear_forward(params, x), r)); },
                                            detail::with(params.named_tensors("linear"), "x", x),
                                            o.step, o.tolerance, o.layer_max_per_leaf, seed)};
}

inline GradientCase check_lstm(std::uint64_t seed, const GradientSuiteOptions& o = {}) {
  Rng rng(seed);
  auto params = LstmParams::init(o.dims.ste_dim, o.dims.context_dim, rng);
  const Tensor seq = detail::random_leaf({o.dims.tokens(), o.dims.ste_dim}, rng);
  const Tensor r = uniform_init({o.dims.tokens(), o.dims.context_dim}, 1, rng, false);
  return {"lstm", finite_difference_check([&] { return sum(hadamard(lstm_forward(params, seq), r)); },
                                          detail::with(params.named_tensors("lstm"), "sequence", seq),
                                          o.step, o.tolerance, o.layer_max_per_leaf, seed)};
}

inline GradientCase check_attention(std::uint64_t seed, const GradientSuiteOptions& o = {}) {
  Rng rng(seed);
  const auto params = AttentionParams::init(o.dims.ste_dim, o.dims.key_dim, rng);
  const Tensor tokens = detail::random_leaf({o.dims.tokens(), o.dims.ste_dim}, rng);
  const Tensor r = uniform_init({o.dims.tokens(), o.dims.ste_dim}, 1, rng, false);
  return {"attention",
          finite_difference_check([&] { return sum(hadamard(attention_forward(params, tokens), r)); },
                                  detail::with(params.named_tensors("attention"), "tokens", tokens),
                                  o.step, o.tolerance, o.layer_max_per_leaf, seed)};
}

inline GradientCase check_gbu(std::uint64_t seed, const GradientSuiteOptions& o = {}) {
  Rng rng(seed);
  const std::size_t d = o.dims.fused_dim();
  auto params = GbuParams::init(d, rng);
  for (Tensor* b : {&params.gate_bias, &params.b1, &params.b2})
    *b = detail::random_leaf({d}, rng);
  const Tensor e1 = detail::random_leaf({d}, rng);
  const Tensor e2 = detail::random_leaf({d}, rng);
  const Tensor r = uniform_init({d}, 1, rng, false);
  auto leaves = detail::with(detail::with(params.named_tensors("gbu"), "e1", e1), "e2", e2);
  return {"gbu", finite_difference_check([&] { return sum(hadamard(gbu_forward(params, e1, e2).z, r)); },
                                         leaves, o.step, o.tolerance, o.layer_max_per_leaf, seed)};
}

inline GradientCase check_cross_entropy(std::uint64_t seed, const GradientSuiteOptions& o = {}) {
  Rng rng(seed);
  Tensor logits = Tensor::vector(detail::normal_vector(2, 2.0, rng));
  logits.set_requires_grad(true);
  const int label = static_cast<int>(seed % 2);
  return {"softmax_cross_entropy",
          finite_difference_check([&] { return softmax_cross_entropy(logits, label); },
                                  {{"logits", logits}}, o.step, o.tolerance)};
}

/// One entry of a small generated scene through the whole graph.
inline GradientCase check_model(std::uint64_t seed, const GradientSuiteOptions& o = {}) {
  GeneratorConfig g;
  g.seed = seed;
  g.scenes = 1;
  g.min_persons = 2;
  g.frames = 7;
  g.face_dim = o.dims.ste_dim;
  g.audio_dim = o.dims.voice_dim;
  g.code_dim = std::min(g.face_dim, g.audio_dim) / 2;
  g.val_fraction = 0.0;
  const Dataset data = generate(g);
  const FeatureProvider provider(data, o.dims.ste_dim, o.dims.voice_dim, seed);
  FavoaParams params = FavoaParams::init(o.dims, seed);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  for (Tensor* b : {&params.gbu.gate_bias, &params.gbu.b1, &params.gbu.b2})
    *b = detail::random_leaf(b->shape(), rng);
  const FavoaModel model(params, o.dims, provider);
  const auto entries = data.entries();
  const EntryRef entry = entries[seed % entries.size()];
  const int label = map_labels(data.label(entry)) == BinaryLabel::positive ? 1 : 0;
  return {"favoa", finite_difference_check(
                       [&] { return softmax_cross_entropy(model.forward(data.context(entry)).logits, label); },
                       params.named_tensors(), o.model_step, o.tolerance, o.model_max_per_leaf, seed)};
}

inline std::vector<GradientCase> run_gradient_suite(std::uint64_t seed,
                                                    const GradientSuiteOptions& o = {}) {
  return {check_linear(seed, o), check_lstm(seed, o), check_attention(seed, o),
          check_gbu(seed, o),    check_cross_entropy(seed, o), check_model(seed, o)};
}

}  // namespace favoa
