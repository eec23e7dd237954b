// SPDX-License-Identifier: Apache-2.0
//
// Full detector graph:
//
//   u (per frame x speaker) -> context tokens [L*S x D_u] -> self-attention
//     -> LSTM (frame-major token order) -> s [L*S*D_c]
//   a -> ReLU -> linear -> a' [L*S*D_c]
//   GBU(e1 = a', e2 = s) -> z -> linear -> softmax -> q
//
// The voice branch sits in the gate's first slot, so p measures how much
// each element of z is driven by face-voice association.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "favoa/context.hpp"
#include "favoa/dataset.hpp"
#include "favoa/gbu.hpp"
#include "favoa/layers.hpp"
#include "favoa/provider.hpp"

namespace favoa {

struct ModelConfig {
  std::size_t ste_dim = 32;      // D_u
  std::size_t voice_dim = 16;    // D_a
  std::size_t context_dim = 16;  // D_c
  std::size_t frames = 3;        // L
  std::size_t speakers = 2;      // S
  long hop = 1;                  // tau
  std::size_t key_dim = 64;      // d_k
  bool context_only = false;     // ablation: voice embedding replaced by zeros

  std::size_t tokens() const { return frames * speakers; }
  std::size_t fused_dim() const { return tokens() * context_dim; }

  ContextPlan plan(long center) const { return {center, frames, speakers, hop}; }

  void validate() const {
    if (ste_dim == 0 || voice_dim == 0 || context_dim == 0 || speakers == 0 || key_dim == 0 ||
        hop <= 0)
      throw ConfigError("model config: all dimensions and the hop must be positive");
    if (frames == 0 || frames % 2 == 0)
      throw ConfigError("model config: frame count L must be odd, got " + std::to_string(frames));
  }

  bool operator==(const ModelConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"ste_dim", c.ste_dim},   {"voice_dim", c.voice_dim}, {"context_dim", c.context_dim},
       {"frames", c.frames},     {"speakers", c.speakers},   {"hop", c.hop},
       {"key_dim", c.key_dim},   {"context_only", c.context_only}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.ste_dim = j.value("ste_dim", c.ste_dim);
  c.voice_dim = j.value("voice_dim", c.voice_dim);
  c.context_dim = j.value("context_dim", c.context_dim);
  c.frames = j.value("frames", c.frames);
  c.speakers = j.value("speakers", c.speakers);
  c.hop = j.value("hop", c.hop);
  c.key_dim = j.value("key_dim", c.key_dim);
  c.context_only = j.value("context_only", c.context_only);
}

struct ParameterGroup {
  std::string name;
  std::vector<NamedTensor> tensors;
  bool frozen = false;
};

struct FavoaParams {
  AttentionParams attention;
  LstmParams lstm;
  LinearParams fv_proj;  // D_a -> L*S*D_c, applied after ReLU
  GbuParams gbu;         // d = L*S*D_c
  LinearParams head;     // L*S*D_c -> 2

  static FavoaParams init(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    FavoaParams p;
    p.attention = AttentionParams::init(config.ste_dim, config.key_dim, rng);
    p.lstm = LstmParams::init(config.ste_dim, config.context_dim, rng);
    p.fv_proj = LinearParams::init(config.voice_dim, config.fused_dim(), rng);
    p.gbu = GbuParams::init(config.fused_dim(), rng);
    p.head = LinearParams::init(config.fused_dim(), 2, rng);
    return p;
  }

  /// Groups in a fixed order; this order is also the serialization order.
  std::vector<ParameterGroup> groups() const {
    return {{"attention", attention.named_tensors("attention"), false},
            {"lstm", lstm.named_tensors("lstm"), false},
            {"fv_proj", fv_proj.named_tensors("fv_proj"), !fv_proj.trainable},
            {"gbu", gbu.named_tensors("gbu"), false},
            {"head", head.named_tensors("head"), !head.trainable}};
  }

  std::vector<NamedTensor> named_tensors() const {
    std::vector<NamedTensor> out;
    for (auto& g : groups())
      for (auto& t : g.tensors) out.push_back(std::move(t));
    return out;
  }

  /// Deep copy; plain copies share tensor storage.
  FavoaParams clone() const {
    FavoaParams out = *this;
    auto src = named_tensors();
    auto dst = out.mutable_tensors();
    for (std::size_t i = 0; i < src.size(); ++i)
      *dst[i] = src[i].tensor.detach(src[i].tensor.requires_grad());
    return out;
  }

  std::vector<Tensor*> mutable_tensors() {
    return {&attention.query, &attention.key,  &attention.value, &attention.output,
            &lstm.w_input,    &lstm.w_forget,  &lstm.w_output,   &lstm.w_cell,
            &lstm.b_input,    &lstm.b_forget,  &lstm.b_output,   &lstm.b_cell,
            &fv_proj.weight,  &fv_proj.bias,   &gbu.gate_weight, &gbu.gate_bias,
            &gbu.w1,          &gbu.b1,         &gbu.w2,          &gbu.b2,
            &head.weight,     &head.bias};
  }

  /// Throws ConfigError naming the first link of the dimension chain that breaks.
  void validate(const ModelConfig& config) const {
    auto check = [](bool ok, const std::string& what) {
      if (!ok) throw ConfigError("dimension chain broken at " + what);
    };
    const std::size_t d = config.fused_dim();
    check(attention.model_dim() == config.ste_dim && attention.key_dim() == config.key_dim,
          "attention");
    check(attention.output.shape() == Shape{config.ste_dim, config.key_dim}, "attention.output");
    check(lstm.input_dim() == config.ste_dim && lstm.hidden_dim() == config.context_dim, "lstm");
    check(fv_proj.in_dim() == config.voice_dim && fv_proj.out_dim() == d, "fv_proj");
    check(gbu.dim() == d, "gbu");
    try {
      gbu.validate();
    } catch (const DimensionError& e) {
      throw ConfigError(e.what());
    }
    check(head.in_dim() == d && head.out_dim() == 2, "head");
  }
};

/// Parameter groups the optimizer updates; the embedding provider is never listed.
inline std::vector<ParameterGroup> trainable_parameters(const FavoaParams& params) {
  std::vector<ParameterGroup> out;
  for (auto& g : params.groups())
    if (!g.frozen) out.push_back(std::move(g));
  return out;
}

struct ForwardTrace {
  double q = 0.5;  // probability of "speaking audible"
  Tensor logits;   // [2], attached to the graph
  Tensor p;        // gate, [L*S*D_c]
  Tensor z;
  Tensor s;
  Tensor a_prime;
  std::vector<int> speaker_order;
};

class FavoaModel {
 public:
  FavoaModel(FavoaParams params, ModelConfig config, const EmbeddingProvider& provider)
      : params_(std::move(params)), config_(config), provider_(&provider) {
    config_.validate();
    params_.validate(config_);
    if (provider.ste_dim() != config_.ste_dim || provider.fv_dim() != config_.voice_dim) {
      throw ConfigError(detail::concat_message(
          "provider dims (ste ", provider.ste_dim(), ", fv ", provider.fv_dim(),
          ") do not match model config (", config_.ste_dim, ", ", config_.voice_dim, ")"));
    }
  }

  ForwardTrace forward(const EntryContext& entry) const {
    const ContextLayout layout = plan_context(config_.plan(entry.frame), entry.clip_first,
                                              entry.clip_last, entry.tracks, entry.target_id);
    std::vector<Tensor> cells;
    cells.reserve(layout.refs.size());
    for (std::size_t i = 0; i < layout.refs.size(); ++i) {
      const long frame = layout.frames[i / config_.speakers];
      cells.push_back(provider_->ste({entry.scene, layout.refs[i]}, {entry.scene, frame}));
    }
    const Tensor tokens = stack_rows(cells);

    ForwardTrace trace;
    trace.speaker_order = layout.speaker_order;
    const Tensor attended = attention_forward(params_.attention, tokens);
    trace.s = flatten(lstm_forward(params_.lstm, attended));

    const Tensor voice = config_.context_only ? Tensor::zeros({config_.voice_dim})
                                              : provider_->fv({entry.scene, entry.frame});
    trace.a_prime = linear_forward(params_.fv_proj, relu(voice));

    const GbuOutput fused = gbu_forward(params_.gbu, trace.a_prime, trace.s);
    trace.p = fused.p;
    trace.z = fused.z;
    trace.logits = linear_forward(params_.head, fused.z);
    trace.q = softmax(trace.logits, 0)[1];
    return trace;
  }

  const FavoaParams& params() const { return params_; }
  FavoaParams& params() { return params_; }
  const ModelConfig& config() const { return config_; }
  const EmbeddingProvider& provider() const { return *provider_; }

 private:
  FavoaParams params_;
  ModelConfig config_;
  const EmbeddingProvider* provider_;
};

inline ForwardTrace forward(const FavoaParams& params, const ModelConfig& config,
                            const EmbeddingProvider& provider, const EntryContext& entry) {
  return FavoaModel(params, config, provider).forward(entry);
}

}  // namespace favoa
