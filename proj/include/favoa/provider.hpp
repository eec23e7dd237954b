// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "favoa/dataset.hpp"
#include "favoa/layers.hpp"

namespace favoa {

struct FaceRef {
  std::size_t scene = 0;
  std::size_t row = 0;  // row of the scene's face feature table
};

struct AudioRef {
  std::size_t scene = 0;
  long frame = 0;
};

/// Source of the short-term (face + audio) embedding u and the voice
/// embedding a. Implementations must be deterministic per reference.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual Tensor ste(const FaceRef& face, const AudioRef& audio) const = 0;
  virtual Tensor fv(const AudioRef& audio) const = 0;
  virtual std::size_t ste_dim() const = 0;
  virtual std::size_t fv_dim() const = 0;

  virtual bool frozen() const { return true; }
  virtual std::vector<NamedTensor> parameters() const { return {}; }
};

/// Serves precomputed feature vectors from a dataset through fixed linear
/// encoders. An encoder is the identity when input and output dims agree and
/// a seeded random projection otherwise; neither is ever trained.
class FeatureProvider final : public EmbeddingProvider {
 public:
  FeatureProvider(const Dataset& data, std::size_t ste_dim, std::size_t fv_dim,
                  std::uint64_t seed = 0)
      : data_(&data) {
    Rng rng(seed);
    ste_encoder_ = make_encoder(data.face_dim, ste_dim, rng);
    fv_encoder_ = make_encoder(data.audio_dim, fv_dim, rng);
  }

  Tensor ste(const FaceRef& face, const AudioRef&) const override {
    const auto raw = data_->scenes.at(face.scene).face.row(face.row);
    return linear_forward(ste_encoder_, Tensor::vector({raw.begin(), raw.end()}));
  }

  Tensor fv(const AudioRef& audio) const override {
    const Scene& scene = data_->scenes.at(audio.scene);
    require(audio.frame >= scene.first_frame && audio.frame <= scene.last_frame, "audio frame ",
            audio.frame, " outside scene ", scene.id);
    const auto raw = scene.audio.row(static_cast<std::size_t>(audio.frame - scene.first_frame));
    return linear_forward(fv_encoder_, Tensor::vector({raw.begin(), raw.end()}));
  }

  std::size_t ste_dim() const override { return ste_encoder_.out_dim(); }
  std::size_t fv_dim() const override { return fv_encoder_.out_dim(); }

  std::vector<NamedTensor> parameters() const override {
    auto out = ste_encoder_.named_tensors("provider.ste");
    for (auto& t : fv_encoder_.named_tensors("provider.fv")) out.push_back(std::move(t));
    return out;
  }

 private:
  static LinearParams make_encoder(std::size_t in, std::size_t out, Rng& rng) {
    if (in == out) {
      std::vector<double> eye(in * in, 0.0);
      for (std::size_t i = 0; i < in; ++i) eye[i * in + i] = 1.0;
      return {Tensor::matrix(in, in, std::move(eye)), Tensor::zeros({in}), false};
    }
    return LinearParams::init(in, out, rng, /*trainable=*/false);
  }

  const Dataset* data_;
  LinearParams ste_encoder_;
  LinearParams fv_encoder_;
};

}  // namespace favoa
