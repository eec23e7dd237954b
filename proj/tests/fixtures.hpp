// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "favoa/favoa.hpp"

namespace fixture {

inline favoa::GeneratorConfig small_generator(std::uint64_t seed = 3, std::size_t scenes = 6) {
  favoa::GeneratorConfig g;
  g.seed = seed;
  g.scenes = scenes;
  g.min_persons = 1;
  g.max_persons = 3;
  g.frames = 8;
  return g;
}

inline favoa::Dataset small_dataset(std::uint64_t seed = 3, std::size_t scenes = 6) {
  return favoa::generate(small_generator(seed, scenes));
}

/// Desk dimensions with a narrow attention key so tests stay fast.
inline favoa::ModelConfig desk_config() {
  favoa::ModelConfig c;
  c.key_dim = 8;
  return c;
}

/// Every parameter set to zero.
inline favoa::FavoaParams zero_params(const favoa::ModelConfig& c) {
  auto p = favoa::FavoaParams::init(c, 0);
  for (favoa::Tensor* t : p.mutable_tensors()) *t = favoa::Tensor::zeros(t->shape(), t->requires_grad());
  return p;
}

}  // namespace fixture
