// SPDX-License-Identifier: Apache-2.0
//
// Tensor archives (little-endian):
//
//   char[8]  magic ("FAVOAPRM" parameters, "FAVOACKP" checkpoints)
//   u32      version
//   u32      entry count, then per entry: str name, u64 value   (dimension table)
//   u32      tensor count, then per tensor:
//              str name, u32 rank, u64 dims[rank], f64 values[prod(dims)]
//
// str = u16 length + bytes.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "favoa/binary_io.hpp"
#include "favoa/model.hpp"

namespace favoa {

inline constexpr std::uint32_t kArchiveVersion = 1;

struct TensorArchive {
  std::vector<std::pair<std::string, std::uint64_t>> dimensions;
  std::vector<NamedTensor> tensors;

  std::uint64_t dimension(const std::string& name) const {
    for (const auto& [k, v] : dimensions)
      if (k == name) return v;
    throw FormatError("archive has no dimension entry '" + name + "'");
  }
};

inline void write_archive(const std::filesystem::path& path, const char (&magic)[9],
                          const TensorArchive& archive) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  io::write_magic(out, magic);
  io::write_le<std::uint32_t>(out, kArchiveVersion);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(archive.dimensions.size()));
  for (const auto& [name, value] : archive.dimensions) {
    io::write_string(out, name);
    io::write_le<std::uint64_t>(out, value);
  }
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(archive.tensors.size()));
  for (const auto& [name, tensor] : archive.tensors) {
    io::write_string(out, name);
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) io::write_le<std::uint64_t>(out, d);
    for (double v : tensor.data()) io::write_le<double>(out, v);
  }
  if (!out) throw ConfigError("write failed for " + path.string());
}

inline TensorArchive read_archive(const std::filesystem::path& path, const char (&magic)[9]) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  const std::string source = path.string();
  io::expect_magic(in, magic, source);
  const auto version = io::read_le<std::uint32_t>(in, "version");
  if (version != kArchiveVersion) {
    throw FormatError(source + ": unsupported format version " + std::to_string(version));
  }
  TensorArchive archive;
  const auto n_dims = io::read_le<std::uint32_t>(in, "dimension count");
  for (std::uint32_t i = 0; i < n_dims; ++i) {
    auto name = io::read_string(in, "dimension name");
    archive.dimensions.emplace_back(std::move(name), io::read_le<std::uint64_t>(in, "dimension"));
  }
  const auto n_tensors = io::read_le<std::uint32_t>(in, "tensor count");
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    auto name = io::read_string(in, "tensor name");
    const auto rank = io::read_le<std::uint32_t>(in, "tensor rank");
    if (rank > 8) throw FormatError(source + ": implausible rank for tensor " + name);
    Shape shape(rank);
    for (auto& d : shape) d = io::read_le<std::uint64_t>(in, "tensor dims");
    const std::size_t count = element_count(shape);
    if (count > (std::size_t{1} << 32)) throw FormatError(source + ": implausible size for " + name);
    std::vector<double> values(count);
    for (double& v : values) v = io::read_le<double>(in, "tensor values");
    archive.tensors.push_back({std::move(name), Tensor::from(std::move(shape), std::move(values))});
  }
  return archive;
}

namespace detail {

inline std::vector<std::pair<std::string, std::uint64_t>> config_dimensions(const ModelConfig& c) {
  return {{"ste_dim", c.ste_dim},         {"voice_dim", c.voice_dim},
          {"context_dim", c.context_dim}, {"frames", c.frames},
          {"speakers", c.speakers},       {"hop", static_cast<std::uint64_t>(c.hop)},
          {"key_dim", c.key_dim},         {"context_only", c.context_only ? 1u : 0u}};
}

inline ModelConfig config_from_archive(const TensorArchive& a) {
  ModelConfig c;
  c.ste_dim = a.dimension("ste_dim");
  c.voice_dim = a.dimension("voice_dim");
  c.context_dim = a.dimension("context_dim");
  c.frames = a.dimension("frames");
  c.speakers = a.dimension("speakers");
  c.hop = static_cast<long>(a.dimension("hop"));
  c.key_dim = a.dimension("key_dim");
  c.context_only = a.dimension("context_only") != 0;
  return c;
}

/// Copies archived tensors into `params` by name, checking every shape.
inline void fill_params(FavoaParams& params, const TensorArchive& a, const std::string& source,
                        const std::string& prefix = "") {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& t : a.tensors) by_name[t.name] = &t.tensor;
  const auto names = params.named_tensors();
  const auto slots = params.mutable_tensors();
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto it = by_name.find(prefix + names[i].name);
    if (it == by_name.end())
      throw FormatError(source + ": missing tensor '" + prefix + names[i].name + "'");
    if (it->second->shape() != names[i].tensor.shape())
      throw FormatError(source + ": tensor '" + names[i].name + "' has shape " +
                        shape_string(it->second->shape()) + ", expected " +
                        shape_string(names[i].tensor.shape()));
    *slots[i] = it->second->detach(names[i].tensor.requires_grad());
  }
}

}  // namespace detail

inline void save_params(const FavoaParams& params, const ModelConfig& config,
                        const std::filesystem::path& path) {
  params.validate(config);
  write_archive(path, "FAVOAPRM", {detail::config_dimensions(config), params.named_tensors()});
}

struct LoadedParams {
  ModelConfig config;
  FavoaParams params;
};

/// Reads parameters together with the configuration recorded in the file.
inline LoadedParams load_params(const std::filesystem::path& path) {
  const TensorArchive archive = read_archive(path, "FAVOAPRM");
  LoadedParams out;
  out.config = detail::config_from_archive(archive);
  try {
    out.config.validate();
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  out.params = FavoaParams::init(out.config, 0);
  detail::fill_params(out.params, archive, path.string());
  return out;
}

/// As above, but rejects files whose dimensions differ from `expected`.
inline FavoaParams load_params(const std::filesystem::path& path, const ModelConfig& expected) {
  LoadedParams loaded = load_params(path);
  const auto want = detail::config_dimensions(expected);
  const auto have = detail::config_dimensions(loaded.config);
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i].second != have[i].second) {
      throw FormatError(path.string() + " (format v" + std::to_string(kArchiveVersion) +
                        "): dimension '" + want[i].first + "' is " +
                        std::to_string(have[i].second) + " in file but " +
                        std::to_string(want[i].second) + " in config");
    }
  }
  return std::move(loaded.params);
}

}  // namespace favoa
