// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "favoa/metrics.hpp"
#include "favoa/model.hpp"
#include "favoa/serialize.hpp"

namespace favoa {

/// rate(epoch) = initial_rate * decay^floor(epoch / period)
struct Schedule {
  double initial_rate = 3e-6;
  double decay = 0.1;
  std::size_t period = 10;

  double rate(std::size_t epoch) const {
    return initial_rate * std::pow(decay, static_cast<double>(epoch / period));
  }
};

/// Binary cross-entropy on a probability, with q clamped to [1e-12, 1 - 1e-12].
inline double loss(double q, int y) {
  require(y == 0 || y == 1, "loss: label must be 0 or 1, got ", y);
  const double c = std::clamp(q, 1e-12, 1.0 - 1e-12);
  return y == 1 ? -std::log(c) : -std::log(1.0 - c);
}

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamMoments {
  std::vector<double> first;
  std::vector<double> second;
};

/// One bias-corrected ADAM update; `step` counts from 1.
inline void adam_update(std::span<double> param, std::span<const double> grad, AdamMoments& m,
                        std::uint64_t step, double rate, const AdamConfig& cfg = {}) {
  if (m.first.size() != param.size()) {
    m.first.assign(param.size(), 0.0);
    m.second.assign(param.size(), 0.0);
  }
  const double correction1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double correction2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad.empty() ? 0.0 : grad[i];
    m.first[i] = cfg.beta1 * m.first[i] + (1.0 - cfg.beta1) * g;
    m.second[i] = cfg.beta2 * m.second[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = m.first[i] / correction1;
    const double v_hat = m.second[i] / correction2;
    param[i] -= rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Applies one update to every non-frozen group from the tensors' accumulated gradients.
  void step(std::span<ParameterGroup> groups, double rate) {
    for (const auto& group : groups) {
      if (group.frozen) continue;
      for (const auto& t : group.tensors) {
        for (double g : t.tensor.grad()) {
          if (!std::isfinite(g)) {
            throw NumericError("non-finite gradient in parameter group '" + group.name + "' (" +
                               t.name + ")");
          }
        }
      }
    }
    ++step_;
    for (auto& group : groups) {
      if (group.frozen) continue;
      for (auto& t : group.tensors) {
        adam_update(t.tensor.mutable_data(), t.tensor.grad(), moments_[t.name], step_, rate,
                    config_);
      }
    }
  }

  std::uint64_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }
  std::map<std::string, AdamMoments>& moments() { return moments_; }
  const std::map<std::string, AdamMoments>& moments() const { return moments_; }
  void restore(std::uint64_t steps) { step_ = steps; }

 private:
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::map<std::string, AdamMoments> moments_;
};

struct TrainOptions {
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  Schedule schedule;
  AdamConfig adam;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double mean_loss = 0.0;
  std::optional<MetricReport> validation;
};

struct TrainReport {
  std::uint64_t seed = 0;
  nlohmann::json config;
  std::vector<EpochRecord> epochs;
};

inline nlohmann::json to_json(const EpochRecord& r, std::uint64_t seed,
                              const nlohmann::json& config) {
  nlohmann::json j = {{"epoch", r.epoch},
                      {"learning_rate", r.learning_rate},
                      {"mean_loss", r.mean_loss},
                      {"seed", seed},
                      {"config", config}};
  j["validation"] = r.validation ? to_json(*r.validation) : nlohmann::json(nullptr);
  return j;
}

/// Optimizer state plus the next epoch to run; enough to resume bit-exactly.
struct TrainState {
  Adam optimizer;
  std::size_t next_epoch = 0;
};

/// Per-epoch permutation derived from (seed, epoch) alone, so resumed runs
/// shuffle exactly like uninterrupted ones.
inline std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed,
                                                  std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x5eedu};
  Rng rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

inline std::vector<ScoredEntry> score_entries(const FavoaModel& model, const Dataset& data,
                                              std::span<const EntryRef> entries) {
  NoGradGuard no_grad;
  std::vector<ScoredEntry> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    out.push_back({data.entry_id(e), model.forward(data.context(e)).q, map_labels(data.label(e))});
  }
  return out;
}

inline std::optional<MetricReport> try_evaluate(std::span<const ScoredEntry> scored) {
  try {
    return evaluate(scored);
  } catch (const UndefinedMetricError&) {
    return std::nullopt;
  }
}

inline int binary_target(RawLabel label) {
  return map_labels(label) == BinaryLabel::positive ? 1 : 0;
}

/// Sum of per-entry cross-entropies for one mini-batch, attached to the graph.
inline Tensor batch_loss(const FavoaModel& model, const Dataset& data,
                         std::span<const EntryRef> batch) {
  Tensor total;
  for (const auto& e : batch) {
    const ForwardTrace trace = model.forward(data.context(e));
    const Tensor l = softmax_cross_entropy(trace.logits, binary_target(data.label(e)));
    total = total.defined() ? add(total, l) : l;
  }
  return total;
}

/// Mini-batch ADAM on the summed batch loss. The rate follows `options.schedule`
/// per epoch; validation metrics are recorded after every epoch when defined.
inline TrainReport train(FavoaModel& model, const Dataset& data, std::span<const EntryRef> train_set,
                         std::span<const EntryRef> validation_set, const TrainOptions& options,
                         TrainState& state,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  require(!train_set.empty(), "train: empty training set");
  require(options.batch_size > 0, "train: batch size must be positive");
  TrainReport report;
  report.seed = options.seed;
  auto groups = trainable_parameters(model.params());
  for (; state.next_epoch < options.epochs; ++state.next_epoch) {
    const std::size_t epoch = state.next_epoch;
    const double rate = options.schedule.rate(epoch);
    const auto order = epoch_permutation(train_set.size(), options.seed, epoch);
    double epoch_loss = 0.0;
    std::vector<EntryRef> batch;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + options.batch_size); ++i)
        batch.push_back(train_set[order[i]]);
      for (auto& g : groups)
        for (auto& t : g.tensors) t.tensor.zero_grad();
      const Tensor total = batch_loss(model, data, batch);
      if (!std::isfinite(total.item())) {
        throw NumericError("non-finite loss in epoch " + std::to_string(epoch));
      }
      epoch_loss += total.item();
      backward(total);
      state.optimizer.step(groups, rate);
    }
    EpochRecord record;
    record.epoch = epoch;
    record.learning_rate = rate;
    record.mean_loss = epoch_loss / static_cast<double>(train_set.size());
    if (!validation_set.empty()) {
      record.validation = try_evaluate(score_entries(model, data, validation_set));
    }
    if (on_epoch) on_epoch(record);
    report.epochs.push_back(std::move(record));
  }
  for (auto& g : groups)
    for (auto& t : g.tensors) t.tensor.zero_grad();
  return report;
}

// Checkpoints: parameters, ADAM moments and the epoch counter.

inline void save_checkpoint(const FavoaParams& params, const ModelConfig& config,
                            const TrainState& state, const std::filesystem::path& path) {
  TensorArchive archive{detail::config_dimensions(config), params.named_tensors()};
  archive.dimensions.emplace_back("next_epoch", state.next_epoch);
  archive.dimensions.emplace_back("adam_steps", state.optimizer.steps());
  for (const auto& [name, m] : state.optimizer.moments()) {
    archive.tensors.push_back({"adam.first/" + name, Tensor::vector(m.first)});
    archive.tensors.push_back({"adam.second/" + name, Tensor::vector(m.second)});
  }
  write_archive(path, "FAVOACKP", archive);
}

struct Checkpoint {
  FavoaParams params;
  TrainState state;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected,
                                  const AdamConfig& adam = {}) {
  const TensorArchive archive = read_archive(path, "FAVOACKP");
  const ModelConfig stored = detail::config_from_archive(archive);
  if (!(stored == expected)) {
    throw FormatError(path.string() + ": checkpoint model config differs from run config");
  }
  Checkpoint cp{FavoaParams::init(expected, 0), TrainState{Adam(adam), 0}};
  detail::fill_params(cp.params, archive, path.string());
  cp.state.next_epoch = archive.dimension("next_epoch");
  cp.state.optimizer.restore(archive.dimension("adam_steps"));
  for (const auto& [name, tensor] : archive.tensors) {
    if (name.rfind("adam.first/", 0) == 0) {
      cp.state.optimizer.moments()[name.substr(11)].first = tensor.to_vector();
    } else if (name.rfind("adam.second/", 0) == 0) {
      cp.state.optimizer.moments()[name.substr(12)].second = tensor.to_vector();
    }
  }
  return cp;
}

}  // namespace favoa
