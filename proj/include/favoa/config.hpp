// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: one JSON file per run, optionally patched with
// `key.path=value` overrides.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "favoa/errors.hpp"
#include "favoa/model.hpp"
#include "favoa/synth.hpp"
#include "favoa/train.hpp"

namespace favoa {

struct TrainingConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  Schedule schedule;
  std::string train_split = "train";
  std::string validation_split = "val";
  std::optional<std::string> resume_from;
};

struct EvaluationConfig {
  std::optional<std::string> params;  // defaults to <output_dir>/params.bin
  std::string split = "val";
  std::optional<AmbiguityMode> mode;
  double threshold = 0.5;
  double bin_width = 0.025;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  std::optional<std::filesystem::path> dataset;  // manifest.json
  GeneratorConfig generator;
  ModelConfig model;
  TrainingConfig training;
  EvaluationConfig evaluation;

  TrainOptions train_options() const {
    TrainOptions o;
    o.epochs = training.epochs;
    o.batch_size = training.batch_size;
    o.schedule = training.schedule;
    o.seed = seed;
    return o;
  }

  std::filesystem::path params_path() const {
    return evaluation.params ? std::filesystem::path(*evaluation.params) : output_dir / "params.bin";
  }

  const std::filesystem::path& require_dataset() const {
    if (!dataset) throw ConfigError("config key 'dataset' (path to manifest.json) is required");
    if (!std::filesystem::exists(*dataset))
      throw ConfigError("dataset manifest not found: " + dataset->string());
    return *dataset;
  }
};

namespace detail {

inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t offset) {
  std::size_t line = 1, column = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

inline void check_keys(const nlohmann::json& j, std::string_view where,
                       std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw ConfigError("unknown config key '" + std::string(where) + key + "'");
  }
}

}  // namespace detail

/// Parses JSON text; syntax errors report line and column.
inline nlohmann::json parse_config_text(const std::string& text, const std::string& source) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // byte is one past the offending character
    const auto [line, column] = detail::line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    std::string what = e.what();
    if (auto pos = what.find("syntax error"); pos != std::string::npos) what = what.substr(pos);
    throw ParseError(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " +
                     what);
  }
}

/// Applies `a.b.c=value`. The value is read as JSON when it parses, else as a string.
inline void apply_override(nlohmann::json& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  std::string pointer;
  std::stringstream parts(key);
  for (std::string part; std::getline(parts, part, '.');) {
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    pointer += "/" + part;
  }
  config[nlohmann::json::json_pointer(pointer)] = std::move(value);
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  using detail::check_keys;
  check_keys(j, "", {"seed", "output_dir", "dataset", "generator", "model", "training", "evaluation"});
  RunConfig c;
  try {
    if (!j.contains("seed")) throw ConfigError("config key 'seed' is mandatory");
    c.seed = j.at("seed").get<std::uint64_t>();
    c.output_dir = j.value("output_dir", std::string("runs/default"));
    if (j.contains("dataset") && !j.at("dataset").is_null())
      c.dataset = j.at("dataset").get<std::string>();

    if (j.contains("generator")) {
      check_keys(j.at("generator"), "generator.",
                 {"scenes", "min_persons", "max_persons", "frames", "noise", "ambiguous_fraction",
                  "val_fraction", "speaking_prevalence", "not_audible_rate", "persistence",
                  "gap_rate", "code_dim", "face_dim", "audio_dim", "mouth_amplitude"});
      c.generator = j.at("generator").get<GeneratorConfig>();
    }
    c.generator.seed = c.seed;

    if (j.contains("model")) {
      check_keys(j.at("model"), "model.",
                 {"ste_dim", "voice_dim", "context_dim", "frames", "speakers", "hop", "key_dim",
                  "context_only"});
      c.model = j.at("model").get<ModelConfig>();
    }
    c.model.validate();

    if (j.contains("training")) {
      const auto& t = j.at("training");
      check_keys(t, "training.",
                 {"epochs", "batch_size", "initial_rate", "decay", "decay_period", "train_split",
                  "validation_split", "resume_from"});
      c.training.epochs = t.value("epochs", c.training.epochs);
      c.training.batch_size = t.value("batch_size", c.training.batch_size);
      c.training.schedule.initial_rate = t.value("initial_rate", c.training.schedule.initial_rate);
      c.training.schedule.decay = t.value("decay", c.training.schedule.decay);
      c.training.schedule.period = t.value("decay_period", c.training.schedule.period);
      c.training.train_split = t.value("train_split", c.training.train_split);
      c.training.validation_split = t.value("validation_split", c.training.validation_split);
      if (t.contains("resume_from") && !t.at("resume_from").is_null())
        c.training.resume_from = t.at("resume_from").get<std::string>();
    }
    if (c.training.batch_size == 0) throw ConfigError("training.batch_size must be positive");
    if (c.training.schedule.period == 0) throw ConfigError("training.decay_period must be positive");
    if (!(c.training.schedule.initial_rate > 0)) throw ConfigError("training.initial_rate must be positive");

    if (j.contains("evaluation")) {
      const auto& e = j.at("evaluation");
      check_keys(e, "evaluation.", {"params", "split", "mode", "threshold", "bin_width"});
      if (e.contains("params") && !e.at("params").is_null())
        c.evaluation.params = e.at("params").get<std::string>();
      c.evaluation.split = e.value("split", c.evaluation.split);
      if (e.contains("mode") && !e.at("mode").is_null())
        c.evaluation.mode = parse_mode(e.at("mode").get<std::string>());
      c.evaluation.threshold = e.value("threshold", c.evaluation.threshold);
      c.evaluation.bin_width = e.value("bin_width", c.evaluation.bin_width);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir.string();
  j["dataset"] = c.dataset ? nlohmann::json(c.dataset->string()) : nlohmann::json(nullptr);
  j["generator"] = c.generator;
  j["generator"].erase("seed");
  j["model"] = c.model;
  j["training"] = {{"epochs", c.training.epochs},
                   {"batch_size", c.training.batch_size},
                   {"initial_rate", c.training.schedule.initial_rate},
                   {"decay", c.training.schedule.decay},
                   {"decay_period", c.training.schedule.period},
                   {"train_split", c.training.train_split},
                   {"validation_split", c.training.validation_split},
                   {"resume_from", c.training.resume_from ? nlohmann::json(*c.training.resume_from)
                                                          : nlohmann::json(nullptr)}};
  j["evaluation"] = {{"params", c.evaluation.params ? nlohmann::json(*c.evaluation.params)
                                                    : nlohmann::json(nullptr)},
                     {"split", c.evaluation.split},
                     {"mode", c.evaluation.mode ? nlohmann::json(mode_name(*c.evaluation.mode))
                                                : nlohmann::json(nullptr)},
                     {"threshold", c.evaluation.threshold},
                     {"bin_width", c.evaluation.bin_width}};
  return j;
}

inline RunConfig load_run_config(const std::filesystem::path& path,
                                 const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  nlohmann::json j = parse_config_text(buffer.str(), path.string());
  for (const auto& o : overrides) apply_override(j, o);
  return run_config_from_json(j);
}

}  // namespace favoa
