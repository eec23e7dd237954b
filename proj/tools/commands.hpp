// SPDX-License-Identifier: Apache-2.0
//
// Subcommands of the `favoa` tool. Each returns a process exit code:
// 0 ok, 1 failed check, 2 config/input error, 3 numeric failure, 4 undefined metric.
#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <string>

#include <json.hpp>

#include "favoa/config.hpp"
#include "favoa/favoa.hpp"
#include "favoa/gradient_suite.hpp"

namespace favoa::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kInputError = 2,
  kNumericError = 3,
  kUndefinedMetric = 4,
};

/// Runs `body`, turning library exceptions into exit codes and a one-line diagnostic.
inline int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumericError;
  } catch (const UndefinedMetricError& e) {
    err << "undefined metric: " << e.what() << '\n';
    return kUndefinedMetric;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kInputError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kInputError;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kInputError;
  } catch (const DimensionError& e) {
    err << "dimension error: " << e.what() << '\n';
    return kInputError;
  } catch (const ContractError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kInputError;
  } catch (const fs::filesystem_error& e) {
    err << "file error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kCheckFailed;
  }
}

namespace detail {

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline std::ofstream open_output(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

// Heap-held so the provider's pointer to the dataset survives moves.
struct LoadedModel {
  std::unique_ptr<Dataset> data;
  std::unique_ptr<FeatureProvider> provider;
  std::unique_ptr<FavoaModel> model;
};

inline LoadedModel load_for_inference(const RunConfig& config) {
  LoadedModel m;
  m.data = std::make_unique<Dataset>(load_dataset(config.require_dataset()));
  FavoaParams params = load_params(config.params_path(), config.model);
  m.provider = std::make_unique<FeatureProvider>(*m.data, config.model.ste_dim,
                                                 config.model.voice_dim, config.seed);
  m.model = std::make_unique<FavoaModel>(std::move(params), config.model, *m.provider);
  return m;
}

inline std::vector<EntryRef> selected_entries(const RunConfig& config, const Dataset& data) {
  auto entries = data.entries(config.evaluation.split, config.evaluation.mode);
  if (entries.empty()) {
    throw ConfigError("no entries in split '" + config.evaluation.split + "'" +
                      (config.evaluation.mode
                           ? " with mode '" + std::string(mode_name(*config.evaluation.mode)) + "'"
                           : std::string()));
  }
  return entries;
}

}  // namespace detail

inline int gen_data(const RunConfig& config, std::ostream& out) {
  const Dataset data = generate(config.generator);
  write_dataset(data, config.output_dir);
  nlohmann::json echo = config.generator;
  detail::write_json(config.output_dir / "generator.json", echo);
  out << "wrote " << (config.output_dir / "manifest.json").string() << '\n';
  out << "scenes " << data.scenes.size() << ", entries " << data.entries().size() << '\n';
  for (const char* split : {"train", "val"}) {
    for (auto mode : {AmbiguityMode::clear, AmbiguityMode::ambiguous}) {
      const auto entries = data.entries(split, mode);
      std::size_t positives = 0;
      for (const auto& e : entries) positives += binary_target(data.label(e));
      out << "  " << split << '/' << mode_name(mode) << ": " << entries.size() << " entries, "
          << positives << " positive\n";
    }
  }
  return kOk;
}

inline void print_schedule(const Schedule& schedule, std::size_t epochs, std::ostream& out) {
  out << "schedule: initial rate " << schedule.initial_rate << ", decay " << schedule.decay
      << " every " << schedule.period << " epochs\n";
  for (std::size_t e = 0; e < epochs; ++e) out << "  epoch " << e << "  rate " << schedule.rate(e) << '\n';
}

inline int train(const RunConfig& config, std::ostream& out) {
  fs::create_directories(config.output_dir);
  const Dataset data = load_dataset(config.require_dataset());
  const FeatureProvider provider(data, config.model.ste_dim, config.model.voice_dim, config.seed);
  const auto train_set = data.entries(config.training.train_split);
  const auto val_set = data.entries(config.training.validation_split);
  if (train_set.empty())
    throw ConfigError("no entries in training split '" + config.training.train_split + "'");

  FavoaParams params;
  TrainState state;
  auto report_mode = std::ios::out | std::ios::trunc;
  if (config.training.resume_from) {
    const fs::path from = *config.training.resume_from;
    if (!fs::exists(from)) throw ConfigError("checkpoint not found: " + from.string());
    Checkpoint cp = load_checkpoint(from, config.model);
    params = std::move(cp.params);
    state = std::move(cp.state);
    report_mode = std::ios::out | std::ios::app;
    out << "resuming at epoch " << state.next_epoch << " from " << from.string() << '\n';
  } else {
    params = FavoaParams::init(config.model, config.seed);
  }
  FavoaModel model(std::move(params), config.model, provider);
  const TrainOptions options = config.train_options();
  print_schedule(options.schedule, options.epochs, out);

  const nlohmann::json config_json = to_json(config);
  auto report = detail::open_output(config.output_dir / "report.jsonl", report_mode);
  const fs::path checkpoint = config.output_dir / "checkpoint.bin";
  train(model, data, train_set, val_set, options, state, [&](const EpochRecord& r) {
    report << to_json(r, options.seed, config_json).dump() << '\n' << std::flush;
    TrainState snapshot = state;
    snapshot.next_epoch = r.epoch + 1;
    save_checkpoint(model.params(), model.config(), snapshot, checkpoint);
    out << "epoch " << r.epoch << "  rate " << r.learning_rate << "  loss " << r.mean_loss;
    if (r.validation) out << "  val mAP " << r.validation->map << "  AUC " << r.validation->auc;
    out << '\n';
  });
  save_params(model.params(), model.config(), config.output_dir / "params.bin");
  out << "wrote " << (config.output_dir / "params.bin").string() << '\n';
  return kOk;
}

inline int eval(const RunConfig& config, std::ostream& out) {
  fs::create_directories(config.output_dir);
  const auto loaded = detail::load_for_inference(config);
  const auto entries = detail::selected_entries(config, *loaded.data);
  const auto scored = score_entries(*loaded.model, *loaded.data, entries);
  std::vector<ScoreRow> rows;
  rows.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i)
    rows.push_back({scored[i].entry_id, scored[i].score, loaded.data->label(entries[i])});
  {
    auto csv = detail::open_output(config.output_dir / "scores.csv");
    write_scores_csv(csv, rows);
  }
  const MetricReport report = evaluate(scored, config.evaluation.threshold);
  detail::write_json(config.output_dir / "metrics.json", to_json(report));
  out << std::setprecision(6) << "entries " << report.entries << " (positive " << report.positives
      << ")  mAP " << report.map << "  AUC " << report.auc << "  balanced accuracy "
      << report.balanced_accuracy << " @ " << report.threshold << '\n';
  return kOk;
}

inline int analyze(const RunConfig& config, std::ostream& out) {
  fs::create_directories(config.output_dir);
  const auto loaded = detail::load_for_inference(config);
  const auto entries = detail::selected_entries(config, *loaded.data);
  const auto analysis = favoa::analyze(*loaded.model, *loaded.data, entries, config.evaluation.bin_width);
  {
    auto csv = detail::open_output(config.output_dir / "contributions.csv");
    write_contributions_csv(csv, analysis.records);
  }
  {
    auto csv = detail::open_output(config.output_dir / "histogram.csv");
    write_histogram_csv(csv, analysis.histogram);
  }
  detail::write_json(config.output_dir / "summary.json", to_json(analysis.summary));
  const auto& s = analysis.summary;
  out << "entries " << s.count << "  mean degree " << s.mean << "  median " << s.median
      << "  >0.15: " << s.frac_gt_015 << "  >0.30: " << s.frac_gt_030 << '\n';
  return kOk;
}

struct GradcheckOptions {
  std::uint64_t seed = 1;
  std::size_t seeds = 1;
  std::string corrupt_op;  // empty: no corruption
};

inline int gradcheck(const GradcheckOptions& options, std::ostream& out) {
  std::optional<test_hooks::ScopedRuleCorruption> corruption;
  if (!options.corrupt_op.empty()) {
    corruption.emplace(options.corrupt_op);
    out << "gradient rule of op '" << options.corrupt_op << "' is corrupted for this run\n";
  }
  bool all_passed = true;
  for (std::uint64_t s = options.seed; s < options.seed + options.seeds; ++s) {
    for (const auto& c : run_gradient_suite(s)) {
      const bool ok = c.report.passed();
      all_passed = all_passed && ok;
      out << (ok ? "PASS " : "FAIL ") << "seed " << s << "  " << std::left << std::setw(22)
          << c.name << std::right << " max rel err " << std::scientific << std::setprecision(3)
          << c.report.max_relative_error << std::defaultfloat << "  (" << c.report.worst_parameter
          << ", " << c.report.elements.size() << " elements)";
      if (!ok && !options.corrupt_op.empty()) out << "  corrupted op: " << options.corrupt_op;
      out << '\n';
    }
  }
  out << (all_passed ? "all gradient checks passed\n" : "gradient check FAILED\n");
  return all_passed ? kOk : kCheckFailed;
}

}  // namespace favoa::cli
