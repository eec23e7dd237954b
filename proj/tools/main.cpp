// SPDX-License-Identifier: Apache-2.0
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace favoa;
  CLI::App app{"Active speaker detection with gated face-voice fusion"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto with_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "Run configuration (JSON)")->required();
    sub->add_option("--set", overrides, "Override a config value, e.g. training.epochs=5");
  };

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset into output_dir");
  with_config(gen);

  auto* train = app.add_subcommand("train", "Train and write params.bin, report.jsonl, checkpoint.bin");
  with_config(train);
  std::string resume;
  train->add_option("--resume", resume, "Checkpoint to resume from");

  std::string params, split, mode;
  double threshold = -1.0, bin_width = -1.0;
  auto* eval = app.add_subcommand("eval", "Score a split and write metrics.json and scores.csv");
  auto* analyze = app.add_subcommand("analyze", "Write contribution CSVs and summary.json");
  for (auto* sub : {eval, analyze}) {
    with_config(sub);
    sub->add_option("--params", params, "Parameter file (default <output_dir>/params.bin)");
    sub->add_option("--split", split, "Dataset split");
    sub->add_option("--mode", mode, "Restrict to scenes of this mode (clear|ambiguous)");
  }
  eval->add_option("--threshold", threshold, "Balanced-accuracy threshold");
  analyze->add_option("--bin-width", bin_width, "Histogram bin width");

  cli::GradcheckOptions grad;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every layer and the full model");
  gradcheck->add_option("--seed", grad.seed, "First seed");
  gradcheck->add_option("--seeds", grad.seeds, "Number of consecutive seeds");
  gradcheck->add_option("--corrupt", grad.corrupt_op, "Op whose gradient rule is deliberately broken");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kInputError;
  }

  if (gradcheck->parsed()) return cli::guarded([&] { return cli::gradcheck(grad, std::cout); }, std::cerr);

  if (!resume.empty()) overrides.push_back("training.resume_from=" + nlohmann::json(resume).dump());
  if (!params.empty()) overrides.push_back("evaluation.params=" + nlohmann::json(params).dump());
  if (!split.empty()) overrides.push_back("evaluation.split=" + nlohmann::json(split).dump());
  if (!mode.empty()) overrides.push_back("evaluation.mode=" + nlohmann::json(mode).dump());
  if (threshold >= 0) overrides.push_back("evaluation.threshold=" + nlohmann::json(threshold).dump());
  if (bin_width >= 0) overrides.push_back("evaluation.bin_width=" + nlohmann::json(bin_width).dump());

  return cli::guarded(
      [&] {
        const RunConfig config = load_run_config(config_path, overrides);
        if (gen->parsed()) return cli::gen_data(config, std::cout);
        if (train->parsed()) return cli::train(config, std::cout);
        if (eval->parsed()) return cli::eval(config, std::cout);
        return cli::analyze(config, std::cout);
      },
      std::cerr);
}
