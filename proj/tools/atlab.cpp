// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

// atlab: generate synthetic scenes, train the dual encoder and run the
// evaluation protocols.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "atlab/cli/commands.hpp"
#include "atlab/errors.hpp"

namespace {

namespace fs = std::filesystem;
using atlab::cli::ExperimentConfig;

int exit_code(atlab::ErrorKind kind) {
  switch (kind) {
    case atlab::ErrorKind::kConfig:
      return 2;
    case atlab::ErrorKind::kData:
      return 3;
    case atlab::ErrorKind::kNumeric:
      return 4;
    default:
      return 1;
  }
}

ExperimentConfig load(const std::string& path) {
  return path.empty() ? ExperimentConfig{} : atlab::cli::load_experiment_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal-order probes for contrastive audio-text models"};
  app.set_version_flag("--version", std::string(atlab::cli::kToolVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  bool force = false;
  std::optional<std::uint64_t> seed;

  auto* gen = app.add_subcommand("gen", "Generate train/val/test/probe manifests");
  gen->add_option("-c,--config", config_path, "Experiment config (TOML)")->check(CLI::ExistingFile);
  gen->add_option("-o,--out", out, "Output directory")->required();
  gen->add_option("--seed", seed, "Override generation.seed");
  gen->add_flag("--force", force, "Overwrite an existing output directory");

  std::string train_manifest;
  std::size_t count = 5000;
  std::uint64_t acba_seed = 5;
  double fade_s = 1.0;
  auto* augment = app.add_subcommand("augment-acba", "Append before/after pairs to a train manifest");
  augment->add_option("--train", train_manifest, "Train manifest")->required()->check(CLI::ExistingFile);
  augment->add_option("--count", count, "Number of pairs")->capture_default_str();
  augment->add_option("--seed", acba_seed, "Sampling seed")->capture_default_str();
  augment->add_option("--fade", fade_s, "Cross-fade seconds")->capture_default_str();
  augment->add_option("-o,--out", out, "Output directory")->required();
  augment->add_flag("--force", force, "Overwrite an existing output directory");

  std::string val_manifest;
  std::string head;
  bool nv_filter = false;
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("-c,--config", config_path, "Experiment config (TOML)")->check(CLI::ExistingFile);
  train->add_option("--train", train_manifest, "Train manifest")->required()->check(CLI::ExistingFile);
  train->add_option("--val", val_manifest, "Validation manifest")->required()->check(CLI::ExistingFile);
  train->add_option("--head", head, "Aggregation head")
      ->check(CLI::IsMember({"meanpool_mlp", "transformer"}));
  train->add_option("--seed", seed, "Override train_seed");
  train->add_flag("--nv-filter", nv_filter, "Keep only nouns and verbs in training captions");
  train->add_option("-o,--out", out, "Run directory")->required();
  train->add_flag("--force", force, "Overwrite an existing run directory");

  std::string checkpoint;
  std::string manifest;
  std::string bat_manifest;
  std::vector<std::string> protocols;
  auto* eval = app.add_subcommand("eval", "Run evaluation protocols on a checkpoint");
  eval->add_option("-c,--config", config_path, "Experiment config (TOML)")->check(CLI::ExistingFile);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--manifest", manifest, "Evaluation manifest")->required()->check(CLI::ExistingFile);
  eval->add_option("--bat-manifest", bat_manifest, "Manifest the before/after test draws from")
      ->check(CLI::ExistingFile);
  eval->add_option("-p,--protocols", protocols, "Protocols to run")->delimiter(',');
  eval->add_option("-o,--out", out, "Report directory")->required();

  int points = 10;
  std::uint64_t check_seed = 0;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gradcheck->add_option("-c,--config", config_path, "Experiment config (TOML)")->check(CLI::ExistingFile);
  gradcheck->add_option("--points", points, "Points per check")->capture_default_str();
  gradcheck->add_option("--seed", check_seed, "Seed")->capture_default_str();

  auto* repro = app.add_subcommand("repro", "Run the full head x data experiment matrix");
  repro->add_option("-c,--config", config_path, "Experiment config (TOML)")->check(CLI::ExistingFile);
  repro->add_option("-o,--out", out, "Output directory")->required();
  repro->add_option("--seed", seed, "Override generation.seed");
  repro->add_flag("--force", force, "Overwrite an existing output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    ExperimentConfig config = load(config_path);
    if (*gen || *repro) {
      if (seed) config.generation.seed = *seed;
      if (*gen) {
        atlab::cli::cmd_gen(config, out, force, std::cout);
      } else {
        atlab::cli::cmd_repro(config, out, force, std::cout);
      }
    } else if (*augment) {
      atlab::cli::cmd_augment_acba(train_manifest, count, acba_seed, fade_s, out, force, std::cout);
    } else if (*train) {
      if (seed) config.train_seed = *seed;
      if (!head.empty()) config.model.head_type = atlab::model::parse_head_type(head);
      atlab::cli::TrainOptions options;
      options.nv_filter = nv_filter;
      options.force = force;
      atlab::cli::cmd_train(config, train_manifest, val_manifest, out, options, std::cout);
    } else if (*eval) {
      if (!protocols.empty()) config.eval.protocols = protocols;
      atlab::cli::validate_config(config);
      std::optional<fs::path> bat;
      if (!bat_manifest.empty()) bat = bat_manifest;
      atlab::cli::cmd_eval(checkpoint, manifest, bat, config.eval, out, std::cout);
    } else if (*gradcheck) {
      if (!atlab::cli::cmd_gradcheck(config.model, points, check_seed, std::cout)) {
        std::cerr << "gradcheck: relative error above tolerance\n";
        return 4;
      }
    }
  } catch (const atlab::Error& e) {
    std::cerr << "atlab: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "atlab: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
