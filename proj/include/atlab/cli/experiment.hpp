// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "atlab/captiongen/caption.hpp"
#include "atlab/model/config.hpp"
#include "atlab/scenegen/render.hpp"
#include "atlab/scenegen/scene.hpp"
#include "json.hpp"

namespace atlab::cli {

#ifndef ATLAB_VERSION_STRING
#define ATLAB_VERSION_STRING "0.0.0"
#endif

inline constexpr std::string_view kToolVersion = "atlab " ATLAB_VERSION_STRING;

struct GenerationConfig {
  std::uint64_t seed = 1;
  std::size_t train_size = 8000;
  std::size_t val_size = 1000;
  std::size_t test_size = 1000;
  // Sequential scenes captioned with the four temporal prepositions
  // uniformly; the before/after test draws from this split.
  std::size_t probe_size = 800;
  scene::SceneConfig scene;
  text::CaptionConfig caption;
  scene::RenderConfig render;
};

struct AcbaConfig {
  std::size_t count = 5000;
  std::uint64_t seed = 5;
  double fade_s = 1.0;
};

struct EvalConfig {
  std::vector<std::string> protocols = {"retrieval", "then_as", "pte_swap",
                                        "bat",       "zero_shot", "sed"};
  std::vector<std::size_t> ks = {1, 5, 10};
  std::size_t bat_size = 200;
  std::uint64_t seed = 7;
  double sed_hop_s = 0.05;
  double sed_window_s = 1.0;
};

struct ExperimentConfig {
  GenerationConfig generation;
  model::ModelConfig model;
  AcbaConfig acba;
  EvalConfig eval;
  // Master seed for model initialisation and shuffling.
  std::uint64_t train_seed = 1;
};

/// Throws ConfigError naming the first invalid field.
void validate_config(const ExperimentConfig& config);

nlohmann::json to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

ExperimentConfig load_experiment_config(const std::filesystem::path& toml_path);
std::string experiment_config_toml(const ExperimentConfig& config);

/// The protocol names accepted by EvalConfig::protocols.
const std::vector<std::string>& known_protocols();

}  // namespace atlab::cli
