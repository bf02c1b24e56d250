// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace atlab::model {

enum class HeadType { kMeanpoolMlp, kTransformer };

// kNormal draws every weight matrix from N(0, init_std²); kXavier uses
// N(0, 2 / (fan_in + fan_out)). Embedding tables and [CLS] vectors always
// use init_std.
enum class InitScheme { kNormal, kXavier };

std::string_view head_type_name(HeadType h);  // "meanpool_mlp" | "transformer"
HeadType parse_head_type(std::string_view name);
std::string_view init_scheme_name(InitScheme s);  // "normal" | "xavier"
InitScheme parse_init_scheme(std::string_view name);

struct TextEncoderConfig {
  std::size_t vocab_size = 77;
  std::size_t dim = 64;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t ffn_dim = 128;
  std::size_t max_len = 64;
  // Token embeddings are multiplied by this before the positional encoding
  // is added. 0 selects sqrt(dim).
  double token_scale = 0.0;
};

struct AudioEncoderConfig {
  double chunk_s = 1.0;
  double frame_rate = 10.0;
  std::size_t feat_dim = 32;
  std::vector<std::size_t> hidden = {128};
  std::size_t dim = 64;

  std::size_t chunk_frames() const;
};

struct HeadConfig {
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t ffn_dim = 128;
  std::size_t max_positions = 64;
  // Test hook: false drops the positional encodings of the head.
  bool positional = true;
};

struct TrainConfig {
  double lr = 3e-4;
  std::size_t batch_size = 64;
  std::size_t lr_step = 20;
  double lr_gamma = 0.1;
  // Epochs without a validation R@k improvement before stopping; 0 disables.
  std::size_t patience = 10;
  std::size_t max_epochs = 30;
  std::size_t recall_k = 10;
  int threads = 1;
};

struct ModelConfig {
  std::size_t embed_dim = 64;
  TextEncoderConfig text;
  AudioEncoderConfig audio;
  HeadType head_type = HeadType::kMeanpoolMlp;
  HeadConfig head;
  double temperature = 0.07;
  double init_std = 0.02;
  InitScheme init_scheme = InitScheme::kXavier;
  TrainConfig train;

  double token_scale() const;
};

/// Throws ConfigError naming the offending field.
void validate_config(const ModelConfig& config);

nlohmann::json to_json(const ModelConfig& config);
// Missing keys keep their defaults; unknown keys raise ConfigError.
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace atlab::model
