// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "atlab/model/model.hpp"
#include "json.hpp"

namespace atlab::model {

struct CheckpointInfo {
  std::string tool_version;
  std::string grammar_version;
  std::string vocab_version;
  std::size_t vocab_size = 0;
  // Free-form provenance copied into the manifest (seed, epoch, ...).
  nlohmann::json extra = nlohmann::json::object();
};

/// Writes <dir>/manifest.json and <dir>/params.bin (float32 little-endian,
/// parameters concatenated in index order). Creates dir if needed.
void save_checkpoint(const std::filesystem::path& dir, const ModelConfig& config,
                     const num::ParamSet<float>& params, const CheckpointInfo& info);

struct LoadedCheckpoint {
  ModelConfig config;
  CheckpointInfo info;
  num::ParamSet<float> params;

  Model<float> model() const;
};

/// DataError on a missing or malformed checkpoint, including any mismatch
/// between the parameter index and params.bin.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace atlab::model
