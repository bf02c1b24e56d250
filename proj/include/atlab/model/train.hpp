// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "atlab/model/model.hpp"

namespace atlab::model {

/// Aligned audio-text pairs: tokens[i] describes clips[i].
struct PairSet {
  std::vector<std::string> ids;
  std::vector<TokenIds> tokens;
  std::vector<scene::AudioClip> clips;

  std::size_t size() const { return ids.size(); }
  void check() const;  // DimensionError when the three columns disagree
};

/// Inference-mode embeddings of many items, encoded batch_size at a time.
num::Tensor<float> embed_texts(const Model<float>& model, std::span<const TokenIds> texts,
                               std::size_t batch_size = 256);
num::Tensor<float> embed_audios(const Model<float>& model,
                                std::span<const scene::AudioClip* const> clips,
                                std::size_t batch_size = 256);

struct EpochRecord {
  std::size_t epoch = 0;  // 0-based
  double lr = 0.0;
  double train_loss = 0.0;  // mean over the epoch's batches
  double val_loss = 0.0;
  double val_recall = 0.0;  // text-to-audio R@recall_k on the validation pairs
  bool improved = false;
  std::size_t duplicate_batches = 0;
};

struct TrainResult {
  ModelConfig config;
  num::ParamSet<float> best_params;
  std::size_t best_epoch = 0;
  double best_recall = -1.0;
  std::vector<EpochRecord> log;
  bool early_stopped = false;
  // Set when training stopped on a non-finite value; best_params still hold
  // the last good checkpoint.
  bool aborted = false;
  std::string abort_reason;
  std::vector<std::string> warnings;

  Model<float> best_model() const;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Contrastive training with seeded shuffling, Adam, step decay and early
/// stopping on validation R@k. Deterministic for a fixed (config, seed)
/// when train.threads == 1.
TrainResult train(const ModelConfig& config, const PairSet& train_set, const PairSet& val_set,
                  std::uint64_t seed, const EpochCallback& on_epoch = {});

}  // namespace atlab::model
