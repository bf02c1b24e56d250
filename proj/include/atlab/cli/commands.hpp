// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "atlab/cli/dataset.hpp"
#include "atlab/cli/experiment.hpp"
#include "atlab/evalsuite/report.hpp"
#include "atlab/model/checkpoint.hpp"
#include "atlab/model/train.hpp"

namespace atlab::cli {

/// Exclusive lock on a run directory, released on destruction. DataError
/// when another process holds it.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

/// Refuses (ArgumentError) a non-empty directory unless force is set. With
/// force, artifacts this tool writes are removed first; other files stay.
void prepare_output_dir(const std::filesystem::path& dir, bool force);

/// Writes train/val/test/probe manifests, frames, the resolved config and a
/// dataset summary with preposition histograms. Returns the summary.
nlohmann::json cmd_gen(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                       bool force, std::ostream& log);

/// Writes <out_dir>/train.jsonl: the source rows unchanged followed by
/// `count` ACBA rows.
void cmd_augment_acba(const std::filesystem::path& train_manifest, std::size_t count,
                      std::uint64_t seed, double fade_s, const std::filesystem::path& out_dir,
                      bool force, std::ostream& log);

struct TrainOptions {
  bool nv_filter = false;  // training captions only
  bool force = false;
};

/// Trains on the manifests and writes config.toml, log.jsonl (one line per
/// epoch), checkpoint/ and run.json into out_dir. Throws NumericError after
/// writing the run record when training aborted on a non-finite value.
model::TrainResult cmd_train(const ExperimentConfig& config,
                             const std::filesystem::path& train_manifest,
                             const std::filesystem::path& val_manifest,
                             const std::filesystem::path& out_dir, const TrainOptions& options,
                             std::ostream& log);

/// DataError naming both versions when the checkpoint was trained against a
/// different vocabulary or grammar than the manifest uses.
void check_compatible(const model::CheckpointInfo& checkpoint, const ManifestHeader& manifest);

/// Runs the requested protocols and writes one report pair per protocol.
/// BAT draws from bat_manifest when given, otherwise from the manifest.
std::vector<eval::EvalReport> cmd_eval(const std::filesystem::path& checkpoint_dir,
                                       const std::filesystem::path& manifest,
                                       const std::optional<std::filesystem::path>& bat_manifest,
                                       const EvalConfig& config,
                                       const std::filesystem::path& out_dir, std::ostream& log);

/// Finite-difference checks of every op and of the full model for both
/// heads at `points` points each. Returns true when all stay below 1e-3.
bool cmd_gradcheck(const model::ModelConfig& config, int points, std::uint64_t seed,
                   std::ostream& log);

/// Generates data, augments it with ACBA, trains {meanpool, transformer} ×
/// {original, +ACBA} and evaluates each run. Writes summary.json.
nlohmann::json cmd_repro(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                         bool force, std::ostream& log);

}  // namespace atlab::cli
