// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "atlab/captiongen/caption.hpp"
#include "atlab/cli/experiment.hpp"
#include "atlab/evalsuite/protocols.hpp"
#include "atlab/model/train.hpp"
#include "atlab/scenegen/render.hpp"
#include "atlab/scenegen/scene.hpp"
#include "json.hpp"

namespace atlab::cli {

enum class Provenance { kGenerated, kAcba, kNvFiltered, kManipulated };

std::string_view provenance_name(Provenance p);
Provenance parse_provenance(std::string_view name);

enum class Split { kTrain, kVal, kTest, kProbe };

std::string_view split_name(Split s);

struct Sample {
  std::string id;
  std::string split;
  text::Caption caption;
  scene::Scene scene;
  scene::AudioClip clip;
  Provenance provenance = Provenance::kGenerated;
  // Ids of the rows an ACBA pair was joined from, clause order.
  std::vector<std::string> sources;
};

/// Deterministic in (config, split). Each split draws from its own seed
/// stream derived from config.seed, so splits never share scenes by seed.
std::vector<Sample> generate_split(const GenerationConfig& config, Split split,
                                   const scene::PrototypeTable& prototypes);

scene::PrototypeTable prototypes_for(const GenerationConfig& config);

/// Appends `count` ACBA pairs built from the eligible generated rows of
/// `train`, with provenance acba and ids "acba-NNNNN".
std::vector<Sample> synthesize_acba_samples(const std::vector<Sample>& train, std::size_t count,
                                            std::uint64_t seed, double fade_s);

struct ManifestHeader {
  std::string format = "atlab-manifest-1";
  std::string tool_version;
  std::string grammar_version;
  std::string vocab_version;
  std::string dataset_id;
  std::string split;
  nlohmann::json extra = nlohmann::json::object();
};

ManifestHeader make_header(std::string dataset_id, std::string split);

struct Manifest {
  ManifestHeader header;
  std::vector<Sample> samples;
};

/// JSONL: one header line, then one row per sample. Frames are written to
/// <manifest dir>/audio/<id>.atf and rows store that relative path.
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// DataError on malformed rows, duplicate ids, unreadable frames, or frames
/// whose duration disagrees with the events.
Manifest read_manifest(const std::filesystem::path& path);

model::PairSet to_pairs(const std::vector<Sample>& samples);
std::vector<eval::EvalItem> to_items(const std::vector<Sample>& samples);

/// Preposition histogram in the layout of the corpus statistics table.
nlohmann::json preposition_histogram(const std::vector<Sample>& samples);

/// FNV-1a 64-bit hex digest.
std::string digest(std::string_view bytes);

}  // namespace atlab::cli
