// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace atlab::scene {

/// Closed event vocabulary: each label is a (noun, verb) source/action pair.
struct EventType {
  std::string_view noun;
  std::string_view verb;
  // Mass nouns take only the definite article ("the rain falls").
  bool mass = false;
};

inline constexpr std::array<EventType, 24> kEventTypes = {{
    {"dog", "barks"},        {"cat", "meows"},       {"bird", "chirps"},
    {"rooster", "crows"},    {"cow", "moos"},        {"sheep", "bleats"},
    {"car", "honks"},        {"truck", "rumbles"},   {"train", "passes"},
    {"motorcycle", "revs"},  {"siren", "wails"},     {"bell", "rings"},
    {"phone", "rings"},      {"clock", "ticks"},     {"door", "slams"},
    {"man", "speaks"},       {"woman", "speaks"},    {"baby", "cries"},
    {"crowd", "cheers"},     {"engine", "hums"},     {"rain", "falls", true},
    {"wind", "blows", true}, {"water", "flows", true}, {"horse", "neighs"},
}};

inline constexpr std::size_t kNumEventTypes = kEventTypes.size();

enum class Relation { kSingle, kSequential, kConcurrent };

std::string_view relation_name(Relation r);
Relation parse_relation(std::string_view name);

struct SoundEvent {
  std::size_t label = 0;
  double onset_s = 0.0;
  double dur_s = 0.0;
  double intensity = 1.0;
};

struct Scene {
  std::vector<SoundEvent> events;  // sorted by onset
  Relation relation = Relation::kSingle;
  double duration_s = 0.0;
  std::uint64_t seed = 0;
};

struct RelationMix {
  double single = 0.4;
  double sequential = 0.4;
  double concurrent = 0.2;
};

struct SceneConfig {
  double frame_rate = 10.0;
  double min_duration_s = 4.0;
  double max_duration_s = 7.0;
  double min_event_s = 1.0;
  double max_event_s = 2.5;
  double min_intensity = 0.5;
  // Labels are drawn with weight 1/(rank+1)^zipf_exponent; 0 is uniform.
  double zipf_exponent = 1.0;
  std::size_t num_labels = kNumEventTypes;
  RelationMix mix;
};

/// Throws ConfigError unless the config is usable.
void validate_config(const SceneConfig& config);

/// Draws a scene. Onsets and durations are whole frames at config.frame_rate.
/// Deterministic in (seed, config). Draws that cannot satisfy the relation
/// are retried; ConfigError after 100 failed attempts.
Scene sample_scene(std::uint64_t seed, const SceneConfig& config);

/// Throws ContractError naming the violated scene invariant.
void check_scene(const Scene& scene, std::size_t num_labels = kNumEventTypes);

/// Duration of the overlap between two events' intervals, in seconds.
double overlap_s(const SoundEvent& a, const SoundEvent& b);

/// Stable per-item seed derived from a master seed and an index.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// Whole-frame conversions used everywhere a time meets a frame grid.
std::size_t to_frames(double seconds, double frame_rate);

}  // namespace atlab::scene
