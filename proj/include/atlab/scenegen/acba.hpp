// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "atlab/captiongen/caption.hpp"
#include "atlab/scenegen/render.hpp"
#include "atlab/scenegen/scene.hpp"

namespace atlab::scene {

struct AcbaSource {
  text::Caption caption;
  AudioClip clip;
  Scene scene;
};

struct AcbaPair {
  text::Caption caption;
  AudioClip clip;
  Scene scene;
  std::size_t first = 0;   // pool index of the clause-0 entry
  std::size_t second = 0;  // pool index of the clause-1 entry
};

/// True when the entry may be joined: one clause and no temporal preposition.
bool acba_eligible(const text::Caption& caption);

/// Joins two distinct pool captions as "A prep B" (prep uniform over before,
/// after, then, followed by) and cross-fades their clips in the order the
/// preposition asserts. Event times in the composed scene are cut at the
/// middle of the fade so the composed events stay disjoint.
/// ArgumentError for a pool smaller than 2 or an ineligible entry.
std::vector<AcbaPair> synthesize_acba(const std::vector<AcbaSource>& pool, std::size_t count,
                                      std::uint64_t seed, double fade_s = 1.0);

/// Scene of clip a followed by clip b joined with a fade of fade_s seconds.
Scene compose_scenes(const Scene& a, const Scene& b, double fade_s, double frame_rate);

}  // namespace atlab::scene
