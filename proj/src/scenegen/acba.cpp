// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "atlab/scenegen/acba.hpp"

#include <algorithm>
#include <random>

#include "atlab/errors.hpp"

namespace atlab::scene {

bool acba_eligible(const text::Caption& caption) {
  return caption.clauses.size() == 1 && caption.preposition == text::Preposition::kNone;
}

Scene compose_scenes(const Scene& a, const Scene& b, double fade_s, double frame_rate) {
  const std::size_t fa = to_frames(a.duration_s, frame_rate);
  const std::size_t fb = to_frames(b.duration_s, frame_rate);
  const std::size_t n = to_frames(fade_s, frame_rate);
  if (n > fa || n > fb) throw ArgumentError("compose_scenes: fade longer than a scene");
  const std::size_t shift = fa - n;
  const std::size_t cut = fa - n / 2;

  Scene out;
  out.relation = Relation::kSequential;
  out.duration_s = double(fa + fb - n) / frame_rate;
  out.seed = a.seed ^ (b.seed << 1);
  auto add = [&](const SoundEvent& e, std::size_t begin, std::size_t end) {
    if (end <= begin) {
      throw ContractError("compose_scenes: an event lies entirely inside the fade midpoint");
    }
    SoundEvent c = e;
    c.onset_s = double(begin) / frame_rate;
    c.dur_s = double(end - begin) / frame_rate;
    out.events.push_back(c);
  };
  for (const SoundEvent& e : a.events) {
    const std::size_t on = to_frames(e.onset_s, frame_rate);
    add(e, on, std::min(on + to_frames(e.dur_s, frame_rate), cut));
  }
  for (const SoundEvent& e : b.events) {
    const std::size_t on = shift + to_frames(e.onset_s, frame_rate);
    add(e, std::max(on, cut), on + to_frames(e.dur_s, frame_rate));
  }
  std::stable_sort(out.events.begin(), out.events.end(),
                   [](const SoundEvent& x, const SoundEvent& y) { return x.onset_s < y.onset_s; });
  return out;
}

std::vector<AcbaPair> synthesize_acba(const std::vector<AcbaSource>& pool, std::size_t count,
                                      std::uint64_t seed, double fade_s) {
  if (pool.size() < 2) {
    throw ArgumentError("synthesize_acba: pool needs at least 2 entries, got " +
                        std::to_string(pool.size()));
  }
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!acba_eligible(pool[i].caption)) {
      throw ArgumentError("synthesize_acba: pool entry " + std::to_string(i) +
                          " is not a single preposition-free clause: '" + pool[i].caption.text +
                          "'");
    }
  }
  constexpr text::Preposition kPreps[] = {text::Preposition::kBefore, text::Preposition::kAfter,
                                          text::Preposition::kThen,
                                          text::Preposition::kFollowedBy};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::uniform_int_distribution<int> pick_prep(0, 3);

  std::vector<AcbaPair> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    AcbaPair pair;
    pair.first = pick(rng);
    do {
      pair.second = pick(rng);
    } while (pair.second == pair.first);
    const text::Preposition prep = kPreps[pick_prep(rng)];
    const AcbaSource& a = pool[pair.first];
    const AcbaSource& b = pool[pair.second];

    std::string joined = text::normalize(a.caption.text);
    for (auto w : text::preposition_words(prep)) joined += " " + std::string(w);
    joined += " " + text::normalize(b.caption.text);
    pair.caption = text::caption_from_text(joined);
    text::render_text(pair.caption, true);

    // "A after B" asserts B happened first.
    const bool b_first = prep == text::Preposition::kAfter;
    const AcbaSource& early = b_first ? b : a;
    const AcbaSource& late = b_first ? a : b;
    pair.clip = crossfade_concat(early.clip, late.clip, fade_s);
    pair.scene = compose_scenes(early.scene, late.scene, fade_s, early.clip.frame_rate);
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace atlab::scene
