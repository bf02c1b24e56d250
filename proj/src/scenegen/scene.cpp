// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "atlab/scenegen/scene.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "atlab/errors.hpp"

namespace atlab::scene {

namespace {

constexpr int kMaxAttempts = 100;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

struct Draw {
  std::mt19937_64& rng;

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }
  // Inclusive integer range.
  std::size_t integer(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  }
};

std::vector<double> label_weights(const SceneConfig& c) {
  std::vector<double> w(c.num_labels);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::pow(double(i + 1), -c.zipf_exponent);
  return w;
}

}  // namespace

std::string_view relation_name(Relation r) {
  switch (r) {
    case Relation::kSingle:
      return "single";
    case Relation::kSequential:
      return "sequential";
    case Relation::kConcurrent:
      return "concurrent";
  }
  return "single";
}

Relation parse_relation(std::string_view name) {
  if (name == "single") return Relation::kSingle;
  if (name == "sequential") return Relation::kSequential;
  if (name == "concurrent") return Relation::kConcurrent;
  throw DataError("unknown relation '" + std::string(name) + "'");
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 0x6A09E667F3BCC909ull));
}

std::size_t to_frames(double seconds, double frame_rate) {
  return static_cast<std::size_t>(std::llround(seconds * frame_rate));
}

double overlap_s(const SoundEvent& a, const SoundEvent& b) {
  const double lo = std::max(a.onset_s, b.onset_s);
  const double hi = std::min(a.onset_s + a.dur_s, b.onset_s + b.dur_s);
  return std::max(0.0, hi - lo);
}

void validate_config(const SceneConfig& c) {
  const RelationMix& m = c.mix;
  if (m.single < 0 || m.sequential < 0 || m.concurrent < 0 ||
      std::abs(m.single + m.sequential + m.concurrent - 1.0) > 1e-9) {
    throw ConfigError("relation probabilities must be non-negative and sum to 1");
  }
  if (!(c.frame_rate > 0)) throw ConfigError("frame_rate must be positive");
  if (!(c.min_duration_s > 0) || c.max_duration_s < c.min_duration_s) {
    throw ConfigError("invalid scene duration range");
  }
  if (!(c.min_event_s > 0) || c.max_event_s < c.min_event_s) {
    throw ConfigError("invalid event duration range");
  }
  if (!(c.min_intensity > 0) || c.min_intensity > 1) {
    throw ConfigError("min_intensity must lie in (0, 1]");
  }
  if (c.num_labels < 2 || c.num_labels > kNumEventTypes) {
    throw ConfigError("num_labels must lie in [2, " + std::to_string(kNumEventTypes) + "]");
  }
  if (to_frames(c.min_event_s, c.frame_rate) == 0) {
    throw ConfigError("min_event_s is shorter than one frame");
  }
}

Scene sample_scene(std::uint64_t seed, const SceneConfig& c) {
  validate_config(c);
  std::mt19937_64 rng(seed);
  Draw draw{rng};
  const double fr = c.frame_rate;
  const std::vector<double> weights = label_weights(c);

  Scene scene;
  scene.seed = seed;
  // Rounding slack in the mix falls to the last relation with positive mass.
  const double u = draw.uniform();
  if (u < c.mix.single || (c.mix.sequential == 0 && c.mix.concurrent == 0)) {
    scene.relation = Relation::kSingle;
  } else if (u < c.mix.single + c.mix.sequential || c.mix.concurrent == 0) {
    scene.relation = Relation::kSequential;
  } else {
    scene.relation = Relation::kConcurrent;
  }

  const std::size_t d_lo = to_frames(c.min_duration_s, fr), d_hi = to_frames(c.max_duration_s, fr);
  const std::size_t e_lo = to_frames(c.min_event_s, fr), e_hi = to_frames(c.max_event_s, fr);
  std::discrete_distribution<std::size_t> pick_label(weights.begin(), weights.end());

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const std::size_t total = draw.integer(d_lo, d_hi);
    const std::size_t n_events = scene.relation == Relation::kSingle ? 1 : 2;
    std::vector<std::size_t> labels{pick_label(rng)};
    while (labels.size() < n_events) {
      const std::size_t l = pick_label(rng);
      if (l != labels[0]) labels.push_back(l);
    }
    std::vector<std::size_t> dur(n_events), onset(n_events);
    for (auto& d : dur) d = draw.integer(e_lo, e_hi);

    bool ok = true;
    switch (scene.relation) {
      case Relation::kSingle:
        if (dur[0] > total) ok = false;
        else onset[0] = draw.integer(0, total - dur[0]);
        break;
      case Relation::kSequential: {
        if (dur[0] + dur[1] > total) {
          ok = false;
          break;
        }
        // Split the slack into lead-in, gap and tail.
        const std::size_t slack = total - dur[0] - dur[1];
        std::size_t a = draw.integer(0, slack), b = draw.integer(0, slack);
        if (a > b) std::swap(a, b);
        onset[0] = a;
        onset[1] = dur[0] + b;
        break;
      }
      case Relation::kConcurrent: {
        if (dur[0] > total || dur[1] > total) {
          ok = false;
          break;
        }
        onset[0] = draw.integer(0, total - dur[0]);
        onset[1] = draw.integer(0, total - dur[1]);
        const std::size_t lo = std::max(onset[0], onset[1]);
        const std::size_t hi = std::min(onset[0] + dur[0], onset[1] + dur[1]);
        const std::size_t overlap = hi > lo ? hi - lo : 0;
        if (2 * overlap < std::min(dur[0], dur[1])) ok = false;
        break;
      }
    }
    if (!ok) continue;

    scene.duration_s = double(total) / fr;
    scene.events.clear();
    for (std::size_t i = 0; i < n_events; ++i) {
      SoundEvent e;
      e.label = labels[i];
      e.onset_s = double(onset[i]) / fr;
      e.dur_s = double(dur[i]) / fr;
      e.intensity = c.min_intensity + (1.0 - c.min_intensity) * draw.uniform();
      scene.events.push_back(e);
    }
    std::stable_sort(scene.events.begin(), scene.events.end(),
                     [](const SoundEvent& x, const SoundEvent& y) { return x.onset_s < y.onset_s; });
    return scene;
  }
  throw ConfigError("scene generation failed after " + std::to_string(kMaxAttempts) +
                    " attempts: events do not fit the duration range");
}

void check_scene(const Scene& scene, std::size_t num_labels) {
  auto fail = [&](const std::string& what) {
    throw ContractError("scene (seed " + std::to_string(scene.seed) + "): " + what);
  };
  if (scene.events.empty()) fail("no events");
  const double tol = 1e-9;
  for (std::size_t i = 0; i < scene.events.size(); ++i) {
    const SoundEvent& e = scene.events[i];
    if (e.label >= num_labels) fail("label out of vocabulary");
    if (e.onset_s < 0 || !(e.dur_s > 0)) fail("bad event timing");
    if (e.onset_s + e.dur_s > scene.duration_s + tol) fail("event exceeds scene duration");
    if (!(e.intensity > 0) || e.intensity > 1) fail("intensity outside (0, 1]");
    if (i > 0 && e.onset_s < scene.events[i - 1].onset_s) fail("events not sorted by onset");
  }
  switch (scene.relation) {
    case Relation::kSingle:
      if (scene.events.size() != 1) fail("single scene must have one event");
      break;
    case Relation::kSequential:
      if (scene.events.size() < 2) fail("sequential scene needs two events");
      for (std::size_t i = 1; i < scene.events.size(); ++i) {
        const SoundEvent& p = scene.events[i - 1];
        if (scene.events[i].onset_s + tol < p.onset_s + p.dur_s) fail("sequential events overlap");
      }
      break;
    case Relation::kConcurrent: {
      if (scene.events.size() != 2) fail("concurrent scene needs two events");
      const SoundEvent& a = scene.events[0];
      const SoundEvent& b = scene.events[1];
      if (overlap_s(a, b) + tol < 0.5 * std::min(a.dur_s, b.dur_s)) {
        fail("concurrent events overlap by less than half the shorter event");
      }
      break;
    }
  }
}

}  // namespace atlab::scene
