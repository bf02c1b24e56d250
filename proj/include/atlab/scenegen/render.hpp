// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "atlab/numcore/tensor.hpp"
#include "atlab/scenegen/scene.hpp"

namespace atlab::scene {

/// Frame-feature stand-in for a waveform: T frames of D features.
struct AudioClip {
  num::Tensor<float> frames;  // [T×D]
  double frame_rate = 10.0;
  double duration_s = 0.0;

  std::size_t num_frames() const { return frames.rows(); }
  std::size_t feat_dim() const { return frames.cols(); }
};

/// Builds a clip from a frame tensor; duration is T / frame_rate.
AudioClip make_clip(num::Tensor<float> frames, double frame_rate);

struct RenderConfig {
  double frame_rate = 10.0;
  std::size_t feat_dim = 32;
  double noise_sigma = 0.05;
  // Fraction of an event's frames spent in the attack and in the decay ramp.
  double ramp_fraction = 0.1;
  std::uint64_t vocab_seed = 7;
};

/// One unit-norm prototype per label. Prototypes are drawn from a Gaussian
/// in vocabulary order and redrawn until every pairwise cosine is below
/// max_cosine.
class PrototypeTable {
 public:
  PrototypeTable(std::size_t num_labels, std::size_t feat_dim, std::uint64_t seed,
                 double max_cosine = 0.5);

  std::size_t num_labels() const { return num_labels_; }
  std::size_t feat_dim() const { return feat_dim_; }
  const float* row(std::size_t label) const { return values_.data() + label * feat_dim_; }
  double cosine(std::size_t a, std::size_t b) const;

 private:
  std::size_t num_labels_;
  std::size_t feat_dim_;
  std::vector<float> values_;
};

/// Amplitude envelope value for frame k of an n-frame event.
double ramp_gain(std::size_t k, std::size_t n, double ramp_fraction);

/// intensity · prototype over the event's frames, shaped by the attack/decay
/// ramp, plus i.i.d. N(0, noise_sigma²) noise drawn from noise_seed.
num::Tensor<float> render_event(const SoundEvent& event, const PrototypeTable& prototypes,
                                const RenderConfig& config, std::uint64_t noise_seed);

/// Adds noise-free event renderings into a zero canvas at their onset frames
/// (overlaps sum), then adds the noise floor drawn from scene.seed.
AudioClip render_scene(const Scene& scene, const PrototypeTable& prototypes,
                       const RenderConfig& config);

/// Overlaps the last round(fade_s·frame_rate) frames of a with the first
/// ones of b using the linear weights w_k = (k+1)/(n+1).
AudioClip crossfade_concat(const AudioClip& a, const AudioClip& b, double fade_s);

/// ATF1 frame files: "ATF1", u32 T, u32 D, then T·D float32, all little-endian.
void write_atf1(const std::filesystem::path& path, const num::Tensor<float>& frames);
num::Tensor<float> read_atf1(const std::filesystem::path& path);

}  // namespace atlab::scene
