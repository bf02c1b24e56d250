// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "atlab/scenegen/render.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "atlab/errors.hpp"

namespace atlab::scene {

namespace {

constexpr std::uint64_t kNoiseStream = 0xA0761D6478BD642Full;

void add_noise(std::span<float> values, double sigma, std::uint64_t seed) {
  if (sigma <= 0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& v : values) v = static_cast<float>(v + noise(rng));
}

// Writes the noise-free rendering of `event` into rows [row0, row0+n) of out.
void paint_event(const SoundEvent& event, const PrototypeTable& prototypes,
                 const RenderConfig& config, std::span<float> out, std::size_t row0,
                 std::size_t n) {
  const std::size_t d = config.feat_dim;
  const float* proto = prototypes.row(event.label);
  for (std::size_t k = 0; k < n; ++k) {
    const double gain = event.intensity * ramp_gain(k, n, config.ramp_fraction);
    float* dst = out.data() + (row0 + k) * d;
    for (std::size_t j = 0; j < d; ++j) dst[j] = static_cast<float>(dst[j] + gain * proto[j]);
  }
}

void check_feat_dim(const PrototypeTable& prototypes, const RenderConfig& config) {
  if (prototypes.feat_dim() != config.feat_dim) {
    throw ConfigError("prototype table has feat_dim " + std::to_string(prototypes.feat_dim()) +
                      ", render config expects " + std::to_string(config.feat_dim));
  }
}

}  // namespace

AudioClip make_clip(num::Tensor<float> frames, double frame_rate) {
  AudioClip clip;
  clip.duration_s = double(frames.rows()) / frame_rate;
  clip.frames = std::move(frames);
  clip.frame_rate = frame_rate;
  return clip;
}

PrototypeTable::PrototypeTable(std::size_t num_labels, std::size_t feat_dim, std::uint64_t seed,
                               double max_cosine)
    : num_labels_(num_labels), feat_dim_(feat_dim), values_(num_labels * feat_dim) {
  if (feat_dim == 0) throw ConfigError("feat_dim must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> cand(feat_dim);
  for (std::size_t label = 0; label < num_labels; ++label) {
    for (int attempt = 0;; ++attempt) {
      if (attempt == 10000) {
        throw ConfigError("cannot place " + std::to_string(num_labels) +
                          " prototypes with pairwise cosine < " + std::to_string(max_cosine) +
                          " in " + std::to_string(feat_dim) + " dimensions");
      }
      double norm = 0.0;
      for (auto& v : cand) {
        v = gauss(rng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (auto& v : cand) v /= norm;
      bool separated = true;
      for (std::size_t prev = 0; prev < label && separated; ++prev) {
        double dot = 0.0;
        for (std::size_t j = 0; j < feat_dim; ++j) dot += cand[j] * values_[prev * feat_dim + j];
        separated = dot < max_cosine;
      }
      if (!separated) continue;
      for (std::size_t j = 0; j < feat_dim; ++j) {
        values_[label * feat_dim + j] = static_cast<float>(cand[j]);
      }
      break;
    }
  }
}

double PrototypeTable::cosine(std::size_t a, std::size_t b) const {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t j = 0; j < feat_dim_; ++j) {
    const double x = row(a)[j], y = row(b)[j];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  return dot / std::sqrt(na * nb);
}

double ramp_gain(std::size_t k, std::size_t n, double ramp_fraction) {
  const auto r = static_cast<std::size_t>(std::floor(ramp_fraction * double(n)));
  if (r == 0) return 1.0;
  const double attack = double(k + 1) / double(r + 1);
  const double decay = double(n - k) / double(r + 1);
  return std::min({1.0, attack, decay});
}

num::Tensor<float> render_event(const SoundEvent& event, const PrototypeTable& prototypes,
                                const RenderConfig& config, std::uint64_t noise_seed) {
  check_feat_dim(prototypes, config);
  const std::size_t n = to_frames(event.dur_s, config.frame_rate);
  num::Tensor<float> out({n, config.feat_dim});
  paint_event(event, prototypes, config, out.values(), 0, n);
  add_noise(out.values(), config.noise_sigma, noise_seed);
  return out;
}

AudioClip render_scene(const Scene& scene, const PrototypeTable& prototypes,
                       const RenderConfig& config) {
  check_feat_dim(prototypes, config);
  const std::size_t total = to_frames(scene.duration_s, config.frame_rate);
  num::Tensor<float> canvas({total, config.feat_dim});
  for (const SoundEvent& e : scene.events) {
    const std::size_t row0 = to_frames(e.onset_s, config.frame_rate);
    const std::size_t n = to_frames(e.dur_s, config.frame_rate);
    if (row0 + n > total) throw ContractError("event extends past the end of the scene");
    paint_event(e, prototypes, config, canvas.values(), row0, n);
  }
  add_noise(canvas.values(), config.noise_sigma, scene.seed ^ kNoiseStream);
  return make_clip(std::move(canvas), config.frame_rate);
}

AudioClip crossfade_concat(const AudioClip& a, const AudioClip& b, double fade_s) {
  if (a.frame_rate != b.frame_rate) throw ArgumentError("crossfade: frame rates differ");
  if (a.feat_dim() != b.feat_dim()) throw ArgumentError("crossfade: feature dims differ");
  if (fade_s < 0) throw ArgumentError("crossfade: negative fade");
  const std::size_t n = to_frames(fade_s, a.frame_rate);
  const std::size_t ta = a.num_frames(), tb = b.num_frames(), d = a.feat_dim();
  if (n > ta || n > tb) {
    throw ArgumentError("crossfade: fade of " + std::to_string(fade_s) +
                        " s is longer than a clip");
  }
  num::Tensor<float> out({ta + tb - n, d});
  auto dst = out.values();
  auto av = a.frames.values(), bv = b.frames.values();
  std::copy(av.begin(), av.begin() + (ta - n) * d, dst.begin());
  for (std::size_t k = 0; k < n; ++k) {
    const double w = double(k + 1) / double(n + 1);
    for (std::size_t j = 0; j < d; ++j) {
      const double x = av[(ta - n + k) * d + j], y = bv[k * d + j];
      dst[(ta - n + k) * d + j] = static_cast<float>((1.0 - w) * x + w * y);
    }
  }
  std::copy(bv.begin() + n * d, bv.end(), dst.begin() + ta * d);
  return make_clip(std::move(out), a.frame_rate);
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b = {char(v & 0xFF), char((v >> 8) & 0xFF), char((v >> 16) & 0xFF),
                                 char((v >> 24) & 0xFF)};
  os.write(b.data(), 4);
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

}  // namespace

void write_atf1(const std::filesystem::path& path, const num::Tensor<float>& frames) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os.write("ATF1", 4);
  put_u32(os, static_cast<std::uint32_t>(frames.rows()));
  put_u32(os, static_cast<std::uint32_t>(frames.cols()));
  for (float v : frames.values()) put_u32(os, std::bit_cast<std::uint32_t>(v));
  if (!os) throw DataError("short write to " + path.string());
}

num::Tensor<float> read_atf1(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "ATF1", 4) != 0) {
    throw DataError(path.string() + ": not an ATF1 file");
  }
  const std::size_t t = get_u32(bytes.data() + 4), d = get_u32(bytes.data() + 8);
  if (bytes.size() != 12 + 4 * t * d) {
    throw DataError(path.string() + ": payload size does not match header " + std::to_string(t) +
                    "x" + std::to_string(d));
  }
  std::vector<float> values(t * d);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(get_u32(bytes.data() + 12 + 4 * i));
    if (!std::isfinite(values[i])) throw DataError(path.string() + ": non-finite frame value");
  }
  return num::Tensor<float>({t, d}, std::move(values));
}

}  // namespace atlab::scene
