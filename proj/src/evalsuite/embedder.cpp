// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "atlab/evalsuite/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "atlab/errors.hpp"
#include "atlab/model/train.hpp"

namespace atlab::eval {
namespace {

using text::Preposition;
constexpr std::size_t kL = scene::kNumEventTypes;

std::optional<std::size_t> label_of_token(std::uint32_t id) {
  const std::string& w = text::vocabulary().entry(id).token;
  for (std::size_t l = 0; l < kL; ++l) {
    if (scene::kEventTypes[l].noun == w) return l;
  }
  return std::nullopt;
}

void normalize_row(std::span<float> row) {
  double ss = 0.0;
  for (float v : row) ss += static_cast<double>(v) * v;
  if (ss == 0.0) return;
  const double inv = 1.0 / std::sqrt(ss);
  for (float& v : row) v = static_cast<float>(v * inv);
}

// Code layout: singles, ordered pairs, concurrent pairs, unordered pairs,
// then one slot for anything unreadable.
std::size_t single_code(std::size_t a) { return a; }
std::size_t ordered_code(std::size_t a, std::size_t b) { return kL + a * kL + b; }
std::size_t concurrent_code(std::size_t a, std::size_t b) {
  return kL + kL * kL + std::min(a, b) * kL + std::max(a, b);
}
std::size_t unordered_code(std::size_t a, std::size_t b) {
  return kL + 2 * kL * kL + std::min(a, b) * kL + std::max(a, b);
}
constexpr std::size_t kUnknownCode = OrderOracleEmbedder::kDim - 1;

std::size_t text_code(const text::Caption& c) {
  const std::vector<std::size_t> labels = clause_labels(c);
  if (labels.size() == 1 && c.clauses.size() == 1) return single_code(labels[0]);
  if (labels.size() != 2) return kUnknownCode;
  switch (c.preposition) {
    case Preposition::kBefore:
    case Preposition::kThen:
    case Preposition::kFollowedBy:
      return ordered_code(labels[0], labels[1]);
    case Preposition::kAfter:
      return ordered_code(labels[1], labels[0]);
    case Preposition::kAs:
    case Preposition::kWith:
      return concurrent_code(labels[0], labels[1]);
    case Preposition::kNone:
      return unordered_code(labels[0], labels[1]);
  }
  return kUnknownCode;
}

std::size_t scene_code(const scene::Scene& s) {
  switch (s.relation) {
    case scene::Relation::kSingle:
      return s.events.size() == 1 ? single_code(s.events[0].label) : kUnknownCode;
    case scene::Relation::kSequential:
      return s.events.size() == 2 ? ordered_code(s.events[0].label, s.events[1].label)
                                  : kUnknownCode;
    case scene::Relation::kConcurrent:
      return s.events.size() == 2 ? concurrent_code(s.events[0].label, s.events[1].label)
                                  : kUnknownCode;
  }
  return kUnknownCode;
}

const scene::Scene& require_scene(const AudioRef& a, const char* who) {
  if (a.scene == nullptr) throw ArgumentError(std::string(who) + " needs the source scene");
  return *a.scene;
}

}  // namespace

num::Tensor<float> ModelEmbedder::embed_texts(std::span<const text::Caption> captions) const {
  std::vector<model::TokenIds> tokens;
  tokens.reserve(captions.size());
  for (const auto& c : captions) tokens.push_back(c.tokens);
  return model::embed_texts(model_, tokens, batch_size_);
}

num::Tensor<float> ModelEmbedder::embed_audio(std::span<const AudioRef> audio) const {
  std::vector<const scene::AudioClip*> clips;
  clips.reserve(audio.size());
  for (const auto& a : audio) {
    if (a.clip == nullptr) throw ArgumentError("ModelEmbedder: missing clip");
    clips.push_back(a.clip);
  }
  return model::embed_audios(model_, clips, batch_size_);
}

std::vector<std::size_t> clause_labels(const text::Caption& caption) {
  std::vector<std::size_t> out;
  for (const auto& span : caption.clauses) {
    for (std::size_t i = span.begin; i < span.end && i < caption.tokens.size(); ++i) {
      if (auto l = label_of_token(caption.tokens[i])) {
        out.push_back(*l);
        break;
      }
    }
  }
  return out;
}

num::Tensor<float> OrderOracleEmbedder::embed_texts(std::span<const text::Caption> captions) const {
  num::Tensor<float> out({captions.size(), kDim});
  for (std::size_t i = 0; i < captions.size(); ++i) out[i * kDim + text_code(captions[i])] = 1.0f;
  return out;
}

num::Tensor<float> OrderOracleEmbedder::embed_audio(std::span<const AudioRef> audio) const {
  num::Tensor<float> out({audio.size(), kDim});
  for (std::size_t i = 0; i < audio.size(); ++i) {
    out[i * kDim + scene_code(require_scene(audio[i], "OrderOracleEmbedder"))] = 1.0f;
  }
  return out;
}

num::Tensor<float> BagOfLabelsEmbedder::embed_texts(std::span<const text::Caption> captions) const {
  num::Tensor<float> out({captions.size(), kL + 1});
  for (std::size_t i = 0; i < captions.size(); ++i) {
    const auto labels = clause_labels(captions[i]);
    if (labels.empty()) out[i * (kL + 1) + kL] = 1.0f;
    for (std::size_t l : labels) out[i * (kL + 1) + l] += 1.0f;
    normalize_row(out.values().subspan(i * (kL + 1), kL + 1));
  }
  return out;
}

num::Tensor<float> BagOfLabelsEmbedder::embed_audio(std::span<const AudioRef> audio) const {
  num::Tensor<float> out({audio.size(), kL + 1});
  for (std::size_t i = 0; i < audio.size(); ++i) {
    const scene::Scene& s = require_scene(audio[i], "BagOfLabelsEmbedder");
    if (s.events.empty()) out[i * (kL + 1) + kL] = 1.0f;
    for (const auto& e : s.events) out[i * (kL + 1) + e.label] += 1.0f;
    normalize_row(out.values().subspan(i * (kL + 1), kL + 1));
  }
  return out;
}

num::Tensor<float> PrototypeEmbedder::embed_texts(std::span<const text::Caption> captions) const {
  const std::size_t d = table_.feat_dim();
  num::Tensor<float> out({captions.size(), d});
  for (std::size_t i = 0; i < captions.size(); ++i) {
    const auto labels = clause_labels(captions[i]);
    if (labels.empty()) throw DataError("PrototypeEmbedder: caption names no event");
    std::copy_n(table_.row(labels[0]), d, out.values().begin() + i * d);
  }
  return out;
}

num::Tensor<float> PrototypeEmbedder::embed_audio(std::span<const AudioRef> audio) const {
  const std::size_t d = table_.feat_dim();
  num::Tensor<float> out({audio.size(), d});
  for (std::size_t i = 0; i < audio.size(); ++i) {
    const scene::AudioClip* clip = audio[i].clip;
    if (clip == nullptr || clip->num_frames() == 0) {
      throw ArgumentError("PrototypeEmbedder: empty clip");
    }
    if (clip->feat_dim() != d) throw DimensionError("PrototypeEmbedder: feature width mismatch");
    std::vector<double> mean(d, 0.0);
    for (std::size_t t = 0; t < clip->num_frames(); ++t) {
      for (std::size_t j = 0; j < d; ++j) mean[j] += clip->frames.at(t, j);
    }
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = static_cast<float>(mean[j]);
    normalize_row(out.values().subspan(i * d, d));
  }
  return out;
}

}  // namespace atlab::eval
