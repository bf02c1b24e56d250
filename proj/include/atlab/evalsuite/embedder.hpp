// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "atlab/captiongen/caption.hpp"
#include "atlab/model/model.hpp"
#include "atlab/numcore/tensor.hpp"
#include "atlab/scenegen/render.hpp"
#include "atlab/scenegen/scene.hpp"

namespace atlab::eval {

/// A clip plus, when known, the scene it was rendered from. Model-backed
/// embedders read only the frames; reference embedders may read the scene.
struct AudioRef {
  const scene::AudioClip* clip = nullptr;
  const scene::Scene* scene = nullptr;
};

/// Maps captions and clips into one space of unit-norm rows.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual num::Tensor<float> embed_texts(std::span<const text::Caption> captions) const = 0;
  virtual num::Tensor<float> embed_audio(std::span<const AudioRef> audio) const = 0;
};

class ModelEmbedder final : public Embedder {
 public:
  explicit ModelEmbedder(const model::Model<float>& model, std::size_t batch_size = 256)
      : model_(model), batch_size_(batch_size) {}

  num::Tensor<float> embed_texts(std::span<const text::Caption> captions) const override;
  num::Tensor<float> embed_audio(std::span<const AudioRef> audio) const override;

 private:
  const model::Model<float>& model_;
  std::size_t batch_size_;
};

/// Event labels named by a caption's clauses, in clause order. A clause
/// without a known noun yields no label.
std::vector<std::size_t> clause_labels(const text::Caption& caption);

/// Reference embedder that sees event order and relation perfectly. Each
/// text or scene maps to a one-hot code of its relation and label sequence:
/// "A before B", "B after A", "A then B" and "A followed by B" all assert the
/// sequence A, B; "as" and "with" assert an unordered concurrent pair. Audio
/// requires the scene.
class OrderOracleEmbedder final : public Embedder {
 public:
  static constexpr std::size_t kDim = scene::kNumEventTypes * (1 + 3 * scene::kNumEventTypes) + 1;

  num::Tensor<float> embed_texts(std::span<const text::Caption> captions) const override;
  num::Tensor<float> embed_audio(std::span<const AudioRef> audio) const override;
};

/// Order-blind reference: normalized label histograms of the caption nouns
/// and of the scene events. Prepositions and clause order are invisible.
class BagOfLabelsEmbedder final : public Embedder {
 public:
  num::Tensor<float> embed_texts(std::span<const text::Caption> captions) const override;
  num::Tensor<float> embed_audio(std::span<const AudioRef> audio) const override;
};

/// Matches frames against the render prototypes: audio is the normalized
/// mean frame, text is the prototype of the first clause's label. Needs no
/// scene, so it can score sliding windows.
class PrototypeEmbedder final : public Embedder {
 public:
  explicit PrototypeEmbedder(const scene::PrototypeTable& table) : table_(table) {}

  num::Tensor<float> embed_texts(std::span<const text::Caption> captions) const override;
  num::Tensor<float> embed_audio(std::span<const AudioRef> audio) const override;

 private:
  const scene::PrototypeTable& table_;
};

}  // namespace atlab::eval
