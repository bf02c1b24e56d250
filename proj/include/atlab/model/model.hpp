// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "atlab/model/config.hpp"
#include "atlab/numcore/graph.hpp"
#include "atlab/numcore/param_set.hpp"
#include "atlab/scenegen/render.hpp"

namespace atlab::model {

enum class Branch { kText, kAudio };

using TokenIds = std::vector<std::uint32_t>;

/// Dual encoder. Each batch is packed: the sequences of all items are
/// stacked row-wise and attention is restricted to each item's own rows, so
/// a batch costs one graph instead of one per item.
///
/// Parameter names:
///   text.tok_emb, text.block{l}.*, text.ln_f.*       toy text encoder
///   audio.chunk.w{i}, audio.chunk.b{i}               chunk encoder MLP
///   head.{text|audio}.mlp.{w1,b1,w2,b2}              meanpool_mlp head
///   head.{text|audio}.{cls,block{l}.*,ln_f.*,proj.*} transformer head
template <class T>
class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);
  // Adopts existing parameters; names and shapes must match the config.
  Model(ModelConfig config, num::ParamSet<T> params);

  const ModelConfig& config() const { return config_; }
  num::ParamSet<T>& params() { return params_; }
  const num::ParamSet<T>& params() const { return params_; }

  /// Joint-space text embeddings [B × embed_dim], rows L2-normalized.
  /// masks[i] may be empty (all valid); masked positions are never attended.
  num::Tensor<T> encode_texts(num::Graph<T>& g, std::span<const TokenIds> texts,
                              std::span<const std::vector<bool>> masks = {}) const;
  num::Tensor<T> encode_audios(num::Graph<T>& g,
                               std::span<const scene::AudioClip* const> clips) const;

  /// Per-token states of the text encoder for one sequence [t × text.dim].
  num::Tensor<T> text_states(num::Graph<T>& g, const TokenIds& tokens,
                             const std::vector<bool>& mask = {}) const;
  /// One embedding per chunk_s chunk, in temporal order [c × audio.dim]. A
  /// partial final chunk is zero-padded.
  num::Tensor<T> encode_audio_chunks(num::Graph<T>& g, const scene::AudioClip& clip) const;

  // Agg/Proj heads applied to a single sequence; output [1 × embed_dim].
  num::Tensor<T> aggregate_meanpool_mlp(num::Graph<T>& g, Branch branch,
                                        const num::Tensor<T>& seq) const;
  num::Tensor<T> aggregate_transformer(num::Graph<T>& g, Branch branch,
                                       const num::Tensor<T>& seq) const;

 private:
  struct Packed {
    num::Tensor<T> rows;
    std::vector<std::size_t> offsets;
    std::vector<bool> mask;  // empty when every row is valid
  };

  void init(std::uint64_t seed);
  void check_params() const;

  num::Tensor<T> run_text_encoder(num::Graph<T>& g, std::span<const TokenIds> texts,
                                  std::span<const std::vector<bool>> masks,
                                  std::vector<std::size_t>& offsets,
                                  std::vector<bool>& mask) const;
  num::Tensor<T> run_chunk_encoder(num::Graph<T>& g,
                                   std::span<const scene::AudioClip* const> clips,
                                   std::vector<std::size_t>& offsets) const;
  num::Tensor<T> head(num::Graph<T>& g, Branch branch, const Packed& in, bool text_cls) const;
  num::Tensor<T> transformer_head(num::Graph<T>& g, Branch branch, const Packed& in) const;
  num::Tensor<T> blocks(num::Graph<T>& g, const std::string& prefix, std::size_t layers,
                        num::Tensor<T> x, const std::vector<bool>& mask,
                        const std::vector<std::size_t>& offsets) const;

  ModelConfig config_;
  num::ParamSet<T> params_;
  num::Tensor<T> pe_text_, pe_head_text_, pe_head_audio_;
};

// kWeight: matrices, drawn per ModelConfig::init_scheme. kEmbedding: token
// tables and [CLS] vectors, always N(0, init_std²).
enum class ParamInit { kWeight, kEmbedding, kZero, kOne };

struct ParamSpec {
  std::string name;
  num::Shape shape;
  ParamInit init;
};

/// The expected parameters for a config, in registration order.
std::vector<ParamSpec> parameter_layout(const ModelConfig& config);

/// Dot product of two unit vectors; ContractError on a dimension mismatch.
double similarity(std::span<const float> a, std::span<const float> b);

/// ½[mean_i CE(S_i,:, i) + mean_j CE(S_:,j, j)] with S = text·audioᵀ / τ.
/// ArgumentError when B < 2 or τ ≤ 0.
template <class T>
num::Tensor<T> info_nce_loss(num::Graph<T>& g, const num::Tensor<T>& text,
                             const num::Tensor<T>& audio, double temperature);

/// Ids that occur more than once; in-batch duplicates act as false negatives.
std::vector<std::string> duplicate_ids(std::span<const std::string> ids);

extern template class Model<float>;
extern template class Model<double>;

}  // namespace atlab::model
