// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "atlab/model/model.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

#include "atlab/numcore/attention.hpp"

namespace atlab::model {

using num::Graph;
using num::Shape;
using num::Tensor;

namespace {

std::string branch_name(Branch b) { return b == Branch::kText ? "text" : "audio"; }

std::size_t branch_width(const ModelConfig& c, Branch b) {
  return b == Branch::kText ? c.text.dim : c.audio.dim;
}

void add_block(std::vector<ParamSpec>& out, const std::string& p, std::size_t d,
               std::size_t heads, std::size_t ffn) {
  const std::size_t dh = d / heads;
  out.push_back({p + ".ln1.gamma", {d}, ParamInit::kOne});
  out.push_back({p + ".ln1.beta", {d}, ParamInit::kZero});
  for (std::size_t h = 0; h < heads; ++h) {
    const std::string hs = std::to_string(h);
    out.push_back({p + ".attn.wq" + hs, {d, dh}, ParamInit::kWeight});
    out.push_back({p + ".attn.wk" + hs, {d, dh}, ParamInit::kWeight});
    out.push_back({p + ".attn.wv" + hs, {d, dh}, ParamInit::kWeight});
    out.push_back({p + ".attn.wo" + hs, {dh, d}, ParamInit::kWeight});
  }
  out.push_back({p + ".ln2.gamma", {d}, ParamInit::kOne});
  out.push_back({p + ".ln2.beta", {d}, ParamInit::kZero});
  out.push_back({p + ".ffn.w1", {d, ffn}, ParamInit::kWeight});
  out.push_back({p + ".ffn.b1", {ffn}, ParamInit::kZero});
  out.push_back({p + ".ffn.w2", {ffn, d}, ParamInit::kWeight});
  out.push_back({p + ".ffn.b2", {d}, ParamInit::kZero});
}

}  // namespace

std::vector<ParamSpec> parameter_layout(const ModelConfig& c) {
  validate_config(c);
  std::vector<ParamSpec> out;
  const std::size_t dt = c.text.dim;
  out.push_back({"text.tok_emb", {c.text.vocab_size, dt}, ParamInit::kEmbedding});
  for (std::size_t l = 0; l < c.text.layers; ++l) {
    add_block(out, "text.block" + std::to_string(l), dt, c.text.heads, c.text.ffn_dim);
  }
  out.push_back({"text.ln_f.gamma", {dt}, ParamInit::kOne});
  out.push_back({"text.ln_f.beta", {dt}, ParamInit::kZero});

  std::size_t in = c.audio.chunk_frames() * c.audio.feat_dim;
  std::vector<std::size_t> widths = c.audio.hidden;
  widths.push_back(c.audio.dim);
  for (std::size_t i = 0; i < widths.size(); ++i) {
    out.push_back({"audio.chunk.w" + std::to_string(i), {in, widths[i]}, ParamInit::kWeight});
    out.push_back({"audio.chunk.b" + std::to_string(i), {widths[i]}, ParamInit::kZero});
    in = widths[i];
  }

  const std::size_t e = c.embed_dim;
  for (Branch b : {Branch::kText, Branch::kAudio}) {
    const std::string p = "head." + branch_name(b);
    const std::size_t d = branch_width(c, b);
    if (c.head_type == HeadType::kMeanpoolMlp) {
      out.push_back({p + ".mlp.w1", {d, e}, ParamInit::kWeight});
      out.push_back({p + ".mlp.b1", {e}, ParamInit::kZero});
      out.push_back({p + ".mlp.w2", {e, e}, ParamInit::kWeight});
      out.push_back({p + ".mlp.b2", {e}, ParamInit::kZero});
    } else {
      out.push_back({p + ".cls", {1, d}, ParamInit::kEmbedding});
      for (std::size_t l = 0; l < c.head.layers; ++l) {
        add_block(out, p + ".block" + std::to_string(l), d, c.head.heads, c.head.ffn_dim);
      }
      out.push_back({p + ".ln_f.gamma", {d}, ParamInit::kOne});
      out.push_back({p + ".ln_f.beta", {d}, ParamInit::kZero});
      out.push_back({p + ".proj.w", {d, e}, ParamInit::kWeight});
      out.push_back({p + ".proj.b", {e}, ParamInit::kZero});
    }
  }
  return out;
}

template <class T>
Model<T>::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  validate_config(config_);
  init(seed);
}

template <class T>
Model<T>::Model(ModelConfig config, num::ParamSet<T> params)
    : config_(std::move(config)), params_(std::move(params)) {
  validate_config(config_);
  check_params();
  init(0);
}

template <class T>
void Model<T>::init(std::uint64_t seed) {
  if (params_.size() == 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    for (const ParamSpec& spec : parameter_layout(config_)) {
      double stddev = config_.init_std;
      if (spec.init == ParamInit::kWeight && config_.init_scheme == InitScheme::kXavier) {
        stddev = std::sqrt(2.0 / static_cast<double>(spec.shape[0] + spec.shape[1]));
      }
      Tensor<T> t(spec.shape);
      for (T& v : t.values()) {
        v = spec.init == ParamInit::kOne    ? T(1)
            : spec.init == ParamInit::kZero ? T(0)
                                            : static_cast<T>(stddev * unit(rng));
      }
      params_.add(spec.name, std::move(t));
    }
  }
  pe_text_ = num::sinusoidal_positions<T>(config_.text.max_len, config_.text.dim);
  pe_head_text_ = num::sinusoidal_positions<T>(config_.head.max_positions, config_.text.dim);
  pe_head_audio_ = num::sinusoidal_positions<T>(config_.head.max_positions, config_.audio.dim);
}

template <class T>
void Model<T>::check_params() const {
  const auto layout = parameter_layout(config_);
  if (layout.size() != params_.size()) {
    throw ContractError("model: expected " + std::to_string(layout.size()) + " parameters, got " +
                        std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (params_.name(i) != layout[i].name) {
      throw ContractError("model: parameter " + std::to_string(i) + " is " + params_.name(i) +
                          ", expected " + layout[i].name);
    }
    if (params_.at(i).shape() != layout[i].shape) {
      throw ContractError("model: parameter " + layout[i].name + " has shape " +
                          num::shape_string(params_.at(i).shape()) + ", expected " +
                          num::shape_string(layout[i].shape));
    }
  }
}

namespace {

// Rows of a fixed table picked by index; constant, so never differentiated.
template <class T>
Tensor<T> gather_constant(const Tensor<T>& table, const std::vector<std::size_t>& rows) {
  const std::size_t d = table.cols();
  Tensor<T> out({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(table.values().data() + rows[i] * d, d, out.values().data() + i * d);
  }
  return out;
}

}  // namespace

template <class T>
Tensor<T> Model<T>::blocks(Graph<T>& g, const std::string& prefix, std::size_t layers,
                           Tensor<T> x, const std::vector<bool>& mask,
                           const std::vector<std::size_t>& offsets) const {
  // std::vector<bool> has no contiguous storage.
  std::unique_ptr<bool[]> mask_buf;
  std::span<const bool> mask_span;
  if (!mask.empty()) {
    mask_buf = std::make_unique<bool[]>(mask.size());
    std::copy(mask.begin(), mask.end(), mask_buf.get());
    mask_span = {mask_buf.get(), mask.size()};
  }
  const std::size_t heads = prefix == "text" ? config_.text.heads : config_.head.heads;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string p = prefix + ".block" + std::to_string(l);
    num::TransformerBlockWeights<T> w;
    w.ln1_gamma = params_.get(p + ".ln1.gamma");
    w.ln1_beta = params_.get(p + ".ln1.beta");
    for (std::size_t h = 0; h < heads; ++h) {
      const std::string hs = std::to_string(h);
      w.attention.wq.push_back(params_.get(p + ".attn.wq" + hs));
      w.attention.wk.push_back(params_.get(p + ".attn.wk" + hs));
      w.attention.wv.push_back(params_.get(p + ".attn.wv" + hs));
      w.attention.wo.push_back(params_.get(p + ".attn.wo" + hs));
    }
    w.ln2_gamma = params_.get(p + ".ln2.gamma");
    w.ln2_beta = params_.get(p + ".ln2.beta");
    w.ffn_w1 = params_.get(p + ".ffn.w1");
    w.ffn_b1 = params_.get(p + ".ffn.b1");
    w.ffn_w2 = params_.get(p + ".ffn.w2");
    w.ffn_b2 = params_.get(p + ".ffn.b2");
    x = num::transformer_block(g, x, w, mask_span, offsets);
  }
  return x;
}

template <class T>
Tensor<T> Model<T>::run_text_encoder(Graph<T>& g, std::span<const TokenIds> texts,
                                     std::span<const std::vector<bool>> masks,
                                     std::vector<std::size_t>& offsets,
                                     std::vector<bool>& mask) const {
  if (texts.empty()) throw ArgumentError("encode_texts: empty batch");
  if (!masks.empty() && masks.size() != texts.size()) {
    throw DimensionError("encode_texts: one mask per text expected");
  }
  std::vector<std::size_t> ids, positions;
  offsets.assign(1, 0);
  mask.clear();
  bool any_mask = false;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const TokenIds& t = texts[i];
    if (t.empty()) throw ArgumentError("encode_texts: empty token sequence");
    if (t.size() > config_.text.max_len) {
      throw ContractError("encode_texts: " + std::to_string(t.size()) +
                          " tokens exceed text.max_len = " + std::to_string(config_.text.max_len));
    }
    const bool has_mask = !masks.empty() && !masks[i].empty();
    if (has_mask && masks[i].size() != t.size()) {
      throw DimensionError("encode_texts: mask length does not match token count");
    }
    any_mask = any_mask || has_mask;
    for (std::size_t j = 0; j < t.size(); ++j) {
      if (t[j] >= config_.text.vocab_size) {
        throw ContractError("encode_texts: token id " + std::to_string(t[j]) +
                            " outside vocabulary of " + std::to_string(config_.text.vocab_size));
      }
      ids.push_back(t[j]);
      positions.push_back(j);
      mask.push_back(has_mask ? masks[i][j] : true);
    }
    offsets.push_back(ids.size());
  }
  if (!any_mask) mask.clear();
  Tensor<T> x = g.scale(g.embedding(params_.get("text.tok_emb"), ids), config_.token_scale());
  x = g.add(x, gather_constant(pe_text_, positions));
  x = blocks(g, "text", config_.text.layers, x, mask, offsets);
  return g.layer_norm(x, params_.get("text.ln_f.gamma"), params_.get("text.ln_f.beta"),
                      num::kLayerNormEps);
}

template <class T>
Tensor<T> Model<T>::run_chunk_encoder(Graph<T>& g,
                                      std::span<const scene::AudioClip* const> clips,
                                      std::vector<std::size_t>& offsets) const {
  if (clips.empty()) throw ArgumentError("encode_audio: empty batch");
  const std::size_t cf = config_.audio.chunk_frames(), d = config_.audio.feat_dim;
  offsets.assign(1, 0);
  for (const scene::AudioClip* clip : clips) {
    if (clip->num_frames() == 0) throw ArgumentError("encode_audio: empty clip");
    if (clip->feat_dim() != d) {
      throw DimensionError("encode_audio: clip has " + std::to_string(clip->feat_dim()) +
                           " features, model expects " + std::to_string(d));
    }
    if (std::abs(clip->frame_rate - config_.audio.frame_rate) > 1e-9) {
      throw ArgumentError("encode_audio: clip frame rate differs from the model's");
    }
    offsets.push_back(offsets.back() + (clip->num_frames() + cf - 1) / cf);
  }
  Tensor<T> x({offsets.back(), cf * d});
  auto xv = x.values();
  for (std::size_t i = 0; i < clips.size(); ++i) {
    auto f = clips[i]->frames.values();
    // Frames are contiguous, so chunk c is simply the next cf·d values; the
    // tail of a partial last chunk stays zero.
    const std::size_t base = offsets[i] * cf * d;
    for (std::size_t j = 0; j < f.size(); ++j) xv[base + j] = static_cast<T>(f[j]);
  }
  const std::size_t layers = config_.audio.hidden.size() + 1;
  for (std::size_t i = 0; i < layers; ++i) {
    x = g.affine(x, params_.get("audio.chunk.w" + std::to_string(i)),
                 params_.get("audio.chunk.b" + std::to_string(i)));
    if (i + 1 < layers) x = g.relu(x);
  }
  return x;
}

template <class T>
Tensor<T> Model<T>::transformer_head(Graph<T>& g, Branch branch, const Packed& in) const {
  const std::string p = "head." + branch_name(branch);
  const std::size_t segs = in.offsets.size() - 1;
  std::vector<std::size_t> ids, positions, offsets{0};
  std::vector<bool> mask;
  for (std::size_t s = 0; s < segs; ++s) {
    const std::size_t len = in.offsets[s + 1] - in.offsets[s] + 1;
    if (len > config_.head.max_positions) {
      throw ContractError("aggregate_transformer: sequence of " + std::to_string(len) +
                          " positions exceeds head.max_positions = " +
                          std::to_string(config_.head.max_positions));
    }
    ids.push_back(0);
    positions.push_back(0);
    mask.push_back(true);
    for (std::size_t i = in.offsets[s]; i < in.offsets[s + 1]; ++i) {
      ids.push_back(i + 1);
      positions.push_back(i - in.offsets[s] + 1);
      mask.push_back(in.mask.empty() || in.mask[i]);
    }
    offsets.push_back(ids.size());
  }
  if (in.mask.empty()) mask.clear();
  const Tensor<T> parts[] = {params_.get(p + ".cls"), in.rows};
  Tensor<T> x = g.embedding(g.concat_rows(parts), ids);
  if (config_.head.positional) {
    x = g.add(x, gather_constant(branch == Branch::kText ? pe_head_text_ : pe_head_audio_,
                                 positions));
  }
  x = blocks(g, p, config_.head.layers, x, mask, offsets);
  x = g.layer_norm(x, params_.get(p + ".ln_f.gamma"), params_.get(p + ".ln_f.beta"),
                   num::kLayerNormEps);
  offsets.pop_back();
  Tensor<T> first = g.embedding(x, offsets);
  return g.l2_normalize_rows(g.affine(first, params_.get(p + ".proj.w"), params_.get(p + ".proj.b")));
}

template <class T>
Tensor<T> Model<T>::head(Graph<T>& g, Branch branch, const Packed& in, bool cls_pool) const {
  if (config_.head_type == HeadType::kTransformer) return transformer_head(g, branch, in);
  const std::string p = "head." + branch_name(branch) + ".mlp.";
  Tensor<T> pooled;
  if (cls_pool) {
    std::vector<std::size_t> starts(in.offsets.begin(), in.offsets.end() - 1);
    pooled = g.embedding(in.rows, starts);
  } else {
    pooled = g.segment_mean_rows(in.rows, in.offsets);
  }
  Tensor<T> h = g.relu(g.affine(pooled, params_.get(p + "w1"), params_.get(p + "b1")));
  return g.l2_normalize_rows(g.affine(h, params_.get(p + "w2"), params_.get(p + "b2")));
}

template <class T>
Tensor<T> Model<T>::encode_texts(Graph<T>& g, std::span<const TokenIds> texts,
                                 std::span<const std::vector<bool>> masks) const {
  Packed in;
  in.rows = run_text_encoder(g, texts, masks, in.offsets, in.mask);
  return head(g, Branch::kText, in, /*cls_pool=*/true);
}

template <class T>
Tensor<T> Model<T>::encode_audios(Graph<T>& g,
                                  std::span<const scene::AudioClip* const> clips) const {
  Packed in;
  in.rows = run_chunk_encoder(g, clips, in.offsets);
  return head(g, Branch::kAudio, in, /*cls_pool=*/false);
}

template <class T>
Tensor<T> Model<T>::text_states(Graph<T>& g, const TokenIds& tokens,
                                const std::vector<bool>& mask) const {
  std::vector<std::size_t> offsets;
  std::vector<bool> packed_mask;
  const std::vector<bool> masks[] = {mask};
  return run_text_encoder(g, std::span<const TokenIds>(&tokens, 1), masks, offsets, packed_mask);
}

template <class T>
Tensor<T> Model<T>::encode_audio_chunks(Graph<T>& g, const scene::AudioClip& clip) const {
  std::vector<std::size_t> offsets;
  const scene::AudioClip* clips[] = {&clip};
  return run_chunk_encoder(g, clips, offsets);
}

template <class T>
Tensor<T> Model<T>::aggregate_meanpool_mlp(Graph<T>& g, Branch branch,
                                           const Tensor<T>& seq) const {
  if (config_.head_type != HeadType::kMeanpoolMlp) {
    throw ContractError("aggregate_meanpool_mlp: model has a transformer head");
  }
  if (seq.rank() != 2 || seq.rows() == 0) throw ArgumentError("aggregate_meanpool_mlp: empty sequence");
  Packed in{seq, {0, seq.rows()}, {}};
  return head(g, branch, in, /*cls_pool=*/false);
}

template <class T>
Tensor<T> Model<T>::aggregate_transformer(Graph<T>& g, Branch branch, const Tensor<T>& seq) const {
  if (config_.head_type != HeadType::kTransformer) {
    throw ContractError("aggregate_transformer: model has a meanpool_mlp head");
  }
  if (seq.rank() != 2 || seq.rows() == 0) throw ArgumentError("aggregate_transformer: empty sequence");
  Packed in{seq, {0, seq.rows()}, {}};
  return transformer_head(g, branch, in);
}

double similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw ContractError("similarity: dimensions " + std::to_string(a.size()) + " and " +
                        std::to_string(b.size()) + " differ");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

template <class T>
Tensor<T> info_nce_loss(Graph<T>& g, const Tensor<T>& text, const Tensor<T>& audio,
                        double temperature) {
  if (text.rank() != 2 || audio.rank() != 2 || text.shape() != audio.shape()) {
    throw DimensionError("info_nce_loss: text and audio batches must have equal shapes");
  }
  if (text.rows() < 2) throw ArgumentError("info_nce_loss: batch size must be at least 2");
  if (!(temperature > 0)) throw ArgumentError("info_nce_loss: temperature must be positive");
  std::vector<std::size_t> diag(text.rows());
  for (std::size_t i = 0; i < diag.size(); ++i) diag[i] = i;
  Tensor<T> s = g.scale(g.matmul_nt(text, audio), 1.0 / temperature);
  Tensor<T> rows = g.cross_entropy_rows(s, diag);
  Tensor<T> cols = g.cross_entropy_rows(g.transpose(s), diag);
  return g.scale(g.add(rows, cols), 0.5);
}

std::vector<std::string> duplicate_ids(std::span<const std::string> ids) {
  std::vector<std::string> sorted(ids.begin(), ids.end()), out;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i] == sorted[i - 1] && (out.empty() || out.back() != sorted[i])) {
      out.push_back(sorted[i]);
    }
  }
  return out;
}

template class Model<float>;
template class Model<double>;
template Tensor<float> info_nce_loss(Graph<float>&, const Tensor<float>&, const Tensor<float>&,
                                     double);
template Tensor<double> info_nce_loss(Graph<double>&, const Tensor<double>&,
                                      const Tensor<double>&, double);

}  // namespace atlab::model
