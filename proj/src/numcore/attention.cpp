// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "atlab/numcore/attention.hpp"

#include <cmath>
#include <string>

namespace atlab::num {

template <class T>
Tensor<T> multi_head_self_attention(Graph<T>& g, const Tensor<T>& x,
                                    const AttentionWeights<T>& w, std::span<const bool> mask,
                                    std::span<const std::size_t> segments) {
  const std::size_t heads = w.wq.size();
  if (heads == 0 || w.wk.size() != heads || w.wv.size() != heads || w.wo.size() != heads) {
    throw ConfigError("attention: inconsistent head count");
  }
  const std::size_t d = x.cols();
  if (d % heads != 0) {
    throw ConfigError("attention: width " + std::to_string(d) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  const std::size_t head_dim = d / heads;
  for (std::size_t h = 0; h < heads; ++h) {
    if (w.wq[h].cols() != head_dim || w.wk[h].cols() != head_dim || w.wv[h].cols() != head_dim ||
        w.wo[h].rows() != head_dim) {
      throw ConfigError("attention: head projection width does not equal d / heads");
    }
  }
  if (!mask.empty() && mask.size() != x.rows()) {
    throw DimensionError("attention: mask length does not match sequence length");
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  Tensor<T> out;
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor<T> q = g.matmul(x, w.wq[h]);
    Tensor<T> k = g.matmul(x, w.wk[h]);
    Tensor<T> v = g.matmul(x, w.wv[h]);
    Tensor<T> head_out = g.matmul(g.segment_attention(q, k, v, segments, mask, inv_sqrt), w.wo[h]);
    out = out.defined() ? g.add(out, head_out) : head_out;
  }
  return out;
}

template <class T>
Tensor<T> transformer_block(Graph<T>& g, const Tensor<T>& x, const TransformerBlockWeights<T>& w,
                            std::span<const bool> mask, std::span<const std::size_t> segments) {
  Tensor<T> h = g.layer_norm(x, w.ln1_gamma, w.ln1_beta, kLayerNormEps);
  Tensor<T> y = g.add(x, multi_head_self_attention(g, h, w.attention, mask, segments));
  Tensor<T> h2 = g.layer_norm(y, w.ln2_gamma, w.ln2_beta, kLayerNormEps);
  Tensor<T> ff = g.affine(g.relu(g.affine(h2, w.ffn_w1, w.ffn_b1)), w.ffn_w2, w.ffn_b2);
  return g.add(y, ff);
}

template <class T>
Tensor<T> sinusoidal_positions(std::size_t positions, std::size_t dim) {
  Tensor<T> pe({positions, dim});
  for (std::size_t p = 0; p < positions; ++p) {
    for (std::size_t i = 0; i < dim; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
      pe[p * dim + i] = static_cast<T>(std::sin(static_cast<double>(p) * freq));
      if (i + 1 < dim) pe[p * dim + i + 1] = static_cast<T>(std::cos(static_cast<double>(p) * freq));
    }
  }
  return pe;
}

template Tensor<float> multi_head_self_attention(Graph<float>&, const Tensor<float>&,
                                                 const AttentionWeights<float>&,
                                                 std::span<const bool>,
                                                 std::span<const std::size_t>);
template Tensor<double> multi_head_self_attention(Graph<double>&, const Tensor<double>&,
                                                  const AttentionWeights<double>&,
                                                  std::span<const bool>,
                                                 std::span<const std::size_t>);
template Tensor<float> transformer_block(Graph<float>&, const Tensor<float>&,
                                         const TransformerBlockWeights<float>&,
                                         std::span<const bool>,
                                         std::span<const std::size_t>);
template Tensor<double> transformer_block(Graph<double>&, const Tensor<double>&,
                                          const TransformerBlockWeights<double>&,
                                          std::span<const bool>,
                                         std::span<const std::size_t>);
template Tensor<float> sinusoidal_positions<float>(std::size_t, std::size_t);
template Tensor<double> sinusoidal_positions<double>(std::size_t, std::size_t);

}  // namespace atlab::num
