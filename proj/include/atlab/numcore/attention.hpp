// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "atlab/numcore/graph.hpp"

namespace atlab::num {

/// Per-head projections: wq/wk/wv are [d × d/h], wo is [d/h × d]. The block
/// output is the sum over heads of (attention_h · wo_h), which equals the
/// usual concat-then-project form.
template <class T>
struct AttentionWeights {
  std::vector<Tensor<T>> wq, wk, wv, wo;
};

/// Scaled dot-product self-attention over the rows of x [t × d].
/// Positions with mask[i] == false are never attended to; an empty mask
/// means every position is valid. Non-empty segments (offsets from 0 to
/// t) pack several sequences into x; rows attend only within their own
/// segment. Throws ConfigError when d is not divisible
/// by the head count.
template <class T>
Tensor<T> multi_head_self_attention(Graph<T>& g, const Tensor<T>& x,
                                    const AttentionWeights<T>& w,
                                    std::span<const bool> mask = {},
                                    std::span<const std::size_t> segments = {});

template <class T>
struct TransformerBlockWeights {
  Tensor<T> ln1_gamma, ln1_beta;
  AttentionWeights<T> attention;
  Tensor<T> ln2_gamma, ln2_beta;
  Tensor<T> ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

// Pre-norm block: x + MHSA(LN(x)), then + FFN(LN(·)) with a ReLU FFN.
template <class T>
Tensor<T> transformer_block(Graph<T>& g, const Tensor<T>& x, const TransformerBlockWeights<T>& w,
                            std::span<const bool> mask = {},
                            std::span<const std::size_t> segments = {});

constexpr double kLayerNormEps = 1e-5;

/// Fixed sinusoidal position table [positions × dim].
template <class T>
Tensor<T> sinusoidal_positions(std::size_t positions, std::size_t dim);

}  // namespace atlab::num
