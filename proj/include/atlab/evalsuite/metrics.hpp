// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "atlab/numcore/tensor.hpp"

namespace atlab::eval {

/// Row-major [queries × corpus] cosine similarities of unit-norm rows,
/// accumulated in double.
std::vector<double> similarity_matrix(const num::Tensor<float>& queries,
                                      const num::Tensor<float>& corpus);

/// 0-based rank of each query's true corpus item. Items with a higher
/// similarity rank first; equal similarities are ordered by corpus index.
std::vector<std::size_t> true_item_ranks(std::span<const double> sims, std::size_t queries,
                                         std::size_t corpus, std::span<const std::size_t> truth);

/// Fraction of ranks below k. ArgumentError for k == 0 or no ranks.
double recall_at_k(std::span<const std::size_t> ranks, std::size_t k);

/// Maps each query's true id onto its corpus index; DataError when absent.
std::vector<std::size_t> resolve_truth(std::span<const std::string> truth_ids,
                                       std::span<const std::string> corpus_ids);

/// R@k of text queries against an audio corpus.
double retrieval_recall_at_k(const num::Tensor<float>& queries, const num::Tensor<float>& corpus,
                             std::span<const std::size_t> truth, std::size_t k);

struct ClassScores {
  std::vector<double> f1;      // per class; NaN when the class never occurs
  double macro_f1 = 0.0;       // mean over classes present in truth or predictions
  std::size_t counted = 0;
};

ClassScores macro_f1(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                     std::size_t num_classes);

struct SegmentCounts {
  std::size_t tp = 0, fp = 0, fn = 0;

  SegmentCounts& operator+=(const SegmentCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  double precision() const;
  double recall() const;
  // 0 when there are no true positives.
  double f1() const;
};

}  // namespace atlab::eval
