// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "atlab/evalsuite/metrics.hpp"

#include <cmath>
#include <limits>
#include <unordered_map>

namespace atlab::eval {

std::vector<double> similarity_matrix(const num::Tensor<float>& queries,
                                      const num::Tensor<float>& corpus) {
  if (queries.rank() != 2 || corpus.rank() != 2 || queries.cols() != corpus.cols()) {
    throw ContractError("similarity_matrix: embedding dimensions differ");
  }
  const std::size_t q = queries.rows(), c = corpus.rows(), d = queries.cols();
  std::vector<double> out(q * c);
  auto qv = queries.values();
  auto cv = corpus.values();
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += static_cast<double>(qv[i * d + k]) * cv[j * d + k];
      out[i * c + j] = s;
    }
  }
  return out;
}

std::vector<std::size_t> true_item_ranks(std::span<const double> sims, std::size_t queries,
                                         std::size_t corpus, std::span<const std::size_t> truth) {
  if (sims.size() != queries * corpus || truth.size() != queries) {
    throw DimensionError("true_item_ranks: similarity matrix and truth sizes disagree");
  }
  std::vector<std::size_t> ranks(queries);
  for (std::size_t i = 0; i < queries; ++i) {
    const std::size_t t = truth[i];
    if (t >= corpus) throw DataError("true_item_ranks: true item outside corpus");
    const double* row = sims.data() + i * corpus;
    std::size_t r = 0;
    for (std::size_t j = 0; j < corpus; ++j) {
      if (row[j] > row[t] || (row[j] == row[t] && j < t)) ++r;
    }
    ranks[i] = r;
  }
  return ranks;
}

double recall_at_k(std::span<const std::size_t> ranks, std::size_t k) {
  if (k == 0) throw ArgumentError("recall_at_k: k must be at least 1");
  if (ranks.empty()) throw ArgumentError("recall_at_k: no queries");
  std::size_t hits = 0;
  for (std::size_t r : ranks) hits += r < k ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

std::vector<std::size_t> resolve_truth(std::span<const std::string> truth_ids,
                                       std::span<const std::string> corpus_ids) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < corpus_ids.size(); ++j) index.emplace(corpus_ids[j], j);
  std::vector<std::size_t> out;
  out.reserve(truth_ids.size());
  for (const std::string& id : truth_ids) {
    auto it = index.find(id);
    if (it == index.end()) throw DataError("retrieval: true item '" + id + "' not in corpus");
    out.push_back(it->second);
  }
  return out;
}

double retrieval_recall_at_k(const num::Tensor<float>& queries, const num::Tensor<float>& corpus,
                             std::span<const std::size_t> truth, std::size_t k) {
  const auto sims = similarity_matrix(queries, corpus);
  const auto ranks = true_item_ranks(sims, queries.rows(), corpus.rows(), truth);
  return recall_at_k(ranks, k);
}

ClassScores macro_f1(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                     std::size_t num_classes) {
  if (predicted.size() != truth.size()) throw DimensionError("macro_f1: length mismatch");
  std::vector<std::size_t> tp(num_classes), fp(num_classes), fn(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] >= num_classes || truth[i] >= num_classes) {
      throw DataError("macro_f1: class index out of range");
    }
    if (predicted[i] == truth[i]) {
      ++tp[truth[i]];
    } else {
      ++fp[predicted[i]];
      ++fn[truth[i]];
    }
  }
  ClassScores out;
  out.f1.assign(num_classes, std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (tp[c] + fp[c] + fn[c] == 0) continue;
    out.f1[c] = 2.0 * static_cast<double>(tp[c]) / static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    sum += out.f1[c];
    ++out.counted;
  }
  out.macro_f1 = out.counted ? sum / static_cast<double>(out.counted) : 0.0;
  return out;
}

double SegmentCounts::precision() const {
  return tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
}

double SegmentCounts::recall() const {
  return tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
}

double SegmentCounts::f1() const {
  return tp ? 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn) : 0.0;
}

}  // namespace atlab::eval
