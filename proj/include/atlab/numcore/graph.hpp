// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "atlab/numcore/tensor.hpp"

namespace atlab::num {

/// Tape of differentiable operations.
///
/// Every op below computes its forward result immediately and, when the graph
/// is recording and some input requires a gradient, appends a node holding
/// the closure that propagates the output gradient back to the inputs. Nodes
/// are appended in creation order, which is a topological order, so
/// backward() is a single reverse sweep that visits each node once.
///
/// Each forward output is checked for NaN/Inf; a non-finite value raises
/// NumericError naming the op.
template <class T>
class Graph {
 public:
  enum class Mode { kTrain, kInference };

  explicit Graph(Mode mode = Mode::kTrain) : mode_(mode) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return mode_ == Mode::kTrain; }
  std::size_t num_nodes() const { return nodes_.size(); }
  void clear();

  /// Smallest |pre-activation| seen by relu() since construction or clear().
  double min_relu_margin() const { return min_relu_margin_; }

  // y = x·W + b with x [n×d_in], W [d_in×d_out], b [d_out].
  Tensor<T> affine(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);
  Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
  // a·bᵀ with a [n×k], b [m×k].
  Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);
  Tensor<T> transpose(const Tensor<T>& x);

  Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
  // Elementwise product of same-shaped tensors.
  Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
  // x [n×d] + r broadcast over rows, r of size d.
  Tensor<T> add_row(const Tensor<T>& x, const Tensor<T>& r);
  Tensor<T> scale(const Tensor<T>& x, double s);
  Tensor<T> relu(const Tensor<T>& x);

  // 1-D softmax over all elements.
  Tensor<T> softmax(const Tensor<T>& v);
  // Row-wise softmax; columns with key_mask[c] == false get exactly zero
  // weight. An empty mask means all columns are valid.
  Tensor<T> softmax_rows(const Tensor<T>& x, std::span<const bool> key_mask = {});
  // Scaled dot-product attention over packed sequences: rows
  // [offsets[s], offsets[s+1]) of q attend only to the same rows of k and v,
  // skipping keys whose key_mask entry is false. Empty offsets mean a single
  // sequence. q, k [n×dk], v [n×dv].
  Tensor<T> segment_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                              std::span<const std::size_t> offsets,
                              std::span<const bool> key_mask, double scale);
  Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                       double eps);

  // Gathers rows of table [V×d].
  Tensor<T> embedding(const Tensor<T>& table, std::span<const std::size_t> ids);
  Tensor<T> concat_rows(std::span<const Tensor<T>> parts);
  Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t end);
  Tensor<T> mean_rows(const Tensor<T>& x);
  // Row mean of each non-empty segment [offsets[s], offsets[s+1]) -> [S×d].
  // Bit-identical under any permutation of rows within a segment.
  Tensor<T> segment_mean_rows(const Tensor<T>& x, std::span<const std::size_t> offsets);
  Tensor<T> l2_normalize_rows(const Tensor<T>& x);

  // Scalar reductions.
  Tensor<T> sum(const Tensor<T>& x);
  // Mean over rows of -log softmax(logits[i,:])[targets[i]].
  Tensor<T> cross_entropy_rows(const Tensor<T>& logits, std::span<const std::size_t> targets);

  /// Reverse sweep from a scalar loss. Gradients accumulate into every
  /// tensor that requires one; call zero_grad on parameters beforehand.
  void backward(const Tensor<T>& loss);

 private:
  struct Node {
    std::string_view op;
    Tensor<T> output;
    std::function<void()> propagate;
  };

  bool needs_grad(std::initializer_list<const Tensor<T>*> inputs) const;
  Tensor<T> finish(std::string_view op, Tensor<T> out, bool track,
                   std::function<void()> propagate);

  Mode mode_;
  std::vector<Node> nodes_;
  double min_relu_margin_ = 1e300;
};

extern template class Graph<float>;
extern template class Graph<double>;

template <class T>
void backward(Graph<T>& graph, const Tensor<T>& loss) {
  graph.backward(loss);
}

}  // namespace atlab::num
