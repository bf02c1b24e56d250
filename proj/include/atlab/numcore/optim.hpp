// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "atlab/numcore/param_set.hpp"

namespace atlab::num {

struct AdamHyper {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moments are kept per parameter, in ParamSet registration order, with the
/// same shape as the parameter they track.
template <class T>
struct AdamState {
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;
  std::uint64_t step_count = 0;
  AdamHyper hyper;

  static AdamState for_params(const ParamSet<T>& params, AdamHyper hyper);
};

/// One bias-corrected Adam update using the gradients currently stored on
/// each parameter. step_count is incremented before bias correction.
/// A non-finite gradient raises NumericError naming the parameter; nothing
/// is modified in that case.
template <class T>
void adam_step(ParamSet<T>& params, AdamState<T>& state);

/// base_lr · gamma^floor(epoch / step_size)
double step_decay_lr(std::uint64_t epoch, double base_lr, std::uint64_t step_size, double gamma);

extern template struct AdamState<float>;
extern template struct AdamState<double>;

}  // namespace atlab::num
