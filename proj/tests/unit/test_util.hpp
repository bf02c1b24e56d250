// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <vector>

#include "atlab/numcore/tensor.hpp"

namespace atlab::testing {

template <class T>
num::Tensor<T> random_tensor(num::Shape shape, std::mt19937_64& rng, double stddev = 1.0,
                             bool requires_grad = false) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<T> v(num::shape_size(shape));
  for (auto& x : v) x = static_cast<T>(dist(rng));
  return num::Tensor<T>(std::move(shape), std::move(v), requires_grad);
}

}  // namespace atlab::testing
