// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "atlab/numcore/gradcheck.hpp"

namespace atlab::num {

using OpInputs = std::function<void(ParamSet<double>&, std::mt19937_64&)>;
using OpBody = std::function<Tensor<double>(Graph<double>&, ParamSet<double>&)>;

/// One differentiable operation with a generator for random inputs.
struct OpGradCase {
  std::string name;
  OpInputs inputs;
  OpBody op;
};

/// Every differentiable graph op plus multi-head attention and the
/// transformer block, on small shapes.
std::vector<OpGradCase> op_gradient_cases();

struct OpGradResult {
  double max_rel_error = 0.0;
  int accepted = 0;
  int rejected = 0;
};

/// Checks f = Σ w ⊙ op(inputs) with random w at `points` accepted random
/// points; points near a ReLU kink are redrawn, up to 20 draws per point.
OpGradResult check_op_gradient(const OpInputs& inputs, const OpBody& op, int points,
                               std::uint64_t seed);

}  // namespace atlab::num
