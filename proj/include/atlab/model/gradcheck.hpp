// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "atlab/model/config.hpp"

namespace atlab::model {

struct ModelGradCheck {
  double max_rel_error = 0.0;
  std::string worst_param;
  int accepted = 0;
  int rejected = 0;
};

/// Finite-difference check of the InfoNCE loss of a freshly initialized
/// double-precision model on a two-pair micro-batch (fixed token sequences,
/// random clips of 25 and 40 frames). Point i uses init seed seed + i;
/// points near a ReLU kink are skipped until `points` are accepted or
/// 4 · points were tried. Samples coords_per_param coordinates per tensor.
ModelGradCheck full_model_gradcheck(const ModelConfig& config, int points, std::uint64_t seed,
                                    std::size_t coords_per_param = 6);

}  // namespace atlab::model
