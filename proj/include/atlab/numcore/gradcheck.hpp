// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "atlab/numcore/graph.hpp"
#include "atlab/numcore/param_set.hpp"

namespace atlab::num {

struct GradCheckOptions {
  double eps = 1e-5;
  // 0 checks every coordinate; otherwise a seeded sample per tensor.
  std::size_t max_coords_per_param = 0;
  std::uint64_t seed = 0;
  // Points whose ReLU pre-activations come this close to the kink are
  // rejected, since the function is not differentiable there.
  double relu_margin = 1e-4;
  double denominator_floor = 1e-8;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

// Raised when the evaluation point sits too close to a ReLU kink.
struct GradCheckRejected : ArgumentError {
  explicit GradCheckRejected(const std::string& w) : ArgumentError(w) {}
};

template <class T>
using ScalarFunction = std::function<Tensor<T>(Graph<T>&)>;

/// Compares backward() against central differences, coordinate by
/// coordinate: rel = |a - n| / max(|a|, |n|, floor). Returns the worst one.
template <class T>
GradCheckReport finite_difference_check(const ScalarFunction<T>& f, ParamSet<T>& params,
                                        const GradCheckOptions& options = {});

extern template GradCheckReport finite_difference_check(const ScalarFunction<float>&,
                                                        ParamSet<float>&,
                                                        const GradCheckOptions&);
extern template GradCheckReport finite_difference_check(const ScalarFunction<double>&,
                                                        ParamSet<double>&,
                                                        const GradCheckOptions&);

}  // namespace atlab::num
