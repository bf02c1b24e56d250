// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "atlab/numcore/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace atlab::num {

namespace {

template <class T>
double evaluate(const ScalarFunction<T>& f) {
  Graph<T> g(Graph<T>::Mode::kInference);
  Tensor<T> out;
  try {
    out = f(g);
  } catch (const NumericError& e) {
    throw NumericError(std::string("gradcheck: function not finite: ") + e.what());
  }
  if (out.size() != 1) throw ContractError("gradcheck: function must return a scalar");
  return static_cast<double>(out[0]);
}

}  // namespace

template <class T>
GradCheckReport finite_difference_check(const ScalarFunction<T>& f, ParamSet<T>& params,
                                        const GradCheckOptions& options) {
  params.zero_grad();
  {
    Graph<T> g;
    Tensor<T> loss = f(g);
    if (g.min_relu_margin() < options.relu_margin) {
      throw GradCheckRejected("gradcheck: ReLU pre-activation within " +
                              std::to_string(options.relu_margin) + " of zero");
    }
    g.backward(loss);
  }

  GradCheckReport report;
  std::mt19937_64 rng(options.seed);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor<T>& param = params.at(p);
    std::vector<double> analytic(param.size(), 0.0);
    if (param.has_grad()) {
      auto gr = param.grad_or_empty();
      std::copy(gr.begin(), gr.end(), analytic.begin());
    }
    std::vector<std::size_t> coords(param.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coords_per_param > 0 && coords.size() > options.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t idx : coords) {
      const T saved = param[idx];
      param[idx] = static_cast<T>(saved + options.eps);
      const double up = evaluate(f);
      param[idx] = static_cast<T>(saved - options.eps);
      const double down = evaluate(f);
      param[idx] = saved;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double a = analytic[idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.coordinates;
      if (report.worst_param.empty() || rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = params.name(p);
        report.worst_index = idx;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

template GradCheckReport finite_difference_check(const ScalarFunction<float>&, ParamSet<float>&,
                                                 const GradCheckOptions&);
template GradCheckReport finite_difference_check(const ScalarFunction<double>&, ParamSet<double>&,
                                                 const GradCheckOptions&);

}  // namespace atlab::num
