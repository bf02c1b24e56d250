// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "atlab/numcore/optim.hpp"

#include <cmath>

namespace atlab::num {

template <class T>
AdamState<T> AdamState<T>::for_params(const ParamSet<T>& params, AdamHyper hyper) {
  AdamState state;
  state.hyper = hyper;
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.first_moment.emplace_back(params.at(i).shape());
    state.second_moment.emplace_back(params.at(i).shape());
  }
  return state;
}

template <class T>
void adam_step(ParamSet<T>& params, AdamState<T>& state) {
  if (state.first_moment.size() != params.size()) {
    throw ContractError("adam_step: optimizer state does not match parameter set");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Tensor<T>& param = params.at(p);
    if (state.first_moment[p].shape() != param.shape()) {
      throw ContractError("adam_step: moment shape mismatch for " + params.name(p));
    }
    for (T gv : param.grad_or_empty()) {
      if (!std::isfinite(gv)) throw NumericError("non-finite gradient for parameter " + params.name(p));
    }
  }

  state.step_count += 1;
  const AdamHyper& h = state.hyper;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(h.beta1, t);
  const double bc2 = 1.0 - std::pow(h.beta2, t);

  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor<T>& param = params.at(p);
    auto values = param.values();
    auto grad = param.grad_or_empty();
    auto m = state.first_moment[p].values();
    auto v = state.second_moment[p].values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad.empty() ? 0.0 : static_cast<double>(grad[i]);
      const double mi = h.beta1 * m[i] + (1.0 - h.beta1) * g;
      const double vi = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = h.lr * (mi / bc1) / (std::sqrt(vi / bc2) + h.epsilon);
      values[i] = static_cast<T>(values[i] - update);
    }
  }
}

double step_decay_lr(std::uint64_t epoch, double base_lr, std::uint64_t step_size, double gamma) {
  if (step_size == 0) throw ConfigError("step_decay_lr: step_size must be at least 1");
  return base_lr * std::pow(gamma, static_cast<double>(epoch / step_size));
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(ParamSet<float>&, AdamState<float>&);
template void adam_step(ParamSet<double>&, AdamState<double>&);

}  // namespace atlab::num
