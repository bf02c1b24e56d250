// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "atlab/numcore/tensor.hpp"

namespace atlab::num {

/// Named trainable tensors in registration order. Names are unique.
template <class T>
class ParamSet {
 public:
  Tensor<T>& add(const std::string& name, Tensor<T> tensor) {
    if (index_.count(name)) throw ContractError("duplicate parameter name: " + name);
    tensor.set_requires_grad(true);
    index_[name] = tensors_.size();
    names_.push_back(name);
    tensors_.push_back(std::move(tensor));
    return tensors_.back();
  }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  const Tensor<T>& get(const std::string& name) const { return tensors_.at(lookup(name)); }
  Tensor<T>& get(const std::string& name) { return tensors_.at(lookup(name)); }

  std::size_t size() const { return tensors_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor<T>& at(std::size_t i) { return tensors_[i]; }
  const Tensor<T>& at(std::size_t i) const { return tensors_[i]; }

  std::size_t num_values() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  void zero_grad() {
    for (auto& t : tensors_) t.zero_grad();
  }

  // Independent copy, optionally converting the element type.
  template <class U = T>
  ParamSet<U> clone_as() const {
    ParamSet<U> out;
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
      out.add(names_[i], tensors_[i].template cast<U>());
    }
    return out;
  }

 private:
  std::size_t lookup(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter: " + name);
    return it->second;
  }

  std::vector<std::string> names_;
  std::vector<Tensor<T>> tensors_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace atlab::num
