// Copyright 2026 The nwf authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#ifndef NWF_PARAM_HPP_
#define NWF_PARAM_HPP_

#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "nwf/rng.hpp"
#include "nwf/tensor.hpp"

namespace nwf {

// A named trainable tensor with a persistent gradient buffer. Gradients
// accumulate additively across backward passes; callers zero them explicitly
// (normally via ParamRegistry::zero_grads or AdamState::step policy).
struct Parameter {
  std::string name;
  Tensor value;
  // Gradient storage is not part of the parameter's logical state, and
  // forward passes hold parameters by const reference, so the buffer is
  // mutable to let backward accumulation work through those references.
  mutable Tensor grad;
  bool trainable = true;

  void zero_grad() const { grad.fill(0); }
};

// Owns parameters with stable addresses and preserves registration order,
// which defines the serialization order of checkpoints.
class ParamRegistry {
 public:
  Parameter& create(const std::string& name, std::vector<int> shape) {
    NWF_REQUIRE(index_.find(name) == index_.end(),
                "parameter already registered: " + name);
    params_.emplace_back();
    Parameter& p = params_.back();
    p.name = name;
    p.value = Tensor::zeros(shape);
    p.grad = Tensor::zeros(std::move(shape));
    index_[name] = &p;
    return p;
  }

  Parameter& create_gaussian(const std::string& name, std::vector<int> shape,
                             Rng& rng, double stddev) {
    Parameter& p = create(name, std::move(shape));
    for (auto& x : p.value.data) {
      x = static_cast<real_t>(rng.gaussian(0.0, stddev));
    }
    return p;
  }

  Parameter* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : it->second;
  }
  const Parameter* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : it->second;
  }

  std::vector<Parameter*> all() {
    std::vector<Parameter*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(&p);
    return out;
  }
  std::vector<const Parameter*> all() const {
    std::vector<const Parameter*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(&p);
    return out;
  }

  std::vector<Parameter*> trainable() {
    std::vector<Parameter*> out;
    for (auto& p : params_) {
      if (p.trainable) out.push_back(&p);
    }
    return out;
  }

  void zero_grads() {
    for (auto& p : params_) p.zero_grad();
  }

  size_t size() const { return params_.size(); }

  int64_t scalar_count() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
  }

 private:
  std::deque<Parameter> params_;
  std::unordered_map<std::string, Parameter*> index_;
};

}  // namespace nwf

#endif  // NWF_PARAM_HPP_
