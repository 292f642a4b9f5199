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

#include "nwf/adam.hpp"

#include <cmath>

namespace nwf {

AdamState::AdamState(AdamConfig cfg, const std::vector<Parameter*>& params)
    : cfg_(cfg) {
  NWF_REQUIRE(cfg_.lr > 0, "adam: lr must be positive");
  NWF_REQUIRE(cfg_.beta1 >= 0 && cfg_.beta1 < 1, "adam: bad beta1");
  NWF_REQUIRE(cfg_.beta2 >= 0 && cfg_.beta2 < 1, "adam: bad beta2");
  slots_.reserve(params.size());
  for (Parameter* p : params) {
    NWF_REQUIRE(p != nullptr, "adam: null parameter");
    Slot s;
    s.p = p;
    s.m.assign(p->value.data.size(), 0.0);
    s.v.assign(p->value.data.size(), 0.0);
    slots_.push_back(std::move(s));
  }
}

void AdamState::step() {
  ++step_;
  const double t = static_cast<double>(step_);
  const double a = cfg_.lr * std::sqrt(1.0 - std::pow(cfg_.beta2, t)) /
                   (1.0 - std::pow(cfg_.beta1, t));
  const double b1 = cfg_.beta1;
  const double b2 = cfg_.beta2;
  const double eps = cfg_.eps;
  for (Slot& s : slots_) {
    if (!s.p->trainable) continue;
    const size_t n = s.p->value.data.size();
    const real_t* g = s.p->grad.data.data();
    double* m = s.m.data();
    double* v = s.v.data();
    real_t* p = s.p->value.data.data();
    for (size_t i = 0; i < n; ++i) {
      const double gi = static_cast<double>(g[i]);
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      p[i] = static_cast<real_t>(static_cast<double>(p[i]) -
                                 a * m[i] / (std::sqrt(v[i]) + eps));
    }
    s.p->zero_grad();
  }
}

}  // namespace nwf
