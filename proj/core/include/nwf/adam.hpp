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

#ifndef NWF_ADAM_HPP_
#define NWF_ADAM_HPP_

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "nwf/param.hpp"

namespace nwf {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction folded into the step size:
//   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2
//   alpha_t = lr * sqrt(1 - b2^t) / (1 - b1^t)
//   p <- p - alpha_t * m / (sqrt(v) + eps)
// The first step therefore moves each coordinate by about lr in the
// direction of -g. Moment state and update arithmetic are kept in double
// regardless of real_t.
class AdamState {
 public:
  AdamState(AdamConfig cfg, const std::vector<Parameter*>& params);

  // One update over the parameters registered at construction, consuming
  // their current .grad buffers. Grad buffers are zeroed afterwards.
  void step();

  int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  struct Slot {
    Parameter* p;
    std::vector<double> m, v;
  };
  AdamConfig cfg_;
  std::vector<Slot> slots_;
  int64_t step_ = 0;
};

}  // namespace nwf

#endif  // NWF_ADAM_HPP_
