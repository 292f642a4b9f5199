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

#ifndef NWF_GRADCHECK_HPP_
#define NWF_GRADCHECK_HPP_

#include <functional>
#include <string>
#include <vector>

#include "nwf/tape.hpp"

namespace nwf {

struct GradCheckConfig {
  double eps = 1e-5;        // central difference step
  int max_coords = 64;      // per-parameter coordinate sample cap
  uint64_t seed = 1234;     // coordinate sampling seed
};

struct GradCheckReport {
  double max_rel_err = 0;
  std::string worst_param;
  int64_t worst_coord = -1;
  int coords_checked = 0;
};

// Compares analytic gradients against central finite differences of the
// scalar loss produced by build_loss. build_loss must be a pure function of
// the parameter values (it is re-invoked on a fresh tape for every probe).
// Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-8); the report
// carries the maximum over all sampled coordinates.
GradCheckReport grad_check(const std::function<Value(Tape&)>& build_loss,
                           const std::vector<Parameter*>& params,
                           const GradCheckConfig& cfg = {});

}  // namespace nwf

#endif  // NWF_GRADCHECK_HPP_
