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

#include "nwf/gradcheck.hpp"

#include <cmath>

#include "nwf/rng.hpp"

namespace nwf {

namespace {

double eval_loss(const std::function<Value(Tape&)>& build_loss) {
  Tape tape(false);
  Value loss = build_loss(tape);
  NWF_REQUIRE(loss.val().numel() == 1, "grad_check: loss must be scalar");
  return static_cast<double>(loss.val().data[0]);
}

}  // namespace

GradCheckReport grad_check(const std::function<Value(Tape&)>& build_loss,
                           const std::vector<Parameter*>& params,
                           const GradCheckConfig& cfg) {
  NWF_REQUIRE(cfg.eps > 0, "grad_check: eps must be positive");
  for (Parameter* p : params) {
    NWF_REQUIRE(p != nullptr, "grad_check: null parameter");
    p->zero_grad();
  }

  {
    Tape tape(true);
    Value loss = build_loss(tape);
    NWF_REQUIRE(loss.val().numel() == 1, "grad_check: loss must be scalar");
    tape.backward(loss);
    tape.accumulate_param_grads();
  }

  Rng rng(cfg.seed);
  GradCheckReport report;
  for (Parameter* p : params) {
    const int64_t n = p->value.numel();
    std::vector<int64_t> coords;
    if (n <= cfg.max_coords) {
      coords.resize(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
    } else {
      auto idx = rng.sample_indices(static_cast<size_t>(n),
                                    static_cast<size_t>(cfg.max_coords));
      coords.assign(idx.begin(), idx.end());
    }
    for (int64_t c : coords) {
      real_t& slot = p->value.data[static_cast<size_t>(c)];
      const real_t saved = slot;
      slot = saved + static_cast<real_t>(cfg.eps);
      const double hi = static_cast<double>(slot);
      const double lp = eval_loss(build_loss);
      slot = saved - static_cast<real_t>(cfg.eps);
      const double lo = static_cast<double>(slot);
      const double lm = eval_loss(build_loss);
      slot = saved;
      // Divides by the realized perturbation so storage rounding of the
      // nudged coordinate does not bias the estimate.
      const double numeric = (lp - lm) / (hi - lo);
      const double analytic =
          static_cast<double>(p->grad.data[static_cast<size_t>(c)]);
      const double denom =
          std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      ++report.coords_checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = p->name;
        report.worst_coord = c;
      }
    }
  }
  return report;
}

}  // namespace nwf
