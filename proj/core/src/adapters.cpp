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

#include "nwf/adapters.hpp"

#include <algorithm>

#include "nwf/kernels.hpp"
#include "nwf/model.hpp"

namespace nwf {

AdapterSet::AdapterSet(Model& model, int k, AdapterScope scope, uint64_t seed)
    : k_(k), scope_(scope) {
  NWF_REQUIRE(k >= 1, "adapters: k must be >= 1");
  std::vector<LinearRef> linears = model.adaptable_linears(scope);
  NWF_REQUIRE(!linears.empty(), "adapters: scope matches no layers");
  Rng rng(derive_seed(seed, "adapter-init"));
  for (const LinearRef& ref : linears) {
    const int n = ref.weight->value.rows();
    const int m = ref.weight->value.cols();
    NWF_REQUIRE(k <= std::min(n, m) / 2,
                "adapters: k exceeds min(n, m)/2 for layer " + ref.name);
    AdapterEntry e;
    e.host = ref.name;
    e.weight = ref.weight;
    e.n = n;
    e.m = m;
    for (int i = 0; i < k; ++i) {
      FactorPair f;
      f.r = &registry_.create_gaussian(
          "adapter." + ref.name + ".r" + std::to_string(i), {n}, rng, 0.02);
      f.s = &registry_.create("adapter." + ref.name + ".s" + std::to_string(i),
                              {m});
      e.factors.push_back(f);
    }
    by_host_[ref.weight] = static_cast<int>(entries_.size());
    entries_.push_back(std::move(e));
  }
  // Freeze the whole model; the factors are the only trainable parameters.
  for (Parameter* p : model.params().all()) p->trainable = false;
}

const AdapterEntry* AdapterSet::entry_for(const Parameter* host) const {
  auto it = by_host_.find(host);
  return it == by_host_.end() ? nullptr : &entries_[static_cast<size_t>(it->second)];
}

const AdapterEntry* AdapterSet::entry_by_name(const std::string& host) const {
  for (const auto& e : entries_) {
    if (e.host == host) return &e;
  }
  return nullptr;
}

std::vector<Parameter*> AdapterSet::trainable_params() {
  return registry_.trainable();
}

namespace {

void add_delta(Tensor& w, const AdapterEntry& e, real_t sign) {
  for (const FactorPair& f : e.factors) {
    for (int p = 0; p < e.n; ++p) {
      kern::axpy(sign * f.r->value.data[static_cast<size_t>(p)],
                 f.s->value.data.data(), e.m, w.row_ptr(p));
    }
  }
}

}  // namespace

Tensor AdapterSet::effective_weight(const std::string& host) const {
  const AdapterEntry* e = entry_by_name(host);
  NWF_REQUIRE(e != nullptr, "adapters: unknown host layer " + host);
  Tensor w = e->weight->value;
  add_delta(w, *e, 1);
  return w;
}

void AdapterSet::merge() {
  NWF_REQUIRE(!merged_, "adapters: already merged");
  for (const AdapterEntry& e : entries_) {
    add_delta(e.weight->value, e, 1);
  }
  merged_ = true;
}

void AdapterSet::unmerge() {
  NWF_REQUIRE(merged_, "adapters: not merged");
  for (const AdapterEntry& e : entries_) {
    add_delta(e.weight->value, e, -1);
  }
  merged_ = false;
}

int64_t AdapterSet::param_count() const {
  int64_t count = 0;
  for (const auto& e : entries_) {
    count += static_cast<int64_t>(k_) * (e.n + e.m);
  }
  return count;
}

std::pair<int64_t, int64_t> adapter_param_count(Model& model, int k,
                                                AdapterScope scope) {
  NWF_REQUIRE(k >= 0, "adapter_param_count: k must be >= 0");
  int64_t count = 0;
  for (const LinearRef& ref : model.adaptable_linears(scope)) {
    count += static_cast<int64_t>(k) *
             (ref.weight->value.rows() + ref.weight->value.cols());
  }
  return {count, 2 * count};
}

Tensor effective_weight(const Tensor& w,
                        const std::vector<std::pair<Tensor, Tensor>>& pairs) {
  const int n = w.rows(), m = w.cols();
  Tensor out = w;
  for (const auto& [r, s] : pairs) {
    NWF_REQUIRE(r.numel() == n, "effective_weight: r length mismatch");
    NWF_REQUIRE(s.numel() == m, "effective_weight: s length mismatch");
    for (int p = 0; p < n; ++p) {
      kern::axpy(r.data[static_cast<size_t>(p)], s.data.data(), m,
                 out.row_ptr(p));
    }
  }
  return out;
}

}  // namespace nwf
