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

#ifndef NWF_ADAPTERS_HPP_
#define NWF_ADAPTERS_HPP_

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "nwf/param.hpp"

namespace nwf {

class Model;

enum class AdapterScope {
  kDecoderOnly,
  kEncoderAndDecoder,
};

// A linear layer eligible for factorization: the host weight plus whether it
// sits in the baseline encoder or decoder. Memory-branch layers, embeddings
// and layer-norm parameters are never listed.
struct LinearRef {
  std::string name;
  Parameter* weight;
  bool in_encoder;
};

// One rank-1 factor: delta = r * s^T for a host weight of shape (n x m).
struct FactorPair {
  Parameter* r;  // length n
  Parameter* s;  // length m
};

struct AdapterEntry {
  std::string host;
  Parameter* weight;
  int n, m;
  std::vector<FactorPair> factors;  // exactly k pairs
};

// Low-rank additive adapters over the baseline linear layers in scope. The
// r factors start Gaussian(0, 0.02^2) and the s factors start at zero, so
// the initial delta is exactly zero and attaching never changes behavior.
// Attaching marks every model parameter non-trainable and the factors
// trainable; the factors are then the only thing a training step can move.
class AdapterSet {
 public:
  AdapterSet(Model& model, int k, AdapterScope scope, uint64_t seed);

  int rank() const { return k_; }
  AdapterScope scope() const { return scope_; }
  bool merged() const { return merged_; }

  const std::vector<AdapterEntry>& entries() const { return entries_; }
  const AdapterEntry* entry_for(const Parameter* host) const;
  const AdapterEntry* entry_by_name(const std::string& host) const;

  std::vector<Parameter*> trainable_params();

  // W + sum_i r_i s_i^T for one host layer, materialized.
  Tensor effective_weight(const std::string& host) const;

  // Bakes every delta into the host weights. Forward passes must then run
  // without this adapter set attached. Merging twice is an error.
  void merge();

  // Subtracts the deltas again (within float tolerance of the original).
  void unmerge();

  // Number of trainable factor scalars: sum over hosts of k * (n + m).
  int64_t param_count() const;

  ParamRegistry& registry() { return registry_; }
  const ParamRegistry& registry() const { return registry_; }

 private:
  int k_;
  AdapterScope scope_;
  bool merged_ = false;
  ParamRegistry registry_;
  std::vector<AdapterEntry> entries_;
  std::unordered_map<const Parameter*, int> by_host_;
};

// delta-free census: (trainable scalar count, bytes at the 16-bit reporting
// convention) for a hypothetical attach of rank k at the given scope.
std::pair<int64_t, int64_t> adapter_param_count(Model& model, int k,
                                                AdapterScope scope);

// W + sum r_i s_i^T as a standalone tensor computation.
Tensor effective_weight(const Tensor& w,
                        const std::vector<std::pair<Tensor, Tensor>>& pairs);

}  // namespace nwf

#endif  // NWF_ADAPTERS_HPP_
