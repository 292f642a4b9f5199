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

#include <benchmark/benchmark.h>

#include "nwf/kernels.hpp"
#include "nwf/model.hpp"
#include "nwf/rng.hpp"
#include "nwf/tape.hpp"

namespace {

using namespace nwf;

Tensor random_tensor(std::vector<int> shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& x : t.data) x = static_cast<real_t>(rng.gaussian(0.0, 0.5));
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(1);
  Tensor a = random_tensor({n, n}, rng);
  Tensor b = random_tensor({n, n}, rng);
  Tensor out = Tensor::zeros({n, n});
  for (auto _ : state) {
    kern::matmul(a.data.data(), n, n, b.data.data(), n, out.data.data());
    benchmark::DoNotOptimize(out.data.data());
  }
  state.SetItemsProcessed(state.iterations() * int64_t(n) * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_SoftmaxRow(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(2);
  Tensor x = random_tensor({1, n}, rng);
  Tensor y = Tensor::zeros({1, n});
  for (auto _ : state) {
    kern::softmax_row(x.data.data(), n, y.data.data());
    benchmark::DoNotOptimize(y.data.data());
  }
}
BENCHMARK(BM_SoftmaxRow)->Arg(64)->Arg(512);

void BM_EncoderForward(benchmark::State& state) {
  ModelConfig cfg;
  cfg.src_vocab = 20;
  cfg.tgt_vocab = 60;
  Model model(cfg, 7);
  Rng rng(3);
  std::vector<int> ids;
  for (int i = 0; i < 48; ++i) {
    ids.push_back(static_cast<int>(rng.uniform_int(4, cfg.src_vocab - 1)));
  }
  for (auto _ : state) {
    Tape t(false);
    Value enc = model.encode_source(t, ids);
    benchmark::DoNotOptimize(enc.val().data.data());
  }
}
BENCHMARK(BM_EncoderForward);

void BM_TrainStep(benchmark::State& state) {
  ModelConfig cfg;
  cfg.src_vocab = 20;
  cfg.tgt_vocab = 60;
  Model model(cfg, 7);
  Rng rng(4);
  std::vector<int> src, prefix, labels;
  for (int i = 0; i < 32; ++i) src.push_back(static_cast<int>(rng.uniform_int(4, 19)));
  prefix.push_back(Vocab::kBos);
  for (int i = 0; i < 24; ++i) {
    const int c = static_cast<int>(rng.uniform_int(4, 59));
    prefix.push_back(c);
    labels.push_back(c);
  }
  labels.push_back(Vocab::kEos);
  for (auto _ : state) {
    Tape t;
    Value enc = model.encode_source(t, src);
    Value logits = model.decode_logits(t, prefix, enc);
    Value loss = cross_entropy_sum(logits, labels);
    t.backward(loss);
    t.accumulate_param_grads();
    model.params().zero_grads();
    benchmark::DoNotOptimize(loss.val().data.data());
  }
}
BENCHMARK(BM_TrainStep);

}  // namespace

BENCHMARK_MAIN();
