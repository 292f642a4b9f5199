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

#ifndef NWF_TRAINING_HPP_
#define NWF_TRAINING_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "nwf/adapters.hpp"
#include "nwf/corpus.hpp"
#include "nwf/model.hpp"
#include "nwf/rng.hpp"
#include "nwf/vocab.hpp"

namespace nwf {

// Weighted sampler over two pools: each adaptation example carries upsample
// times the weight of a baseline example, realized as sampling with
// replacement (choose the pool by its total weight, then uniformly within).
class MixtureSampler {
 public:
  MixtureSampler(std::vector<SeqExample> baseline,
                 std::vector<SeqExample> adaptation, double upsample,
                 uint64_t seed);

  const SeqExample& sample();

  // U*N / (U*N + B): the expected share of adaptation examples per batch.
  double adaptation_fraction() const;
  int64_t baseline_size() const { return int64_t(baseline_.size()); }
  int64_t adaptation_size() const { return int64_t(adaptation_.size()); }

 private:
  std::vector<SeqExample> baseline_;
  std::vector<SeqExample> adaptation_;
  double upsample_;
  Rng rng_;
};

MixtureSampler make_mixture(std::vector<SeqExample> baseline,
                            std::vector<SeqExample> adaptation,
                            double upsample, uint64_t seed);

struct TrainConfig {
  double lr = 1e-3;        // adapter stages default to 1e-4 at the call site
  int batch_size = 32;
  int eval_interval = 200;
  int patience = 3;        // early stop after this many non-improving evals
  int max_steps = 30000;

  void validate() const;
};

// One row per evaluation: mean per-token train NLL since the previous eval
// (NaN for the step-0 row) and the dev perplexity.
struct StepLogRow {
  int step = 0;
  double train_loss = 0;
  double dev_ppl = 0;
};

struct TrainResult {
  std::vector<StepLogRow> log;
  double best_dev_ppl = 0;
  int best_step = 0;
  int steps_run = 0;
};

// CSV: step,train_loss,dev_ppl.
void write_step_log(const std::string& path,
                    const std::vector<StepLogRow>& log);

// Trains all base parameters on uniformly sampled batches, evaluating dev
// perplexity at step 0 and every eval_interval steps; the model is left at
// the best-dev parameter values. Non-finite loss aborts with NumericError.
TrainResult pretrain_baseline(Model& model,
                              const std::vector<SeqExample>& train,
                              const std::vector<SeqExample>& dev,
                              const TrainConfig& cfg, uint64_t seed);

// Synthetic memory for memory-branch training: with probability memory_prob
// the list holds min_own..max_own distinct words from the utterance's own
// text plus 0..max_distractors draws from the distractor pool (shuffled
// together); otherwise it is empty.
struct MemoryPolicy {
  double memory_prob = 0.5;
  int min_own = 1;
  int max_own = 3;
  int max_distractors = 5;

  void validate() const;
};

MemoryList sample_policy_memory(const MemoryPolicy& policy,
                                const Utterance& utt,
                                const std::vector<std::string>& distractors,
                                const Vocab& char_vocab, Rng& rng);

// Trains only the memory branch (base parameters frozen) on the same data
// with per-example policy-sampled memories; dev utterances get one fixed
// policy draw each so the selection metric is stable across evals.
TrainResult train_memory_branch(Model& model,
                                const std::vector<Utterance>& train,
                                const std::vector<Utterance>& dev,
                                const std::vector<std::string>& distractors,
                                const Vocab& phoneme_vocab,
                                const Vocab& char_vocab,
                                const MemoryPolicy& policy,
                                const TrainConfig& cfg, uint64_t seed);

// Trains only the attached factors on mixture batches (base path, no
// memory), selecting by perplexity on the new-word validation set; the
// factors are left at the best-validation values.
TrainResult train_adapters(Model& model, AdapterSet& adapters,
                           MixtureSampler& mixture,
                           const std::vector<SeqExample>& validation,
                           const TrainConfig& cfg, uint64_t seed);

}  // namespace nwf

#endif  // NWF_TRAINING_HPP_
