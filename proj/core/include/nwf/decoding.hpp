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

#ifndef NWF_DECODING_HPP_
#define NWF_DECODING_HPP_

#include <memory>
#include <string>
#include <vector>

#include "nwf/adapters.hpp"
#include "nwf/corpus.hpp"
#include "nwf/model.hpp"
#include "nwf/tensor.hpp"
#include "nwf/vocab.hpp"

namespace nwf {

struct DecodeConfig {
  int beam = 4;
  // Emitted-character cap (EOS not counted); 0 means the model's
  // max_tgt_len - 1. A candidate hitting the cap is closed with EOS at that
  // token's actual log probability.
  int max_len = 0;
  // Rank finished candidates by score / length instead of raw score.
  bool length_normalize = false;

  void validate() const;
};

struct Hypothesis {
  std::string id;
  std::string text;
  double score = 0;                  // sum of chosen-token log probabilities
  std::vector<int> tokens;           // emitted ids, EOS last
  std::vector<double> token_scores;  // parallel per-token log probabilities
};

// Incremental decoder over raw tensors. Every row operation calls the same
// kernels as the tape forward, and cached self-attention rows are exact
// (causality makes earlier rows independent of later tokens), so step-t
// logits equal the full-prefix tape logits bit for bit; scores then satisfy
// -score == sequence_nll of the emitted sequence up to the float rounding of
// the per-example loss scalar.
//
// Weights are read live from the model except adapter hosts, which are
// materialized once at construction (W + sum r s^T, the attached-path
// values). Rebuild the engine after weights change; call set_memory after
// memory-branch weights change. transcribe and prefix_logits are const and
// safe to call concurrently.
//
// Beam search is deterministic: PAD, BOS and UNK are never emitted,
// extensions rank by (score, then lower token id, then lower parent index),
// EOS retires a candidate, and the beam is not refilled after retirements.
class InferenceEngine {
 public:
  InferenceEngine(const Model& model, const AdapterSet* adapters = nullptr);
  ~InferenceEngine();
  InferenceEngine(const InferenceEngine&) = delete;
  InferenceEngine& operator=(const InferenceEngine&) = delete;

  // Re-encodes the biasing entries (empty clears; decoding then runs the
  // baseline path, matching the combine bypass).
  void set_memory(const MemoryList& memory);
  bool has_memory() const;

  // Best hypothesis for one phoneme sequence; id and text are left empty.
  Hypothesis transcribe(const std::vector<int>& phoneme_ids,
                        const DecodeConfig& cfg) const;

  // Combined logits for every position of a given prefix (BOS first), shaped
  // prefix.size() x tgt_vocab: the incremental twin of the tape forward.
  Tensor prefix_logits(const std::vector<int>& phoneme_ids,
                       const std::vector<int>& prefix) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Transcribes every utterance with one shared engine, in input order. The
// utterance phoneme symbols are encoded with phoneme_vocab; hypothesis text
// is decoded with char_vocab. threads > 1 only splits the work.
std::vector<Hypothesis> transcribe_dataset(
    const Model& model, const AdapterSet* adapters, const MemoryList& memory,
    const std::vector<Utterance>& utts, const Vocab& phoneme_vocab,
    const Vocab& char_vocab, const DecodeConfig& cfg, int threads = 1);

// JSONL rows {"id", "hyp", "score"}.
void save_hypotheses(const std::string& path,
                     const std::vector<Hypothesis>& hyps);
std::vector<Hypothesis> load_hypotheses(const std::string& path);

}  // namespace nwf

#endif  // NWF_DECODING_HPP_
