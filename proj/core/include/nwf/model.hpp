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

#ifndef NWF_MODEL_HPP_
#define NWF_MODEL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "nwf/adapters.hpp"
#include "nwf/param.hpp"
#include "nwf/tape.hpp"
#include "nwf/vocab.hpp"

namespace nwf {

struct ModelConfig {
  int d_model = 64;
  int heads = 4;
  int ff = 128;
  int enc_layers = 2;
  int dec_layers = 2;
  int mem_enc_layers = 2;
  int mem_dec_layers = 2;
  int src_vocab = 0;
  int tgt_vocab = 0;
  int max_src_len = 256;
  int max_tgt_len = 160;
  int max_entry_len = 32;
  double ln_eps = 1e-5;

  void validate() const;
};

// Ordered list of tokenized words/phrases that bias decoding. Construction
// deduplicates exact token sequences (keeping first occurrence) and drops
// empty entries.
struct MemoryList {
  std::vector<std::vector<int>> entries;
  std::vector<std::string> words;  // parallel surface forms

  static MemoryList from_words(const std::vector<std::string>& words,
                               const Vocab& tgt_vocab);
  int size() const { return static_cast<int>(entries.size()); }
  bool empty() const { return entries.empty(); }
};

// Per-entry encodings living on a tape: per-entry token states concatenated
// row-wise (with offsets) plus one pooled vector per entry.
struct EncodedMemory {
  int entries = 0;
  Value pooled;              // L x d_model
  Value tokens;              // total_tokens x d_model
  std::vector<int> offsets;  // length L + 1, token row ranges per entry
};

struct LnParams {
  Parameter* gain;
  Parameter* bias;
};
struct AttnParams {
  Parameter* wq;
  Parameter* wk;
  Parameter* wv;
  Parameter* wo;
};
struct FfnParams {
  Parameter* w1;
  Parameter* w2;
};
struct EncoderLayerParams {
  LnParams ln1;
  AttnParams self_attn;
  LnParams ln2;
  FfnParams ffn;
};
struct DecoderLayerParams {
  LnParams ln1;
  AttnParams self_attn;
  LnParams ln2;
  AttnParams cross_attn;
  LnParams ln3;
  FfnParams ffn;
};
struct MemoryDecoderLayerParams {
  DecoderLayerParams base;
  LnParams ln_mem;
  AttnParams mem_attn;   // single-head attention over pooled entries
  LnParams ln_tok;
  AttnParams tok_attn;   // single-head attention over entry token states
};

// Phoneme-to-character transducer with a memory-biasing branch.
//
// Baseline: sinusoidal-position transformer encoder over phoneme ids and a
// causal decoder over character prefixes, pre-norm residual blocks, GELU
// feed-forward, logit head. Memory branch: an independent encoder applied to
// each memory entry separately, and a second decoder whose layers extend the
// standard layer with a memory-attention sublayer (over pooled entry
// vectors) and a memory-entry-attention sublayer (over token states within
// entries, weighted by the entry selection). Both decoders predict logits
// independently; combine_logits adds them. The memory head starts at zero so
// an untrained branch is exactly neutral.
class Model {
 public:
  Model(ModelConfig cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  // Final encoder states for one phoneme sequence (T x d_model). When
  // pad_to > T the computation runs padded-and-masked to pad_to columns and
  // returns only the first T rows (exercises the batch-padding path).
  Value encode_source(Tape& tape, const std::vector<int>& phoneme_ids,
                      const AdapterSet* adapters = nullptr,
                      int pad_to = 0) const;

  // Baseline logits for every prefix position (prefix must start with BOS).
  Value decode_logits(Tape& tape, const std::vector<int>& prefix,
                      Value enc_states,
                      const AdapterSet* adapters = nullptr) const;

  // Independent per-entry encodings; L = 0 yields an empty EncodedMemory.
  EncodedMemory encode_memory(Tape& tape, const MemoryList& memory) const;

  // Memory-branch logits per prefix position; requires L >= 1.
  Value memory_decode_logits(Tape& tape, const std::vector<int>& prefix,
                             Value enc_states,
                             const EncodedMemory& memory) const;

  // base + mem (mem may be null for the L = 0 bypass).
  static Value combine_logits(Value base, const Value* mem);

  ParamRegistry& params() { return registry_; }
  const ParamRegistry& params() const { return registry_; }

  // Baseline parameters (embeddings, encoder, decoder, head).
  std::vector<Parameter*> base_params();
  // Memory-branch parameters (memory embeddings, encoder, decoder, head).
  std::vector<Parameter*> memory_params();
  void set_base_trainable(bool trainable);
  void set_memory_trainable(bool trainable);

  // Linear layers eligible for adapter factorization at the given scope.
  std::vector<LinearRef> adaptable_linears(AdapterScope scope);

  // Sinusoidal position table rows [0, len) as a tape constant.
  Value positions(Tape& tape, int len) const;

 private:
  friend class ModelForward;

  ModelConfig cfg_;
  ParamRegistry registry_;
  Tensor pos_;  // precomputed sinusoidal table

  Parameter* src_emb_;
  Parameter* tgt_emb_;
  std::vector<EncoderLayerParams> enc_layers_;
  LnParams enc_ln_f_;
  std::vector<DecoderLayerParams> dec_layers_;
  LnParams dec_ln_f_;
  Parameter* head_;

  Parameter* mem_enc_emb_;
  Parameter* mem_dec_emb_;
  std::vector<EncoderLayerParams> mem_enc_layers_;
  LnParams mem_enc_ln_f_;
  std::vector<MemoryDecoderLayerParams> mem_dec_layers_;
  LnParams mem_dec_ln_f_;
  Parameter* mem_head_;
};

// One supervised example: source phoneme ids and target character ids
// (without BOS/EOS; training code adds them).
struct SeqExample {
  std::vector<int> src;
  std::vector<int> tgt;
};

// Negative log likelihood of a batch under the model, as (total NLL, token
// count) with EOS counted and no padding involved. memory may be null or
// empty (baseline path); adapters may be null.
std::pair<double, int64_t> sequence_nll(const Model& model,
                                        const AdapterSet* adapters,
                                        const MemoryList* memory,
                                        const std::vector<SeqExample>& data);

// exp(mean per-token NLL) over the dataset.
double sequence_perplexity(const Model& model, const AdapterSet* adapters,
                           const MemoryList* memory,
                           const std::vector<SeqExample>& data);

}  // namespace nwf

#endif  // NWF_MODEL_HPP_
