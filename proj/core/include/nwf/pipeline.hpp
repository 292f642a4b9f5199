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

#ifndef NWF_PIPELINE_HPP_
#define NWF_PIPELINE_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "nwf/adapters.hpp"
#include "nwf/corpus.hpp"
#include "nwf/decoding.hpp"
#include "nwf/metrics.hpp"
#include "nwf/model.hpp"
#include "nwf/training.hpp"

namespace nwf {

// Continual-learning variants: per-talk memory with adapter retraining,
// memory accumulated over all talks, and memory accumulated only for words
// recognized in the talk that introduced them.
enum class Variant { kMemCl, kMemAll, kMemFound };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

std::string scope_name(AdapterScope scope);
AdapterScope scope_from_name(const std::string& name);

// A pseudo-labeled utterance in the adaptation or validation store. text is
// the stored training target (the hypothesis); ref_text keeps the simulator
// ground truth for evaluation-side bookkeeping only and never feeds training.
struct StoredUtterance {
  std::string utt_id;
  std::string talk_id;
  std::vector<std::string> phonemes;
  std::string text;
  std::string ref_text;
  std::vector<std::string> trigger_words;  // detected memory words
};

// State threaded through cycles. Adaptation and validation stores are
// disjoint by utterance id and only grow; past_memory_words accumulates
// every word that has appeared in any cycle's memory; counters hold per-word
// detected-occurrence counts (one per utterance containing the word).
struct CycleState {
  int cycle = 0;
  std::vector<StoredUtterance> adaptation;
  std::vector<StoredUtterance> validation;
  std::vector<std::string> past_memory_words;
  std::map<std::string, int64_t> counters;
  std::vector<std::string> accumulated_memory;  // mem-all
  std::vector<std::string> found_words;         // mem-found
};

struct PipelineConfig {
  Variant variant = Variant::kMemCl;
  int adapter_rank = 4;
  AdapterScope scope = AdapterScope::kDecoderOnly;
  double upsample = 1e5;
  TrainConfig adapt;
  bool restrict_targets = false;  // pseudo-label = detected words only
  DecodeConfig decode;
  int threads = 1;

  PipelineConfig() {
    adapt.lr = 1e-4;
    adapt.batch_size = 16;
    adapt.eval_interval = 25;
    adapt.patience = 3;
    adapt.max_steps = 300;
  }
  void validate() const;
};

// What one cycle did: the memory used, everything transcribed, store growth,
// whether adapters were (re)trained, and the forward-transfer events that
// were evaluated against the previous cycle's model.
struct CycleRecord {
  int cycle = 0;
  std::string talk_id;
  std::vector<std::string> slide_words;   // extracted from this talk's slides
  std::vector<std::string> memory_words;  // memory used for inference
  std::vector<Hypothesis> talk_hyps;
  std::vector<std::pair<std::string, int64_t>> detections;  // word, count after
  int64_t new_adaptation = 0;
  int64_t new_validation = 0;
  int64_t adaptation_size = 0;
  int64_t validation_size = 0;
  bool trained = false;
  bool skipped_empty_validation = false;
  double adapt_best_ppl = 0;
  int adapt_steps = 0;
  std::vector<Hypothesis> general_hyps;
  double general_wer = 0;
  std::vector<ForwardTransferEvent> ft_events;
};

struct ExperimentLog {
  Variant variant = Variant::kMemCl;
  uint64_t seed = 0;
  std::vector<CycleRecord> cycles;
};

// Routes pseudo-labeled utterances into the stores. An utterance whose
// hypothesis contains no current-or-past memory word is dropped; otherwise
// each detected word's counter is incremented once, and the utterance goes
// to validation when any detected word hits exactly its second occurrence,
// to adaptation otherwise. restrict_targets replaces the stored text with
// the detected words in hypothesis order.
struct CollectOutcome {
  std::vector<StoredUtterance> adaptation;
  std::vector<StoredUtterance> validation;
  std::vector<std::pair<std::string, int64_t>> detections;
};

CollectOutcome collect_adaptation_utterances(
    const std::vector<Utterance>& utts, const std::vector<Hypothesis>& hyps,
    const std::vector<std::string>& current_memory,
    const std::vector<std::string>& past_memory,
    std::map<std::string, int64_t>& counters, bool restrict_targets = false);

// Transcription and adapter training behind the cycle loop, so the loop's
// routing and state machine stay testable with canned hypotheses.
class PipelineBackend {
 public:
  virtual ~PipelineBackend() = default;

  // Transcribes utterances with the given memory and the current adapters.
  virtual std::vector<Hypothesis> transcribe(
      const std::vector<Utterance>& utts,
      const std::vector<std::string>& memory_words) = 0;

  // Replaces the current adapters with freshly initialized ones trained on
  // the stores (mixture against the baseline pool, selection by validation
  // perplexity). Returns the training result.
  virtual TrainResult adapt(const std::vector<StoredUtterance>& adaptation,
                            const std::vector<StoredUtterance>& validation,
                            uint64_t cycle_seed) = 0;

  virtual const AdapterSet* current_adapters() const { return nullptr; }
};

// Real backend over a pretrained model. Transcription materializes the
// current adapters; adapt() builds a fresh AdapterSet each call (continuity
// lives in the accumulated stores, not the weights).
class ModelBackend : public PipelineBackend {
 public:
  ModelBackend(Model& model, std::vector<SeqExample> baseline_pool,
               const Vocab& phoneme_vocab, const Vocab& char_vocab,
               const PipelineConfig& cfg);

  std::vector<Hypothesis> transcribe(
      const std::vector<Utterance>& utts,
      const std::vector<std::string>& memory_words) override;
  TrainResult adapt(const std::vector<StoredUtterance>& adaptation,
                    const std::vector<StoredUtterance>& validation,
                    uint64_t cycle_seed) override;
  const AdapterSet* current_adapters() const override {
    return adapters_.get();
  }

 private:
  Model& model_;
  std::vector<SeqExample> baseline_;
  Vocab phoneme_vocab_;
  Vocab char_vocab_;
  PipelineConfig cfg_;
  std::unique_ptr<AdapterSet> adapters_;
};

// One bias -> infer -> collect -> adapt cycle. Memory per variant: mem-cl
// uses only this talk's extracted slide words; mem-all extends the
// accumulated memory with them first; mem-found extends the found set for
// inference but retains this talk's words only if recognized in this talk.
// mem-cl trains fresh adapters after collection unless either store is
// empty (the skip is recorded). Increments state.cycle.
CycleRecord run_cycle(CycleState& state, const Talk& talk,
                      PipelineBackend& backend,
                      const std::unordered_set<std::string>& training_vocab,
                      const PipelineConfig& cfg, uint64_t cycle_seed);

// Iterates run_cycle over all talks. Before each cycle, forward-transfer
// events (new words with a prior-talk reference occurrence) are evaluated
// with the previous cycle's model — empty memory for mem-cl, the variant's
// accumulated memory otherwise — and prior-sample counts taken over
// true-positive adaptation entries. After each cycle the general testset is
// transcribed (same memory semantics) and its WER recorded. on_cycle, when
// set, runs after each record is complete.
ExperimentLog run_experiment(
    PipelineBackend& backend, const std::vector<Talk>& talks,
    const std::unordered_set<std::string>& training_vocab,
    const std::vector<Utterance>& general_testset,
    const std::unordered_set<std::string>& new_words,
    const PipelineConfig& cfg, uint64_t seed,
    const std::function<void(const CycleState&, const CycleRecord&)>&
        on_cycle = nullptr);

// Flattens every cycle's events into the bucket report.
ForwardTransferReport forward_transfer_report(const ExperimentLog& log,
                                              int64_t min_bucket);

// Fig.-style series: x = cumulative unique extracted slide words after each
// cycle, y = that cycle's general-testset WER.
std::vector<std::pair<int64_t, double>> general_performance_curve(
    const ExperimentLog& log);

// JSONL: one header line {variant, seed}, then one line per cycle record.
void save_experiment_log(const std::string& path, const ExperimentLog& log);
ExperimentLog load_experiment_log(const std::string& path);

}  // namespace nwf

#endif  // NWF_PIPELINE_HPP_
