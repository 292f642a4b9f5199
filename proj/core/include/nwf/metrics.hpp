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

#ifndef NWF_METRICS_HPP_
#define NWF_METRICS_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "nwf/common.hpp"

namespace nwf {

// Whitespace tokens of a transcript.
std::vector<std::string> split_words(const std::string& text);

// Token with non-alphanumeric edge characters stripped; may come back empty.
std::string strip_edge_punct(const std::string& token);

// split_words + strip_edge_punct with empties dropped: the token form used
// for new-word matching.
std::vector<std::string> match_tokens(const std::string& text);

// ----- Word error rate -----

struct WerReport {
  int64_t substitutions = 0;
  int64_t deletions = 0;
  int64_t insertions = 0;
  int64_t ref_words = 0;

  // (S + D + I) / N; may exceed 1.
  double wer() const;
  WerReport& operator+=(const WerReport& o);
};

// Minimal edit alignment with unit costs. Ties prefer match, then
// substitution, then insertion, then deletion, so the S/D/I decomposition is
// deterministic. Reference must be non-empty.
WerReport word_error_rate(const std::vector<std::string>& ref,
                          const std::vector<std::string>& hyp);

// Sum of per-utterance reports over parallel transcript lists.
WerReport corpus_word_error_rate(const std::vector<std::string>& ref_texts,
                                 const std::vector<std::string>& hyp_texts);

// ----- New-word precision / recall / F1 -----

struct PrfCounts {
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t fn = 0;

  double recall() const;     // 1.0 when tp + fn == 0
  double precision() const;  // 1.0 when tp + fp == 0
  double f1() const;         // 0.0 when precision + recall == 0
  PrfCounts& operator+=(const PrfCounts& o);
};

struct NewWordReport {
  PrfCounts overall;
  // Category rows with at least one reference event; categories whose words
  // never occur in a reference are omitted.
  std::map<std::string, PrfCounts> per_category;
};

// Per utterance, per new word w: TP += min(count_hyp, count_ref),
// FP += max(count_hyp - count_ref, 0), FN += max(count_ref - count_hyp, 0).
// Matching is exact and case-sensitive on punctuation-stripped whitespace
// tokens. word_category maps each new word to its category label.
NewWordReport new_word_prf(
    const std::vector<std::string>& ref_texts,
    const std::vector<std::string>& hyp_texts,
    const std::unordered_map<std::string, std::string>& word_category);

// ----- Forward transfer -----

// One (word, later-talk) evaluation: the word had occurred in an earlier
// talk; counts are over the later talk's utterances whose reference contains
// the word, transcribed with the model from the previous step.
struct ForwardTransferEvent {
  std::string word;
  int64_t prior_samples = 0;  // true-positive training samples seen so far
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t fn = 0;
};

struct ForwardTransferBucket {
  int64_t lo = 0;  // inclusive prior-sample range
  int64_t hi = 0;
  int64_t events = 0;
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t fn = 0;

  double recall() const;
  double precision() const;
};

struct ForwardTransferReport {
  std::vector<ForwardTransferBucket> buckets;
  int64_t total_events = 0;
};

// Buckets events by prior_samples, then greedily merges adjacent buckets
// left to right until every bucket holds >= min_bucket events (a single
// remaining bucket may hold fewer). Empty input gives an empty report.
ForwardTransferReport bucket_forward_transfer(
    std::vector<ForwardTransferEvent> events, int64_t min_bucket);

}  // namespace nwf

#endif  // NWF_METRICS_HPP_
