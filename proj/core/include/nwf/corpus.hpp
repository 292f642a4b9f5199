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

#ifndef NWF_CORPUS_HPP_
#define NWF_CORPUS_HPP_

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "nwf/model.hpp"
#include "nwf/rng.hpp"
#include "nwf/vocab.hpp"

namespace nwf {

// ----- Lexicon -----

enum class WordCategory {
  kKnown,
  kAcronym,
  kNamedEntity,
  kSpecialWord,
};

std::string category_name(WordCategory c);
WordCategory category_from_name(const std::string& name);

struct LexEntry {
  std::string word;
  WordCategory category;
  std::vector<std::string> phonemes;  // canonical pronunciation
};

// Synthetic vocabulary. Known words form the baseline language; the three
// new-word categories cover abbreviations pronounced letter by letter,
// capitalized entity names, and lowercase domain terms. Surface forms are
// unique across all categories.
struct Lexicon {
  std::vector<LexEntry> entries;

  const LexEntry* find(const std::string& word) const;
  bool contains(const std::string& word) const {
    return find(word) != nullptr;
  }
  std::vector<std::string> words_of(WordCategory c) const;
  std::vector<std::string> known_words() const {
    return words_of(WordCategory::kKnown);
  }
  // Every non-known word, in entry order.
  std::vector<std::string> new_words() const;
  // Content digest over (word, category, phonemes) in entry order.
  std::string digest() const;

  void rebuild_index();

 private:
  std::unordered_map<std::string, int> index_;
};

struct LexiconConfig {
  int n_known = 1000;
  int n_acronym = 60;
  int n_entity = 60;
  int n_special = 80;
};

Lexicon build_lexicon(const LexiconConfig& cfg, uint64_t seed);

// ----- Phoneme system -----

// Collapsed phoneme classes. Several letters share one class, so distinct
// words can share a canonical pronunciation (near-homophones).
const std::vector<std::string>& phoneme_classes();

// Symbols confusable with the given class under substitution noise (the
// other members of its confusion group). Boundary "|" has none.
const std::vector<std::string>& confusion_group(const std::string& symbol);

// Word boundary symbol used between words in an utterance rendering.
extern const char kBoundarySymbol[];

// Canonical pronunciation of a surface form: letter-name sequences for
// acronym-shaped words (2-6 uppercase letters), letter classes otherwise.
std::vector<std::string> canonical_pronunciation(const std::string& word);

// Specials + boundary + the phoneme classes (size 17).
Vocab phoneme_vocab();

struct NoiseConfig {
  double p_sub = 0.05;
  double p_del = 0.05;
  double p_ins = 0.03;
};

// Canonical pronunciations joined with the boundary symbol, then per-symbol
// noise: substitution within the confusion group, deletion, insertion of a
// uniform class symbol. Boundaries are exempt from substitution and
// deletion. Words must be lexicon entries.
std::vector<std::string> render_phonemes(const Lexicon& lexicon,
                                         const std::vector<std::string>& words,
                                         const NoiseConfig& noise, Rng& rng);

// ----- Datasets -----

struct Utterance {
  std::string id;
  std::string talk_id;  // empty when not part of a talk
  std::vector<std::string> phonemes;
  std::string text;
  std::vector<std::string> words;
};

// Known-word utterances with uniform lengths in [len_lo, len_hi].
std::vector<Utterance> generate_baseline_dataset(const Lexicon& lexicon,
                                                 int n_utts, int len_lo,
                                                 int len_hi,
                                                 const NoiseConfig& noise,
                                                 uint64_t seed);

struct Talk {
  std::string id;
  std::vector<Utterance> utterances;
  std::vector<std::string> slide_words;
};

// Distribution over per-word total occurrence counts, heavily skewed toward
// a single occurrence (most new words are seen once).
struct OccurrenceProfile {
  std::vector<std::pair<int, double>> weights;  // (count, weight)

  static OccurrenceProfile defaults();
  int sample(Rng& rng) const;
};

struct TalkGenConfig {
  int n_talks = 40;
  int utts_per_talk = 50;
  int len_lo = 3;
  int len_hi = 10;
  OccurrenceProfile profile = OccurrenceProfile::defaults();
  double distractor_rate = 0.1;
  // Probability that a repeat occurrence lands in the same talk rather than
  // a later one.
  double same_talk_repeat = 0.3;
};

// Talks with embedded new-word occurrences and slide word lists. Slide words
// are the talk's new words plus sampled distractors (unused new words and
// near-spellings). Each utterance contains at most one new word.
std::vector<Talk> generate_talks(const Lexicon& lexicon,
                                 const TalkGenConfig& cfg,
                                 const NoiseConfig& noise, uint64_t seed);

// ----- New-words splits -----

struct NewWordsSplit {
  std::vector<std::string> words;
  std::vector<Utterance> train;
  std::vector<Utterance> test;
};

struct NewWordsSplits {
  NewWordsSplit dev;
  NewWordsSplit eval;
};

// Word-level dev/eval partition (dev gets floor(dev_fraction * W) words),
// then per word one random test occurrence with the remaining occurrences
// going to train. Every listed word must occur in >= 2 utterances, and no
// utterance may contain two distinct listed words.
NewWordsSplits build_newwords_splits(const std::vector<Utterance>& utterances,
                                     const std::vector<std::string>& new_words,
                                     double dev_fraction, uint64_t seed);

// ----- Slide word extraction -----

// Whitespace-tokenizes slide text, strips edge punctuation, drops tokens
// whose exact form is in the training vocabulary (case-sensitive), and
// deduplicates preserving first-seen order.
std::vector<std::string> extract_slide_words(
    const std::string& slide_text,
    const std::unordered_set<std::string>& training_vocab);

// ----- Tokenization -----

SeqExample to_example(const Utterance& utt, const Vocab& src_vocab,
                      const Vocab& tgt_vocab);

// ----- Serialization -----

void save_jsonl(const std::string& path,
                const std::vector<Utterance>& utterances);
std::vector<Utterance> load_jsonl(const std::string& path);

void save_lexicon(const std::string& path, const Lexicon& lexicon);
Lexicon load_lexicon(const std::string& path);

// Slide text: the words joined by newlines.
std::string slides_text(const Talk& talk);

// Talks directory: talks.json index, utterances.jsonl, slides/<id>.txt.
void save_talks(const std::string& dir, const std::vector<Talk>& talks);
std::vector<Talk> load_talks(const std::string& dir);

}  // namespace nwf

#endif  // NWF_CORPUS_HPP_
