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

#include "nwf/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "nwf/digest.hpp"
#include "nwf/io.hpp"

namespace nwf {

using json = nlohmann::json;

// ----- Phoneme system -----

const char kBoundarySymbol[] = "|";

namespace {

// Letter to collapsed class; several letters share a class so distinct
// spellings can collapse to the same pronunciation.
const std::unordered_map<char, std::string>& letter_classes() {
  static const std::unordered_map<char, std::string> table = {
      {'b', "B"}, {'p', "B"}, {'d', "D"}, {'t', "D"}, {'g', "G"}, {'k', "G"},
      {'q', "G"}, {'v', "V"}, {'f', "V"}, {'w', "V"}, {'s', "S"}, {'z', "S"},
      {'x', "S"}, {'c', "C"}, {'j', "C"}, {'m', "M"}, {'n', "M"}, {'l', "L"},
      {'r', "L"}, {'h', "H"}, {'a', "A"}, {'e', "A"}, {'i', "I"}, {'y', "I"},
      {'o', "O"}, {'u', "O"},
  };
  return table;
}

// Spoken letter names for acronym-shaped words, in phoneme classes.
const std::unordered_map<char, std::vector<std::string>>& letter_names() {
  static const std::unordered_map<char, std::vector<std::string>> table = {
      {'a', {"A"}},           {'b', {"B", "A"}},      {'c', {"S", "A"}},
      {'d', {"D", "A"}},      {'e', {"A"}},           {'f', {"A", "V"}},
      {'g', {"C", "A"}},      {'h', {"A", "C"}},      {'i', {"I"}},
      {'j', {"C", "A"}},      {'k', {"G", "A"}},      {'l', {"A", "L"}},
      {'m', {"A", "M"}},      {'n', {"A", "M"}},      {'o', {"O"}},
      {'p', {"B", "A"}},      {'q', {"G", "O"}},      {'r', {"A", "L"}},
      {'s', {"A", "S"}},      {'t', {"D", "A"}},      {'u', {"I", "O"}},
      {'v', {"V", "A"}},      {'w', {"V", "O"}},      {'x', {"A", "G", "S"}},
      {'y', {"V", "I"}},      {'z', {"S", "A"}},
  };
  return table;
}

const std::vector<std::vector<std::string>>& confusion_groups() {
  static const std::vector<std::vector<std::string>> groups = {
      {"B", "D", "G"},
      {"V", "S", "C", "H"},
      {"M", "L"},
      {"A", "I", "O"},
  };
  return groups;
}

bool is_acronym_shape(const std::string& word) {
  if (word.size() < 2 || word.size() > 6) return false;
  for (char c : word) {
    if (c < 'A' || c > 'Z') return false;
  }
  return true;
}

}  // namespace

const std::vector<std::string>& phoneme_classes() {
  static const std::vector<std::string> classes = {
      "B", "D", "G", "V", "S", "C", "M", "L", "H", "A", "I", "O"};
  return classes;
}

const std::vector<std::string>& confusion_group(const std::string& symbol) {
  static std::unordered_map<std::string, std::vector<std::string>> table = [] {
    std::unordered_map<std::string, std::vector<std::string>> t;
    for (const auto& group : confusion_groups()) {
      for (const auto& member : group) {
        std::vector<std::string> others;
        for (const auto& other : group) {
          if (other != member) others.push_back(other);
        }
        t[member] = std::move(others);
      }
    }
    return t;
  }();
  static const std::vector<std::string> empty;
  auto it = table.find(symbol);
  return it == table.end() ? empty : it->second;
}

std::vector<std::string> canonical_pronunciation(const std::string& word) {
  NWF_REQUIRE(!word.empty(), "pronunciation: empty word");
  std::vector<std::string> out;
  if (is_acronym_shape(word)) {
    for (char c : word) {
      const auto& name = letter_names().at(
          static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      out.insert(out.end(), name.begin(), name.end());
    }
    return out;
  }
  for (char c : word) {
    const char lc = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    auto it = letter_classes().find(lc);
    NWF_REQUIRE(it != letter_classes().end(),
                "pronunciation: non-letter character in word " + word);
    out.push_back(it->second);
  }
  return out;
}

Vocab phoneme_vocab() { return Vocab::phonemes(phoneme_classes()); }

std::vector<std::string> render_phonemes(const Lexicon& lexicon,
                                         const std::vector<std::string>& words,
                                         const NoiseConfig& noise, Rng& rng) {
  NWF_REQUIRE(noise.p_sub >= 0 && noise.p_sub <= 1 && noise.p_del >= 0 &&
                  noise.p_del <= 1 && noise.p_ins >= 0 && noise.p_ins <= 1,
              "render_phonemes: noise rates must lie in [0, 1]");
  std::vector<std::string> canonical;
  for (size_t i = 0; i < words.size(); ++i) {
    const LexEntry* e = lexicon.find(words[i]);
    if (e == nullptr) {
      throw NotFoundError("render_phonemes: word not in lexicon: " + words[i]);
    }
    if (i > 0) canonical.push_back(kBoundarySymbol);
    canonical.insert(canonical.end(), e->phonemes.begin(), e->phonemes.end());
  }
  std::vector<std::string> out;
  out.reserve(canonical.size());
  for (const auto& symbol : canonical) {
    const bool boundary = symbol == kBoundarySymbol;
    std::string s = symbol;
    if (!boundary && rng.uniform() < noise.p_sub) {
      const auto& group = confusion_group(s);
      if (!group.empty()) s = group[rng.uniform_int(0, group.size() - 1)];
    }
    const bool drop = !boundary && rng.uniform() < noise.p_del;
    if (!drop) out.push_back(s);
    if (rng.uniform() < noise.p_ins) {
      const auto& classes = phoneme_classes();
      out.push_back(classes[rng.uniform_int(0, classes.size() - 1)]);
    }
  }
  return out;
}

// ----- Lexicon -----

std::string category_name(WordCategory c) {
  switch (c) {
    case WordCategory::kKnown: return "known";
    case WordCategory::kAcronym: return "acronym";
    case WordCategory::kNamedEntity: return "named-entity";
    case WordCategory::kSpecialWord: return "special-word";
  }
  throw ContractError("category_name: invalid category");
}

WordCategory category_from_name(const std::string& name) {
  if (name == "known") return WordCategory::kKnown;
  if (name == "acronym") return WordCategory::kAcronym;
  if (name == "named-entity") return WordCategory::kNamedEntity;
  if (name == "special-word") return WordCategory::kSpecialWord;
  throw FormatError("unknown word category: " + name);
}

void Lexicon::rebuild_index() {
  index_.clear();
  for (size_t i = 0; i < entries.size(); ++i) {
    NWF_REQUIRE(index_.emplace(entries[i].word, static_cast<int>(i)).second,
                "lexicon: duplicate word " + entries[i].word);
  }
}

const LexEntry* Lexicon::find(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? nullptr : &entries[static_cast<size_t>(it->second)];
}

std::vector<std::string> Lexicon::words_of(WordCategory c) const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (e.category == c) out.push_back(e.word);
  }
  return out;
}

std::vector<std::string> Lexicon::new_words() const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (e.category != WordCategory::kKnown) out.push_back(e.word);
  }
  return out;
}

std::string Lexicon::digest() const {
  std::string blob;
  for (const auto& e : entries) {
    blob += e.word;
    blob += '\t';
    blob += category_name(e.category);
    blob += '\t';
    for (size_t i = 0; i < e.phonemes.size(); ++i) {
      if (i > 0) blob += ' ';
      blob += e.phonemes[i];
    }
    blob += '\n';
  }
  return sha256_hex(blob);
}

namespace {

const char kConsonants[] = "bcdfghjklmnpqrstvwxz";
const char kVowels[] = "aeiouy";

std::string make_syllable(Rng& rng) {
  std::string s;
  s += kConsonants[rng.uniform_int(0, 19)];
  s += kVowels[rng.uniform_int(0, 5)];
  if (rng.uniform() < 0.3) s += kConsonants[rng.uniform_int(0, 19)];
  return s;
}

std::string make_syllabic_word(Rng& rng, int min_syl, int max_syl) {
  const int n = static_cast<int>(rng.uniform_int(min_syl, max_syl));
  std::string w;
  for (int i = 0; i < n; ++i) w += make_syllable(rng);
  return w;
}

std::string make_acronym_word(Rng& rng) {
  const int n = static_cast<int>(rng.uniform_int(3, 5));
  std::string w;
  for (int i = 0; i < n; ++i) {
    w += static_cast<char>('A' + rng.uniform_int(0, 25));
  }
  return w;
}

std::string capitalize(std::string w) {
  if (!w.empty()) {
    w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
  }
  return w;
}

}  // namespace

Lexicon build_lexicon(const LexiconConfig& cfg, uint64_t seed) {
  NWF_REQUIRE(cfg.n_known >= 0 && cfg.n_acronym >= 0 && cfg.n_entity >= 0 &&
                  cfg.n_special >= 0,
              "build_lexicon: counts must be >= 0");
  Rng rng(derive_seed(seed, "lexicon"));
  Lexicon lex;
  std::unordered_set<std::string> used;
  auto add_unique = [&](WordCategory cat, auto&& gen) {
    for (int attempt = 0; attempt < 100000; ++attempt) {
      std::string w = gen();
      if (!used.insert(w).second) continue;
      LexEntry e;
      e.word = std::move(w);
      e.category = cat;
      e.phonemes = canonical_pronunciation(e.word);
      lex.entries.push_back(std::move(e));
      return;
    }
    throw ContractError("build_lexicon: could not generate a unique word");
  };

  for (int i = 0; i < cfg.n_known; ++i) {
    add_unique(WordCategory::kKnown, [&] {
      // Mostly lowercase; a slice of capitalized and acronym-shaped forms so
      // the baseline vocabulary carries every casing pattern.
      const double roll = rng.uniform();
      if (roll < 0.05) return make_acronym_word(rng);
      std::string w = make_syllabic_word(rng, 1, 3);
      if (roll < 0.13) return capitalize(std::move(w));
      return w;
    });
  }
  for (int i = 0; i < cfg.n_acronym; ++i) {
    add_unique(WordCategory::kAcronym, [&] { return make_acronym_word(rng); });
  }
  for (int i = 0; i < cfg.n_entity; ++i) {
    add_unique(WordCategory::kNamedEntity,
               [&] { return capitalize(make_syllabic_word(rng, 2, 3)); });
  }
  for (int i = 0; i < cfg.n_special; ++i) {
    add_unique(WordCategory::kSpecialWord,
               [&] { return make_syllabic_word(rng, 2, 4); });
  }
  lex.rebuild_index();
  return lex;
}

// ----- Datasets -----

namespace {

std::string zero_pad(int64_t v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string text;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i > 0) text += ' ';
    text += words[i];
  }
  return text;
}

Utterance make_utterance(const Lexicon& lexicon, std::string id,
                         std::string talk_id, std::vector<std::string> words,
                         const NoiseConfig& noise, Rng& rng) {
  Utterance u;
  u.id = std::move(id);
  u.talk_id = std::move(talk_id);
  u.words = std::move(words);
  u.text = join_words(u.words);
  u.phonemes = render_phonemes(lexicon, u.words, noise, rng);
  return u;
}

std::vector<std::string> sample_known_words(const std::vector<std::string>& known,
                                            int len, Rng& rng) {
  std::vector<std::string> words;
  words.reserve(static_cast<size_t>(len));
  for (int i = 0; i < len; ++i) {
    words.push_back(known[rng.uniform_int(0, known.size() - 1)]);
  }
  return words;
}

}  // namespace

std::vector<Utterance> generate_baseline_dataset(const Lexicon& lexicon,
                                                 int n_utts, int len_lo,
                                                 int len_hi,
                                                 const NoiseConfig& noise,
                                                 uint64_t seed) {
  NWF_REQUIRE(n_utts >= 0, "baseline: n_utts must be >= 0");
  NWF_REQUIRE(1 <= len_lo && len_lo <= len_hi, "baseline: bad length range");
  const std::vector<std::string> known = lexicon.known_words();
  NWF_REQUIRE(!known.empty(), "baseline: lexicon has no known words");
  Rng rng(derive_seed(seed, "baseline"));
  std::vector<Utterance> out;
  out.reserve(static_cast<size_t>(n_utts));
  for (int i = 0; i < n_utts; ++i) {
    const int len = static_cast<int>(rng.uniform_int(len_lo, len_hi));
    out.push_back(make_utterance(lexicon, "base-" + zero_pad(i, 6), "",
                                 sample_known_words(known, len, rng), noise,
                                 rng));
  }
  return out;
}

OccurrenceProfile OccurrenceProfile::defaults() {
  OccurrenceProfile p;
  p.weights = {{1, 0.50}, {2, 0.17}, {3, 0.12}, {4, 0.11}, {5, 0.06}, {6, 0.04}};
  return p;
}

int OccurrenceProfile::sample(Rng& rng) const {
  NWF_REQUIRE(!weights.empty(), "occurrence profile: empty");
  std::vector<double> w;
  w.reserve(weights.size());
  for (const auto& [count, weight] : weights) {
    NWF_REQUIRE(count >= 1 && weight >= 0, "occurrence profile: bad entry");
    w.push_back(weight);
  }
  return weights[rng.weighted_index(w)].first;
}

std::vector<Talk> generate_talks(const Lexicon& lexicon,
                                 const TalkGenConfig& cfg,
                                 const NoiseConfig& noise, uint64_t seed) {
  NWF_REQUIRE(cfg.n_talks >= 1 && cfg.utts_per_talk >= 1,
              "talks: need at least one talk and one utterance");
  NWF_REQUIRE(1 <= cfg.len_lo && cfg.len_lo <= cfg.len_hi,
              "talks: bad length range");
  NWF_REQUIRE(cfg.distractor_rate >= 0, "talks: bad distractor rate");
  const std::vector<std::string> known = lexicon.known_words();
  const std::vector<std::string> new_words = lexicon.new_words();
  NWF_REQUIRE(!known.empty(), "talks: lexicon has no known words");
  Rng rng(derive_seed(seed, "talks"));

  // Occurrence plan: per new word a total count from the profile, the first
  // occurrence in a uniformly chosen talk and repeats in the same or a later
  // talk (later placements are what forward transfer measures). Placement is
  // capacity aware: a full talk redirects to a uniform non-full talk at or
  // after the introduction, and repeats are dropped once everything from the
  // introduction onward is full.
  std::vector<std::vector<std::string>> talk_events(
      static_cast<size_t>(cfg.n_talks));
  std::vector<int> remaining(static_cast<size_t>(cfg.n_talks),
                             cfg.utts_per_talk);
  auto pick_nonfull = [&](int lo) -> int {
    std::vector<int> cands;
    for (int t = lo; t < cfg.n_talks; ++t) {
      if (remaining[static_cast<size_t>(t)] > 0) cands.push_back(t);
    }
    if (cands.empty()) return -1;
    return cands[rng.uniform_int(0, static_cast<int64_t>(cands.size()) - 1)];
  };
  auto place = [&](int t, const std::string& w) {
    talk_events[static_cast<size_t>(t)].push_back(w);
    --remaining[static_cast<size_t>(t)];
  };
  for (const auto& w : new_words) {
    const int count = cfg.profile.sample(rng);
    const int intro = pick_nonfull(0);
    NWF_REQUIRE(intro >= 0, "talks: no utterance capacity left for new words");
    place(intro, w);
    for (int r = 1; r < count; ++r) {
      int t = intro;
      if (intro + 1 < cfg.n_talks && rng.uniform() >= cfg.same_talk_repeat) {
        t = static_cast<int>(rng.uniform_int(intro + 1, cfg.n_talks - 1));
      }
      if (remaining[static_cast<size_t>(t)] == 0) t = pick_nonfull(intro);
      if (t < 0) break;
      place(t, w);
    }
  }

  std::vector<Talk> talks;
  talks.reserve(static_cast<size_t>(cfg.n_talks));
  for (int ti = 0; ti < cfg.n_talks; ++ti) {
    Talk talk;
    talk.id = "talk-" + zero_pad(ti, 2);
    const auto& events = talk_events[static_cast<size_t>(ti)];
    auto slots = rng.sample_indices(static_cast<size_t>(cfg.utts_per_talk),
                                    events.size());
    std::vector<const std::string*> slot_word(
        static_cast<size_t>(cfg.utts_per_talk), nullptr);
    for (size_t e = 0; e < events.size(); ++e) {
      slot_word[slots[e]] = &events[e];
    }
    for (int ui = 0; ui < cfg.utts_per_talk; ++ui) {
      const int len = static_cast<int>(rng.uniform_int(cfg.len_lo, cfg.len_hi));
      std::vector<std::string> words = sample_known_words(known, len, rng);
      if (slot_word[static_cast<size_t>(ui)] != nullptr) {
        words[static_cast<size_t>(rng.uniform_int(0, len - 1))] =
            *slot_word[static_cast<size_t>(ui)];
      }
      talk.utterances.push_back(make_utterance(
          lexicon, talk.id + "-utt-" + zero_pad(ui, 3), talk.id,
          std::move(words), noise, rng));
    }

    // Slide words: the talk's new words in first-occurrence order, plus
    // distractors (unused new words and near-spellings).
    std::vector<std::string> slide;
    std::unordered_set<std::string> on_slide;
    for (const auto& w : events) {
      if (on_slide.insert(w).second) slide.push_back(w);
    }
    const int n_real = static_cast<int>(slide.size());
    const int n_distract =
        static_cast<int>(std::llround(cfg.distractor_rate * n_real));
    for (int d = 0; d < n_distract; ++d) {
      bool placed = false;
      for (int attempt = 0; attempt < 20 && !placed; ++attempt) {
        std::string cand;
        if (rng.bernoulli(0.5)) {
          cand = new_words[rng.uniform_int(0, new_words.size() - 1)];
          if (on_slide.count(cand)) continue;
        } else {
          std::string base = slide[rng.uniform_int(0, slide.size() - 1)];
          const size_t pos = rng.uniform_int(0, base.size() - 1);
          const bool upper = base[pos] >= 'A' && base[pos] <= 'Z';
          char repl = static_cast<char>((upper ? 'A' : 'a') +
                                        rng.uniform_int(0, 25));
          if (repl == base[pos]) continue;
          base[pos] = repl;
          if (lexicon.contains(base) || on_slide.count(base)) continue;
          cand = std::move(base);
        }
        on_slide.insert(cand);
        slide.push_back(std::move(cand));
        placed = true;
      }
    }
    rng.shuffle(slide);
    talk.slide_words = std::move(slide);
    talks.push_back(std::move(talk));
  }
  return talks;
}

// ----- New-words splits -----

NewWordsSplits build_newwords_splits(const std::vector<Utterance>& utterances,
                                     const std::vector<std::string>& new_words,
                                     double dev_fraction, uint64_t seed) {
  NWF_REQUIRE(dev_fraction >= 0 && dev_fraction <= 1,
              "splits: dev fraction must lie in [0, 1]");
  NWF_REQUIRE(!new_words.empty(), "splits: empty new-word list");
  std::unordered_map<std::string, size_t> word_index;
  for (size_t i = 0; i < new_words.size(); ++i) {
    NWF_REQUIRE(word_index.emplace(new_words[i], i).second,
                "splits: duplicate new word " + new_words[i]);
  }

  // Occurrences at utterance granularity; one listed word per utterance.
  std::vector<std::vector<size_t>> occ(new_words.size());
  for (size_t ui = 0; ui < utterances.size(); ++ui) {
    const std::string* found = nullptr;
    for (const auto& w : utterances[ui].words) {
      auto it = word_index.find(w);
      if (it == word_index.end()) continue;
      NWF_REQUIRE(found == nullptr || *found == w,
                  "splits: utterance " + utterances[ui].id +
                      " contains two listed new words");
      if (found == nullptr || *found != w) {
        occ[it->second].push_back(ui);
      }
      found = &w;
    }
  }
  for (size_t i = 0; i < new_words.size(); ++i) {
    if (occ[i].size() < 2) {
      throw ContractError("splits: new word has fewer than two occurrences: " +
                          new_words[i]);
    }
  }

  Rng rng(derive_seed(seed, "newwords-splits"));
  const size_t dev_count = static_cast<size_t>(
      std::floor(dev_fraction * static_cast<double>(new_words.size())));
  auto dev_pick = rng.sample_indices(new_words.size(), dev_count);
  std::vector<bool> in_dev(new_words.size(), false);
  for (size_t i : dev_pick) in_dev[i] = true;

  // Test picks drawn in word-list order so they are independent of the
  // dev/eval partition.
  std::vector<size_t> test_pick(new_words.size());
  for (size_t i = 0; i < new_words.size(); ++i) {
    test_pick[i] = occ[i][rng.uniform_int(0, occ[i].size() - 1)];
  }

  NewWordsSplits splits;
  for (size_t i = 0; i < new_words.size(); ++i) {
    NewWordsSplit& s = in_dev[i] ? splits.dev : splits.eval;
    s.words.push_back(new_words[i]);
    for (size_t ui : occ[i]) {
      if (ui == test_pick[i]) {
        s.test.push_back(utterances[ui]);
      } else {
        s.train.push_back(utterances[ui]);
      }
    }
  }
  return splits;
}

// ----- Slide word extraction -----

std::vector<std::string> extract_slide_words(
    const std::string& slide_text,
    const std::unordered_set<std::string>& training_vocab) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  std::istringstream in(slide_text);
  std::string token;
  while (in >> token) {
    size_t b = 0, e = token.size();
    while (b < e && !std::isalnum(static_cast<unsigned char>(token[b]))) ++b;
    while (e > b && !std::isalnum(static_cast<unsigned char>(token[e - 1]))) --e;
    if (b >= e) continue;
    std::string word = token.substr(b, e - b);
    if (training_vocab.count(word)) continue;
    if (seen.insert(word).second) out.push_back(std::move(word));
  }
  return out;
}

// ----- Tokenization -----

SeqExample to_example(const Utterance& utt, const Vocab& src_vocab,
                      const Vocab& tgt_vocab) {
  SeqExample ex;
  ex.src = src_vocab.encode_symbols(utt.phonemes);
  ex.tgt = tgt_vocab.encode_chars(utt.text);
  NWF_REQUIRE(!ex.src.empty(), "to_example: utterance has no phonemes: " + utt.id);
  NWF_REQUIRE(!ex.tgt.empty(), "to_example: utterance has no text: " + utt.id);
  return ex;
}

// ----- Serialization -----

namespace {

json utterance_to_json(const Utterance& u) {
  return json{{"id", u.id},
              {"talk_id", u.talk_id},
              {"phonemes", u.phonemes},
              {"text", u.text},
              {"words", u.words}};
}

Utterance utterance_from_json(const json& j) {
  try {
    Utterance u;
    u.id = j.at("id").get<std::string>();
    u.talk_id = j.at("talk_id").get<std::string>();
    u.phonemes = j.at("phonemes").get<std::vector<std::string>>();
    u.text = j.at("text").get<std::string>();
    u.words = j.at("words").get<std::vector<std::string>>();
    return u;
  } catch (const json::exception& e) {
    throw FormatError(std::string("utterance record: ") + e.what());
  }
}

}  // namespace

void save_jsonl(const std::string& path,
                const std::vector<Utterance>& utterances) {
  std::string blob;
  for (const auto& u : utterances) {
    blob += utterance_to_json(u).dump();
    blob += '\n';
  }
  write_text_file(path, blob);
}

std::vector<Utterance> load_jsonl(const std::string& path) {
  std::vector<Utterance> out;
  for (const auto& line : read_lines(path, true)) {
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(path + ": bad JSONL line: " + e.what());
    }
    out.push_back(utterance_from_json(j));
  }
  return out;
}

void save_lexicon(const std::string& path, const Lexicon& lexicon) {
  json entries = json::array();
  for (const auto& e : lexicon.entries) {
    entries.push_back(json{{"word", e.word},
                           {"category", category_name(e.category)},
                           {"phonemes", e.phonemes}});
  }
  write_text_file(path, json{{"entries", entries}}.dump(2) + "\n");
}

Lexicon load_lexicon(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw FormatError(path + ": bad lexicon JSON: " + e.what());
  }
  Lexicon lex;
  try {
    for (const auto& je : j.at("entries")) {
      LexEntry e;
      e.word = je.at("word").get<std::string>();
      e.category = category_from_name(je.at("category").get<std::string>());
      e.phonemes = je.at("phonemes").get<std::vector<std::string>>();
      lex.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw FormatError(path + ": bad lexicon entry: " + e.what());
  }
  lex.rebuild_index();
  return lex;
}

std::string slides_text(const Talk& talk) {
  std::string out;
  for (const auto& w : talk.slide_words) {
    out += w;
    out += '\n';
  }
  return out;
}

void save_talks(const std::string& dir, const std::vector<Talk>& talks) {
  ensure_directory(dir);
  ensure_directory(dir + "/slides");
  json index = json::array();
  std::vector<Utterance> all;
  for (const auto& t : talks) {
    index.push_back(json{{"id", t.id},
                         {"slides", "slides/" + t.id + ".txt"},
                         {"n_utterances", t.utterances.size()}});
    write_text_file(dir + "/slides/" + t.id + ".txt", slides_text(t));
    all.insert(all.end(), t.utterances.begin(), t.utterances.end());
  }
  write_text_file(dir + "/talks.json", json{{"talks", index}}.dump(2) + "\n");
  save_jsonl(dir + "/utterances.jsonl", all);
}

std::vector<Talk> load_talks(const std::string& dir) {
  json j;
  try {
    j = json::parse(read_text_file(dir + "/talks.json"));
  } catch (const json::exception& e) {
    throw FormatError(dir + "/talks.json: " + e.what());
  }
  std::vector<Utterance> all = load_jsonl(dir + "/utterances.jsonl");
  std::unordered_map<std::string, std::vector<Utterance>> by_talk;
  for (auto& u : all) by_talk[u.talk_id].push_back(std::move(u));
  std::vector<Talk> talks;
  try {
    for (const auto& jt : j.at("talks")) {
      Talk t;
      t.id = jt.at("id").get<std::string>();
      const std::string slides =
          read_text_file(dir + "/" + jt.at("slides").get<std::string>());
      std::istringstream in(slides);
      std::string w;
      while (in >> w) t.slide_words.push_back(w);
      auto it = by_talk.find(t.id);
      if (it != by_talk.end()) t.utterances = std::move(it->second);
      const size_t expect = jt.at("n_utterances").get<size_t>();
      if (t.utterances.size() != expect) {
        throw CorruptionError(dir + ": talk " + t.id + " has " +
                              std::to_string(t.utterances.size()) +
                              " utterances, index says " +
                              std::to_string(expect));
      }
      talks.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw FormatError(dir + "/talks.json: bad talk entry: " + e.what());
  }
  return talks;
}

}  // namespace nwf
