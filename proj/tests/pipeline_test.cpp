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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "nwf/checkpoint.hpp"
#include "nwf/common.hpp"
#include "nwf/io.hpp"
#include "nwf/pipeline.hpp"
#include "nwf/training.hpp"
#include "nwf/vocab.hpp"

using namespace nwf;

namespace {

Utterance ut(const std::string& id, const std::string& talk,
             const std::string& text) {
  Utterance u;
  u.id = id;
  u.talk_id = talk;
  u.text = text;
  u.phonemes = {"A"};
  return u;
}

Hypothesis hyp_of(const std::string& id, const std::string& text) {
  Hypothesis h;
  h.id = id;
  h.text = text;
  h.score = -1.0;
  return h;
}

// Canned transcriptions: per-utterance overrides, reference echo otherwise.
class FakeBackend : public PipelineBackend {
 public:
  std::map<std::string, std::string> hyp_override;

  struct AdaptCall {
    int64_t adaptation = 0;
    int64_t validation = 0;
    uint64_t seed = 0;
  };
  std::vector<AdaptCall> adapt_calls;
  std::vector<std::vector<std::string>> memories_seen;

  std::vector<Hypothesis> transcribe(
      const std::vector<Utterance>& utts,
      const std::vector<std::string>& memory_words) override {
    memories_seen.push_back(memory_words);
    std::vector<Hypothesis> out;
    for (const auto& u : utts) {
      auto it = hyp_override.find(u.id);
      out.push_back(hyp_of(u.id, it != hyp_override.end() ? it->second
                                                          : u.text));
    }
    return out;
  }

  TrainResult adapt(const std::vector<StoredUtterance>& adaptation,
                    const std::vector<StoredUtterance>& validation,
                    uint64_t cycle_seed) override {
    adapt_calls.push_back(
        {int64_t(adaptation.size()), int64_t(validation.size()), cycle_seed});
    TrainResult tr;
    tr.best_dev_ppl = 2.0;
    tr.steps_run = 7;
    tr.log.push_back({0, 0.0, 2.0});
    return tr;
  }
};

// Three talks over known vocab {the, cat, sat} with new words Alpha, BK,
// Gamma. The canned hypotheses make: cycle 1 detect only Alpha (first
// occurrence), cycle 2 detect Gamma (first) and Alpha (second, punctuated),
// cycle 3 (empty slides) detect past words BK (first) and Gamma (second).
struct Fixture {
  std::vector<Talk> talks;
  std::unordered_set<std::string> training_vocab = {"the", "cat", "sat"};
  std::unordered_set<std::string> new_words = {"Alpha", "BK", "Gamma"};
  std::vector<Utterance> general;

  Fixture() {
    Talk t1;
    t1.id = "t1";
    t1.slide_words = {"Alpha", "the", "BK"};  // "the" is known, dropped
    t1.utterances = {ut("u1", "t1", "the cat sat"),
                     ut("u2", "t1", "Alpha sat"), ut("u3", "t1", "the BK")};
    Talk t2;
    t2.id = "t2";
    t2.slide_words = {"Gamma"};
    t2.utterances = {ut("u4", "t2", "Gamma cat"),
                     ut("u5", "t2", "the Alpha")};
    Talk t3;
    t3.id = "t3";
    t3.slide_words = {};
    t3.utterances = {ut("u6", "t3", "BK sat"), ut("u7", "t3", "Gamma the")};
    talks = {t1, t2, t3};
    general = {ut("g1", "", "the cat sat"), ut("g2", "", "sat the")};
  }

  FakeBackend make_backend() const {
    FakeBackend b;
    b.hyp_override["u3"] = "the cat";        // BK missed in its own talk
    b.hyp_override["u5"] = "the Alpha,";     // detected through punctuation
    return b;
  }

  PipelineConfig config(Variant v) const {
    PipelineConfig cfg;
    cfg.variant = v;
    return cfg;
  }
};

std::string digest_of(const std::vector<Parameter*>& params) {
  std::vector<const Parameter*> view(params.begin(), params.end());
  return weights_digest(view);
}

}  // namespace

TEST_CASE("variant and scope names round trip") {
  for (Variant v : {Variant::kMemCl, Variant::kMemAll, Variant::kMemFound}) {
    CHECK(variant_from_name(variant_name(v)) == v);
  }
  CHECK(variant_name(Variant::kMemCl) == "mem-cl");
  CHECK_THROWS_AS(variant_from_name("memcl"), ContractError);
  CHECK(scope_from_name("decoder") == AdapterScope::kDecoderOnly);
  CHECK(scope_from_name("all") == AdapterScope::kEncoderAndDecoder);
  CHECK(scope_name(AdapterScope::kEncoderAndDecoder) == "all");
  CHECK_THROWS_AS(scope_from_name("encoder"), ContractError);
}

TEST_CASE("collect routes by occurrence count") {
  std::map<std::string, int64_t> counters;
  std::vector<Utterance> utts = {ut("a", "t", "the w"), ut("b", "t", "cat"),
                                 ut("c", "t", "w v"), ut("d", "t", "w sat")};
  std::vector<Hypothesis> hyps = {
      hyp_of("a", "the w"),  // w first -> adaptation
      hyp_of("b", "cat"),    // nothing -> dropped
      hyp_of("c", "w v"),    // w second + v first -> validation only
      hyp_of("d", "w sat")   // w third -> adaptation again
  };
  CollectOutcome out = collect_adaptation_utterances(
      utts, hyps, {"w", "v"}, {}, counters);

  REQUIRE(out.adaptation.size() == 2);
  REQUIRE(out.validation.size() == 1);
  CHECK(out.adaptation[0].utt_id == "a");
  CHECK(out.adaptation[1].utt_id == "d");
  CHECK(out.validation[0].utt_id == "c");
  CHECK(counters["w"] == 3);
  CHECK(counters["v"] == 1);
  CHECK(out.validation[0].trigger_words ==
        std::vector<std::string>{"w", "v"});
  CHECK(out.adaptation[0].text == "the w");
  CHECK(out.adaptation[0].ref_text == "the w");

  REQUIRE(out.detections.size() == 4);
  CHECK(out.detections[0] == std::make_pair(std::string("w"), int64_t(1)));
  CHECK(out.detections[1] == std::make_pair(std::string("w"), int64_t(2)));
  CHECK(out.detections[2] == std::make_pair(std::string("v"), int64_t(1)));
  CHECK(out.detections[3] == std::make_pair(std::string("w"), int64_t(3)));
}

TEST_CASE("collect counts a repeated word once per utterance") {
  std::map<std::string, int64_t> counters;
  std::vector<Utterance> utts = {ut("a", "t", "w w cat")};
  std::vector<Hypothesis> hyps = {hyp_of("a", "w w cat")};
  CollectOutcome out =
      collect_adaptation_utterances(utts, hyps, {"w"}, {}, counters);
  CHECK(counters["w"] == 1);
  CHECK(out.adaptation.size() == 1);
  CHECK(out.detections.size() == 1);
}

TEST_CASE("collect honors past memory and restriction flag") {
  std::map<std::string, int64_t> counters;
  counters["old"] = 5;
  std::vector<Utterance> utts = {ut("a", "t", "the old story")};
  std::vector<Hypothesis> hyps = {hyp_of("a", "the old story")};
  CollectOutcome out = collect_adaptation_utterances(utts, hyps, {}, {"old"},
                                                     counters, true);
  REQUIRE(out.adaptation.size() == 1);
  CHECK(out.adaptation[0].text == "old");       // restricted pseudo-label
  CHECK(out.adaptation[0].ref_text == "the old story");
  CHECK(counters["old"] == 6);

  CHECK_THROWS_AS(
      collect_adaptation_utterances(utts, {}, {}, {"old"}, counters),
      ContractError);
}

TEST_CASE("mem-cl three-talk trace matches the hand execution") {
  Fixture fx;
  FakeBackend backend = fx.make_backend();
  ExperimentLog log =
      run_experiment(backend, fx.talks, fx.training_vocab, fx.general,
                     fx.new_words, fx.config(Variant::kMemCl), 7);

  REQUIRE(log.cycles.size() == 3);
  const auto& c1 = log.cycles[0];
  const auto& c2 = log.cycles[1];
  const auto& c3 = log.cycles[2];

  CHECK(c1.talk_id == "t1");
  CHECK(c1.slide_words == std::vector<std::string>{"Alpha", "BK"});
  CHECK(c1.memory_words == std::vector<std::string>{"Alpha", "BK"});
  CHECK(c1.new_adaptation == 1);
  CHECK(c1.new_validation == 0);
  CHECK(c1.skipped_empty_validation);
  CHECK(!c1.trained);
  CHECK(c1.ft_events.empty());

  CHECK(c2.memory_words == std::vector<std::string>{"Gamma"});
  CHECK(c2.new_adaptation == 1);   // u4 (Gamma first)
  CHECK(c2.new_validation == 1);   // u5 (Alpha second, via past memory)
  CHECK(c2.adaptation_size == 2);
  CHECK(c2.validation_size == 1);
  CHECK(c2.trained);
  CHECK(!c2.skipped_empty_validation);
  CHECK(c2.adapt_best_ppl == 2.0);
  CHECK(c2.adapt_steps == 7);

  CHECK(c3.slide_words.empty());
  CHECK(c3.memory_words.empty());
  CHECK(c3.new_adaptation == 1);   // u6 (BK first, past memory)
  CHECK(c3.new_validation == 1);   // u7 (Gamma second)
  CHECK(c3.adaptation_size == 3);
  CHECK(c3.validation_size == 2);
  CHECK(c3.trained);
  REQUIRE(c3.detections.size() == 2);
  CHECK(c3.detections[0] == std::make_pair(std::string("BK"), int64_t(1)));
  CHECK(c3.detections[1] ==
        std::make_pair(std::string("Gamma"), int64_t(2)));

  REQUIRE(backend.adapt_calls.size() == 2);
  CHECK(backend.adapt_calls[0].adaptation == 2);
  CHECK(backend.adapt_calls[0].validation == 1);
  CHECK(backend.adapt_calls[1].adaptation == 3);
  CHECK(backend.adapt_calls[1].validation == 2);
  CHECK(backend.adapt_calls[0].seed != backend.adapt_calls[1].seed);

  // Forward transfer: Alpha at talk 2 (one true-positive prior sample),
  // BK and Gamma at talk 3 (zero and one prior samples).
  REQUIRE(c2.ft_events.size() == 1);
  CHECK(c2.ft_events[0].word == "Alpha");
  CHECK(c2.ft_events[0].prior_samples == 1);
  CHECK(c2.ft_events[0].tp == 1);
  CHECK(c2.ft_events[0].fp == 0);
  CHECK(c2.ft_events[0].fn == 0);
  REQUIRE(c3.ft_events.size() == 2);
  CHECK(c3.ft_events[0].word == "BK");
  CHECK(c3.ft_events[0].prior_samples == 0);
  CHECK(c3.ft_events[0].tp == 1);
  CHECK(c3.ft_events[1].word == "Gamma");
  CHECK(c3.ft_events[1].prior_samples == 1);
  CHECK(c3.ft_events[1].tp == 1);

  // mem-cl evaluates with empty memory: the general and forward-transfer
  // transcriptions all saw an empty list.
  // Calls: c1 talk, c1 general, c2 ft, c2 talk, c2 general, c3 ft, c3 talk,
  // c3 general.
  REQUIRE(backend.memories_seen.size() == 8);
  CHECK(backend.memories_seen[1].empty());
  CHECK(backend.memories_seen[2].empty());
  CHECK(backend.memories_seen[4].empty());
  CHECK(backend.memories_seen[5].empty());

  for (const auto& rec : log.cycles) CHECK(rec.general_wer == 0.0);
}

TEST_CASE("mem-all accumulates memory and never adapts") {
  Fixture fx;
  FakeBackend backend = fx.make_backend();
  ExperimentLog log =
      run_experiment(backend, fx.talks, fx.training_vocab, fx.general,
                     fx.new_words, fx.config(Variant::kMemAll), 7);

  REQUIRE(log.cycles.size() == 3);
  CHECK(log.cycles[0].memory_words ==
        std::vector<std::string>{"Alpha", "BK"});
  CHECK(log.cycles[1].memory_words ==
        std::vector<std::string>{"Alpha", "BK", "Gamma"});
  CHECK(log.cycles[2].memory_words ==
        std::vector<std::string>{"Alpha", "BK", "Gamma"});
  CHECK(backend.adapt_calls.empty());
  for (const auto& rec : log.cycles) {
    CHECK(!rec.trained);
    CHECK(!rec.skipped_empty_validation);
  }
  // Stores still tracked for reporting.
  CHECK(log.cycles[2].adaptation_size == 3);
  CHECK(log.cycles[2].validation_size == 2);

  // General evaluation uses the accumulated memory (call after each talk).
  REQUIRE(backend.memories_seen.size() == 8);
  CHECK(backend.memories_seen[1] ==
        std::vector<std::string>{"Alpha", "BK"});
  CHECK(backend.memories_seen[2] ==
        std::vector<std::string>{"Alpha", "BK"});  // ft before cycle 2
  CHECK(backend.memories_seen[4] ==
        std::vector<std::string>{"Alpha", "BK", "Gamma"});
}

TEST_CASE("mem-found keeps only words recognized in their own talk") {
  Fixture fx;
  FakeBackend backend = fx.make_backend();
  ExperimentLog log =
      run_experiment(backend, fx.talks, fx.training_vocab, fx.general,
                     fx.new_words, fx.config(Variant::kMemFound), 7);

  // BK was missed in talk 1 (u3 transcribed without it), so it is dropped
  // from the found set; Alpha and Gamma were recognized in their own talks.
  REQUIRE(log.cycles.size() == 3);
  CHECK(log.cycles[0].memory_words ==
        std::vector<std::string>{"Alpha", "BK"});
  CHECK(log.cycles[1].memory_words ==
        std::vector<std::string>{"Alpha", "Gamma"});
  CHECK(log.cycles[2].memory_words ==
        std::vector<std::string>{"Alpha", "Gamma"});
  CHECK(backend.adapt_calls.empty());

  // Subset property against mem-all on the same talks and hypotheses.
  FakeBackend backend2 = fx.make_backend();
  ExperimentLog all =
      run_experiment(backend2, fx.talks, fx.training_vocab, fx.general,
                     fx.new_words, fx.config(Variant::kMemAll), 7);
  for (size_t c = 0; c < 3; ++c) {
    for (const auto& w : log.cycles[c].memory_words) {
      CHECK(std::find(all.cycles[c].memory_words.begin(),
                      all.cycles[c].memory_words.end(),
                      w) != all.cycles[c].memory_words.end());
    }
  }
}

TEST_CASE("false-positive pseudo-labels do not count as prior samples") {
  Talk t1;
  t1.id = "t1";
  t1.slide_words = {"Alpha"};
  t1.utterances = {ut("u1", "t1", "the cat"),     // hyp will claim Alpha
                   ut("u2", "t1", "Alpha sat")};  // real occurrence
  Talk t2;
  t2.id = "t2";
  t2.slide_words = {};
  t2.utterances = {ut("u3", "t2", "Alpha the")};
  std::vector<Utterance> general = {ut("g1", "", "the cat")};

  FakeBackend backend;
  backend.hyp_override["u1"] = "Alpha cat";  // false positive, first occ
  backend.hyp_override["u3"] = "the the";    // miss at evaluation time

  PipelineConfig cfg;
  cfg.variant = Variant::kMemCl;
  ExperimentLog log = run_experiment(backend, {t1, t2}, {"the", "cat", "sat"},
                                     general, {"Alpha"}, cfg, 7);

  // u1 -> adaptation (Alpha first, wrong), u2 -> validation (second).
  REQUIRE(log.cycles.size() == 2);
  CHECK(log.cycles[0].new_adaptation == 1);
  CHECK(log.cycles[0].new_validation == 1);
  REQUIRE(log.cycles[1].ft_events.size() == 1);
  const auto& ev = log.cycles[1].ft_events[0];
  CHECK(ev.word == "Alpha");
  CHECK(ev.prior_samples == 0);  // the only adaptation entry is wrong
  CHECK(ev.tp == 0);
  CHECK(ev.fn == 1);
}

TEST_CASE("general curve and wer replay from the stored hypotheses") {
  Fixture fx;
  FakeBackend backend = fx.make_backend();
  backend.hyp_override["g1"] = "the sat";  // one deletion against 5 ref words
  ExperimentLog log =
      run_experiment(backend, fx.talks, fx.training_vocab, fx.general,
                     fx.new_words, fx.config(Variant::kMemAll), 7);

  auto curve = general_performance_curve(log);
  REQUIRE(curve.size() == 3);
  CHECK(curve[0].first == 2);
  CHECK(curve[1].first == 3);
  CHECK(curve[2].first == 3);
  for (const auto& [x, wer] : curve) CHECK(wer == 0.2);

  for (const auto& rec : log.cycles) {
    std::vector<std::string> refs, hyps;
    for (const auto& u : fx.general) refs.push_back(u.text);
    for (const auto& h : rec.general_hyps) hyps.push_back(h.text);
    CHECK(corpus_word_error_rate(refs, hyps).wer() == rec.general_wer);
  }
}

TEST_CASE("forward transfer report flattens all cycles") {
  Fixture fx;
  FakeBackend backend = fx.make_backend();
  ExperimentLog log =
      run_experiment(backend, fx.talks, fx.training_vocab, fx.general,
                     fx.new_words, fx.config(Variant::kMemCl), 7);

  ForwardTransferReport rep = forward_transfer_report(log, 1);
  CHECK(rep.total_events == 3);
  REQUIRE(rep.buckets.size() == 2);
  CHECK(rep.buckets[0].lo == 0);
  CHECK(rep.buckets[0].events == 1);  // BK
  CHECK(rep.buckets[1].lo == 1);
  CHECK(rep.buckets[1].events == 2);  // Alpha, Gamma
  CHECK(rep.buckets[1].recall() == 1.0);

  ForwardTransferReport merged = forward_transfer_report(log, 3);
  REQUIRE(merged.buckets.size() == 1);
  CHECK(merged.buckets[0].events == 3);
}

TEST_CASE("experiment log round trips through jsonl") {
  Fixture fx;
  FakeBackend backend = fx.make_backend();
  ExperimentLog log =
      run_experiment(backend, fx.talks, fx.training_vocab, fx.general,
                     fx.new_words, fx.config(Variant::kMemCl), 99);

  const std::string dir = "/tmp/nwf_pipeline_test";
  ensure_directory(dir);
  const std::string path = dir + "/log.jsonl";
  save_experiment_log(path, log);
  ExperimentLog loaded = load_experiment_log(path);

  CHECK(loaded.variant == log.variant);
  CHECK(loaded.seed == log.seed);
  REQUIRE(loaded.cycles.size() == log.cycles.size());
  for (size_t i = 0; i < log.cycles.size(); ++i) {
    const auto& a = log.cycles[i];
    const auto& b = loaded.cycles[i];
    CHECK(a.cycle == b.cycle);
    CHECK(a.talk_id == b.talk_id);
    CHECK(a.slide_words == b.slide_words);
    CHECK(a.memory_words == b.memory_words);
    CHECK(a.detections == b.detections);
    CHECK(a.new_adaptation == b.new_adaptation);
    CHECK(a.new_validation == b.new_validation);
    CHECK(a.adaptation_size == b.adaptation_size);
    CHECK(a.validation_size == b.validation_size);
    CHECK(a.trained == b.trained);
    CHECK(a.skipped_empty_validation == b.skipped_empty_validation);
    CHECK(a.adapt_best_ppl == b.adapt_best_ppl);
    CHECK(a.adapt_steps == b.adapt_steps);
    CHECK(a.general_wer == b.general_wer);
    REQUIRE(a.talk_hyps.size() == b.talk_hyps.size());
    for (size_t k = 0; k < a.talk_hyps.size(); ++k) {
      CHECK(a.talk_hyps[k].id == b.talk_hyps[k].id);
      CHECK(a.talk_hyps[k].text == b.talk_hyps[k].text);
      CHECK(a.talk_hyps[k].score == b.talk_hyps[k].score);
    }
    REQUIRE(a.ft_events.size() == b.ft_events.size());
    for (size_t k = 0; k < a.ft_events.size(); ++k) {
      CHECK(a.ft_events[k].word == b.ft_events[k].word);
      CHECK(a.ft_events[k].prior_samples == b.ft_events[k].prior_samples);
      CHECK(a.ft_events[k].tp == b.ft_events[k].tp);
      CHECK(a.ft_events[k].fp == b.ft_events[k].fp);
      CHECK(a.ft_events[k].fn == b.ft_events[k].fn);
    }
  }

  write_text_file(dir + "/bad.jsonl", "{\"variant\": \"mem-cl\"}\n");
  CHECK_THROWS_AS(load_experiment_log(dir + "/bad.jsonl"), FormatError);
  write_text_file(dir + "/empty.jsonl", "");
  CHECK_THROWS_AS(load_experiment_log(dir + "/empty.jsonl"), FormatError);
}

namespace {

Utterance word_utterance(const std::string& id, const std::string& talk,
                         const std::vector<std::string>& words) {
  Utterance u;
  u.id = id;
  u.talk_id = talk;
  u.words = words;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i > 0) u.text += ' ';
    u.text += words[i];
    for (char c : words[i]) {
      u.phonemes.push_back(std::string(1, char(std::toupper(c))));
    }
  }
  return u;
}

Vocab letter_phoneme_vocab() {
  std::vector<std::string> symbols;
  for (char c = 'A'; c <= 'Z'; ++c) symbols.push_back(std::string(1, c));
  return Vocab::from_symbols(symbols);
}

}  // namespace

TEST_CASE("real-model mem-cl run is deterministic and isolates the base") {
  const Vocab phon = letter_phoneme_vocab();
  const Vocab chars = Vocab::characters();
  ModelConfig mc;
  mc.d_model = 16;
  mc.heads = 2;
  mc.ff = 32;
  mc.enc_layers = 1;
  mc.dec_layers = 1;
  mc.mem_enc_layers = 1;
  mc.mem_dec_layers = 1;
  mc.src_vocab = phon.size();
  mc.tgt_vocab = chars.size();
  mc.max_src_len = 48;
  mc.max_tgt_len = 32;
  mc.max_entry_len = 8;

  const std::vector<std::string> known = {"aba", "bec", "cad", "dee"};
  const std::unordered_set<std::string> training_vocab(known.begin(),
                                                       known.end());
  const std::unordered_set<std::string> new_words = {"zeb", "qix", "wof"};

  std::vector<Talk> talks(3);
  talks[0].id = "t1";
  talks[0].slide_words = {"zeb"};
  talks[0].utterances = {word_utterance("u1", "t1", {"aba", "zeb"}),
                         word_utterance("u2", "t1", {"bec", "cad"}),
                         word_utterance("u3", "t1", {"zeb", "dee"})};
  talks[1].id = "t2";
  talks[1].slide_words = {"qix"};
  talks[1].utterances = {word_utterance("u4", "t2", {"qix", "aba"}),
                         word_utterance("u5", "t2", {"zeb", "bec"}),
                         word_utterance("u6", "t2", {"cad", "dee"})};
  talks[2].id = "t3";
  talks[2].slide_words = {"wof"};
  talks[2].utterances = {word_utterance("u7", "t3", {"wof", "cad"}),
                         word_utterance("u8", "t3", {"qix", "dee"}),
                         word_utterance("u9", "t3", {"aba", "bec"})};
  std::vector<Utterance> general = {word_utterance("g1", "", {"aba", "bec"}),
                                    word_utterance("g2", "", {"cad", "dee"}),
                                    word_utterance("g3", "", {"dee", "aba"})};

  // Overfit pretraining on everything so transcription detects the new
  // words reliably; the pipeline itself stays self-supervised.
  std::vector<SeqExample> pretrain_set;
  for (const auto& t : talks) {
    for (const auto& u : t.utterances) {
      pretrain_set.push_back(to_example(u, phon, chars));
    }
  }
  for (const auto& u : general) {
    pretrain_set.push_back(to_example(u, phon, chars));
  }
  std::vector<SeqExample> baseline_pool;
  for (const auto& u : general) {
    baseline_pool.push_back(to_example(u, phon, chars));
  }

  PipelineConfig cfg;
  cfg.variant = Variant::kMemCl;
  cfg.adapter_rank = 2;
  cfg.adapt.lr = 1e-3;
  cfg.adapt.batch_size = 4;
  cfg.adapt.eval_interval = 10;
  cfg.adapt.patience = 2;
  cfg.adapt.max_steps = 20;
  cfg.decode.beam = 2;

  auto run_once = [&](const std::string& log_path) {
    Model model(mc, 5);
    TrainConfig pre;
    pre.lr = 3e-3;
    pre.batch_size = 8;
    pre.eval_interval = 50;
    pre.patience = 100;
    pre.max_steps = 500;
    pretrain_baseline(model, pretrain_set, pretrain_set, pre, 6);

    const std::string base_before = digest_of(model.base_params());
    const std::string mem_before = digest_of(model.memory_params());

    ModelBackend backend(model, baseline_pool, phon, chars, cfg);
    ExperimentLog log = run_experiment(
        backend, talks, training_vocab, general, new_words, cfg, 7,
        [&](const CycleState& state, const CycleRecord& rec) {
          std::set<std::string> ids;
          for (const auto& e : state.adaptation) ids.insert(e.utt_id);
          for (const auto& e : state.validation) {
            CHECK(!ids.count(e.utt_id));  // stores disjoint by id
          }
          std::set<std::string> past(state.past_memory_words.begin(),
                                     state.past_memory_words.end());
          for (const auto& e : state.adaptation) {
            for (const auto& w : e.trigger_words) CHECK(past.count(w) == 1);
          }
          CHECK(rec.adaptation_size == int64_t(state.adaptation.size()));
        });

    CHECK(digest_of(model.base_params()) == base_before);
    CHECK(digest_of(model.memory_params()) == mem_before);
    REQUIRE(log.cycles.size() == 3);
    for (size_t c = 1; c < log.cycles.size(); ++c) {
      CHECK(log.cycles[c].adaptation_size >=
            log.cycles[c - 1].adaptation_size);
      CHECK(log.cycles[c].validation_size >=
            log.cycles[c - 1].validation_size);
    }
    for (const auto& rec : log.cycles) {
      CHECK(rec.trained == !rec.skipped_empty_validation);
    }
    save_experiment_log(log_path, log);
    return log;
  };

  const std::string dir = "/tmp/nwf_pipeline_test";
  ensure_directory(dir);
  ExperimentLog first = run_once(dir + "/real1.jsonl");
  ExperimentLog second = run_once(dir + "/real2.jsonl");
  CHECK(read_text_file(dir + "/real1.jsonl") ==
        read_text_file(dir + "/real2.jsonl"));

  // The overfit model detects the new words, so the stores actually fill
  // and at least one cycle trains adapters.
  CHECK(first.cycles.back().adaptation_size >= 1);
  bool any_trained = false;
  for (const auto& rec : first.cycles) any_trained |= rec.trained;
  CHECK(any_trained);
}
