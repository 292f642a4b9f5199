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

#include "nwf/pipeline.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "nwf/common.hpp"
#include "nwf/io.hpp"
#include "nwf/rng.hpp"

namespace nwf {

using nlohmann::json;

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kMemCl:
      return "mem-cl";
    case Variant::kMemAll:
      return "mem-all";
    case Variant::kMemFound:
      return "mem-found";
  }
  throw ContractError("variant_name: bad variant");
}

Variant variant_from_name(const std::string& name) {
  if (name == "mem-cl") return Variant::kMemCl;
  if (name == "mem-all") return Variant::kMemAll;
  if (name == "mem-found") return Variant::kMemFound;
  throw ContractError("unknown variant: " + name);
}

std::string scope_name(AdapterScope scope) {
  return scope == AdapterScope::kDecoderOnly ? "decoder" : "all";
}

AdapterScope scope_from_name(const std::string& name) {
  if (name == "decoder") return AdapterScope::kDecoderOnly;
  if (name == "all") return AdapterScope::kEncoderAndDecoder;
  throw ContractError("unknown adapter scope: " + name);
}

void PipelineConfig::validate() const {
  NWF_REQUIRE(adapter_rank >= 1, "PipelineConfig: adapter_rank must be >= 1");
  NWF_REQUIRE(upsample >= 1.0, "PipelineConfig: upsample must be >= 1");
  NWF_REQUIRE(threads >= 1, "PipelineConfig: threads must be >= 1");
  adapt.validate();
  decode.validate();
}

namespace {

void append_unique(std::vector<std::string>& items,
                   const std::vector<std::string>& add) {
  for (const auto& w : add) {
    if (std::find(items.begin(), items.end(), w) == items.end()) {
      items.push_back(w);
    }
  }
}

int64_t count_token(const std::vector<std::string>& tokens,
                    const std::string& w) {
  return std::count(tokens.begin(), tokens.end(), w);
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out += ' ';
    out += words[i];
  }
  return out;
}

std::vector<std::string> general_memory(const CycleState& state, Variant v) {
  switch (v) {
    case Variant::kMemCl:
      return {};
    case Variant::kMemAll:
      return state.accumulated_memory;
    case Variant::kMemFound:
      return state.found_words;
  }
  throw ContractError("general_memory: bad variant");
}

}  // namespace

CollectOutcome collect_adaptation_utterances(
    const std::vector<Utterance>& utts, const std::vector<Hypothesis>& hyps,
    const std::vector<std::string>& current_memory,
    const std::vector<std::string>& past_memory,
    std::map<std::string, int64_t>& counters, bool restrict_targets) {
  NWF_REQUIRE(utts.size() == hyps.size(),
              "collect: utterance/hypothesis length mismatch");
  std::unordered_set<std::string> memory_set(current_memory.begin(),
                                             current_memory.end());
  memory_set.insert(past_memory.begin(), past_memory.end());

  CollectOutcome out;
  for (size_t i = 0; i < utts.size(); ++i) {
    std::vector<std::string> detected;
    for (const auto& tok : match_tokens(hyps[i].text)) {
      if (memory_set.count(tok) &&
          std::find(detected.begin(), detected.end(), tok) ==
              detected.end()) {
        detected.push_back(tok);
      }
    }
    if (detected.empty()) continue;

    bool second_occurrence = false;
    for (const auto& w : detected) {
      const int64_t n = ++counters[w];
      out.detections.emplace_back(w, n);
      if (n == 2) second_occurrence = true;
    }

    StoredUtterance entry;
    entry.utt_id = utts[i].id;
    entry.talk_id = utts[i].talk_id;
    entry.phonemes = utts[i].phonemes;
    entry.text = restrict_targets ? join_words(detected) : hyps[i].text;
    entry.ref_text = utts[i].text;
    entry.trigger_words = detected;
    if (second_occurrence) {
      out.validation.push_back(std::move(entry));
    } else {
      out.adaptation.push_back(std::move(entry));
    }
  }
  return out;
}

ModelBackend::ModelBackend(Model& model, std::vector<SeqExample> baseline_pool,
                           const Vocab& phoneme_vocab, const Vocab& char_vocab,
                           const PipelineConfig& cfg)
    : model_(model),
      baseline_(std::move(baseline_pool)),
      phoneme_vocab_(phoneme_vocab),
      char_vocab_(char_vocab),
      cfg_(cfg) {
  cfg_.validate();
  NWF_REQUIRE(!baseline_.empty(), "ModelBackend: empty baseline pool");
}

std::vector<Hypothesis> ModelBackend::transcribe(
    const std::vector<Utterance>& utts,
    const std::vector<std::string>& memory_words) {
  MemoryList memory = MemoryList::from_words(memory_words, char_vocab_);
  return transcribe_dataset(model_, adapters_.get(), memory, utts,
                            phoneme_vocab_, char_vocab_, cfg_.decode,
                            cfg_.threads);
}

TrainResult ModelBackend::adapt(
    const std::vector<StoredUtterance>& adaptation,
    const std::vector<StoredUtterance>& validation, uint64_t cycle_seed) {
  NWF_REQUIRE(!adaptation.empty(), "adapt: empty adaptation store");
  NWF_REQUIRE(!validation.empty(), "adapt: empty validation store");
  auto to_examples = [&](const std::vector<StoredUtterance>& entries) {
    std::vector<SeqExample> out;
    out.reserve(entries.size());
    for (const auto& e : entries) {
      SeqExample ex;
      ex.src = phoneme_vocab_.encode_symbols(e.phonemes);
      ex.tgt = char_vocab_.encode_chars(e.text);
      out.push_back(std::move(ex));
    }
    return out;
  };
  adapters_ = std::make_unique<AdapterSet>(model_, cfg_.adapter_rank,
                                           cfg_.scope,
                                           derive_seed(cycle_seed, "factors"));
  MixtureSampler mixture(baseline_, to_examples(adaptation), cfg_.upsample,
                         derive_seed(cycle_seed, "mixture"));
  return train_adapters(model_, *adapters_, mixture, to_examples(validation),
                        cfg_.adapt, derive_seed(cycle_seed, "train"));
}

CycleRecord run_cycle(CycleState& state, const Talk& talk,
                      PipelineBackend& backend,
                      const std::unordered_set<std::string>& training_vocab,
                      const PipelineConfig& cfg, uint64_t cycle_seed) {
  cfg.validate();
  CycleRecord rec;
  rec.talk_id = talk.id;
  rec.slide_words = extract_slide_words(slides_text(talk), training_vocab);

  std::vector<std::string> memory_words;
  switch (cfg.variant) {
    case Variant::kMemCl:
      memory_words = rec.slide_words;
      break;
    case Variant::kMemAll:
      append_unique(state.accumulated_memory, rec.slide_words);
      memory_words = state.accumulated_memory;
      break;
    case Variant::kMemFound:
      memory_words = state.found_words;
      append_unique(memory_words, rec.slide_words);
      break;
  }
  rec.memory_words = memory_words;

  rec.talk_hyps = backend.transcribe(talk.utterances, memory_words);
  CollectOutcome collected = collect_adaptation_utterances(
      talk.utterances, rec.talk_hyps, memory_words, state.past_memory_words,
      state.counters, cfg.restrict_targets);
  rec.detections = std::move(collected.detections);
  rec.new_adaptation = int64_t(collected.adaptation.size());
  rec.new_validation = int64_t(collected.validation.size());
  for (auto& e : collected.adaptation) state.adaptation.push_back(std::move(e));
  for (auto& e : collected.validation) state.validation.push_back(std::move(e));
  rec.adaptation_size = int64_t(state.adaptation.size());
  rec.validation_size = int64_t(state.validation.size());
  append_unique(state.past_memory_words, memory_words);

  if (cfg.variant == Variant::kMemFound) {
    std::vector<std::string> recognized;
    for (const auto& w : rec.slide_words) {
      for (const auto& hyp : rec.talk_hyps) {
        if (count_token(match_tokens(hyp.text), w) > 0) {
          recognized.push_back(w);
          break;
        }
      }
    }
    append_unique(state.found_words, recognized);
  }

  if (cfg.variant == Variant::kMemCl) {
    if (state.validation.empty()) {
      rec.skipped_empty_validation = true;
    } else {
      TrainResult tr =
          backend.adapt(state.adaptation, state.validation, cycle_seed);
      rec.trained = true;
      rec.adapt_best_ppl = tr.best_dev_ppl;
      rec.adapt_steps = tr.steps_run;
    }
  }

  state.cycle += 1;
  rec.cycle = state.cycle;
  return rec;
}

namespace {

std::vector<ForwardTransferEvent> ft_pass(
    PipelineBackend& backend, const Talk& talk,
    const std::set<std::string>& talk_words,
    const std::set<std::string>& prior_words, const CycleState& state,
    const PipelineConfig& cfg) {
  std::vector<std::string> event_words;
  for (const auto& w : talk_words) {
    if (prior_words.count(w)) event_words.push_back(w);
  }
  if (event_words.empty()) return {};

  std::vector<const Utterance*> subset;
  std::vector<std::vector<std::string>> subset_ref_tokens;
  for (const auto& u : talk.utterances) {
    auto tokens = match_tokens(u.text);
    for (const auto& w : event_words) {
      if (count_token(tokens, w) > 0) {
        subset.push_back(&u);
        subset_ref_tokens.push_back(std::move(tokens));
        break;
      }
    }
  }
  std::vector<Utterance> subset_utts;
  subset_utts.reserve(subset.size());
  for (const Utterance* u : subset) subset_utts.push_back(*u);

  std::vector<Hypothesis> hyps =
      backend.transcribe(subset_utts, general_memory(state, cfg.variant));
  std::vector<std::vector<std::string>> hyp_tokens;
  hyp_tokens.reserve(hyps.size());
  for (const auto& h : hyps) hyp_tokens.push_back(match_tokens(h.text));

  std::vector<ForwardTransferEvent> events;
  for (const auto& w : event_words) {
    ForwardTransferEvent ev;
    ev.word = w;
    for (const auto& e : state.adaptation) {
      if (std::find(e.trigger_words.begin(), e.trigger_words.end(), w) ==
          e.trigger_words.end()) {
        continue;
      }
      // A pseudo-label counts as a training sample only when it was right.
      if (count_token(match_tokens(e.ref_text), w) > 0) ++ev.prior_samples;
    }
    for (size_t i = 0; i < subset_utts.size(); ++i) {
      const int64_t ref_n = count_token(subset_ref_tokens[i], w);
      if (ref_n == 0) continue;
      const int64_t hyp_n = count_token(hyp_tokens[i], w);
      ev.tp += std::min(ref_n, hyp_n);
      ev.fp += std::max<int64_t>(hyp_n - ref_n, 0);
      ev.fn += std::max<int64_t>(ref_n - hyp_n, 0);
    }
    events.push_back(std::move(ev));
  }
  return events;
}

}  // namespace

ExperimentLog run_experiment(
    PipelineBackend& backend, const std::vector<Talk>& talks,
    const std::unordered_set<std::string>& training_vocab,
    const std::vector<Utterance>& general_testset,
    const std::unordered_set<std::string>& new_words,
    const PipelineConfig& cfg, uint64_t seed,
    const std::function<void(const CycleState&, const CycleRecord&)>&
        on_cycle) {
  cfg.validate();
  NWF_REQUIRE(!talks.empty(), "run_experiment: no talks");
  NWF_REQUIRE(!general_testset.empty(), "run_experiment: empty general set");

  std::vector<std::set<std::string>> talk_ref_words(talks.size());
  for (size_t t = 0; t < talks.size(); ++t) {
    for (const auto& u : talks[t].utterances) {
      for (const auto& tok : match_tokens(u.text)) {
        if (new_words.count(tok)) talk_ref_words[t].insert(tok);
      }
    }
  }
  std::vector<std::string> general_refs;
  general_refs.reserve(general_testset.size());
  for (const auto& u : general_testset) general_refs.push_back(u.text);

  ExperimentLog log;
  log.variant = cfg.variant;
  log.seed = seed;
  CycleState state;
  std::set<std::string> prior_words;
  for (size_t j = 0; j < talks.size(); ++j) {
    std::vector<ForwardTransferEvent> events =
        ft_pass(backend, talks[j], talk_ref_words[j], prior_words, state, cfg);

    const uint64_t cycle_seed =
        derive_seed(seed, "cycle-" + std::to_string(j + 1));
    CycleRecord rec = run_cycle(state, talks[j], backend, training_vocab, cfg,
                                cycle_seed);
    rec.ft_events = std::move(events);

    rec.general_hyps =
        backend.transcribe(general_testset, general_memory(state, cfg.variant));
    std::vector<std::string> hyp_texts;
    hyp_texts.reserve(rec.general_hyps.size());
    for (const auto& h : rec.general_hyps) hyp_texts.push_back(h.text);
    rec.general_wer = corpus_word_error_rate(general_refs, hyp_texts).wer();

    prior_words.insert(talk_ref_words[j].begin(), talk_ref_words[j].end());
    log.cycles.push_back(std::move(rec));
    if (on_cycle) on_cycle(state, log.cycles.back());
  }
  return log;
}

ForwardTransferReport forward_transfer_report(const ExperimentLog& log,
                                              int64_t min_bucket) {
  std::vector<ForwardTransferEvent> events;
  for (const auto& rec : log.cycles) {
    events.insert(events.end(), rec.ft_events.begin(), rec.ft_events.end());
  }
  return bucket_forward_transfer(std::move(events), min_bucket);
}

std::vector<std::pair<int64_t, double>> general_performance_curve(
    const ExperimentLog& log) {
  std::vector<std::pair<int64_t, double>> curve;
  std::set<std::string> seen;
  for (const auto& rec : log.cycles) {
    seen.insert(rec.slide_words.begin(), rec.slide_words.end());
    curve.emplace_back(int64_t(seen.size()), rec.general_wer);
  }
  return curve;
}

namespace {

json hyps_to_json(const std::vector<Hypothesis>& hyps) {
  json arr = json::array();
  for (const auto& h : hyps) {
    arr.push_back({{"id", h.id}, {"hyp", h.text}, {"score", h.score}});
  }
  return arr;
}

std::vector<Hypothesis> hyps_from_json(const json& arr) {
  std::vector<Hypothesis> out;
  for (const auto& row : arr) {
    Hypothesis h;
    h.id = row.at("id").get<std::string>();
    h.text = row.at("hyp").get<std::string>();
    h.score = row.at("score").get<double>();
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace

void save_experiment_log(const std::string& path, const ExperimentLog& log) {
  std::ostringstream out;
  json header = {{"variant", variant_name(log.variant)}, {"seed", log.seed}};
  out << header.dump() << "\n";
  for (const auto& rec : log.cycles) {
    json detections = json::array();
    for (const auto& [w, n] : rec.detections) detections.push_back({w, n});
    json events = json::array();
    for (const auto& ev : rec.ft_events) {
      events.push_back({{"word", ev.word},
                        {"prior", ev.prior_samples},
                        {"tp", ev.tp},
                        {"fp", ev.fp},
                        {"fn", ev.fn}});
    }
    json row = {{"cycle", rec.cycle},
                {"talk_id", rec.talk_id},
                {"slide_words", rec.slide_words},
                {"memory_words", rec.memory_words},
                {"talk_hyps", hyps_to_json(rec.talk_hyps)},
                {"detections", detections},
                {"new_adaptation", rec.new_adaptation},
                {"new_validation", rec.new_validation},
                {"adaptation_size", rec.adaptation_size},
                {"validation_size", rec.validation_size},
                {"trained", rec.trained},
                {"skipped_empty_validation", rec.skipped_empty_validation},
                {"adapt_best_ppl", rec.adapt_best_ppl},
                {"adapt_steps", rec.adapt_steps},
                {"general_hyps", hyps_to_json(rec.general_hyps)},
                {"general_wer", rec.general_wer},
                {"ft_events", events}};
    out << row.dump() << "\n";
  }
  write_text_file(path, out.str());
}

ExperimentLog load_experiment_log(const std::string& path) {
  auto lines = read_lines(path, true);
  if (lines.empty()) throw FormatError("experiment log: empty file");
  ExperimentLog log;
  try {
    json header = json::parse(lines[0]);
    log.variant = variant_from_name(header.at("variant").get<std::string>());
    log.seed = header.at("seed").get<uint64_t>();
    for (size_t i = 1; i < lines.size(); ++i) {
      json row = json::parse(lines[i]);
      CycleRecord rec;
      rec.cycle = row.at("cycle").get<int>();
      rec.talk_id = row.at("talk_id").get<std::string>();
      rec.slide_words =
          row.at("slide_words").get<std::vector<std::string>>();
      rec.memory_words =
          row.at("memory_words").get<std::vector<std::string>>();
      rec.talk_hyps = hyps_from_json(row.at("talk_hyps"));
      for (const auto& d : row.at("detections")) {
        rec.detections.emplace_back(d.at(0).get<std::string>(),
                                    d.at(1).get<int64_t>());
      }
      rec.new_adaptation = row.at("new_adaptation").get<int64_t>();
      rec.new_validation = row.at("new_validation").get<int64_t>();
      rec.adaptation_size = row.at("adaptation_size").get<int64_t>();
      rec.validation_size = row.at("validation_size").get<int64_t>();
      rec.trained = row.at("trained").get<bool>();
      rec.skipped_empty_validation =
          row.at("skipped_empty_validation").get<bool>();
      rec.adapt_best_ppl = row.at("adapt_best_ppl").get<double>();
      rec.adapt_steps = row.at("adapt_steps").get<int>();
      rec.general_hyps = hyps_from_json(row.at("general_hyps"));
      rec.general_wer = row.at("general_wer").get<double>();
      for (const auto& e : row.at("ft_events")) {
        ForwardTransferEvent ev;
        ev.word = e.at("word").get<std::string>();
        ev.prior_samples = e.at("prior").get<int64_t>();
        ev.tp = e.at("tp").get<int64_t>();
        ev.fp = e.at("fp").get<int64_t>();
        ev.fn = e.at("fn").get<int64_t>();
        rec.ft_events.push_back(std::move(ev));
      }
      log.cycles.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("experiment log: ") + e.what());
  }
  return log;
}

}  // namespace nwf
