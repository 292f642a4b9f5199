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

#include "nwf/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "nwf/checkpoint.hpp"
#include "nwf/common.hpp"
#include "nwf/config.hpp"
#include "nwf/corpus.hpp"
#include "nwf/decoding.hpp"
#include "nwf/digest.hpp"
#include "nwf/io.hpp"
#include "nwf/metrics.hpp"
#include "nwf/pipeline.hpp"
#include "nwf/rng.hpp"
#include "nwf/threads.hpp"
#include "nwf/training.hpp"
#include "nwf/vocab.hpp"

namespace nwf {

using nlohmann::json;

namespace fs = std::filesystem;

namespace {

// CLI misuse discovered after flag parsing (missing paths, bad config).
struct UsageError : Error {
  explicit UsageError(const std::string& msg) : Error(msg) {}
};

std::string now_iso8601() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string join_args(const std::vector<std::string>& args) {
  std::string out = "nwf";
  for (const auto& a : args) {
    out += ' ';
    out += a;
  }
  return out;
}

// Config snapshot reduced to its semantic content: locations and thread
// counts do not change results, so they are dropped from the identity.
std::string normalized_config(const std::string& config_json) {
  if (config_json.empty()) return "{}";
  json j;
  try {
    j = json::parse(config_json);
  } catch (const json::exception&) {
    return config_json;
  }
  if (j.is_object()) {
    j.erase("paths");
    if (j.contains("pipeline") && j.at("pipeline").is_object()) {
      j.at("pipeline").erase("threads");
    }
  }
  return j.dump();
}

void write_json_file(const std::string& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

json parse_json_file(const std::string& path, const std::string& what) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw FormatError(what + ": malformed JSON in " + path + ": " + e.what());
  }
}

}  // namespace

// ----- Run manifests -----

std::vector<std::string> list_output_files(const std::string& dir) {
  NWF_REQUIRE(fs::is_directory(dir), "not a directory: " + dir);
  std::vector<std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    // Manifests at any depth embed command lines and timestamps; checkpoint
    // manifests are verified separately through their weights digest.
    if (entry.path().filename() == "manifest.json") continue;
    out.push_back(entry.path().lexically_relative(dir).generic_string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string manifest_identity_digest(const RunManifest& m) {
  Sha256Stream stream;
  stream.update(m.tool_version + "\n");
  stream.update(std::to_string(m.seed) + "\n");
  stream.update(normalized_config(m.config_json) + "\n");
  for (const auto& [rel, sha] : m.outputs) {
    stream.update(rel + " " + sha + "\n");
  }
  return stream.hex();
}

void write_run_manifest(const std::string& out_dir, RunManifest m) {
  m.outputs.clear();
  for (const auto& rel : list_output_files(out_dir)) {
    m.outputs.emplace_back(rel, sha256_file(out_dir + "/" + rel));
  }
  m.created_at = now_iso8601();
  m.digest = manifest_identity_digest(m);

  json j;
  j["tool_version"] = m.tool_version;
  j["command"] = m.command;
  j["seed"] = m.seed;
  j["config"] = m.config_json.empty() ? json::object()
                                      : json::parse(m.config_json);
  j["outputs"] = m.outputs;
  j["created_at"] = m.created_at;
  j["digest"] = m.digest;
  write_json_file(out_dir + "/manifest.json", j);
}

RunManifest load_run_manifest(const std::string& out_dir) {
  json j = parse_json_file(out_dir + "/manifest.json", "manifest");
  RunManifest m;
  try {
    j.at("tool_version").get_to(m.tool_version);
    j.at("command").get_to(m.command);
    j.at("seed").get_to(m.seed);
    m.config_json = j.at("config").dump();
    j.at("outputs").get_to(m.outputs);
    j.at("created_at").get_to(m.created_at);
    j.at("digest").get_to(m.digest);
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: missing or bad field: ") +
                      e.what());
  }
  return m;
}

void verify_run_manifest(const std::string& out_dir) {
  RunManifest m = load_run_manifest(out_dir);
  std::vector<std::string> present = list_output_files(out_dir);
  std::vector<std::string> listed;
  listed.reserve(m.outputs.size());
  for (const auto& [rel, sha] : m.outputs) {
    (void)sha;
    listed.push_back(rel);
  }
  if (present != listed) {
    throw CorruptionError("manifest: output file set changed under " +
                          out_dir);
  }
  for (const auto& [rel, sha] : m.outputs) {
    std::string actual = sha256_file(out_dir + "/" + rel);
    if (actual != sha) {
      throw CorruptionError("manifest: digest mismatch for " + rel);
    }
  }
  if (manifest_identity_digest(m) != m.digest) {
    throw CorruptionError("manifest: identity digest mismatch under " +
                          out_dir);
  }
}

// ----- Shared command plumbing -----

namespace {

struct Opts {
  uint64_t seed = 7;
  std::string out, data, model, talks, variant, scope, config, adapters;
  int k = 4;
  int beam = 4;
  int threads = 1;
  int64_t min_bucket = 3;
  std::map<std::string, const CLI::Option*> flag;  // of the parsed subcommand

  bool given(const std::string& name) const {
    auto it = flag.find(name);
    return it != flag.end() && it->second->count() > 0;
  }
};

std::string need(const std::string& value, const char* what) {
  if (value.empty()) {
    throw UsageError(std::string("missing required path: ") + what);
  }
  return value;
}

// Snapshot written into artifacts: locations and thread counts are run
// context, not configuration, so they are normalized out and results stay
// byte-identical across output directories and thread counts.
Config snapshot_config(Config c) {
  c.paths = PathsConfig{};
  c.pipeline.threads = 1;
  return c;
}

// Defaults -> config file -> flags, most specific last. Threads come from
// the --threads flag, else NWF_THREADS, else the config value.
Config effective_config(const Opts& o) {
  Config cfg;
  try {
    if (o.given("config")) cfg = load_config_file(o.config);
    if (o.given("variant")) cfg.pipeline.variant = variant_from_name(o.variant);
    if (o.given("k")) cfg.pipeline.adapter_rank = o.k;
    if (o.given("scope")) cfg.pipeline.scope = scope_from_name(o.scope);
    if (o.given("beam")) cfg.pipeline.decode.beam = o.beam;
    if (o.given("min-bucket")) cfg.min_bucket = o.min_bucket;
    if (o.given("threads")) {
      cfg.pipeline.threads = o.threads;
    } else if (std::getenv("NWF_THREADS") != nullptr) {
      cfg.pipeline.threads = resolve_threads(0);
    }
    if (o.given("out")) cfg.paths.out = o.out;
    if (o.given("data")) cfg.paths.data = o.data;
    if (o.given("model")) cfg.paths.model = o.model;
    if (o.given("talks")) cfg.paths.talks = o.talks;
    cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

std::vector<SeqExample> to_examples(const std::vector<Utterance>& utts,
                                    const Vocab& phon, const Vocab& chars) {
  std::vector<SeqExample> out;
  out.reserve(utts.size());
  for (const auto& u : utts) out.push_back(to_example(u, phon, chars));
  return out;
}

std::vector<const Parameter*> model_params_const(Model& model) {
  std::vector<const Parameter*> out;
  for (Parameter* p : model.base_params()) out.push_back(p);
  for (Parameter* p : model.memory_params()) out.push_back(p);
  return out;
}

std::vector<Parameter*> model_params(Model& model) {
  std::vector<Parameter*> out = model.base_params();
  for (Parameter* p : model.memory_params()) out.push_back(p);
  return out;
}

// Rebuilds the model from the checkpoint's own config snapshot so shape
// always follows the artifact, then loads the weights.
std::unique_ptr<Model> load_model_checkpoint(const std::string& dir,
                                             CheckpointMeta* meta_out) {
  CheckpointMeta meta = read_checkpoint_meta(dir + "/checkpoint");
  NWF_REQUIRE(meta.kind == "model",
              "checkpoint under " + dir + " holds '" + meta.kind +
                  "', expected 'model'");
  Config snap = parse_config(meta.config_json);
  ModelConfig mc = snap.model;
  mc.src_vocab = phoneme_vocab().size();
  mc.tgt_vocab = Vocab::characters().size();
  auto model = std::make_unique<Model>(mc, 0);
  std::vector<Parameter*> params = model_params(*model);
  load_checkpoint(dir + "/checkpoint", params);
  if (meta_out != nullptr) *meta_out = meta;
  return model;
}

std::unique_ptr<AdapterSet> load_adapters_checkpoint(const std::string& dir,
                                                     Model& model) {
  CheckpointMeta meta = read_checkpoint_meta(dir + "/checkpoint");
  NWF_REQUIRE(meta.kind == "adapters",
              "checkpoint under " + dir + " holds '" + meta.kind +
                  "', expected 'adapters'");
  Config snap = parse_config(meta.config_json);
  auto adapters = std::make_unique<AdapterSet>(
      model, snap.pipeline.adapter_rank, snap.pipeline.scope, 0);
  std::vector<Parameter*> params = adapters->trainable_params();
  load_checkpoint(dir + "/checkpoint", params);
  return adapters;
}

std::unordered_map<std::string, std::string> new_word_categories(
    const Lexicon& lex) {
  std::unordered_map<std::string, std::string> out;
  for (const auto& e : lex.entries) {
    if (e.category != WordCategory::kKnown) {
      out[e.word] = category_name(e.category);
    }
  }
  return out;
}

json prf_json(const PrfCounts& c) {
  return json{{"tp", c.tp},         {"fp", c.fp},
              {"fn", c.fn},         {"precision", c.precision()},
              {"recall", c.recall()}, {"f1", c.f1()}};
}

// ----- Commands -----

int cmd_gen_data(const Opts& o, const std::vector<std::string>& args) {
  Config cfg = effective_config(o);
  const std::string out = need(cfg.paths.out, "--out");
  ensure_directory(out);

  Lexicon lex = build_lexicon(cfg.data.lexicon, derive_seed(o.seed, "lexicon"));
  save_lexicon(out + "/lexicon.json", lex);

  auto train = generate_baseline_dataset(
      lex, cfg.data.baseline_utterances, cfg.data.baseline_len_lo,
      cfg.data.baseline_len_hi, cfg.data.noise,
      derive_seed(o.seed, "baseline-train"));
  save_jsonl(out + "/baseline_train.jsonl", train);
  auto dev = generate_baseline_dataset(
      lex, cfg.data.baseline_dev_utterances, cfg.data.baseline_len_lo,
      cfg.data.baseline_len_hi, cfg.data.noise,
      derive_seed(o.seed, "baseline-dev"));
  save_jsonl(out + "/baseline_dev.jsonl", dev);
  auto general = generate_baseline_dataset(
      lex, cfg.data.general_utterances, cfg.data.baseline_len_lo,
      cfg.data.baseline_len_hi, cfg.data.noise,
      derive_seed(o.seed, "general"));
  save_jsonl(out + "/general_test.jsonl", general);

  auto talks = generate_talks(lex, cfg.data.talks, cfg.data.noise,
                              derive_seed(o.seed, "talks"));
  save_talks(out + "/talks", talks);

  // Splits cover the new words with at least two occurrences.
  std::vector<Utterance> talk_utts;
  for (const auto& t : talks) {
    talk_utts.insert(talk_utts.end(), t.utterances.begin(),
                     t.utterances.end());
  }
  std::unordered_map<std::string, int> occurrences;
  for (const auto& u : talk_utts) {
    std::unordered_set<std::string> seen;
    for (const auto& w : u.words) {
      const LexEntry* e = lex.find(w);
      if (e != nullptr && e->category != WordCategory::kKnown &&
          seen.insert(w).second) {
        ++occurrences[w];
      }
    }
  }
  std::vector<std::string> listed;
  for (const auto& w : lex.new_words()) {
    auto it = occurrences.find(w);
    if (it != occurrences.end() && it->second >= 2) listed.push_back(w);
  }
  NewWordsSplits splits = build_newwords_splits(
      talk_utts, listed, cfg.data.dev_fraction, derive_seed(o.seed, "splits"));
  ensure_directory(out + "/splits");
  save_jsonl(out + "/splits/dev_train.jsonl", splits.dev.train);
  save_jsonl(out + "/splits/dev_test.jsonl", splits.dev.test);
  save_jsonl(out + "/splits/eval_train.jsonl", splits.eval.train);
  save_jsonl(out + "/splits/eval_test.jsonl", splits.eval.test);
  auto word_list = [](const std::vector<std::string>& words) {
    std::string text;
    for (const auto& w : words) text += w + "\n";
    return text;
  };
  write_text_file(out + "/splits/dev_words.txt", word_list(splits.dev.words));
  write_text_file(out + "/splits/eval_words.txt",
                  word_list(splits.eval.words));

  save_config_file(out + "/config.json", snapshot_config(cfg));

  RunManifest m;
  m.command = join_args(args);
  m.seed = o.seed;
  m.config_json = dump_config(snapshot_config(cfg));
  write_run_manifest(out, m);
  return kExitOk;
}

int cmd_pretrain(const Opts& o, const std::vector<std::string>& args) {
  Config cfg = effective_config(o);
  const std::string data = need(cfg.paths.data, "--data");
  const std::string out = need(cfg.paths.out, "--out");
  ensure_directory(out);

  const Vocab phon = phoneme_vocab();
  const Vocab chars = Vocab::characters();
  auto train = to_examples(load_jsonl(data + "/baseline_train.jsonl"), phon,
                           chars);
  auto dev = to_examples(load_jsonl(data + "/baseline_dev.jsonl"), phon,
                         chars);

  ModelConfig mc = cfg.model;
  mc.src_vocab = phon.size();
  mc.tgt_vocab = chars.size();
  Model model(mc, derive_seed(o.seed, "init"));
  TrainResult res = pretrain_baseline(model, train, dev, cfg.pretrain,
                                      derive_seed(o.seed, "pretrain"));
  write_step_log(out + "/step_log.csv", res.log);

  CheckpointMeta meta;
  meta.kind = "model";
  meta.seed = o.seed;
  meta.command = join_args(args);
  meta.config_json = dump_config(snapshot_config(cfg));
  save_checkpoint(out + "/checkpoint", meta, model_params_const(model));

  RunManifest m;
  m.command = meta.command;
  m.seed = o.seed;
  m.config_json = meta.config_json;
  write_run_manifest(out, m);
  std::fprintf(stderr, "pretrain: best dev ppl %.4f at step %d (%d steps)\n",
               res.best_dev_ppl, res.best_step, res.steps_run);
  return kExitOk;
}

int cmd_train_memory(const Opts& o, const std::vector<std::string>& args) {
  Config cfg = effective_config(o);
  const std::string data = need(cfg.paths.data, "--data");
  const std::string model_dir = need(cfg.paths.model, "--model");
  const std::string out = need(cfg.paths.out, "--out");
  ensure_directory(out);

  auto model = load_model_checkpoint(model_dir, nullptr);
  auto train_utts = load_jsonl(data + "/baseline_train.jsonl");
  auto dev_utts = load_jsonl(data + "/baseline_dev.jsonl");
  Lexicon lex = load_lexicon(data + "/lexicon.json");

  TrainResult res = train_memory_branch(
      *model, train_utts, dev_utts, lex.known_words(), phoneme_vocab(),
      Vocab::characters(), cfg.memory_policy, cfg.memory_train,
      derive_seed(o.seed, "train-memory"));
  write_step_log(out + "/step_log.csv", res.log);

  CheckpointMeta meta;
  meta.kind = "model";
  meta.seed = o.seed;
  meta.command = join_args(args);
  meta.config_json = dump_config(snapshot_config(cfg));
  save_checkpoint(out + "/checkpoint", meta, model_params_const(*model));

  RunManifest m;
  m.command = meta.command;
  m.seed = o.seed;
  m.config_json = meta.config_json;
  write_run_manifest(out, m);
  std::fprintf(stderr,
               "train-memory: best dev ppl %.4f at step %d (%d steps)\n",
               res.best_dev_ppl, res.best_step, res.steps_run);
  return kExitOk;
}

int cmd_adapt(const Opts& o, const std::vector<std::string>& args) {
  Config cfg = effective_config(o);
  const std::string data = need(cfg.paths.data, "--data");
  const std::string model_dir = need(cfg.paths.model, "--model");
  const std::string out = need(cfg.paths.out, "--out");
  ensure_directory(out);

  const Vocab phon = phoneme_vocab();
  const Vocab chars = Vocab::characters();
  auto model = load_model_checkpoint(model_dir, nullptr);

  auto pool = to_examples(load_jsonl(data + "/baseline_train.jsonl"), phon,
                          chars);
  auto dev_train = load_jsonl(data + "/splits/dev_train.jsonl");
  auto eval_train = load_jsonl(data + "/splits/eval_train.jsonl");
  auto dev_test = load_jsonl(data + "/splits/dev_test.jsonl");
  std::vector<Utterance> adapt_utts = dev_train;
  adapt_utts.insert(adapt_utts.end(), eval_train.begin(), eval_train.end());
  auto adapt_ex = to_examples(adapt_utts, phon, chars);
  auto val_ex = to_examples(dev_test, phon, chars);

  AdapterSet adapters(*model, cfg.pipeline.adapter_rank, cfg.pipeline.scope,
                      derive_seed(o.seed, "factors"));
  MixtureSampler mixture = make_mixture(pool, adapt_ex, cfg.pipeline.upsample,
                                        derive_seed(o.seed, "mixture"));
  TrainResult res = train_adapters(*model, adapters, mixture, val_ex,
                                   cfg.adaptation, derive_seed(o.seed, "train"));
  write_step_log(out + "/step_log.csv", res.log);

  CheckpointMeta meta;
  meta.kind = "adapters";
  meta.seed = o.seed;
  meta.command = join_args(args);
  meta.config_json = dump_config(snapshot_config(cfg));
  std::vector<Parameter*> tp = adapters.trainable_params();
  save_checkpoint(out + "/checkpoint", meta,
                  std::vector<const Parameter*>(tp.begin(), tp.end()));

  RunManifest m;
  m.command = meta.command;
  m.seed = o.seed;
  m.config_json = meta.config_json;
  write_run_manifest(out, m);
  std::fprintf(stderr, "adapt: best validation ppl %.4f at step %d\n",
               res.best_dev_ppl, res.best_step);
  return kExitOk;
}

int cmd_evaluate(const Opts& o, const std::vector<std::string>& args) {
  Config cfg = effective_config(o);
  const std::string data = need(cfg.paths.data, "--data");
  const std::string model_dir = need(cfg.paths.model, "--model");
  const std::string out = need(cfg.paths.out, "--out");
  ensure_directory(out);

  const Vocab phon = phoneme_vocab();
  const Vocab chars = Vocab::characters();
  auto model = load_model_checkpoint(model_dir, nullptr);
  std::unique_ptr<AdapterSet> adapters;
  if (!o.adapters.empty()) {
    adapters = load_adapters_checkpoint(o.adapters, *model);
  }

  auto eval_utts = load_jsonl(data + "/splits/eval_test.jsonl");
  auto general_utts = load_jsonl(data + "/general_test.jsonl");
  Lexicon lex = load_lexicon(data + "/lexicon.json");

  MemoryList no_memory;
  auto eval_hyps = transcribe_dataset(*model, adapters.get(), no_memory,
                                      eval_utts, phon, chars,
                                      cfg.pipeline.decode,
                                      cfg.pipeline.threads);
  auto general_hyps = transcribe_dataset(*model, adapters.get(), no_memory,
                                         general_utts, phon, chars,
                                         cfg.pipeline.decode,
                                         cfg.pipeline.threads);
  save_hypotheses(out + "/eval_hyps.jsonl", eval_hyps);
  save_hypotheses(out + "/general_hyps.jsonl", general_hyps);

  auto texts = [](const std::vector<Utterance>& utts) {
    std::vector<std::string> out_texts;
    for (const auto& u : utts) out_texts.push_back(u.text);
    return out_texts;
  };
  auto hyp_texts = [](const std::vector<Hypothesis>& hyps) {
    std::vector<std::string> out_texts;
    for (const auto& h : hyps) out_texts.push_back(h.text);
    return out_texts;
  };
  WerReport eval_wer =
      corpus_word_error_rate(texts(eval_utts), hyp_texts(eval_hyps));
  WerReport general_wer =
      corpus_word_error_rate(texts(general_utts), hyp_texts(general_hyps));
  NewWordReport nw = new_word_prf(texts(eval_utts), hyp_texts(eval_hyps),
                                  new_word_categories(lex));

  json metrics;
  metrics["eval"] = {{"wer", eval_wer.wer()},
                     {"utterances", eval_utts.size()}};
  metrics["general"] = {{"wer", general_wer.wer()},
                        {"utterances", general_utts.size()}};
  json per_cat = json::object();
  for (const auto& [cat, counts] : nw.per_category) {
    per_cat[cat] = prf_json(counts);
  }
  metrics["new_words"] = {{"overall", prf_json(nw.overall)},
                          {"per_category", per_cat}};
  write_json_file(out + "/metrics.json", metrics);

  RunManifest m;
  m.command = join_args(args);
  m.seed = o.seed;
  m.config_json = dump_config(snapshot_config(cfg));
  write_run_manifest(out, m);
  return kExitOk;
}

int cmd_run_cl(const Opts& o, const std::vector<std::string>& args) {
  Config cfg = effective_config(o);
  const std::string data = need(cfg.paths.data, "--data");
  const std::string model_dir = need(cfg.paths.model, "--model");
  const std::string out = need(cfg.paths.out, "--out");
  const std::string talks_dir =
      cfg.paths.talks.empty() ? data + "/talks" : cfg.paths.talks;
  ensure_directory(out);

  const Vocab phon = phoneme_vocab();
  const Vocab chars = Vocab::characters();
  auto model = load_model_checkpoint(model_dir, nullptr);
  Lexicon lex = load_lexicon(data + "/lexicon.json");
  auto talks = load_talks(talks_dir);
  auto pool = to_examples(load_jsonl(data + "/baseline_train.jsonl"), phon,
                          chars);
  auto general = load_jsonl(data + "/general_test.jsonl");

  auto known = lex.known_words();
  std::unordered_set<std::string> training_vocab(known.begin(), known.end());
  auto newly = lex.new_words();
  std::unordered_set<std::string> new_words(newly.begin(), newly.end());

  save_config_file(out + "/config.json", snapshot_config(cfg));

  const std::string command = join_args(args);
  ModelBackend backend(*model, pool, phon, chars, cfg.pipeline);
  auto on_cycle = [&](const CycleState& state, const CycleRecord& rec) {
    (void)state;
    char name[32];
    std::snprintf(name, sizeof name, "cycle_%03d", rec.cycle);
    const std::string cdir = out + "/" + name;
    ensure_directory(cdir);

    std::string memory;
    for (const auto& w : rec.memory_words) memory += w + "\n";
    write_text_file(cdir + "/memory.txt", memory);
    save_hypotheses(cdir + "/hypotheses.jsonl", rec.talk_hyps);

    json metrics;
    metrics["cycle"] = rec.cycle;
    metrics["talk_id"] = rec.talk_id;
    metrics["slide_words"] = rec.slide_words;
    metrics["memory_words"] = rec.memory_words;
    metrics["detections"] = rec.detections;
    metrics["new_adaptation"] = rec.new_adaptation;
    metrics["new_validation"] = rec.new_validation;
    metrics["adaptation_size"] = rec.adaptation_size;
    metrics["validation_size"] = rec.validation_size;
    metrics["trained"] = rec.trained;
    metrics["skipped_empty_validation"] = rec.skipped_empty_validation;
    metrics["adapt_best_ppl"] = rec.adapt_best_ppl;
    metrics["adapt_steps"] = rec.adapt_steps;
    metrics["general_wer"] = rec.general_wer;
    json events = json::array();
    for (const auto& ev : rec.ft_events) {
      events.push_back({{"word", ev.word},
                        {"prior_samples", ev.prior_samples},
                        {"tp", ev.tp},
                        {"fp", ev.fp},
                        {"fn", ev.fn}});
    }
    metrics["ft_events"] = events;
    write_json_file(cdir + "/metrics.json", metrics);

    if (cfg.pipeline.variant == Variant::kMemCl && rec.trained &&
        backend.current_adapters() != nullptr) {
      CheckpointMeta meta;
      meta.kind = "adapters";
      meta.seed = o.seed;
      meta.command = command;
      meta.config_json = dump_config(snapshot_config(cfg));
      save_checkpoint(cdir + "/adapters", meta,
                      backend.current_adapters()->registry().all());
    }
  };

  ExperimentLog log = run_experiment(backend, talks, training_vocab, general,
                                     new_words, cfg.pipeline, o.seed,
                                     on_cycle);
  save_experiment_log(out + "/experiment_log.jsonl", log);

  RunManifest m;
  m.command = command;
  m.seed = o.seed;
  m.config_json = dump_config(snapshot_config(cfg));
  write_run_manifest(out, m);
  if (!log.cycles.empty()) {
    std::fprintf(stderr, "run-cl: %zu cycles, general wer %.4f -> %.4f\n",
                 log.cycles.size(), log.cycles.front().general_wer,
                 log.cycles.back().general_wer);
  }
  return kExitOk;
}

int cmd_report(const Opts& o, const std::vector<std::string>& args) {
  Config cfg = effective_config(o);
  const std::string run_dir = need(cfg.paths.data, "--data (run directory)");
  const std::string out = need(cfg.paths.out, "--out");
  ensure_directory(out);

  ExperimentLog log =
      load_experiment_log(run_dir + "/experiment_log.jsonl");
  ForwardTransferReport rep = forward_transfer_report(log, cfg.min_bucket);
  auto curve = general_performance_curve(log);

  json jr;
  jr["variant"] = variant_name(log.variant);
  jr["seed"] = log.seed;
  json buckets = json::array();
  for (const auto& b : rep.buckets) {
    buckets.push_back({{"lo", b.lo},
                       {"hi", b.hi},
                       {"events", b.events},
                       {"tp", b.tp},
                       {"fp", b.fp},
                       {"fn", b.fn},
                       {"recall", b.recall()},
                       {"precision", b.precision()}});
  }
  jr["forward_transfer"] = {{"total_events", rep.total_events},
                            {"min_bucket", cfg.min_bucket},
                            {"buckets", buckets}};
  if (!log.cycles.empty()) {
    const double initial = log.cycles.front().general_wer;
    const double final_wer = log.cycles.back().general_wer;
    jr["general"] = {{"initial_wer", initial},
                     {"final_wer", final_wer},
                     {"relative_change",
                      initial > 0 ? (final_wer - initial) / initial : 0.0}};
  }
  write_json_file(out + "/report.json", jr);

  std::string csv = "cycle,unique_slide_words,general_wer\n";
  for (size_t i = 0; i < log.cycles.size(); ++i) {
    csv += std::to_string(log.cycles[i].cycle) + "," +
           std::to_string(curve[i].first) + "," +
           std::to_string(curve[i].second) + "\n";
  }
  write_text_file(out + "/general_curve.csv", csv);

  RunManifest m;
  m.command = join_args(args);
  m.seed = log.seed;
  m.config_json = dump_config(snapshot_config(cfg));
  write_run_manifest(out, m);
  return kExitOk;
}

}  // namespace

// ----- CLI -----

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"phoneme-to-character transducer with continual new-word "
               "learning"};
  app.name("nwf");
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  Opts o;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", o.seed, "master random seed");
    cmd->add_option("--config", o.config, "JSON config file");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--threads", o.threads, "worker thread count");
  };
  auto add_data = [&](CLI::App* cmd) {
    cmd->add_option("--data", o.data, "dataset directory");
  };
  auto add_model = [&](CLI::App* cmd) {
    cmd->add_option("--model", o.model, "model checkpoint directory");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate synthetic corpus");
  add_common(gen);

  CLI::App* pre = app.add_subcommand("pretrain", "train the baseline model");
  add_common(pre);
  add_data(pre);

  CLI::App* mem =
      app.add_subcommand("train-memory", "train the memory-biasing branch");
  add_common(mem);
  add_data(mem);
  add_model(mem);

  CLI::App* ada = app.add_subcommand(
      "adapt", "train low-rank adapters on the new-word splits");
  add_common(ada);
  add_data(ada);
  add_model(ada);
  ada->add_option("--k", o.k, "adapter rank");
  ada->add_option("--scope", o.scope, "adapter scope: decoder | all");

  CLI::App* run = app.add_subcommand(
      "run-cl", "iterated bias/infer/collect/adapt over talks");
  add_common(run);
  add_data(run);
  add_model(run);
  run->add_option("--talks", o.talks, "talks directory override");
  run->add_option("--variant", o.variant, "mem-cl | mem-all | mem-found");
  run->add_option("--k", o.k, "adapter rank");
  run->add_option("--scope", o.scope, "adapter scope: decoder | all");
  run->add_option("--beam", o.beam, "beam width");

  CLI::App* eva = app.add_subcommand(
      "evaluate", "transcribe the eval and general testsets");
  add_common(eva);
  add_data(eva);
  add_model(eva);
  eva->add_option("--adapters", o.adapters, "adapters checkpoint directory");
  eva->add_option("--beam", o.beam, "beam width");

  CLI::App* rep = app.add_subcommand(
      "report", "summarize a run-cl experiment log");
  add_common(rep);
  add_data(rep);
  rep->add_option("--min-bucket", o.min_bucket,
                  "minimum forward-transfer bucket size");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  // given() must consult the options of whichever subcommand parsed.
  for (CLI::App* sub : {gen, pre, mem, ada, run, eva, rep}) {
    if (!sub->parsed()) continue;
    for (const CLI::Option* opt : sub->get_options()) {
      std::string name = opt->get_name();
      if (name.rfind("--", 0) == 0) o.flag[name.substr(2)] = opt;
    }
  }

  try {
    if (gen->parsed()) return cmd_gen_data(o, args);
    if (pre->parsed()) return cmd_pretrain(o, args);
    if (mem->parsed()) return cmd_train_memory(o, args);
    if (ada->parsed()) return cmd_adapt(o, args);
    if (run->parsed()) return cmd_run_cl(o, args);
    if (eva->parsed()) return cmd_evaluate(o, args);
    if (rep->parsed()) return cmd_report(o, args);
    std::fprintf(stderr, "nwf: no subcommand\n");
    return kExitUsage;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "nwf: usage: %s\n", e.what());
    return kExitUsage;
  } catch (const ConfigError& e) {
    // Config problems inside stored artifacts, not CLI misuse.
    std::fprintf(stderr, "nwf: config: %s\n", e.what());
    return kExitRuntime;
  } catch (const ContractError& e) {
    std::fprintf(stderr, "nwf: contract: %s\n", e.what());
    return kExitRuntime;
  } catch (const CorruptionError& e) {
    std::fprintf(stderr, "nwf: corruption: %s\n", e.what());
    return kExitRuntime;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "nwf: format: %s\n", e.what());
    return kExitRuntime;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "nwf: numeric: %s\n", e.what());
    return kExitRuntime;
  } catch (const Error& e) {
    std::fprintf(stderr, "nwf: error: %s\n", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "nwf: internal: %s\n", e.what());
    return kExitRuntime;
  }
}

}  // namespace nwf
