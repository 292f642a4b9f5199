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

#include "nwf/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <initializer_list>
#include <string>
#include <vector>

#include "nwf/common.hpp"
#include "nwf/io.hpp"

namespace nwf {

using nlohmann::json;

namespace {

void expect_object(const json& j, const std::string& where) {
  if (!j.is_object()) {
    throw ConfigError("config: " + where + " must be a JSON object");
  }
}

void expect_keys(const json& j, const std::string& where,
                 std::initializer_list<const char*> keys) {
  expect_object(j, where);
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find_if(keys.begin(), keys.end(), [&](const char* k) {
          return key == k;
        }) == keys.end()) {
      throw ConfigError("config: unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void get_to(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError("config: bad value for '" + where + "." + key + "': " +
                      e.what());
  }
}

// ----- per-section parse -----

void parse_model(const json& j, ModelConfig& m) {
  expect_keys(j, "model",
              {"d_model", "heads", "ff", "enc_layers", "dec_layers",
               "mem_enc_layers", "mem_dec_layers", "max_src_len",
               "max_tgt_len", "max_entry_len", "ln_eps"});
  get_to(j, "d_model", m.d_model, "model");
  get_to(j, "heads", m.heads, "model");
  get_to(j, "ff", m.ff, "model");
  get_to(j, "enc_layers", m.enc_layers, "model");
  get_to(j, "dec_layers", m.dec_layers, "model");
  get_to(j, "mem_enc_layers", m.mem_enc_layers, "model");
  get_to(j, "mem_dec_layers", m.mem_dec_layers, "model");
  get_to(j, "max_src_len", m.max_src_len, "model");
  get_to(j, "max_tgt_len", m.max_tgt_len, "model");
  get_to(j, "max_entry_len", m.max_entry_len, "model");
  get_to(j, "ln_eps", m.ln_eps, "model");
}

json dump_model(const ModelConfig& m) {
  return json{{"d_model", m.d_model},
              {"heads", m.heads},
              {"ff", m.ff},
              {"enc_layers", m.enc_layers},
              {"dec_layers", m.dec_layers},
              {"mem_enc_layers", m.mem_enc_layers},
              {"mem_dec_layers", m.mem_dec_layers},
              {"max_src_len", m.max_src_len},
              {"max_tgt_len", m.max_tgt_len},
              {"max_entry_len", m.max_entry_len},
              {"ln_eps", m.ln_eps}};
}

void parse_train(const json& j, TrainConfig& t, const std::string& where) {
  expect_keys(j, where,
              {"lr", "batch_size", "eval_interval", "patience", "max_steps"});
  get_to(j, "lr", t.lr, where);
  get_to(j, "batch_size", t.batch_size, where);
  get_to(j, "eval_interval", t.eval_interval, where);
  get_to(j, "patience", t.patience, where);
  get_to(j, "max_steps", t.max_steps, where);
}

json dump_train(const TrainConfig& t) {
  return json{{"lr", t.lr},
              {"batch_size", t.batch_size},
              {"eval_interval", t.eval_interval},
              {"patience", t.patience},
              {"max_steps", t.max_steps}};
}

void parse_data(const json& j, DataConfig& d) {
  expect_keys(j, "data",
              {"lexicon", "noise", "talks", "baseline_utterances",
               "baseline_dev_utterances", "baseline_len_lo",
               "baseline_len_hi", "general_utterances", "dev_fraction"});
  if (j.contains("lexicon")) {
    const json& l = j.at("lexicon");
    expect_keys(l, "data.lexicon",
                {"n_known", "n_acronym", "n_entity", "n_special"});
    get_to(l, "n_known", d.lexicon.n_known, "data.lexicon");
    get_to(l, "n_acronym", d.lexicon.n_acronym, "data.lexicon");
    get_to(l, "n_entity", d.lexicon.n_entity, "data.lexicon");
    get_to(l, "n_special", d.lexicon.n_special, "data.lexicon");
  }
  if (j.contains("noise")) {
    const json& n = j.at("noise");
    expect_keys(n, "data.noise", {"p_sub", "p_del", "p_ins"});
    get_to(n, "p_sub", d.noise.p_sub, "data.noise");
    get_to(n, "p_del", d.noise.p_del, "data.noise");
    get_to(n, "p_ins", d.noise.p_ins, "data.noise");
  }
  if (j.contains("talks")) {
    const json& t = j.at("talks");
    expect_keys(t, "data.talks",
                {"n_talks", "utts_per_talk", "len_lo", "len_hi",
                 "occurrence_profile", "distractor_rate",
                 "same_talk_repeat"});
    get_to(t, "n_talks", d.talks.n_talks, "data.talks");
    get_to(t, "utts_per_talk", d.talks.utts_per_talk, "data.talks");
    get_to(t, "len_lo", d.talks.len_lo, "data.talks");
    get_to(t, "len_hi", d.talks.len_hi, "data.talks");
    get_to(t, "distractor_rate", d.talks.distractor_rate, "data.talks");
    get_to(t, "same_talk_repeat", d.talks.same_talk_repeat, "data.talks");
    if (t.contains("occurrence_profile")) {
      d.talks.profile.weights.clear();
      get_to(t, "occurrence_profile", d.talks.profile.weights, "data.talks");
    }
  }
  get_to(j, "baseline_utterances", d.baseline_utterances, "data");
  get_to(j, "baseline_dev_utterances", d.baseline_dev_utterances, "data");
  get_to(j, "baseline_len_lo", d.baseline_len_lo, "data");
  get_to(j, "baseline_len_hi", d.baseline_len_hi, "data");
  get_to(j, "general_utterances", d.general_utterances, "data");
  get_to(j, "dev_fraction", d.dev_fraction, "data");
}

json dump_data(const DataConfig& d) {
  return json{
      {"lexicon",
       {{"n_known", d.lexicon.n_known},
        {"n_acronym", d.lexicon.n_acronym},
        {"n_entity", d.lexicon.n_entity},
        {"n_special", d.lexicon.n_special}}},
      {"noise",
       {{"p_sub", d.noise.p_sub},
        {"p_del", d.noise.p_del},
        {"p_ins", d.noise.p_ins}}},
      {"talks",
       {{"n_talks", d.talks.n_talks},
        {"utts_per_talk", d.talks.utts_per_talk},
        {"len_lo", d.talks.len_lo},
        {"len_hi", d.talks.len_hi},
        {"occurrence_profile", d.talks.profile.weights},
        {"distractor_rate", d.talks.distractor_rate},
        {"same_talk_repeat", d.talks.same_talk_repeat}}},
      {"baseline_utterances", d.baseline_utterances},
      {"baseline_dev_utterances", d.baseline_dev_utterances},
      {"baseline_len_lo", d.baseline_len_lo},
      {"baseline_len_hi", d.baseline_len_hi},
      {"general_utterances", d.general_utterances},
      {"dev_fraction", d.dev_fraction}};
}

void parse_policy(const json& j, MemoryPolicy& p) {
  expect_keys(j, "memory_policy",
              {"memory_prob", "min_own", "max_own", "max_distractors"});
  get_to(j, "memory_prob", p.memory_prob, "memory_policy");
  get_to(j, "min_own", p.min_own, "memory_policy");
  get_to(j, "max_own", p.max_own, "memory_policy");
  get_to(j, "max_distractors", p.max_distractors, "memory_policy");
}

json dump_policy(const MemoryPolicy& p) {
  return json{{"memory_prob", p.memory_prob},
              {"min_own", p.min_own},
              {"max_own", p.max_own},
              {"max_distractors", p.max_distractors}};
}

void parse_pipeline(const json& j, PipelineConfig& p) {
  expect_keys(j, "pipeline",
              {"variant", "adapter_rank", "scope", "upsample", "adapt",
               "restrict_targets", "decode", "threads"});
  if (j.contains("variant")) {
    std::string name;
    get_to(j, "variant", name, "pipeline");
    p.variant = variant_from_name(name);
  }
  get_to(j, "adapter_rank", p.adapter_rank, "pipeline");
  if (j.contains("scope")) {
    std::string name;
    get_to(j, "scope", name, "pipeline");
    p.scope = scope_from_name(name);
  }
  get_to(j, "upsample", p.upsample, "pipeline");
  if (j.contains("adapt")) parse_train(j.at("adapt"), p.adapt, "pipeline.adapt");
  get_to(j, "restrict_targets", p.restrict_targets, "pipeline");
  if (j.contains("decode")) {
    const json& d = j.at("decode");
    expect_keys(d, "pipeline.decode", {"beam", "max_len", "length_normalize"});
    get_to(d, "beam", p.decode.beam, "pipeline.decode");
    get_to(d, "max_len", p.decode.max_len, "pipeline.decode");
    get_to(d, "length_normalize", p.decode.length_normalize,
           "pipeline.decode");
  }
  get_to(j, "threads", p.threads, "pipeline");
}

json dump_pipeline(const PipelineConfig& p) {
  return json{{"variant", variant_name(p.variant)},
              {"adapter_rank", p.adapter_rank},
              {"scope", scope_name(p.scope)},
              {"upsample", p.upsample},
              {"adapt", dump_train(p.adapt)},
              {"restrict_targets", p.restrict_targets},
              {"decode",
               {{"beam", p.decode.beam},
                {"max_len", p.decode.max_len},
                {"length_normalize", p.decode.length_normalize}}},
              {"threads", p.threads}};
}

void parse_paths(const json& j, PathsConfig& p) {
  expect_keys(j, "paths", {"data", "model", "talks", "out"});
  get_to(j, "data", p.data, "paths");
  get_to(j, "model", p.model, "paths");
  get_to(j, "talks", p.talks, "paths");
  get_to(j, "out", p.out, "paths");
}

json dump_paths(const PathsConfig& p) {
  return json{{"data", p.data},
              {"model", p.model},
              {"talks", p.talks},
              {"out", p.out}};
}

}  // namespace

Config::Config() {
  pretrain.lr = 1e-3;
  pretrain.batch_size = 32;
  pretrain.eval_interval = 100;
  pretrain.patience = 5;
  pretrain.max_steps = 3000;

  memory_train.lr = 1e-3;
  memory_train.batch_size = 32;
  memory_train.eval_interval = 100;
  memory_train.patience = 5;
  memory_train.max_steps = 1500;

  adaptation.lr = 1e-4;
  adaptation.batch_size = 16;
  adaptation.eval_interval = 50;
  adaptation.patience = 5;
  adaptation.max_steps = 1500;
}

void Config::validate() const {
  NWF_REQUIRE(model.d_model > 0 && model.heads > 0 && model.ff > 0,
              "config: model dimensions must be positive");
  NWF_REQUIRE(data.lexicon.n_known > 0, "config: n_known must be positive");
  NWF_REQUIRE(
      data.lexicon.n_acronym >= 0 && data.lexicon.n_entity >= 0 &&
          data.lexicon.n_special >= 0,
      "config: category sizes must be non-negative");
  NWF_REQUIRE(data.baseline_utterances > 0 && data.baseline_dev_utterances > 0,
              "config: baseline sizes must be positive");
  NWF_REQUIRE(
      data.baseline_len_lo >= 1 &&
          data.baseline_len_hi >= data.baseline_len_lo,
      "config: baseline length range invalid");
  NWF_REQUIRE(data.general_utterances > 0,
              "config: general_utterances must be positive");
  NWF_REQUIRE(data.dev_fraction > 0.0 && data.dev_fraction < 1.0,
              "config: dev_fraction must be in (0, 1)");
  NWF_REQUIRE(
      data.noise.p_sub >= 0.0 && data.noise.p_sub < 1.0 &&
          data.noise.p_del >= 0.0 && data.noise.p_del < 1.0 &&
          data.noise.p_ins >= 0.0 && data.noise.p_ins < 1.0,
      "config: noise probabilities must be in [0, 1)");
  NWF_REQUIRE(data.talks.n_talks > 0 && data.talks.utts_per_talk > 0,
              "config: talk sizes must be positive");
  NWF_REQUIRE(!data.talks.profile.weights.empty(),
              "config: occurrence_profile must be non-empty");
  for (const auto& [count, weight] : data.talks.profile.weights) {
    NWF_REQUIRE(count >= 1 && weight >= 0.0,
                "config: occurrence_profile entries invalid");
  }
  NWF_REQUIRE(
      data.talks.distractor_rate >= 0.0 && data.talks.distractor_rate <= 1.0,
      "config: distractor_rate must be in [0, 1]");
  NWF_REQUIRE(
      data.talks.same_talk_repeat >= 0.0 && data.talks.same_talk_repeat <= 1.0,
      "config: same_talk_repeat must be in [0, 1]");
  pretrain.validate();
  memory_train.validate();
  memory_policy.validate();
  adaptation.validate();
  pipeline.validate();
  NWF_REQUIRE(min_bucket >= 1, "config: min_bucket must be >= 1");
}

Config parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  expect_keys(j, "config",
              {"model", "data", "pretrain", "memory_train", "memory_policy",
               "adaptation", "pipeline", "min_bucket", "paths"});
  Config c;
  if (j.contains("model")) parse_model(j.at("model"), c.model);
  if (j.contains("data")) parse_data(j.at("data"), c.data);
  if (j.contains("pretrain")) parse_train(j.at("pretrain"), c.pretrain, "pretrain");
  if (j.contains("memory_train")) {
    parse_train(j.at("memory_train"), c.memory_train, "memory_train");
  }
  if (j.contains("memory_policy")) {
    parse_policy(j.at("memory_policy"), c.memory_policy);
  }
  if (j.contains("adaptation")) {
    parse_train(j.at("adaptation"), c.adaptation, "adaptation");
  }
  if (j.contains("pipeline")) parse_pipeline(j.at("pipeline"), c.pipeline);
  get_to(j, "min_bucket", c.min_bucket, "config");
  if (j.contains("paths")) parse_paths(j.at("paths"), c.paths);
  try {
    c.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

std::string dump_config(const Config& c) {
  json j{{"model", dump_model(c.model)},
         {"data", dump_data(c.data)},
         {"pretrain", dump_train(c.pretrain)},
         {"memory_train", dump_train(c.memory_train)},
         {"memory_policy", dump_policy(c.memory_policy)},
         {"adaptation", dump_train(c.adaptation)},
         {"pipeline", dump_pipeline(c.pipeline)},
         {"min_bucket", c.min_bucket},
         {"paths", dump_paths(c.paths)}};
  return j.dump(2) + "\n";
}

Config load_config_file(const std::string& path) {
  return parse_config(read_text_file(path));
}

void save_config_file(const std::string& path, const Config& c) {
  write_text_file(path, dump_config(c));
}

}  // namespace nwf
