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
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "nwf/checkpoint.hpp"
#include "nwf/common.hpp"
#include "nwf/config.hpp"
#include "nwf/harness.hpp"
#include "nwf/io.hpp"

using namespace nwf;

namespace {

const std::string kRoot = "/tmp/nwf_harness_test";

int run(const std::vector<std::string>& args) { return run_cli(args); }

// Tiny but complete configuration: the whole command chain finishes in
// about a second at these sizes.
const char kTinyConfig[] = R"({
  "model": {"d_model": 16, "heads": 2, "ff": 32, "enc_layers": 1,
            "dec_layers": 1, "mem_enc_layers": 1, "mem_dec_layers": 1,
            "max_src_len": 160, "max_tgt_len": 100, "max_entry_len": 16},
  "data": {
    "lexicon": {"n_known": 60, "n_acronym": 5, "n_entity": 5, "n_special": 6},
    "baseline_utterances": 60,
    "baseline_dev_utterances": 12,
    "general_utterances": 10,
    "talks": {"n_talks": 4, "utts_per_talk": 12, "len_lo": 3, "len_hi": 6}
  },
  "pretrain": {"lr": 3e-3, "batch_size": 8, "eval_interval": 50,
               "patience": 100, "max_steps": 120},
  "memory_train": {"lr": 1e-3, "batch_size": 8, "eval_interval": 25,
                   "patience": 100, "max_steps": 40},
  "adaptation": {"lr": 1e-3, "batch_size": 8, "eval_interval": 20,
                 "patience": 3, "max_steps": 40},
  "pipeline": {
    "adapt": {"lr": 1e-3, "batch_size": 4, "eval_interval": 10,
              "patience": 2, "max_steps": 20},
    "decode": {"beam": 2}
  }
})";

std::string tiny_config_path() {
  const std::string path = kRoot + "/tiny.json";
  if (!file_exists(path)) {
    ensure_directory(kRoot);
    write_text_file(path, kTinyConfig);
  }
  return path;
}

std::string run_digest(const std::string& dir) {
  return load_run_manifest(dir).digest;
}

}  // namespace

TEST_CASE("config round trips and validates") {
  Config c;
  c.validate();
  const std::string text = dump_config(c);
  Config back = parse_config(text);
  CHECK(dump_config(back) == text);

  Config tweaked = parse_config(read_text_file(tiny_config_path()));
  CHECK(tweaked.model.d_model == 16);
  CHECK(tweaked.data.lexicon.n_known == 60);
  CHECK(tweaked.pipeline.adapt.max_steps == 20);
  CHECK(tweaked.pipeline.decode.beam == 2);
  CHECK(dump_config(parse_config(dump_config(tweaked))) ==
        dump_config(tweaked));
  // absent sections keep defaults
  CHECK(tweaked.pipeline.variant == Variant::kMemCl);
  CHECK(tweaked.min_bucket == 3);
  CHECK(tweaked.data.talks.profile.weights ==
        OccurrenceProfile::defaults().weights);
}

TEST_CASE("config rejects unknown keys and bad values") {
  CHECK_THROWS_AS(parse_config("{\"modle\": {}}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"model\": {\"dmodel\": 8}}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"pipeline\": {\"adapt\": {\"lr\": 0}}}"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config("{\"pipeline\": {\"variant\": \"memcl\"}}"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config("{\"data\": {\"dev_fraction\": 1.5}}"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config("not json"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"model\": {\"d_model\": \"big\"}}"),
                  ConfigError);
}

TEST_CASE("usage errors exit 2, runtime errors exit 1") {
  std::filesystem::remove_all(kRoot);
  const std::string cfg = tiny_config_path();

  CHECK(run({"bogus-command"}) == kExitUsage);
  CHECK(run({"gen-data", "--no-such-flag"}) == kExitUsage);
  CHECK(run({"gen-data", "--config", cfg}) == kExitUsage);  // missing --out
  CHECK(run({"--help"}) == kExitOk);

  const std::string bad = kRoot + "/bad.json";
  write_text_file(bad, "{\"modle\": {}}");
  CHECK(run({"gen-data", "--config", bad, "--out", kRoot + "/x"}) ==
        kExitUsage);

  // Valid flags, but the dataset does not exist.
  CHECK(run({"pretrain", "--data", kRoot + "/missing", "--config", cfg,
             "--out", kRoot + "/x"}) == kExitRuntime);

  // Talk generation without utterance capacity for the new words.
  const std::string cramped = kRoot + "/cramped.json";
  write_text_file(cramped, R"({
    "data": {
      "lexicon": {"n_known": 40, "n_acronym": 6, "n_entity": 6,
                  "n_special": 8},
      "talks": {"n_talks": 2, "utts_per_talk": 5}
    }
  })");
  CHECK(run({"gen-data", "--seed", "11", "--config", cramped, "--out",
             kRoot + "/x"}) == kExitRuntime);
}

TEST_CASE("gen-data is deterministic and its manifest verifies") {
  const std::string cfg = tiny_config_path();
  REQUIRE(run({"gen-data", "--seed", "11", "--config", cfg, "--out",
               kRoot + "/d1"}) == kExitOk);
  REQUIRE(run({"gen-data", "--seed", "11", "--config", cfg, "--out",
               kRoot + "/d2"}) == kExitOk);
  CHECK(run_digest(kRoot + "/d1") == run_digest(kRoot + "/d2"));
  verify_run_manifest(kRoot + "/d1");

  REQUIRE(run({"gen-data", "--seed", "12", "--config", cfg, "--out",
               kRoot + "/d3"}) == kExitOk);
  CHECK(run_digest(kRoot + "/d1") != run_digest(kRoot + "/d3"));

  RunManifest m = load_run_manifest(kRoot + "/d1");
  CHECK(m.tool_version == kToolVersion);
  CHECK(m.seed == 11);
  CHECK(m.command.find("gen-data") != std::string::npos);
  CHECK(!m.outputs.empty());

  // Tampering with any output breaks verification.
  const std::string victim = kRoot + "/d2/splits/dev_words.txt";
  std::string original = read_text_file(victim);
  write_text_file(victim, original + "tamper\n");
  CHECK_THROWS_AS(verify_run_manifest(kRoot + "/d2"), CorruptionError);
  write_text_file(victim, original);
  verify_run_manifest(kRoot + "/d2");
}

TEST_CASE("pretrain and train-memory produce loadable model checkpoints") {
  const std::string cfg = tiny_config_path();
  const std::string data = kRoot + "/d1";
  REQUIRE(run({"pretrain", "--data", data, "--seed", "11", "--config", cfg,
               "--out", kRoot + "/m0"}) == kExitOk);
  verify_run_manifest(kRoot + "/m0");
  CHECK(file_exists(kRoot + "/m0/step_log.csv"));
  CHECK(file_exists(kRoot + "/m0/checkpoint/weights.bin"));

  // Nested checkpoint manifests are provenance, not digested outputs.
  auto files = list_output_files(kRoot + "/m0");
  CHECK(std::find(files.begin(), files.end(), "checkpoint/weights.bin") !=
        files.end());
  CHECK(std::find(files.begin(), files.end(), "checkpoint/manifest.json") ==
        files.end());

  CheckpointMeta meta = read_checkpoint_meta(kRoot + "/m0/checkpoint");
  CHECK(meta.kind == "model");
  CHECK(meta.seed == 11);
  Config snap = parse_config(meta.config_json);
  CHECK(snap.model.d_model == 16);
  CHECK(snap.paths.out.empty());  // snapshots carry no run context

  REQUIRE(run({"train-memory", "--data", data, "--model", kRoot + "/m0",
               "--seed", "11", "--config", cfg, "--out", kRoot + "/m1"}) ==
          kExitOk);
  verify_run_manifest(kRoot + "/m1");

  // Re-running pretrain reproduces the identical artifact digest.
  REQUIRE(run({"pretrain", "--data", data, "--seed", "11", "--config", cfg,
               "--out", kRoot + "/m0b"}) == kExitOk);
  CHECK(run_digest(kRoot + "/m0") == run_digest(kRoot + "/m0b"));
}

TEST_CASE("adapt honors flag overrides and evaluate replays its output") {
  const std::string cfg = tiny_config_path();
  const std::string data = kRoot + "/d1";
  const std::string model = kRoot + "/m1";

  REQUIRE(run({"adapt", "--data", data, "--model", model, "--seed", "11",
               "--config", cfg, "--k", "3", "--scope", "all", "--out",
               kRoot + "/a0"}) == kExitOk);
  verify_run_manifest(kRoot + "/a0");
  CheckpointMeta meta = read_checkpoint_meta(kRoot + "/a0/checkpoint");
  CHECK(meta.kind == "adapters");
  Config snap = parse_config(meta.config_json);
  CHECK(snap.pipeline.adapter_rank == 3);  // flag beat the config default
  CHECK(snap.pipeline.scope == AdapterScope::kEncoderAndDecoder);

  REQUIRE(run({"evaluate", "--data", data, "--model", model, "--adapters",
               kRoot + "/a0", "--config", cfg, "--out", kRoot + "/e1"}) ==
          kExitOk);
  REQUIRE(run({"evaluate", "--data", data, "--model", model, "--adapters",
               kRoot + "/a0", "--config", cfg, "--out", kRoot + "/e2"}) ==
          kExitOk);
  CHECK(read_text_file(kRoot + "/e1/eval_hyps.jsonl") ==
        read_text_file(kRoot + "/e2/eval_hyps.jsonl"));
  CHECK(run_digest(kRoot + "/e1") == run_digest(kRoot + "/e2"));
  CHECK(file_exists(kRoot + "/e1/metrics.json"));

  // Plain evaluation (no adapters) also works and differs in digest only if
  // the adapters changed any hypothesis; both must verify.
  REQUIRE(run({"evaluate", "--data", data, "--model", model, "--config", cfg,
               "--out", kRoot + "/e0"}) == kExitOk);
  verify_run_manifest(kRoot + "/e0");

  // A model checkpoint is not an adapters checkpoint.
  CHECK(run({"evaluate", "--data", data, "--model", model, "--adapters",
             model, "--config", cfg, "--out", kRoot + "/e3"}) ==
        kExitRuntime);
}

TEST_CASE("run-cl writes the run layout and honors the variant contract") {
  const std::string cfg = tiny_config_path();
  const std::string data = kRoot + "/d1";
  const std::string model = kRoot + "/m1";

  REQUIRE(run({"run-cl", "--data", data, "--model", model, "--seed", "11",
               "--config", cfg, "--variant", "mem-cl", "--out",
               kRoot + "/r_cl"}) == kExitOk);
  verify_run_manifest(kRoot + "/r_cl");
  CHECK(file_exists(kRoot + "/r_cl/experiment_log.jsonl"));
  CHECK(file_exists(kRoot + "/r_cl/config.json"));
  for (int c = 1; c <= 4; ++c) {
    const std::string cdir = kRoot + "/r_cl/cycle_00" + std::to_string(c);
    CHECK(file_exists(cdir + "/memory.txt"));
    CHECK(file_exists(cdir + "/hypotheses.jsonl"));
    CHECK(file_exists(cdir + "/metrics.json"));
  }

  REQUIRE(run({"run-cl", "--data", data, "--model", model, "--seed", "11",
               "--config", cfg, "--variant", "mem-all", "--out",
               kRoot + "/r_all"}) == kExitOk);
  // mem-all never trains adapters, so no cycle may hold an adapter
  // checkpoint.
  for (const auto& rel : list_output_files(kRoot + "/r_all")) {
    CHECK(rel.find("adapters") == std::string::npos);
  }

  // Same seed and config replay to the same digest, and transcription is
  // thread-count invariant.
  REQUIRE(run({"run-cl", "--data", data, "--model", model, "--seed", "11",
               "--config", cfg, "--variant", "mem-cl", "--threads", "4",
               "--out", kRoot + "/r_cl4"}) == kExitOk);
  CHECK(run_digest(kRoot + "/r_cl") == run_digest(kRoot + "/r_cl4"));

  // NWF_THREADS picks the count when no flag is given, with equal results.
  setenv("NWF_THREADS", "3", 1);
  REQUIRE(run({"run-cl", "--data", data, "--model", model, "--seed", "11",
               "--config", cfg, "--variant", "mem-cl", "--out",
               kRoot + "/r_env"}) == kExitOk);
  unsetenv("NWF_THREADS");
  CHECK(run_digest(kRoot + "/r_cl") == run_digest(kRoot + "/r_env"));

  REQUIRE(run({"run-cl", "--data", data, "--model", model, "--seed", "12",
               "--config", cfg, "--variant", "mem-cl", "--out",
               kRoot + "/r_cl12"}) == kExitOk);
  CHECK(run_digest(kRoot + "/r_cl") != run_digest(kRoot + "/r_cl12"));
}

TEST_CASE("report summarizes a run directory") {
  const std::string cfg = tiny_config_path();
  REQUIRE(run({"report", "--data", kRoot + "/r_cl", "--min-bucket", "1",
               "--out", kRoot + "/rep"}) == kExitOk);
  verify_run_manifest(kRoot + "/rep");
  CHECK(file_exists(kRoot + "/rep/report.json"));
  const std::string report = read_text_file(kRoot + "/rep/report.json");
  CHECK(report.find("\"variant\": \"mem-cl\"") != std::string::npos);
  CHECK(report.find("forward_transfer") != std::string::npos);
  const std::string curve = read_text_file(kRoot + "/rep/general_curve.csv");
  CHECK(curve.rfind("cycle,unique_slide_words,general_wer\n", 0) == 0);
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 5);  // header + 4

  CHECK(run({"report", "--data", kRoot + "/does-not-exist", "--out",
             kRoot + "/rep2"}) == kExitRuntime);
}
