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

#ifndef NWF_CONFIG_HPP_
#define NWF_CONFIG_HPP_

#include <cstdint>
#include <string>

#include "nwf/corpus.hpp"
#include "nwf/model.hpp"
#include "nwf/pipeline.hpp"
#include "nwf/training.hpp"

namespace nwf {

// Synthetic data generation sizes. Vocabulary sizes live in LexiconConfig;
// talk structure in TalkGenConfig.
struct DataConfig {
  LexiconConfig lexicon;
  NoiseConfig noise;
  TalkGenConfig talks;
  int baseline_utterances = 4000;
  int baseline_dev_utterances = 300;
  int baseline_len_lo = 3;
  int baseline_len_hi = 10;
  int general_utterances = 80;
  double dev_fraction = 0.15;
};

// Default input/output locations; command-line flags override these.
struct PathsConfig {
  std::string data;
  std::string model;
  std::string talks;
  std::string out;
};

// Every tunable in one snapshot. JSON round-trips exactly; unknown keys are
// rejected on load; absent keys keep their defaults. Precedence at the CLI:
// flag > NWF_THREADS (threads only) > config file > built-in default.
struct Config {
  ModelConfig model;        // vocab sizes are derived at run time
  DataConfig data;
  TrainConfig pretrain;
  TrainConfig memory_train;
  MemoryPolicy memory_policy;
  TrainConfig adaptation;   // supervised split adaptation (adapt command)
  PipelineConfig pipeline;  // continual loop, k/scope/variant/decode/threads
  int64_t min_bucket = 3;
  PathsConfig paths;

  Config();
  void validate() const;
};

// Parse from JSON text; throws ConfigError on malformed JSON, unknown keys,
// or invalid values.
Config parse_config(const std::string& json_text);

// Canonical full dump (sorted keys, two-space indent, trailing newline);
// parse_config(dump_config(c)) reproduces c exactly.
std::string dump_config(const Config& c);

Config load_config_file(const std::string& path);
void save_config_file(const std::string& path, const Config& c);

}  // namespace nwf

#endif  // NWF_CONFIG_HPP_
