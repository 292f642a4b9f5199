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

#ifndef NWF_CHECKPOINT_HPP_
#define NWF_CHECKPOINT_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "nwf/param.hpp"

namespace nwf {

// One parameter record decoded from a weights file.
struct WeightRecord {
  std::string name;
  std::vector<int> dims;
  std::vector<float> values;
};

// Weight serialization: per parameter, [name length: u32 LE][name bytes]
// [rank: u32][dims: u32 each][values: f32 LE, row-major], in order.
std::string encode_weights(const std::vector<const Parameter*>& params);

// Inverse of encode_weights. Truncated or overlong input raises
// CorruptionError.
std::vector<WeightRecord> decode_weights(const std::string& blob);

// SHA-256 of the weight serialization; the checkpoint identity used by
// determinism and freezing checks.
std::string weights_digest(const std::vector<const Parameter*>& params);

struct CheckpointMeta {
  std::string kind;         // "model" or "adapters"
  uint64_t seed = 0;
  std::string command;      // creating command line
  std::string config_json;  // opaque config snapshot, JSON text
};

// Writes dir/weights.bin and dir/manifest.json (format version, meta, and
// the weights digest).
void save_checkpoint(const std::string& dir, const CheckpointMeta& meta,
                     const std::vector<const Parameter*>& params);

// Verifies the manifest's format version and weights digest, then loads
// values into the given parameters matched by name. Every parameter must be
// present with matching dims and no extra records may exist.
CheckpointMeta load_checkpoint(const std::string& dir,
                               const std::vector<Parameter*>& params);

// Manifest alone, without touching weights.
CheckpointMeta read_checkpoint_meta(const std::string& dir);

}  // namespace nwf

#endif  // NWF_CHECKPOINT_HPP_
