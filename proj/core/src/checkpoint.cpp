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

#include "nwf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <unordered_map>

#include <json.hpp>

#include "nwf/digest.hpp"
#include "nwf/io.hpp"

namespace nwf {

using json = nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

void append_u32(std::string& out, uint32_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
  out.push_back(char((v >> 16) & 0xff));
  out.push_back(char((v >> 24) & 0xff));
}

void append_f32(std::string& out, float v) {
  append_u32(out, std::bit_cast<uint32_t>(v));
}

// Sequential little-endian reader; CorruptionError past the end.
struct Reader {
  const std::string& blob;
  size_t pos = 0;

  uint32_t u32() {
    if (pos + 4 > blob.size()) {
      throw CorruptionError("weights file truncated");
    }
    uint32_t v = uint32_t(uint8_t(blob[pos])) |
                 uint32_t(uint8_t(blob[pos + 1])) << 8 |
                 uint32_t(uint8_t(blob[pos + 2])) << 16 |
                 uint32_t(uint8_t(blob[pos + 3])) << 24;
    pos += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string bytes(size_t n) {
    if (pos + n > blob.size()) {
      throw CorruptionError("weights file truncated");
    }
    std::string s = blob.substr(pos, n);
    pos += n;
    return s;
  }
  bool done() const { return pos == blob.size(); }
};

}  // namespace

std::string encode_weights(const std::vector<const Parameter*>& params) {
  std::string out;
  for (const Parameter* p : params) {
    NWF_REQUIRE(p != nullptr, "encode_weights: null parameter");
    append_u32(out, uint32_t(p->name.size()));
    out += p->name;
    const auto& shape = p->value.shape;
    append_u32(out, uint32_t(shape.size()));
    for (int d : shape) append_u32(out, uint32_t(d));
    for (real_t v : p->value.data) append_f32(out, float(v));
  }
  return out;
}

std::vector<WeightRecord> decode_weights(const std::string& blob) {
  Reader r{blob};
  std::vector<WeightRecord> records;
  while (!r.done()) {
    WeightRecord rec;
    rec.name = r.bytes(r.u32());
    const uint32_t rank = r.u32();
    if (rank > 8) throw CorruptionError("weights file: implausible rank");
    size_t count = 1;
    for (uint32_t i = 0; i < rank; ++i) {
      const uint32_t d = r.u32();
      rec.dims.push_back(int(d));
      count *= d;
    }
    if (count > (1u << 28)) {
      throw CorruptionError("weights file: implausible tensor size");
    }
    rec.values.reserve(count);
    for (size_t i = 0; i < count; ++i) rec.values.push_back(r.f32());
    records.push_back(std::move(rec));
  }
  return records;
}

std::string weights_digest(const std::vector<const Parameter*>& params) {
  return sha256_hex(encode_weights(params));
}

void save_checkpoint(const std::string& dir, const CheckpointMeta& meta,
                     const std::vector<const Parameter*>& params) {
  ensure_directory(dir);
  const std::string weights = encode_weights(params);
  write_text_file(dir + "/weights.bin", weights);

  json config = json::object();
  if (!meta.config_json.empty()) {
    try {
      config = json::parse(meta.config_json);
    } catch (const json::exception& e) {
      throw FormatError(std::string("checkpoint config snapshot: ") +
                        e.what());
    }
  }
  json manifest = {{"format_version", kFormatVersion},
                   {"kind", meta.kind},
                   {"seed", meta.seed},
                   {"command", meta.command},
                   {"config", config},
                   {"weights_digest", sha256_hex(weights)}};
  write_text_file(dir + "/manifest.json", manifest.dump(2) + "\n");
}

CheckpointMeta read_checkpoint_meta(const std::string& dir) {
  json manifest;
  try {
    manifest = json::parse(read_text_file(dir + "/manifest.json"));
  } catch (const json::exception& e) {
    throw FormatError(dir + "/manifest.json: " + e.what());
  }
  try {
    const int version = manifest.at("format_version").get<int>();
    if (version != kFormatVersion) {
      throw FormatError(dir + ": unsupported checkpoint format version " +
                        std::to_string(version));
    }
    CheckpointMeta meta;
    meta.kind = manifest.at("kind").get<std::string>();
    meta.seed = manifest.at("seed").get<uint64_t>();
    meta.command = manifest.at("command").get<std::string>();
    meta.config_json = manifest.at("config").dump();
    return meta;
  } catch (const json::exception& e) {
    throw FormatError(dir + "/manifest.json: bad manifest field: " + e.what());
  }
}

CheckpointMeta load_checkpoint(const std::string& dir,
                               const std::vector<Parameter*>& params) {
  const CheckpointMeta meta = read_checkpoint_meta(dir);

  json manifest = json::parse(read_text_file(dir + "/manifest.json"));
  const std::string want_digest =
      manifest.at("weights_digest").get<std::string>();
  const std::string weights = read_text_file(dir + "/weights.bin");
  if (sha256_hex(weights) != want_digest) {
    throw CorruptionError(dir + ": weights digest mismatch");
  }

  std::unordered_map<std::string, WeightRecord> by_name;
  for (auto& rec : decode_weights(weights)) {
    const std::string name = rec.name;
    NWF_REQUIRE(by_name.emplace(name, std::move(rec)).second,
                "checkpoint: duplicate record " + name);
  }
  for (Parameter* p : params) {
    NWF_REQUIRE(p != nullptr, "load_checkpoint: null parameter");
    auto it = by_name.find(p->name);
    if (it == by_name.end()) {
      throw FormatError(dir + ": checkpoint lacks parameter " + p->name);
    }
    const WeightRecord& rec = it->second;
    if (rec.dims != p->value.shape) {
      throw FormatError(dir + ": shape mismatch for " + p->name);
    }
    for (size_t i = 0; i < rec.values.size(); ++i) {
      p->value.data[i] = real_t(rec.values[i]);
    }
    by_name.erase(it);
  }
  if (!by_name.empty()) {
    throw FormatError(dir + ": checkpoint has unexpected parameter " +
                      by_name.begin()->first);
  }
  return meta;
}

}  // namespace nwf
