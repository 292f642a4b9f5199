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

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "nwf/checkpoint.hpp"
#include "nwf/common.hpp"
#include "nwf/io.hpp"
#include "nwf/param.hpp"
#include "nwf/rng.hpp"

using namespace nwf;

namespace {

std::filesystem::path fresh_dir(const std::string& leaf) {
  auto dir = std::filesystem::temp_directory_path() / ("nwf_ckpt_" + leaf);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

struct Fixture {
  ParamRegistry reg;
  Parameter* a;
  Parameter* b;
  Parameter* c;

  Fixture() {
    Rng rng(11);
    a = &reg.create_gaussian("enc.w", {3, 4}, rng, 0.5);
    b = &reg.create_gaussian("dec.bias", {5}, rng, 0.5);
    c = &reg.create_gaussian("head", {2, 2}, rng, 0.5);
  }
  std::vector<const Parameter*> const_params() const { return {a, b, c}; }
  std::vector<Parameter*> params() { return {a, b, c}; }
};

uint32_t read_u32(const std::string& s, size_t off) {
  uint32_t v = 0;
  std::memcpy(&v, s.data() + off, 4);
  return v;
}

}  // namespace

TEST_CASE("weights: byte-level record layout") {
  ParamRegistry reg;
  Parameter& p = reg.create("m", {1, 2});
  p.value.data[0] = real_t(1);
  p.value.data[1] = real_t(-2);
  const std::string blob = encode_weights({&p});
  // [name_len u32][name][rank u32][dims u32 each][values f32 each]
  REQUIRE(blob.size() == 4 + 1 + 4 + 8 + 8);
  CHECK(read_u32(blob, 0) == 1);
  CHECK(blob[4] == 'm');
  CHECK(read_u32(blob, 5) == 2);
  CHECK(read_u32(blob, 9) == 1);
  CHECK(read_u32(blob, 13) == 2);
  float v0 = 0, v1 = 0;
  std::memcpy(&v0, blob.data() + 17, 4);
  std::memcpy(&v1, blob.data() + 21, 4);
  CHECK(v0 == 1.0f);
  CHECK(v1 == -2.0f);
}

TEST_CASE("weights: encode/decode round trip") {
  Fixture f;
  const std::string blob = encode_weights(f.const_params());
  const auto records = decode_weights(blob);
  REQUIRE(records.size() == 3);
  CHECK(records[0].name == "enc.w");
  CHECK(records[0].dims == std::vector<int>{3, 4});
  CHECK(records[1].name == "dec.bias");
  CHECK(records[1].dims == std::vector<int>{5});
  CHECK(records[2].name == "head");
  for (size_t i = 0; i < records[0].values.size(); ++i) {
    CHECK(records[0].values[i] == float(f.a->value.data[i]));
  }
}

TEST_CASE("weights: truncation raises CorruptionError") {
  Fixture f;
  const std::string blob = encode_weights(f.const_params());
  for (size_t cut : {blob.size() - 1, blob.size() - 5, size_t(3),
                     size_t(17), blob.size() / 2}) {
    CHECK_THROWS_AS((void)decode_weights(blob.substr(0, cut)),
                    CorruptionError);
  }
  CHECK_THROWS_AS((void)decode_weights(blob + "x"), CorruptionError);
}

TEST_CASE("weights: digest tracks values") {
  Fixture f;
  const std::string d1 = weights_digest(f.const_params());
  CHECK(d1.size() == 64);
  CHECK(d1 == weights_digest(f.const_params()));
  f.a->value.data[0] += real_t(1);
  CHECK(d1 != weights_digest(f.const_params()));
}

TEST_CASE("checkpoint: save/load round trip") {
  Fixture src;
  const auto dir = fresh_dir("rt");
  CheckpointMeta meta;
  meta.kind = "model";
  meta.seed = 42;
  meta.command = "nwf pretrain --seed 42";
  meta.config_json = "{\"d_model\":64,\"heads\":4}";
  save_checkpoint(dir.string(), meta, src.const_params());

  Fixture dst;
  for (auto* p : dst.params()) p->value.fill(0);
  CheckpointMeta got = load_checkpoint(dir.string(), dst.params());
  CHECK(got.kind == "model");
  CHECK(got.seed == 42);
  CHECK(got.command == meta.command);
  for (size_t i = 0; i < src.a->value.data.size(); ++i) {
    CHECK(dst.a->value.data[i] == src.a->value.data[i]);
  }
  for (size_t i = 0; i < src.b->value.data.size(); ++i) {
    CHECK(dst.b->value.data[i] == src.b->value.data[i]);
  }
  CHECK(weights_digest(dst.const_params()) ==
        weights_digest(src.const_params()));

  CheckpointMeta peek = read_checkpoint_meta(dir.string());
  CHECK(peek.kind == "model");
  CHECK(peek.seed == 42);
}

TEST_CASE("checkpoint: corrupted weights rejected") {
  Fixture src;
  const auto dir = fresh_dir("corrupt");
  save_checkpoint(dir.string(), CheckpointMeta{"model", 1, "cmd", "{}"},
                  src.const_params());

  const auto wpath = (dir / "weights.bin").string();
  std::string blob = read_text_file(wpath);

  // Flipped payload byte: digest mismatch.
  std::string flipped = blob;
  flipped[flipped.size() - 1] = char(flipped[flipped.size() - 1] ^ 0x40);
  write_text_file(wpath, flipped);
  Fixture dst;
  CHECK_THROWS_AS((void)load_checkpoint(dir.string(), dst.params()),
                  CorruptionError);

  // Truncated file: also corruption.
  write_text_file(wpath, blob.substr(0, blob.size() / 2));
  CHECK_THROWS_AS((void)load_checkpoint(dir.string(), dst.params()),
                  CorruptionError);
}

TEST_CASE("checkpoint: manifest format errors") {
  Fixture src;
  const auto dir = fresh_dir("manifest");
  save_checkpoint(dir.string(), CheckpointMeta{"model", 1, "cmd", "{}"},
                  src.const_params());
  const auto mpath = (dir / "manifest.json").string();
  const std::string manifest = read_text_file(mpath);

  std::string bumped = manifest;
  const auto pos = bumped.find("\"format_version\": 1");
  REQUIRE(pos != std::string::npos);
  bumped.replace(pos, std::strlen("\"format_version\": 1"),
                 "\"format_version\": 2");
  write_text_file(mpath, bumped);
  Fixture dst;
  CHECK_THROWS_AS((void)load_checkpoint(dir.string(), dst.params()),
                  FormatError);

  write_text_file(mpath, "not json at all");
  CHECK_THROWS_AS((void)read_checkpoint_meta(dir.string()), FormatError);

  write_text_file(mpath, "{\"format_version\": 1}");
  CHECK_THROWS_AS((void)read_checkpoint_meta(dir.string()), FormatError);
}

TEST_CASE("checkpoint: parameter set mismatches") {
  Fixture src;
  const auto dir = fresh_dir("mismatch");
  save_checkpoint(dir.string(), CheckpointMeta{"model", 1, "cmd", "{}"},
                  src.const_params());

  {
    // Missing parameter in the file relative to the request.
    ParamRegistry reg;
    std::vector<Parameter*> want = {&reg.create("enc.w", {3, 4}),
                                    &reg.create("dec.bias", {5}),
                                    &reg.create("head", {2, 2}),
                                    &reg.create("extra", {1})};
    CHECK_THROWS_AS((void)load_checkpoint(dir.string(), want), FormatError);
  }
  {
    // Extra record in the file relative to the request.
    ParamRegistry reg;
    std::vector<Parameter*> want = {&reg.create("enc.w", {3, 4})};
    CHECK_THROWS_AS((void)load_checkpoint(dir.string(), want), FormatError);
  }
  {
    // Shape mismatch on a matching name.
    ParamRegistry reg;
    std::vector<Parameter*> want = {&reg.create("enc.w", {4, 3}),
                                    &reg.create("dec.bias", {5}),
                                    &reg.create("head", {2, 2})};
    CHECK_THROWS_AS((void)load_checkpoint(dir.string(), want), FormatError);
  }
}

TEST_CASE("checkpoint: missing directory") {
  Fixture dst;
  CHECK_THROWS(
      (void)load_checkpoint("/nonexistent/nwf_ckpt_nowhere", dst.params()));
}
