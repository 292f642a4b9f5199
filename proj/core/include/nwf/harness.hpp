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

#ifndef NWF_HARNESS_HPP_
#define NWF_HARNESS_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace nwf {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;  // contract violation, corrupt data, numeric fault
inline constexpr int kExitUsage = 2;    // CLI misuse, unknown flags, bad config

inline constexpr char kToolVersion[] = "nwf 0.1.0";

// Provenance record written next to every command's outputs. The identity
// digest covers the tool version, seed, config snapshot (with paths and
// thread count normalized out), and the SHA-256 of every output file by
// relative path; the command line and timestamp are informational only, so
// reruns and different thread counts with the same semantic inputs produce
// the same digest.
struct RunManifest {
  std::string tool_version = kToolVersion;
  std::string command;
  uint64_t seed = 0;
  std::string config_json;
  std::vector<std::pair<std::string, std::string>> outputs;  // relpath, sha256
  std::string created_at;
  std::string digest;
};

// Sorted relative paths of regular files under dir, excluding the top-level
// manifest.json.
std::vector<std::string> list_output_files(const std::string& dir);

std::string manifest_identity_digest(const RunManifest& m);

// Digests every output file under out_dir, stamps identity digest and
// timestamp, writes out_dir/manifest.json.
void write_run_manifest(const std::string& out_dir, RunManifest m);

RunManifest load_run_manifest(const std::string& out_dir);

// Recomputes every output digest and the identity digest; CorruptionError
// on any mismatch.
void verify_run_manifest(const std::string& out_dir);

// Full command-line entry point (args excludes the program name). All
// subcommands route through here so tests can drive the real CLI in-process.
int run_cli(const std::vector<std::string>& args);

}  // namespace nwf

#endif  // NWF_HARNESS_HPP_
