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

#ifndef NWF_DIGEST_HPP_
#define NWF_DIGEST_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace nwf {

// SHA-256 as lowercase hex.
std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(const std::string& data);
std::string sha256_file(const std::string& path);

// Incremental form for digesting several buffers as one stream.
class Sha256Stream {
 public:
  Sha256Stream();
  ~Sha256Stream();
  Sha256Stream(const Sha256Stream&) = delete;
  Sha256Stream& operator=(const Sha256Stream&) = delete;

  void update(const void* data, size_t len);
  void update(const std::string& data);
  std::string hex();  // finalizes; the stream must not be reused

 private:
  void* ctx_;
  bool done_ = false;
};

}  // namespace nwf

#endif  // NWF_DIGEST_HPP_
