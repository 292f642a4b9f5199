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

#include "nwf/digest.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <memory>

#include "nwf/common.hpp"

namespace nwf {

namespace {

std::string to_hex(const unsigned char* bytes, unsigned len) {
  static const char* kHex = "0123456789abcdef";
  std::string out;
  out.reserve(static_cast<size_t>(len) * 2);
  for (unsigned i = 0; i < len; ++i) {
    out += kHex[bytes[i] >> 4];
    out += kHex[bytes[i] & 0xf];
  }
  return out;
}

}  // namespace

Sha256Stream::Sha256Stream() {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  NWF_REQUIRE(ctx != nullptr, "sha256: context allocation failed");
  NWF_REQUIRE(EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1,
              "sha256: init failed");
  ctx_ = ctx;
}

Sha256Stream::~Sha256Stream() {
  if (ctx_) EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_));
}

void Sha256Stream::update(const void* data, size_t len) {
  NWF_REQUIRE(!done_, "sha256: stream already finalized");
  NWF_REQUIRE(EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data, len) == 1,
              "sha256: update failed");
}

void Sha256Stream::update(const std::string& data) {
  update(data.data(), data.size());
}

std::string Sha256Stream::hex() {
  NWF_REQUIRE(!done_, "sha256: stream already finalized");
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  NWF_REQUIRE(
      EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), md, &len) == 1,
      "sha256: final failed");
  done_ = true;
  return to_hex(md, len);
}

std::string sha256_hex(const void* data, size_t len) {
  Sha256Stream s;
  s.update(data, len);
  return s.hex();
}

std::string sha256_hex(const std::string& data) {
  return sha256_hex(data.data(), data.size());
}

std::string sha256_file(const std::string& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> f(std::fopen(path.c_str(), "rb"),
                                          &std::fclose);
  NWF_REQUIRE(f != nullptr, "sha256_file: cannot open " + path);
  Sha256Stream s;
  char buf[1 << 16];
  size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), f.get())) > 0) {
    s.update(buf, n);
  }
  return s.hex();
}

}  // namespace nwf
