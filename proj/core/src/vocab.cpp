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

#include "nwf/vocab.hpp"

namespace nwf {

namespace {

std::vector<std::string> specials() { return {"<pad>", "<bos>", "<eos>", "<unk>"}; }

}  // namespace

Vocab Vocab::from_symbols(std::vector<std::string> symbols) {
  NWF_REQUIRE(symbols.size() >= kNumSpecials, "vocab: too few symbols");
  Vocab v;
  v.symbols_ = std::move(symbols);
  for (int i = 0; i < static_cast<int>(v.symbols_.size()); ++i) {
    NWF_REQUIRE(v.index_.emplace(v.symbols_[i], i).second,
                "vocab: duplicate symbol " + v.symbols_[i]);
  }
  return v;
}

Vocab Vocab::characters() {
  std::vector<std::string> syms = specials();
  syms.emplace_back(" ");
  for (char c = 'a'; c <= 'z'; ++c) syms.emplace_back(1, c);
  for (char c = 'A'; c <= 'Z'; ++c) syms.emplace_back(1, c);
  return from_symbols(std::move(syms));
}

Vocab Vocab::phonemes(const std::vector<std::string>& classes) {
  std::vector<std::string> syms = specials();
  syms.emplace_back("|");
  for (const auto& c : classes) syms.push_back(c);
  return from_symbols(std::move(syms));
}

int Vocab::id(const std::string& symbol) const {
  auto it = index_.find(symbol);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::symbol(int id) const {
  NWF_REQUIRE(id >= 0 && id < size(), "vocab: id out of range");
  return symbols_[static_cast<size_t>(id)];
}

std::vector<int> Vocab::encode_chars(const std::string& text) const {
  std::vector<int> out;
  out.reserve(text.size());
  for (char c : text) out.push_back(id(std::string(1, c)));
  return out;
}

std::vector<int> Vocab::encode_symbols(
    const std::vector<std::string>& seq) const {
  std::vector<int> out;
  out.reserve(seq.size());
  for (const auto& s : seq) out.push_back(id(s));
  return out;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int i : ids) {
    if (i < kNumSpecials) continue;
    out += symbol(i);
  }
  return out;
}

}  // namespace nwf
