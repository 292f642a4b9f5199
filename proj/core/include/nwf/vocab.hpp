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

#ifndef NWF_VOCAB_HPP_
#define NWF_VOCAB_HPP_

#include <string>
#include <unordered_map>
#include <vector>

#include "nwf/common.hpp"

namespace nwf {

// Fixed symbol inventory with four reserved specials at the front. The
// character vocabulary covers lowercase, uppercase and space; the phoneme
// vocabulary covers the synthetic phoneme classes plus a word boundary
// marker. Both are closed: unknown symbols map to kUnk.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNumSpecials = 4;

  // Output side: specials, space, a-z, A-Z (57 symbols).
  static Vocab characters();

  // Input side: specials, the word boundary "|" and the given class symbols.
  static Vocab phonemes(const std::vector<std::string>& classes);

  // Rebuilds a vocabulary from a serialized symbol list.
  static Vocab from_symbols(std::vector<std::string> symbols);

  int size() const { return static_cast<int>(symbols_.size()); }
  int id(const std::string& symbol) const;
  const std::string& symbol(int id) const;
  const std::vector<std::string>& symbols() const { return symbols_; }

  // Character text to ids, one id per char. No BOS/EOS added.
  std::vector<int> encode_chars(const std::string& text) const;

  // Symbol sequence to ids.
  std::vector<int> encode_symbols(const std::vector<std::string>& seq) const;

  // Ids back to text; specials are skipped.
  std::string decode(const std::vector<int>& ids) const;

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace nwf

#endif  // NWF_VOCAB_HPP_
