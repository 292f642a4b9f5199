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

#include "nwf/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace nwf {

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string token;
  while (in >> token) out.push_back(std::move(token));
  return out;
}

std::string strip_edge_punct(const std::string& token) {
  size_t b = 0, e = token.size();
  while (b < e && !std::isalnum(static_cast<unsigned char>(token[b]))) ++b;
  while (e > b && !std::isalnum(static_cast<unsigned char>(token[e - 1]))) --e;
  return token.substr(b, e - b);
}

std::vector<std::string> match_tokens(const std::string& text) {
  std::vector<std::string> out;
  for (const auto& t : split_words(text)) {
    std::string s = strip_edge_punct(t);
    if (!s.empty()) out.push_back(std::move(s));
  }
  return out;
}

// ----- Word error rate -----

double WerReport::wer() const {
  NWF_REQUIRE(ref_words > 0, "wer: zero reference words");
  return double(substitutions + deletions + insertions) / double(ref_words);
}

WerReport& WerReport::operator+=(const WerReport& o) {
  substitutions += o.substitutions;
  deletions += o.deletions;
  insertions += o.insertions;
  ref_words += o.ref_words;
  return *this;
}

WerReport word_error_rate(const std::vector<std::string>& ref,
                          const std::vector<std::string>& hyp) {
  NWF_REQUIRE(!ref.empty(), "word_error_rate: empty reference");
  const size_t R = ref.size(), H = hyp.size();

  struct Cell {
    int64_t cost = 0;
    int64_t s = 0, d = 0, i = 0;
  };
  std::vector<std::vector<Cell>> dp(R + 1, std::vector<Cell>(H + 1));
  for (size_t j = 1; j <= H; ++j) {
    dp[0][j].cost = int64_t(j);
    dp[0][j].i = int64_t(j);
  }
  for (size_t i = 1; i <= R; ++i) {
    dp[i][0].cost = int64_t(i);
    dp[i][0].d = int64_t(i);
  }
  for (size_t i = 1; i <= R; ++i) {
    for (size_t j = 1; j <= H; ++j) {
      const bool match = ref[i - 1] == hyp[j - 1];
      const int64_t diag = dp[i - 1][j - 1].cost + (match ? 0 : 1);
      const int64_t ins = dp[i][j - 1].cost + 1;
      const int64_t del = dp[i - 1][j].cost + 1;
      const int64_t best = std::min(diag, std::min(ins, del));
      Cell c;
      // Tie preference: match/substitution, then insertion, then deletion.
      if (diag == best) {
        c = dp[i - 1][j - 1];
        if (!match) ++c.s;
      } else if (ins == best) {
        c = dp[i][j - 1];
        ++c.i;
      } else {
        c = dp[i - 1][j];
        ++c.d;
      }
      c.cost = best;
      dp[i][j] = c;
    }
  }
  const Cell& c = dp[R][H];
  WerReport rep;
  rep.substitutions = c.s;
  rep.deletions = c.d;
  rep.insertions = c.i;
  rep.ref_words = int64_t(R);
  return rep;
}

WerReport corpus_word_error_rate(const std::vector<std::string>& ref_texts,
                                 const std::vector<std::string>& hyp_texts) {
  NWF_REQUIRE(ref_texts.size() == hyp_texts.size(),
              "corpus_word_error_rate: transcript count mismatch");
  WerReport total;
  for (size_t i = 0; i < ref_texts.size(); ++i) {
    total += word_error_rate(split_words(ref_texts[i]),
                             split_words(hyp_texts[i]));
  }
  return total;
}

// ----- New-word precision / recall / F1 -----

double PrfCounts::recall() const {
  return tp + fn == 0 ? 1.0 : double(tp) / double(tp + fn);
}

double PrfCounts::precision() const {
  return tp + fp == 0 ? 1.0 : double(tp) / double(tp + fp);
}

double PrfCounts::f1() const {
  const double p = precision(), r = recall();
  return p + r == 0 ? 0.0 : 2 * p * r / (p + r);
}

PrfCounts& PrfCounts::operator+=(const PrfCounts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  return *this;
}

NewWordReport new_word_prf(
    const std::vector<std::string>& ref_texts,
    const std::vector<std::string>& hyp_texts,
    const std::unordered_map<std::string, std::string>& word_category) {
  NWF_REQUIRE(ref_texts.size() == hyp_texts.size(),
              "new_word_prf: transcript count mismatch");
  NewWordReport report;
  std::map<std::string, PrfCounts> per_cat;
  for (size_t u = 0; u < ref_texts.size(); ++u) {
    std::unordered_map<std::string, int64_t> ref_count, hyp_count;
    for (const auto& t : match_tokens(ref_texts[u])) {
      if (word_category.count(t)) ++ref_count[t];
    }
    for (const auto& t : match_tokens(hyp_texts[u])) {
      if (word_category.count(t)) ++hyp_count[t];
    }
    auto tally = [&](const std::string& w, int64_t cr, int64_t ch) {
      PrfCounts c;
      c.tp = std::min(cr, ch);
      c.fp = std::max(ch - cr, int64_t(0));
      c.fn = std::max(cr - ch, int64_t(0));
      report.overall += c;
      per_cat[word_category.at(w)] += c;
    };
    for (const auto& [w, cr] : ref_count) {
      tally(w, cr, hyp_count.count(w) ? hyp_count.at(w) : 0);
    }
    for (const auto& [w, ch] : hyp_count) {
      if (!ref_count.count(w)) tally(w, 0, ch);
    }
  }
  for (const auto& [cat, counts] : per_cat) {
    if (counts.tp + counts.fn > 0) report.per_category[cat] = counts;
  }
  return report;
}

// ----- Forward transfer -----

double ForwardTransferBucket::recall() const {
  return tp + fn == 0 ? 1.0 : double(tp) / double(tp + fn);
}

double ForwardTransferBucket::precision() const {
  return tp + fp == 0 ? 1.0 : double(tp) / double(tp + fp);
}

ForwardTransferReport bucket_forward_transfer(
    std::vector<ForwardTransferEvent> events, int64_t min_bucket) {
  NWF_REQUIRE(min_bucket >= 1, "forward transfer: min_bucket must be >= 1");
  ForwardTransferReport report;
  report.total_events = int64_t(events.size());
  if (events.empty()) return report;

  std::sort(events.begin(), events.end(),
            [](const ForwardTransferEvent& a, const ForwardTransferEvent& b) {
              return a.prior_samples < b.prior_samples;
            });
  std::vector<ForwardTransferBucket>& buckets = report.buckets;
  for (const auto& e : events) {
    if (buckets.empty() || buckets.back().hi != e.prior_samples) {
      ForwardTransferBucket b;
      b.lo = b.hi = e.prior_samples;
      buckets.push_back(b);
    }
    ForwardTransferBucket& b = buckets.back();
    ++b.events;
    b.tp += e.tp;
    b.fp += e.fp;
    b.fn += e.fn;
  }

  auto merge_into = [](ForwardTransferBucket& dst,
                       const ForwardTransferBucket& src) {
    dst.lo = std::min(dst.lo, src.lo);
    dst.hi = std::max(dst.hi, src.hi);
    dst.events += src.events;
    dst.tp += src.tp;
    dst.fp += src.fp;
    dst.fn += src.fn;
  };
  bool merged = true;
  while (merged && buckets.size() > 1) {
    merged = false;
    for (size_t i = 0; i < buckets.size(); ++i) {
      if (buckets[i].events >= min_bucket) continue;
      const size_t into = i + 1 < buckets.size() ? i + 1 : i - 1;
      merge_into(buckets[into], buckets[i]);
      buckets.erase(buckets.begin() + long(i));
      merged = true;
      break;
    }
  }
  return report;
}

}  // namespace nwf
