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

#include <cmath>
#include <cstring>
#include <type_traits>

#include "nwf/gradcheck.hpp"
#include "nwf/model.hpp"
#include "nwf/rng.hpp"

using namespace nwf;

namespace {

constexpr bool kDouble = std::is_same_v<real_t, double>;

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.d_model = 16;
  cfg.heads = 2;
  cfg.ff = 32;
  cfg.src_vocab = 16;
  cfg.tgt_vocab = 20;
  cfg.max_src_len = 32;
  cfg.max_tgt_len = 24;
  cfg.max_entry_len = 8;
  return cfg;
}

std::vector<int> seq(std::initializer_list<int> ids) { return ids; }

uint64_t fnv1a(const void* data, size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = 1469598103934665603ull;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

TEST_CASE("config: validation contracts") {
  ModelConfig cfg = tiny_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.d_model = 17;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = tiny_config();
  cfg.tgt_vocab = 3;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = tiny_config();
  cfg.dec_layers = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
}

TEST_CASE("init: seeded construction is deterministic") {
  Model a(tiny_config(), 42), b(tiny_config(), 42), c(tiny_config(), 43);
  auto pa = a.params().all();
  auto pb = b.params().all();
  REQUIRE(pa.size() == pb.size());
  bool all_equal = true;
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    all_equal = all_equal && bitwise_equal(pa[i]->value, pb[i]->value);
  }
  CHECK(all_equal);
  bool any_diff = false;
  auto pc = c.params().all();
  for (size_t i = 0; i < pa.size(); ++i) {
    if (!bitwise_equal(pa[i]->value, pc[i]->value)) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("init: layer norms, memory head, position table") {
  Model m(tiny_config(), 7);
  const Parameter* g = m.params().find("enc.l0.ln1.g");
  const Parameter* b = m.params().find("enc.l0.ln1.b");
  REQUIRE(g != nullptr);
  REQUIRE(b != nullptr);
  for (real_t x : g->value.data) CHECK(x == real_t(1));
  for (real_t x : b->value.data) CHECK(x == real_t(0));
  const Parameter* mh = m.params().find("mem_dec.head");
  REQUIRE(mh != nullptr);
  CHECK(mh->value.max_abs() == real_t(0));

  Tape t;
  Value pos = m.positions(t, 2);
  CHECK(pos.val().at(0, 0) == real_t(0));
  CHECK(pos.val().at(0, 1) == real_t(1));
  CHECK(static_cast<double>(pos.val().at(1, 0)) ==
        doctest::Approx(std::sin(1.0)).epsilon(1e-6));
}

TEST_CASE("encode_source: shape, determinism, contracts") {
  Model m(tiny_config(), 7);
  Tape t;
  std::vector<int> ids(12, 5);
  Value enc = m.encode_source(t, ids);
  CHECK(enc.rows() == 12);
  CHECK(enc.cols() == 16);

  Tape t2;
  Value enc2 = m.encode_source(t2, ids);
  CHECK(bitwise_equal(enc.val(), enc2.val()));

  CHECK_THROWS_AS((void)m.encode_source(t, {}), ContractError);
  CHECK_THROWS_AS((void)m.encode_source(t, seq({16})), ContractError);
  CHECK_THROWS_AS((void)m.encode_source(t, std::vector<int>(33, 5)),
                  ContractError);
}

TEST_CASE("encode_source: padded path matches exact path") {
  Model m(tiny_config(), 11);
  std::vector<int> ids = seq({4, 9, 5, 5, 12, 7});
  Tape t;
  Value exact = m.encode_source(t, ids);
  Value padded = m.encode_source(t, ids, nullptr, 20);
  CHECK(padded.rows() == 6);
  CHECK(max_abs_diff(exact.val(), padded.val()) <= 1e-5);
}

TEST_CASE("decode_logits: shape, causality, contracts") {
  Model m(tiny_config(), 7);
  Tape t;
  std::vector<int> src = seq({4, 5, 6, 7});
  Value enc = m.encode_source(t, src);
  std::vector<int> prefix = seq({Vocab::kBos, 5, 6, 7, 8});
  Value logits = m.decode_logits(t, prefix, enc);
  CHECK(logits.rows() == 5);
  CHECK(logits.cols() == 20);

  // Mutating position t+1 leaves logits at positions <= t unchanged.
  std::vector<int> mutated = prefix;
  mutated[3] = 12;
  Tape t2;
  Value enc2 = m.encode_source(t2, src);
  Value logits2 = m.decode_logits(t2, mutated, enc2);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 20; ++j) {
      CHECK(logits.val().at(i, j) == logits2.val().at(i, j));
    }
  }
  bool row3_changed = false;
  for (int j = 0; j < 20; ++j) {
    if (logits.val().at(3, j) != logits2.val().at(3, j)) row3_changed = true;
  }
  CHECK(row3_changed);

  CHECK_THROWS_AS((void)m.decode_logits(t, seq({5, 6}), enc), ContractError);
  CHECK_THROWS_AS((void)m.decode_logits(t, seq({Vocab::kBos, 20}), enc),
                  ContractError);
}

TEST_CASE("decode_logits: pinned checksum on fixed seed and config") {
  Model m(tiny_config(), 42);
  Tape t;
  Value enc = m.encode_source(t, seq({4, 9, 5, 12, 7, 7, 10}));
  Value logits = m.decode_logits(t, seq({Vocab::kBos, 6, 17, 8, 4}), enc);
  const uint64_t digest = fnv1a(logits.val().data.data(),
                                logits.val().data.size() * sizeof(real_t));
  if (!kDouble) {
    CHECK(digest == 13167634116401029766ull);
  } else {
    CHECK(digest != 0);  // double lane: exercised, value not pinned
  }
}

TEST_CASE("encode_memory: independence and permutation") {
  ModelConfig cfg = tiny_config();
  Model m(cfg, 9);
  Vocab tgt = Vocab::characters();
  // Use raw token ids in range; vocab here is only for MemoryList helpers.
  MemoryList ab;
  ab.entries = {seq({5, 6, 7}), seq({8, 9})};
  ab.words = {"abc", "de"};
  MemoryList a;
  a.entries = {seq({5, 6, 7})};
  a.words = {"abc"};
  MemoryList ba;
  ba.entries = {seq({8, 9}), seq({5, 6, 7})};
  ba.words = {"de", "abc"};

  Tape t;
  EncodedMemory em_ab = m.encode_memory(t, ab);
  EncodedMemory em_a = m.encode_memory(t, a);
  EncodedMemory em_ba = m.encode_memory(t, ba);
  CHECK(em_ab.entries == 2);
  CHECK(em_ab.offsets == std::vector<int>({0, 3, 5}));
  CHECK(em_ab.pooled.rows() == 2);
  CHECK(em_ab.tokens.rows() == 5);

  // Entry 0 of [abc, de] equals the sole entry of [abc].
  for (int j = 0; j < cfg.d_model; ++j) {
    CHECK(em_ab.pooled.val().at(0, j) == em_a.pooled.val().at(0, j));
    CHECK(em_ab.tokens.val().at(1, j) == em_a.tokens.val().at(1, j));
  }
  // Permuting entries permutes the encodings.
  for (int j = 0; j < cfg.d_model; ++j) {
    CHECK(em_ab.pooled.val().at(0, j) == em_ba.pooled.val().at(1, j));
    CHECK(em_ab.pooled.val().at(1, j) == em_ba.pooled.val().at(0, j));
  }

  MemoryList none;
  EncodedMemory em0 = m.encode_memory(t, none);
  CHECK(em0.entries == 0);
  (void)tgt;
}

TEST_CASE("memory list: construction dedup and empty drop") {
  Vocab tgt = Vocab::characters();
  MemoryList m = MemoryList::from_words({"gauge", "", "field", "gauge", "f"},
                                        tgt);
  REQUIRE(m.size() == 3);
  CHECK(m.words == std::vector<std::string>({"gauge", "field", "f"}));
  CHECK(m.entries[0].size() == 5);
}

TEST_CASE("memory_decode_logits: shape, neutrality, permutation invariance") {
  ModelConfig cfg = tiny_config();
  Model m(cfg, 13);
  MemoryList mem;
  mem.entries = {seq({5, 6, 7}), seq({8, 9}), seq({10, 11, 12, 13})};
  mem.words = {"a", "b", "c"};

  Tape t;
  std::vector<int> src = seq({4, 5, 6});
  std::vector<int> prefix = seq({Vocab::kBos, 7, 9});
  Value enc = m.encode_source(t, src);
  Value base = m.decode_logits(t, prefix, enc);
  EncodedMemory em = m.encode_memory(t, mem);
  Value ml = m.memory_decode_logits(t, prefix, enc, em);
  CHECK(ml.rows() == 3);
  CHECK(ml.cols() == 20);

  // Zero-initialized memory head: branch output is exactly zero, combined
  // logits equal baseline logits exactly.
  CHECK(ml.val().max_abs() == real_t(0));
  Value combined = Model::combine_logits(base, &ml);
  CHECK(bitwise_equal(combined.val(), base.val()));
  Value bypass = Model::combine_logits(base, nullptr);
  CHECK(bitwise_equal(bypass.val(), base.val()));

  // Give the branch signal, then check entry permutation invariance.
  Rng rng(55);
  Parameter* mh = m.params().find("mem_dec.head");
  for (auto& x : mh->value.data) x = static_cast<real_t>(rng.gaussian(0, 0.3));
  MemoryList perm;
  perm.entries = {mem.entries[2], mem.entries[0], mem.entries[1]};
  perm.words = {"c", "a", "b"};
  Tape t2;
  Value enc2 = m.encode_source(t2, src);
  EncodedMemory em2 = m.encode_memory(t2, mem);
  Value ml2 = m.memory_decode_logits(t2, prefix, enc2, em2);
  Tape t3;
  Value enc3 = m.encode_source(t3, src);
  EncodedMemory em3 = m.encode_memory(t3, perm);
  Value ml3 = m.memory_decode_logits(t3, prefix, enc3, em3);
  CHECK(max_abs_diff(ml2.val(), ml3.val()) <= 1e-5);

  CHECK_THROWS_AS(
      (void)m.memory_decode_logits(t, prefix, enc, m.encode_memory(t, MemoryList{})),
      ContractError);
}

TEST_CASE("attention rows sum to one across both decoders") {
  ModelConfig cfg = tiny_config();
  Model m(cfg, 17);
  Rng rng(3);
  Parameter* mh = m.params().find("mem_dec.head");
  for (auto& x : mh->value.data) x = static_cast<real_t>(rng.gaussian(0, 0.3));
  MemoryList mem;
  mem.entries = {seq({5, 6}), seq({7, 8, 9})};
  mem.words = {"a", "b"};
  Tape t;
  std::vector<double> sums;
  t.softmax_row_sum_probe = &sums;
  Value enc = m.encode_source(t, seq({4, 5, 6, 7, 8}));
  Value base = m.decode_logits(t, seq({Vocab::kBos, 5, 6, 7}), enc);
  EncodedMemory em = m.encode_memory(t, mem);
  (void)m.memory_decode_logits(t, seq({Vocab::kBos, 5, 6, 7}), enc, em);
  (void)base;
  REQUIRE(sums.size() > 100);
  for (double s : sums) CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("combine_logits: arithmetic and contracts") {
  Tape t;
  Value base = t.constant(Tensor::row({1, 0}));
  Value mem = t.constant(Tensor::row({0, 1}));
  Value combined = Model::combine_logits(base, &mem);
  CHECK(combined.val().at(0, 0) == real_t(1));
  CHECK(combined.val().at(0, 1) == real_t(1));
  Value sm = softmax_rows(combined);
  CHECK(static_cast<double>(sm.val().at(0, 0)) == doctest::Approx(0.5));

  Value zero = t.constant(Tensor::row({0, 0}));
  Value with_zero = Model::combine_logits(base, &zero);
  Value sm_base = softmax_rows(base);
  Value sm_zero = softmax_rows(with_zero);
  CHECK(max_abs_diff(sm_base.val(), sm_zero.val()) <= 1e-6);

  Value wide = t.constant(Tensor::row({0, 0, 0}));
  CHECK_THROWS_AS((void)Model::combine_logits(base, &wide), ContractError);
}

TEST_CASE("sequence_perplexity: uniform head and hand-summed oracle") {
  ModelConfig cfg = tiny_config();
  Model m(cfg, 19);
  std::vector<SeqExample> data = {
      {seq({4, 5, 6, 7}), seq({5, 6})},
      {seq({8, 9}), seq({10, 11, 12})},
  };

  // Zeroed output head emits uniform logits: perplexity equals vocab size.
  Model uniform(cfg, 19);
  uniform.params().find("dec.head")->value.fill(0);
  CHECK(sequence_perplexity(uniform, nullptr, nullptr, data) ==
        doctest::Approx(20.0).epsilon(1e-5));

  // Hand-summed NLL over explicit log-softmax of the raw logits.
  double total = 0;
  int64_t tokens = 0;
  for (const auto& ex : data) {
    Tape t(false);
    Value enc = m.encode_source(t, ex.src);
    std::vector<int> prefix = {Vocab::kBos};
    prefix.insert(prefix.end(), ex.tgt.begin(), ex.tgt.end());
    std::vector<int> labels = ex.tgt;
    labels.push_back(Vocab::kEos);
    Value logits = m.decode_logits(t, prefix, enc);
    for (size_t i = 0; i < labels.size(); ++i) {
      double mx = -1e300;
      for (int j = 0; j < 20; ++j) {
        mx = std::max(mx, static_cast<double>(logits.val().at(static_cast<int>(i), j)));
      }
      double z = 0;
      for (int j = 0; j < 20; ++j) {
        z += std::exp(static_cast<double>(logits.val().at(static_cast<int>(i), j)) - mx);
      }
      total -= static_cast<double>(logits.val().at(static_cast<int>(i), labels[i])) -
               mx - std::log(z);
      ++tokens;
    }
  }
  auto [nll, count] = sequence_nll(m, nullptr, nullptr, data);
  CHECK(count == tokens);
  CHECK(nll == doctest::Approx(total).epsilon(1e-6));
  CHECK(sequence_perplexity(m, nullptr, nullptr, data) ==
        doctest::Approx(std::exp(total / static_cast<double>(tokens)))
            .epsilon(1e-6));
  CHECK_THROWS_AS((void)sequence_nll(m, nullptr, nullptr, {}), ContractError);
}

TEST_CASE("gradients: memory attention layers pass finite differences") {
  if constexpr (!kDouble) return;
  ModelConfig cfg;
  cfg.d_model = 8;
  cfg.heads = 2;
  cfg.ff = 16;
  cfg.enc_layers = 1;
  cfg.dec_layers = 1;
  cfg.mem_enc_layers = 1;
  cfg.mem_dec_layers = 1;
  cfg.src_vocab = 10;
  cfg.tgt_vocab = 12;
  cfg.max_src_len = 8;
  cfg.max_tgt_len = 8;
  cfg.max_entry_len = 4;
  Model m(cfg, 23);
  Rng rng(5);
  Parameter* mh = m.params().find("mem_dec.head");
  for (auto& x : mh->value.data) x = static_cast<real_t>(rng.gaussian(0, 0.3));

  MemoryList mem;
  mem.entries = {seq({5, 6}), seq({7, 8, 9})};
  mem.words = {"a", "b"};
  std::vector<int> src = seq({4, 5, 6});
  std::vector<int> prefix = seq({Vocab::kBos, 5, 7});
  std::vector<int> labels = seq({5, 7, Vocab::kEos});

  auto build = [&](Tape& t) {
    Value enc = m.encode_source(t, src);
    EncodedMemory em = m.encode_memory(t, mem);
    Value ml = m.memory_decode_logits(t, prefix, enc, em);
    return cross_entropy_sum(ml, labels);
  };
  std::vector<Parameter*> checked;
  for (const char* name :
       {"mem_dec.l0.ment.wq", "mem_dec.l0.ment.wk", "mem_dec.l0.ment.wv",
        "mem_dec.l0.ment.wo", "mem_dec.l0.mtok.wq", "mem_dec.l0.mtok.wk",
        "mem_dec.l0.mtok.wv", "mem_dec.l0.mtok.wo", "mem_enc_emb",
        "mem_dec.head"}) {
    Parameter* p = m.params().find(name);
    REQUIRE(p != nullptr);
    checked.push_back(p);
  }
  GradCheckConfig gc;
  gc.max_coords = 24;
  gc.seed = 404;
  GradCheckReport rep = grad_check(build, checked, gc);
  CHECK(rep.max_rel_err <= 1e-4);
}

TEST_CASE("parameter census: stack prefixes partition the registry") {
  Model m(tiny_config(), 29);
  auto base = m.base_params();
  auto memp = m.memory_params();
  CHECK(base.size() + memp.size() == m.params().size());
  for (Parameter* p : memp) CHECK(p->name.rfind("mem_", 0) == 0);
  m.set_base_trainable(false);
  size_t trainable = m.params().trainable().size();
  CHECK(trainable == memp.size());
  m.set_base_trainable(true);
  m.set_memory_trainable(false);
  CHECK(m.params().trainable().size() == base.size());
  m.set_memory_trainable(true);
}
