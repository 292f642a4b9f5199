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

#include "nwf/model.hpp"

#include <cmath>

#include "nwf/kernels.hpp"

namespace nwf {

void ModelConfig::validate() const {
  NWF_REQUIRE(d_model >= 1 && heads >= 1, "config: d_model/heads must be >= 1");
  NWF_REQUIRE(d_model % heads == 0, "config: d_model must be divisible by heads");
  NWF_REQUIRE(ff >= 1, "config: ff width must be >= 1");
  NWF_REQUIRE(enc_layers >= 1 && dec_layers >= 1, "config: need >= 1 layer per stack");
  NWF_REQUIRE(mem_enc_layers >= 1 && mem_dec_layers >= 1,
              "config: need >= 1 memory layer per stack");
  NWF_REQUIRE(src_vocab >= Vocab::kNumSpecials && tgt_vocab >= Vocab::kNumSpecials,
              "config: vocab sizes must cover the special tokens");
  NWF_REQUIRE(max_src_len >= 1 && max_tgt_len >= 1 && max_entry_len >= 1,
              "config: max lengths must be >= 1");
  NWF_REQUIRE(ln_eps > 0, "config: ln_eps must be positive");
}

MemoryList MemoryList::from_words(const std::vector<std::string>& words,
                                  const Vocab& tgt_vocab) {
  MemoryList m;
  for (const auto& w : words) {
    std::vector<int> ids = tgt_vocab.encode_chars(w);
    if (ids.empty()) continue;
    bool dup = false;
    for (const auto& e : m.entries) {
      if (e == ids) {
        dup = true;
        break;
      }
    }
    if (dup) continue;
    m.entries.push_back(std::move(ids));
    m.words.push_back(w);
  }
  return m;
}

namespace {

constexpr real_t kMaskNegInf = real_t(-1e9);

Tensor causal_mask(int t) {
  Tensor m = Tensor::zeros({t, t});
  for (int i = 0; i < t; ++i) {
    for (int j = i + 1; j < t; ++j) m.at(i, j) = kMaskNegInf;
  }
  return m;
}

Tensor pad_mask(int t, int valid) {
  Tensor m = Tensor::zeros({t, t});
  for (int i = 0; i < t; ++i) {
    for (int j = valid; j < t; ++j) m.at(i, j) = kMaskNegInf;
  }
  return m;
}

// Shared forward-pass context: tape, config, optional adapters.
struct Ctx {
  Tape& t;
  const ModelConfig& cfg;
  const AdapterSet* ad;

  Value weight(Parameter* p) const {
    Value w = t.leaf(*p);
    if (ad != nullptr) {
      const AdapterEntry* e = ad->entry_for(p);
      if (e != nullptr) {
        std::vector<Value> rs, ss;
        rs.reserve(e->factors.size());
        ss.reserve(e->factors.size());
        for (const FactorPair& f : e->factors) {
          rs.push_back(t.leaf(*f.r));
          ss.push_back(t.leaf(*f.s));
        }
        w = low_rank_add(w, rs, ss);
      }
    }
    return w;
  }

  Value ln(Value x, const LnParams& p) const {
    return rowwise_affine(layer_norm(x, static_cast<real_t>(cfg.ln_eps)),
                          t.leaf(*p.gain), t.leaf(*p.bias));
  }

  Value mha(Value xq, Value xkv, const AttnParams& p, int heads,
            const Tensor* mask) const {
    Value q = matmul(xq, weight(p.wq));
    Value k = matmul(xkv, weight(p.wk));
    Value v = matmul(xkv, weight(p.wv));
    const int dh = cfg.d_model / heads;
    const real_t sc = real_t(1) / std::sqrt(static_cast<real_t>(dh));
    std::vector<Value> ctx;
    ctx.reserve(static_cast<size_t>(heads));
    for (int h = 0; h < heads; ++h) {
      Value qh = slice_cols(q, h * dh, (h + 1) * dh);
      Value kh = slice_cols(k, h * dh, (h + 1) * dh);
      Value vh = slice_cols(v, h * dh, (h + 1) * dh);
      Value a = softmax_rows(attention_scores(qh, kh, sc, mask));
      ctx.push_back(matmul(a, vh));
    }
    Value c = heads == 1 ? ctx[0] : concat_cols(ctx);
    return matmul(c, weight(p.wo));
  }

  Value ffn(Value x, const FfnParams& p) const {
    return matmul(gelu(matmul(x, weight(p.w1))), weight(p.w2));
  }
};

}  // namespace

Model::Model(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const int d = cfg_.d_model;

  // Sinusoidal position table shared by all stacks.
  int max_rows = std::max({cfg_.max_src_len, cfg_.max_tgt_len, cfg_.max_entry_len});
  pos_ = Tensor::zeros({max_rows, d});
  for (int t = 0; t < max_rows; ++t) {
    for (int i = 0; i < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / d);
      pos_.at(t, i) = static_cast<real_t>(std::sin(t * freq));
      if (i + 1 < d)
        pos_.at(t, i + 1) = static_cast<real_t>(std::cos(t * freq));
    }
  }

  Rng rng(derive_seed(seed, "model-init"));
  auto lin = [&](const std::string& name, int n, int m) {
    return &registry_.create_gaussian(name, {n, m}, rng,
                                      std::sqrt(2.0 / (n + m)));
  };
  auto emb = [&](const std::string& name, int vocab) {
    return &registry_.create_gaussian(name, {vocab, d}, rng,
                                      1.0 / std::sqrt(static_cast<double>(d)));
  };
  auto lnp = [&](const std::string& base) {
    LnParams l;
    l.gain = &registry_.create(base + ".g", {d});
    l.gain->value.fill(1);
    l.bias = &registry_.create(base + ".b", {d});
    return l;
  };
  auto attn = [&](const std::string& base) {
    AttnParams a;
    a.wq = lin(base + ".wq", d, d);
    a.wk = lin(base + ".wk", d, d);
    a.wv = lin(base + ".wv", d, d);
    a.wo = lin(base + ".wo", d, d);
    return a;
  };
  auto ffp = [&](const std::string& base) {
    FfnParams f;
    f.w1 = lin(base + ".w1", d, cfg_.ff);
    f.w2 = lin(base + ".w2", cfg_.ff, d);
    return f;
  };
  auto enc_layer = [&](const std::string& base) {
    EncoderLayerParams l;
    l.ln1 = lnp(base + ".ln1");
    l.self_attn = attn(base + ".self");
    l.ln2 = lnp(base + ".ln2");
    l.ffn = ffp(base + ".ff");
    return l;
  };
  auto dec_layer = [&](const std::string& base) {
    DecoderLayerParams l;
    l.ln1 = lnp(base + ".ln1");
    l.self_attn = attn(base + ".self");
    l.ln2 = lnp(base + ".ln2");
    l.cross_attn = attn(base + ".cross");
    l.ln3 = lnp(base + ".ln3");
    l.ffn = ffp(base + ".ff");
    return l;
  };

  src_emb_ = emb("src_emb", cfg_.src_vocab);
  tgt_emb_ = emb("tgt_emb", cfg_.tgt_vocab);
  for (int i = 0; i < cfg_.enc_layers; ++i) {
    enc_layers_.push_back(enc_layer("enc.l" + std::to_string(i)));
  }
  enc_ln_f_ = lnp("enc.ln_f");
  for (int i = 0; i < cfg_.dec_layers; ++i) {
    dec_layers_.push_back(dec_layer("dec.l" + std::to_string(i)));
  }
  dec_ln_f_ = lnp("dec.ln_f");
  head_ = lin("dec.head", d, cfg_.tgt_vocab);

  mem_enc_emb_ = emb("mem_enc_emb", cfg_.tgt_vocab);
  mem_dec_emb_ = emb("mem_dec_emb", cfg_.tgt_vocab);
  for (int i = 0; i < cfg_.mem_enc_layers; ++i) {
    mem_enc_layers_.push_back(enc_layer("mem_enc.l" + std::to_string(i)));
  }
  mem_enc_ln_f_ = lnp("mem_enc.ln_f");
  for (int i = 0; i < cfg_.mem_dec_layers; ++i) {
    const std::string base = "mem_dec.l" + std::to_string(i);
    MemoryDecoderLayerParams l;
    l.base = dec_layer(base);
    l.ln_mem = lnp(base + ".ln_mem");
    l.mem_attn = attn(base + ".ment");
    l.ln_tok = lnp(base + ".ln_tok");
    l.tok_attn = attn(base + ".mtok");
    mem_dec_layers_.push_back(l);
  }
  mem_dec_ln_f_ = lnp("mem_dec.ln_f");
  mem_head_ = &registry_.create("mem_dec.head", {d, cfg_.tgt_vocab});
}

Value Model::positions(Tape& tape, int len) const {
  NWF_REQUIRE(len >= 1 && len <= pos_.rows(), "positions: length out of range");
  Tensor slice = Tensor::zeros({len, cfg_.d_model});
  std::copy(pos_.data.begin(),
            pos_.data.begin() + static_cast<size_t>(len) * cfg_.d_model,
            slice.data.begin());
  return tape.constant(std::move(slice));
}

namespace {

Value embed_sequence(const Ctx& c, Parameter* table, const std::vector<int>& ids,
                     const Model& model) {
  Value x = embedding(c.t.leaf(*table), ids);
  x = scale(x, std::sqrt(static_cast<real_t>(c.cfg.d_model)));
  return add(x, model.positions(c.t, static_cast<int>(ids.size())));
}

Value run_encoder_stack(const Ctx& c, const Model& model, Parameter* table,
                        const std::vector<EncoderLayerParams>& layers,
                        const LnParams& ln_f, const std::vector<int>& ids,
                        const Tensor* self_mask) {
  Value x = embed_sequence(c, table, ids, model);
  for (const auto& l : layers) {
    Value y = c.ln(x, l.ln1);
    x = add(x, c.mha(y, y, l.self_attn, c.cfg.heads, self_mask));
    x = add(x, c.ffn(c.ln(x, l.ln2), l.ffn));
  }
  return c.ln(x, ln_f);
}

void check_ids(const std::vector<int>& ids, int vocab, const char* what) {
  NWF_REQUIRE(!ids.empty(), std::string(what) + ": empty sequence");
  for (int id : ids) {
    NWF_REQUIRE(id >= 0 && id < vocab,
                std::string(what) + ": token id out of range");
  }
}

}  // namespace

Value Model::encode_source(Tape& tape, const std::vector<int>& phoneme_ids,
                           const AdapterSet* adapters, int pad_to) const {
  NWF_REQUIRE(adapters == nullptr || !adapters->merged(),
              "encode_source: merged adapters must be detached");
  check_ids(phoneme_ids, cfg_.src_vocab, "encode_source");
  const int t = static_cast<int>(phoneme_ids.size());
  NWF_REQUIRE(t <= cfg_.max_src_len, "encode_source: sequence too long");
  Ctx c{tape, cfg_, adapters};
  if (pad_to <= t) {
    return run_encoder_stack(c, *this, src_emb_, enc_layers_, enc_ln_f_,
                             phoneme_ids, nullptr);
  }
  NWF_REQUIRE(pad_to <= cfg_.max_src_len, "encode_source: pad_to too long");
  std::vector<int> padded = phoneme_ids;
  padded.resize(static_cast<size_t>(pad_to), Vocab::kPad);
  Tensor mask = pad_mask(pad_to, t);
  Value full = run_encoder_stack(c, *this, src_emb_, enc_layers_, enc_ln_f_,
                                 padded, &mask);
  return slice_rows(full, 0, t);
}

Value Model::decode_logits(Tape& tape, const std::vector<int>& prefix,
                           Value enc_states,
                           const AdapterSet* adapters) const {
  NWF_REQUIRE(adapters == nullptr || !adapters->merged(),
              "decode_logits: merged adapters must be detached");
  check_ids(prefix, cfg_.tgt_vocab, "decode_logits");
  NWF_REQUIRE(prefix[0] == Vocab::kBos, "decode_logits: prefix must start with BOS");
  const int t = static_cast<int>(prefix.size());
  NWF_REQUIRE(t <= cfg_.max_tgt_len, "decode_logits: prefix too long");
  Ctx c{tape, cfg_, adapters};
  Tensor mask = causal_mask(t);
  Value x = embed_sequence(c, tgt_emb_, prefix, *this);
  for (const auto& l : dec_layers_) {
    Value y = c.ln(x, l.ln1);
    x = add(x, c.mha(y, y, l.self_attn, cfg_.heads, &mask));
    x = add(x, c.mha(c.ln(x, l.ln2), enc_states, l.cross_attn, cfg_.heads,
                     nullptr));
    x = add(x, c.ffn(c.ln(x, l.ln3), l.ffn));
  }
  x = c.ln(x, dec_ln_f_);
  return matmul(x, c.weight(head_));
}

EncodedMemory Model::encode_memory(Tape& tape, const MemoryList& memory) const {
  EncodedMemory em;
  em.entries = memory.size();
  em.offsets = {0};
  if (memory.empty()) return em;
  Ctx c{tape, cfg_, nullptr};
  std::vector<Value> pooled_rows;
  std::vector<Value> token_blocks;
  for (const auto& entry : memory.entries) {
    check_ids(entry, cfg_.tgt_vocab, "encode_memory");
    NWF_REQUIRE(static_cast<int>(entry.size()) <= cfg_.max_entry_len,
                "encode_memory: entry too long");
    Value x = run_encoder_stack(c, *this, mem_enc_emb_, mem_enc_layers_,
                                mem_enc_ln_f_, entry, nullptr);
    token_blocks.push_back(x);
    pooled_rows.push_back(mean_rows(x));
    em.offsets.push_back(em.offsets.back() + static_cast<int>(entry.size()));
  }
  em.tokens = token_blocks.size() == 1 ? token_blocks[0]
                                       : concat_rows(token_blocks);
  em.pooled = pooled_rows.size() == 1 ? pooled_rows[0]
                                      : concat_rows(pooled_rows);
  return em;
}

Value Model::memory_decode_logits(Tape& tape, const std::vector<int>& prefix,
                                  Value enc_states,
                                  const EncodedMemory& memory) const {
  NWF_REQUIRE(memory.entries >= 1,
              "memory_decode_logits: empty memory (combine must bypass)");
  check_ids(prefix, cfg_.tgt_vocab, "memory_decode_logits");
  NWF_REQUIRE(prefix[0] == Vocab::kBos,
              "memory_decode_logits: prefix must start with BOS");
  const int t = static_cast<int>(prefix.size());
  NWF_REQUIRE(t <= cfg_.max_tgt_len, "memory_decode_logits: prefix too long");
  Ctx c{tape, cfg_, nullptr};
  Tensor mask = causal_mask(t);
  const real_t sc = real_t(1) / std::sqrt(static_cast<real_t>(cfg_.d_model));
  Value x = embed_sequence(c, mem_dec_emb_, prefix, *this);
  for (const auto& l : mem_dec_layers_) {
    Value y = c.ln(x, l.base.ln1);
    x = add(x, c.mha(y, y, l.base.self_attn, cfg_.heads, &mask));
    x = add(x, c.mha(c.ln(x, l.base.ln2), enc_states, l.base.cross_attn,
                     cfg_.heads, nullptr));
    x = add(x, c.ffn(c.ln(x, l.base.ln3), l.base.ffn));

    // Memory attention: one head over the pooled entry vectors. The entry
    // distribution feeds the next sublayer.
    Value ym = c.ln(x, l.ln_mem);
    Value qm = matmul(ym, c.weight(l.mem_attn.wq));
    Value km = matmul(memory.pooled, c.weight(l.mem_attn.wk));
    Value vm = matmul(memory.pooled, c.weight(l.mem_attn.wv));
    Value entry_w = softmax_rows(attention_scores(qm, km, sc, nullptr));
    x = add(x, matmul(matmul(entry_w, vm), c.weight(l.mem_attn.wo)));

    // Memory-entry attention: within-entry token attention, weighted by the
    // entry selection so the combined weights stay a single distribution.
    Value yt = c.ln(x, l.ln_tok);
    Value qt = matmul(yt, c.weight(l.tok_attn.wq));
    Value kt = matmul(memory.tokens, c.weight(l.tok_attn.wk));
    Value vt = matmul(memory.tokens, c.weight(l.tok_attn.wv));
    Value tok_scores = attention_scores(qt, kt, sc, nullptr);
    Value tok_w = entry_softmax_combine(tok_scores, entry_w, memory.offsets);
    x = add(x, matmul(matmul(tok_w, vt), c.weight(l.tok_attn.wo)));
  }
  x = c.ln(x, mem_dec_ln_f_);
  return matmul(x, c.weight(mem_head_));
}

Value Model::combine_logits(Value base, const Value* mem) {
  if (mem == nullptr) return base;
  NWF_REQUIRE(base.val().shape == mem->val().shape,
              "combine_logits: shape mismatch");
  return add(base, *mem);
}

std::vector<Parameter*> Model::base_params() {
  std::vector<Parameter*> out;
  for (Parameter* p : registry_.all()) {
    if (p->name.rfind("mem_", 0) != 0) out.push_back(p);
  }
  return out;
}

std::vector<Parameter*> Model::memory_params() {
  std::vector<Parameter*> out;
  for (Parameter* p : registry_.all()) {
    if (p->name.rfind("mem_", 0) == 0) out.push_back(p);
  }
  return out;
}

void Model::set_base_trainable(bool trainable) {
  for (Parameter* p : base_params()) p->trainable = trainable;
}

void Model::set_memory_trainable(bool trainable) {
  for (Parameter* p : memory_params()) p->trainable = trainable;
}

std::vector<LinearRef> Model::adaptable_linears(AdapterScope scope) {
  std::vector<LinearRef> out;
  auto push = [&](Parameter* p, bool in_encoder) {
    out.push_back(LinearRef{p->name, p, in_encoder});
  };
  if (scope == AdapterScope::kEncoderAndDecoder) {
    for (auto& l : enc_layers_) {
      push(l.self_attn.wq, true);
      push(l.self_attn.wk, true);
      push(l.self_attn.wv, true);
      push(l.self_attn.wo, true);
      push(l.ffn.w1, true);
      push(l.ffn.w2, true);
    }
  }
  for (auto& l : dec_layers_) {
    push(l.self_attn.wq, false);
    push(l.self_attn.wk, false);
    push(l.self_attn.wv, false);
    push(l.self_attn.wo, false);
    push(l.cross_attn.wq, false);
    push(l.cross_attn.wk, false);
    push(l.cross_attn.wv, false);
    push(l.cross_attn.wo, false);
    push(l.ffn.w1, false);
    push(l.ffn.w2, false);
  }
  push(head_, false);
  return out;
}

std::pair<double, int64_t> sequence_nll(const Model& model,
                                        const AdapterSet* adapters,
                                        const MemoryList* memory,
                                        const std::vector<SeqExample>& data) {
  NWF_REQUIRE(!data.empty(), "sequence_nll: empty dataset");
  const bool use_memory = memory != nullptr && !memory->empty();
  double total = 0;
  int64_t tokens = 0;
  for (const auto& ex : data) {
    Tape tape(false);
    Value enc = model.encode_source(tape, ex.src, adapters);
    std::vector<int> prefix;
    prefix.reserve(ex.tgt.size() + 1);
    prefix.push_back(Vocab::kBos);
    prefix.insert(prefix.end(), ex.tgt.begin(), ex.tgt.end());
    std::vector<int> labels = ex.tgt;
    labels.push_back(Vocab::kEos);
    Value logits = model.decode_logits(tape, prefix, enc, adapters);
    if (use_memory) {
      EncodedMemory em = model.encode_memory(tape, *memory);
      Value mem_logits = model.memory_decode_logits(tape, prefix, enc, em);
      logits = Model::combine_logits(logits, &mem_logits);
    }
    Value loss = cross_entropy_sum(logits, labels);
    const double l = static_cast<double>(loss.val().data[0]);
    NWF_REQUIRE(std::isfinite(l), "sequence_nll: non-finite loss");
    total += l;
    tokens += static_cast<int64_t>(labels.size());
  }
  return {total, tokens};
}

double sequence_perplexity(const Model& model, const AdapterSet* adapters,
                           const MemoryList* memory,
                           const std::vector<SeqExample>& data) {
  auto [total, tokens] = sequence_nll(model, adapters, memory, data);
  return std::exp(total / static_cast<double>(tokens));
}

}  // namespace nwf
