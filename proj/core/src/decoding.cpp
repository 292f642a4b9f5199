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

#include "nwf/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nwf/common.hpp"
#include "nwf/io.hpp"
#include "nwf/kernels.hpp"
#include "nwf/threads.hpp"

namespace nwf {

// Accessor for the model internals the incremental decoder mirrors.
class ModelForward {
 public:
  static const ModelConfig& cfg(const Model& m) { return m.cfg_; }
  static const Tensor& pos(const Model& m) { return m.pos_; }
  static const Parameter* src_emb(const Model& m) { return m.src_emb_; }
  static const Parameter* tgt_emb(const Model& m) { return m.tgt_emb_; }
  static const std::vector<EncoderLayerParams>& enc_layers(const Model& m) {
    return m.enc_layers_;
  }
  static const LnParams& enc_ln_f(const Model& m) { return m.enc_ln_f_; }
  static const std::vector<DecoderLayerParams>& dec_layers(const Model& m) {
    return m.dec_layers_;
  }
  static const LnParams& dec_ln_f(const Model& m) { return m.dec_ln_f_; }
  static const Parameter* head(const Model& m) { return m.head_; }
  static const Parameter* mem_enc_emb(const Model& m) { return m.mem_enc_emb_; }
  static const Parameter* mem_dec_emb(const Model& m) { return m.mem_dec_emb_; }
  static const std::vector<EncoderLayerParams>& mem_enc_layers(const Model& m) {
    return m.mem_enc_layers_;
  }
  static const LnParams& mem_enc_ln_f(const Model& m) { return m.mem_enc_ln_f_; }
  static const std::vector<MemoryDecoderLayerParams>& mem_dec_layers(
      const Model& m) {
    return m.mem_dec_layers_;
  }
  static const LnParams& mem_dec_ln_f(const Model& m) { return m.mem_dec_ln_f_; }
  static const Parameter* mem_head(const Model& m) { return m.mem_head_; }
};

void DecodeConfig::validate() const {
  NWF_REQUIRE(beam >= 1, "decode: beam must be >= 1");
  NWF_REQUIRE(max_len >= 0, "decode: max_len must be >= 0");
}

namespace {

using json = nlohmann::json;

// Per-memory-decoder-layer attention inputs, fixed once per memory list.
struct MemLayerKv {
  Tensor entry_k, entry_v;  // L x d, from pooled entry vectors
  Tensor token_k, token_v;  // total_tokens x d, from entry token states
};

// Grow-only key/value rows for one self-attention layer, stride d.
struct LayerCache {
  std::vector<real_t> k, v;
  int rows = 0;

  void append(const real_t* krow, const real_t* vrow, int d) {
    k.insert(k.end(), krow, krow + d);
    v.insert(v.end(), vrow, vrow + d);
    ++rows;
  }
};

// Scratch buffers reused across steps of one decode.
struct Workspace {
  std::vector<real_t> x, y, q, k, v, ctx, proj, h1, h2, scores, probs, logits;
  std::vector<real_t> mem_x, mem_logits, entry_w;
};

// Per-candidate incremental state: one self-attention cache per decoder
// layer, for each branch.
struct CandState {
  std::vector<LayerCache> base;
  std::vector<LayerCache> mem;
};

// Per-utterance fixed attention inputs.
struct SrcContext {
  std::vector<Tensor> cross_k, cross_v;          // per base decoder layer
  std::vector<Tensor> mem_cross_k, mem_cross_v;  // per memory decoder layer
};

}  // namespace

struct InferenceEngine::Impl {
  const Model& model;
  const AdapterSet* adapters;
  const ModelConfig& cfg;
  real_t sqrt_d;
  real_t ln_eps;

  std::unordered_map<const Parameter*, Tensor> adapted;

  MemoryList memory;
  bool mem_active = false;
  Tensor mem_pooled;  // L x d
  Tensor mem_tokens;  // total x d
  std::vector<int> mem_offsets;
  std::vector<MemLayerKv> mem_kv;

  Impl(const Model& m, const AdapterSet* ad)
      : model(m),
        adapters(ad),
        cfg(ModelForward::cfg(m)),
        sqrt_d(std::sqrt(static_cast<real_t>(ModelForward::cfg(m).d_model))),
        ln_eps(static_cast<real_t>(ModelForward::cfg(m).ln_eps)) {
    if (adapters != nullptr) {
      NWF_REQUIRE(!adapters->merged(),
                  "decode: merged adapters must be detached");
      for (const auto& e : adapters->entries()) {
        adapted.emplace(e.weight, adapters->effective_weight(e.host));
      }
    }
  }

  const real_t* W(const Parameter* p) const {
    auto it = adapted.find(p);
    return it != adapted.end() ? it->second.data.data()
                               : p->value.data.data();
  }

  // ----- shared row primitives (same kernels as the tape forward) -----

  void ln_row(const real_t* x, const LnParams& ln, real_t* out) const {
    kern::layernorm_row(x, cfg.d_model, ln_eps, out, nullptr, nullptr);
    const real_t* g = ln.gain->value.data.data();
    const real_t* b = ln.bias->value.data.data();
    for (int j = 0; j < cfg.d_model; ++j) out[j] = out[j] * g[j] + b[j];
  }

  void embed_row(const Parameter* table, int id, int position,
                 real_t* out) const {
    const Tensor& pos = ModelForward::pos(model);
    NWF_REQUIRE(position < pos.rows(), "decode: position beyond table");
    const real_t* e = table->value.row_ptr(id);
    const real_t* p = pos.row_ptr(position);
    for (int j = 0; j < cfg.d_model; ++j) out[j] = e[j] * sqrt_d + p[j];
  }

  // out (1 x m) = x (1 x n) * W (n x m).
  void linear_row(const real_t* x, const Parameter* w, real_t* out) const {
    const int n = w->value.rows(), m = w->value.cols();
    kern::matmul(x, 1, n, W(w), m, out);
  }

  // Multi-head attention of one query row against cached rows (stride d).
  // Scores use dot * scale then softmax, per head, exactly like the tape's
  // attention_scores + softmax_rows on sliced heads; probs for the last head
  // remain in ws.probs.
  void attend_row(const real_t* q, const real_t* kc, const real_t* vc,
                  int rows, int heads, real_t* ctx, Workspace& ws) const {
    const int d = cfg.d_model;
    const int dh = d / heads;
    const real_t sc = real_t(1) / std::sqrt(static_cast<real_t>(dh));
    ws.scores.resize(static_cast<size_t>(rows));
    ws.probs.resize(static_cast<size_t>(rows));
    for (int h = 0; h < heads; ++h) {
      const int off = h * dh;
      for (int j = 0; j < rows; ++j) {
        real_t s = kern::dot(q + off, kc + static_cast<size_t>(j) * d + off, dh);
        ws.scores[static_cast<size_t>(j)] = s * sc;
      }
      kern::softmax_row(ws.scores.data(), rows, ws.probs.data());
      real_t* c = ctx + off;
      std::fill(c, c + dh, real_t(0));
      for (int j = 0; j < rows; ++j) {
        kern::axpy(ws.probs[static_cast<size_t>(j)],
                   vc + static_cast<size_t>(j) * d + off, dh, c);
      }
    }
  }

  void ffn_row(const real_t* x, const FfnParams& p, Workspace& ws,
               real_t* out) const {
    const int ff = p.w1->value.cols();
    ws.h1.resize(static_cast<size_t>(ff));
    ws.h2.resize(static_cast<size_t>(ff));
    linear_row(x, p.w1, ws.h1.data());
    kern::gelu(ws.h1.data(), ff, ws.h2.data());
    linear_row(ws.h2.data(), p.w2, out);
  }

  // ----- full-sequence encoder (mirrors run_encoder_stack, no mask) -----

  Tensor run_encoder(const Parameter* table,
                     const std::vector<EncoderLayerParams>& layers,
                     const LnParams& ln_f, const std::vector<int>& ids) const {
    const int T = static_cast<int>(ids.size());
    const int d = cfg.d_model;
    const int heads = cfg.heads;
    const int dh = d / heads;
    const real_t sc = real_t(1) / std::sqrt(static_cast<real_t>(dh));
    Tensor x = Tensor::zeros({T, d});
    for (int i = 0; i < T; ++i) embed_row(table, ids[i], i, x.row_ptr(i));

    Tensor y = Tensor::zeros({T, d});
    Tensor q = Tensor::zeros({T, d});
    Tensor k = Tensor::zeros({T, d});
    Tensor v = Tensor::zeros({T, d});
    Tensor ctx = Tensor::zeros({T, d});
    Tensor tmp = Tensor::zeros({T, d});
    const int ff = cfg.ff;
    Tensor h1 = Tensor::zeros({T, ff});
    Tensor h2 = Tensor::zeros({T, ff});
    std::vector<real_t> srow(static_cast<size_t>(T));
    std::vector<real_t> prow(static_cast<size_t>(T));

    for (const auto& l : layers) {
      for (int i = 0; i < T; ++i) ln_row(x.row_ptr(i), l.ln1, y.row_ptr(i));
      kern::matmul(y.data.data(), T, d, W(l.self_attn.wq), d, q.data.data());
      kern::matmul(y.data.data(), T, d, W(l.self_attn.wk), d, k.data.data());
      kern::matmul(y.data.data(), T, d, W(l.self_attn.wv), d, v.data.data());
      for (int h = 0; h < heads; ++h) {
        const int off = h * dh;
        for (int i = 0; i < T; ++i) {
          for (int j = 0; j < T; ++j) {
            real_t s = kern::dot(q.row_ptr(i) + off, k.row_ptr(j) + off, dh);
            srow[static_cast<size_t>(j)] = s * sc;
          }
          kern::softmax_row(srow.data(), T, prow.data());
          real_t* c = ctx.row_ptr(i) + off;
          std::fill(c, c + dh, real_t(0));
          for (int j = 0; j < T; ++j) {
            kern::axpy(prow[static_cast<size_t>(j)], v.row_ptr(j) + off, dh, c);
          }
        }
      }
      kern::matmul(ctx.data.data(), T, d, W(l.self_attn.wo), d,
                   tmp.data.data());
      for (size_t i = 0; i < x.data.size(); ++i) x.data[i] += tmp.data[i];

      for (int i = 0; i < T; ++i) ln_row(x.row_ptr(i), l.ln2, y.row_ptr(i));
      kern::matmul(y.data.data(), T, d, W(l.ffn.w1), ff, h1.data.data());
      kern::gelu(h1.data.data(), T * ff, h2.data.data());
      kern::matmul(h2.data.data(), T, ff, W(l.ffn.w2), d, tmp.data.data());
      for (size_t i = 0; i < x.data.size(); ++i) x.data[i] += tmp.data[i];
    }
    for (int i = 0; i < T; ++i) ln_row(x.row_ptr(i), ln_f, y.row_ptr(i));
    return y;
  }

  // ----- per-utterance fixed attention inputs -----

  SrcContext make_src_context(const Tensor& enc) const {
    SrcContext sc;
    const int T = enc.rows(), d = cfg.d_model;
    auto project = [&](const Parameter* w) {
      Tensor out = Tensor::zeros({T, d});
      kern::matmul(enc.data.data(), T, d, W(w), d, out.data.data());
      return out;
    };
    for (const auto& l : ModelForward::dec_layers(model)) {
      sc.cross_k.push_back(project(l.cross_attn.wk));
      sc.cross_v.push_back(project(l.cross_attn.wv));
    }
    if (mem_active) {
      for (const auto& l : ModelForward::mem_dec_layers(model)) {
        sc.mem_cross_k.push_back(project(l.base.cross_attn.wk));
        sc.mem_cross_v.push_back(project(l.base.cross_attn.wv));
      }
    }
    return sc;
  }

  // ----- one decoder step -----

  CandState fresh_state() const {
    CandState st;
    st.base.resize(ModelForward::dec_layers(model).size());
    if (mem_active) st.mem.resize(ModelForward::mem_dec_layers(model).size());
    return st;
  }

  // Runs the three standard decoder sublayers in place on ws.x.
  void base_sublayers(const DecoderLayerParams& l, LayerCache& cache,
                      const Tensor& ck, const Tensor& cv, real_t* x,
                      Workspace& ws) const {
    const int d = cfg.d_model;
    ws.y.resize(static_cast<size_t>(d));
    ws.q.resize(static_cast<size_t>(d));
    ws.k.resize(static_cast<size_t>(d));
    ws.v.resize(static_cast<size_t>(d));
    ws.ctx.resize(static_cast<size_t>(d));
    ws.proj.resize(static_cast<size_t>(d));

    ln_row(x, l.ln1, ws.y.data());
    linear_row(ws.y.data(), l.self_attn.wq, ws.q.data());
    linear_row(ws.y.data(), l.self_attn.wk, ws.k.data());
    linear_row(ws.y.data(), l.self_attn.wv, ws.v.data());
    cache.append(ws.k.data(), ws.v.data(), d);
    attend_row(ws.q.data(), cache.k.data(), cache.v.data(), cache.rows,
               cfg.heads, ws.ctx.data(), ws);
    linear_row(ws.ctx.data(), l.self_attn.wo, ws.proj.data());
    for (int j = 0; j < d; ++j) x[j] += ws.proj[static_cast<size_t>(j)];

    ln_row(x, l.ln2, ws.y.data());
    linear_row(ws.y.data(), l.cross_attn.wq, ws.q.data());
    attend_row(ws.q.data(), ck.data.data(), cv.data.data(), ck.rows(),
               cfg.heads, ws.ctx.data(), ws);
    linear_row(ws.ctx.data(), l.cross_attn.wo, ws.proj.data());
    for (int j = 0; j < d; ++j) x[j] += ws.proj[static_cast<size_t>(j)];

    ln_row(x, l.ln3, ws.y.data());
    ffn_row(ws.y.data(), l.ffn, ws, ws.proj.data());
    for (int j = 0; j < d; ++j) x[j] += ws.proj[static_cast<size_t>(j)];
  }

  // Feeds one token at the given prefix position; fills ws.logits with the
  // combined next-token distribution's logits.
  void step(const SrcContext& sc, CandState& st, int token, int position,
            Workspace& ws) const {
    const int d = cfg.d_model;
    const int vocab = cfg.tgt_vocab;
    ws.x.resize(static_cast<size_t>(d));
    ws.logits.resize(static_cast<size_t>(vocab));

    embed_row(ModelForward::tgt_emb(model), token, position, ws.x.data());
    const auto& layers = ModelForward::dec_layers(model);
    for (size_t l = 0; l < layers.size(); ++l) {
      base_sublayers(layers[l], st.base[l], sc.cross_k[l], sc.cross_v[l],
                     ws.x.data(), ws);
    }
    ws.y.resize(static_cast<size_t>(d));
    ln_row(ws.x.data(), ModelForward::dec_ln_f(model), ws.y.data());
    linear_row(ws.y.data(), ModelForward::head(model), ws.logits.data());

    if (!mem_active) return;

    ws.mem_x.resize(static_cast<size_t>(d));
    ws.mem_logits.resize(static_cast<size_t>(vocab));
    real_t* x = ws.mem_x.data();
    embed_row(ModelForward::mem_dec_emb(model), token, position, x);
    const real_t sc_mem = real_t(1) / std::sqrt(static_cast<real_t>(d));
    const auto& mlayers = ModelForward::mem_dec_layers(model);
    const int entries = mem_pooled.rows();
    const int total = mem_tokens.rows();
    for (size_t l = 0; l < mlayers.size(); ++l) {
      const auto& ml = mlayers[l];
      base_sublayers(ml.base, st.mem[l], sc.mem_cross_k[l], sc.mem_cross_v[l],
                     x, ws);

      // Entry attention over pooled vectors; the distribution carries over
      // to the token sublayer.
      ln_row(x, ml.ln_mem, ws.y.data());
      linear_row(ws.y.data(), ml.mem_attn.wq, ws.q.data());
      attend_row(ws.q.data(), mem_kv[l].entry_k.data.data(),
                 mem_kv[l].entry_v.data.data(), entries, 1, ws.ctx.data(), ws);
      ws.entry_w = ws.probs;
      linear_row(ws.ctx.data(), ml.mem_attn.wo, ws.proj.data());
      for (int j = 0; j < d; ++j) x[j] += ws.proj[static_cast<size_t>(j)];

      // Within-entry token attention, weighted by the entry distribution.
      ln_row(x, ml.ln_tok, ws.y.data());
      linear_row(ws.y.data(), ml.tok_attn.wq, ws.q.data());
      ws.scores.resize(static_cast<size_t>(total));
      ws.probs.resize(static_cast<size_t>(total));
      const real_t* kt = mem_kv[l].token_k.data.data();
      const real_t* vt = mem_kv[l].token_v.data.data();
      for (int j = 0; j < total; ++j) {
        real_t s = kern::dot(ws.q.data(), kt + static_cast<size_t>(j) * d, d);
        ws.scores[static_cast<size_t>(j)] = s * sc_mem;
      }
      for (int e = 0; e < entries; ++e) {
        const int b = mem_offsets[static_cast<size_t>(e)];
        const int en = mem_offsets[static_cast<size_t>(e) + 1];
        kern::softmax_row(ws.scores.data() + b, en - b, ws.probs.data() + b);
        const real_t w = ws.entry_w[static_cast<size_t>(e)];
        for (int j = b; j < en; ++j) ws.probs[static_cast<size_t>(j)] *= w;
      }
      std::fill(ws.ctx.begin(), ws.ctx.end(), real_t(0));
      for (int j = 0; j < total; ++j) {
        kern::axpy(ws.probs[static_cast<size_t>(j)],
                   vt + static_cast<size_t>(j) * d, d, ws.ctx.data());
      }
      linear_row(ws.ctx.data(), ml.tok_attn.wo, ws.proj.data());
      for (int j = 0; j < d; ++j) x[j] += ws.proj[static_cast<size_t>(j)];
    }
    ln_row(x, ModelForward::mem_dec_ln_f(model), ws.y.data());
    linear_row(ws.y.data(), ModelForward::mem_head(model),
               ws.mem_logits.data());
    for (int j = 0; j < vocab; ++j) {
      ws.logits[static_cast<size_t>(j)] += ws.mem_logits[static_cast<size_t>(j)];
    }
  }

  Tensor encode_checked(const std::vector<int>& src) const {
    NWF_REQUIRE(!src.empty(), "decode: empty phoneme sequence");
    for (int id : src) {
      NWF_REQUIRE(id >= 0 && id < cfg.src_vocab, "decode: phoneme id out of range");
    }
    NWF_REQUIRE(static_cast<int>(src.size()) <= cfg.max_src_len,
                "decode: source too long");
    return run_encoder(ModelForward::src_emb(model),
                       ModelForward::enc_layers(model),
                       ModelForward::enc_ln_f(model), src);
  }
};

InferenceEngine::InferenceEngine(const Model& model, const AdapterSet* adapters)
    : impl_(new Impl(model, adapters)) {}

InferenceEngine::~InferenceEngine() = default;

void InferenceEngine::set_memory(const MemoryList& memory) {
  Impl& im = *impl_;
  im.memory = memory;
  im.mem_kv.clear();
  im.mem_offsets = {0};
  im.mem_active = !memory.empty();
  if (!im.mem_active) {
    im.mem_pooled = Tensor();
    im.mem_tokens = Tensor();
    return;
  }
  const int d = im.cfg.d_model;
  std::vector<Tensor> blocks;
  int total = 0;
  for (const auto& entry : memory.entries) {
    NWF_REQUIRE(!entry.empty(), "decode: empty memory entry");
    for (int id : entry) {
      NWF_REQUIRE(id >= 0 && id < im.cfg.tgt_vocab,
                  "decode: memory id out of range");
    }
    NWF_REQUIRE(static_cast<int>(entry.size()) <= im.cfg.max_entry_len,
                "decode: memory entry too long");
    blocks.push_back(im.run_encoder(ModelForward::mem_enc_emb(im.model),
                                    ModelForward::mem_enc_layers(im.model),
                                    ModelForward::mem_enc_ln_f(im.model),
                                    entry));
    total += blocks.back().rows();
    im.mem_offsets.push_back(total);
  }
  const int L = static_cast<int>(blocks.size());
  im.mem_pooled = Tensor::zeros({L, d});
  im.mem_tokens = Tensor::zeros({total, d});
  int row = 0;
  for (int e = 0; e < L; ++e) {
    const Tensor& b = blocks[static_cast<size_t>(e)];
    real_t* pooled = im.mem_pooled.row_ptr(e);
    for (int i = 0; i < b.rows(); ++i) {
      std::memcpy(im.mem_tokens.row_ptr(row++), b.row_ptr(i),
                  sizeof(real_t) * static_cast<size_t>(d));
      kern::axpy(1, b.row_ptr(i), d, pooled);
    }
    const real_t inv = real_t(1) / static_cast<real_t>(b.rows());
    for (int j = 0; j < d; ++j) pooled[j] *= inv;
  }
  for (const auto& l : ModelForward::mem_dec_layers(im.model)) {
    MemLayerKv kv;
    auto project = [&](const Tensor& in, const Parameter* w) {
      Tensor out = Tensor::zeros({in.rows(), d});
      kern::matmul(in.data.data(), in.rows(), d, im.W(w), d, out.data.data());
      return out;
    };
    kv.entry_k = project(im.mem_pooled, l.mem_attn.wk);
    kv.entry_v = project(im.mem_pooled, l.mem_attn.wv);
    kv.token_k = project(im.mem_tokens, l.tok_attn.wk);
    kv.token_v = project(im.mem_tokens, l.tok_attn.wv);
    im.mem_kv.push_back(std::move(kv));
  }
}

bool InferenceEngine::has_memory() const { return impl_->mem_active; }

Tensor InferenceEngine::prefix_logits(const std::vector<int>& phoneme_ids,
                                      const std::vector<int>& prefix) const {
  const Impl& im = *impl_;
  NWF_REQUIRE(!prefix.empty() && prefix[0] == Vocab::kBos,
              "decode: prefix must start with BOS");
  NWF_REQUIRE(static_cast<int>(prefix.size()) <= im.cfg.max_tgt_len,
              "decode: prefix too long");
  for (int id : prefix) {
    NWF_REQUIRE(id >= 0 && id < im.cfg.tgt_vocab,
                "decode: prefix id out of range");
  }
  Tensor enc = im.encode_checked(phoneme_ids);
  SrcContext sc = im.make_src_context(enc);
  CandState st = im.fresh_state();
  Workspace ws;
  Tensor out = Tensor::zeros({static_cast<int>(prefix.size()), im.cfg.tgt_vocab});
  for (size_t t = 0; t < prefix.size(); ++t) {
    im.step(sc, st, prefix[t], static_cast<int>(t), ws);
    std::memcpy(out.row_ptr(static_cast<int>(t)), ws.logits.data(),
                sizeof(real_t) * static_cast<size_t>(im.cfg.tgt_vocab));
  }
  return out;
}

namespace {

struct BeamCand {
  std::vector<int> tokens;
  double score = 0;
  std::vector<double> token_scores;
  CandState state;
  std::vector<real_t> logp;  // next-token log probabilities
};

struct Finished {
  std::vector<int> tokens;
  double score = 0;
  std::vector<double> token_scores;
};

}  // namespace

Hypothesis InferenceEngine::transcribe(const std::vector<int>& phoneme_ids,
                                       const DecodeConfig& cfg) const {
  const Impl& im = *impl_;
  cfg.validate();
  const int vocab = im.cfg.tgt_vocab;
  const int cap = cfg.max_len > 0
                      ? std::min(cfg.max_len, im.cfg.max_tgt_len - 1)
                      : im.cfg.max_tgt_len - 1;

  Tensor enc = im.encode_checked(phoneme_ids);
  SrcContext sc = im.make_src_context(enc);
  Workspace ws;

  auto compute_logp = [&](BeamCand& c, int token, int position) {
    im.step(sc, c.state, token, position, ws);
    c.logp.resize(static_cast<size_t>(vocab));
    kern::log_softmax_row(ws.logits.data(), vocab, c.logp.data());
  };

  std::vector<BeamCand> active(1);
  active[0].state = im.fresh_state();
  compute_logp(active[0], Vocab::kBos, 0);

  std::vector<Finished> finished;
  auto finish = [&](const BeamCand& c, double lp) {
    Finished f;
    f.tokens = c.tokens;
    f.tokens.push_back(Vocab::kEos);
    f.score = c.score + lp;
    f.token_scores = c.token_scores;
    f.token_scores.push_back(lp);
    finished.push_back(std::move(f));
  };

  while (!active.empty() &&
         static_cast<int>(finished.size()) < cfg.beam) {
    // (parent index, token, extension score)
    std::vector<std::pair<std::pair<int, int>, double>> ext;
    for (size_t ci = 0; ci < active.size(); ++ci) {
      const BeamCand& c = active[ci];
      if (static_cast<int>(c.tokens.size()) >= cap) {
        ext.push_back({{static_cast<int>(ci), Vocab::kEos},
                       c.score + static_cast<double>(c.logp[Vocab::kEos])});
        continue;
      }
      for (int tok = 0; tok < vocab; ++tok) {
        if (tok == Vocab::kPad || tok == Vocab::kBos || tok == Vocab::kUnk)
          continue;
        ext.push_back({{static_cast<int>(ci), tok},
                       c.score + static_cast<double>(c.logp[tok])});
      }
    }
    std::sort(ext.begin(), ext.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      if (a.first.second != b.first.second)
        return a.first.second < b.first.second;
      return a.first.first < b.first.first;
    });
    const size_t keep =
        std::min(ext.size(), static_cast<size_t>(cfg.beam));
    std::vector<BeamCand> next;
    for (size_t i = 0; i < keep; ++i) {
      const int ci = ext[i].first.first;
      const int tok = ext[i].first.second;
      const BeamCand& parent = active[static_cast<size_t>(ci)];
      const double lp = static_cast<double>(parent.logp[tok]);
      if (tok == Vocab::kEos) {
        finish(parent, lp);
        continue;
      }
      BeamCand c;
      c.tokens = parent.tokens;
      c.tokens.push_back(tok);
      c.score = parent.score + lp;
      c.token_scores = parent.token_scores;
      c.token_scores.push_back(lp);
      c.state = parent.state;
      compute_logp(c, tok, static_cast<int>(c.tokens.size()));
      next.push_back(std::move(c));
    }
    active = std::move(next);
  }

  NWF_REQUIRE(!finished.empty(), "decode: no finished hypothesis");
  auto rank = [&](const Finished& f) {
    return cfg.length_normalize
               ? f.score / static_cast<double>(f.tokens.size())
               : f.score;
  };
  const Finished* best = &finished[0];
  for (const auto& f : finished) {
    const double r = rank(f), rb = rank(*best);
    if (r > rb || (r == rb && f.tokens < best->tokens)) best = &f;
  }
  Hypothesis hyp;
  hyp.tokens = best->tokens;
  hyp.score = best->score;
  hyp.token_scores = best->token_scores;
  return hyp;
}

std::vector<Hypothesis> transcribe_dataset(
    const Model& model, const AdapterSet* adapters, const MemoryList& memory,
    const std::vector<Utterance>& utts, const Vocab& phoneme_vocab,
    const Vocab& char_vocab, const DecodeConfig& cfg, int threads) {
  InferenceEngine engine(model, adapters);
  engine.set_memory(memory);
  std::vector<Hypothesis> out(utts.size());
  parallel_for(static_cast<int>(utts.size()), threads, [&](int i) {
    const Utterance& u = utts[static_cast<size_t>(i)];
    Hypothesis h =
        engine.transcribe(phoneme_vocab.encode_symbols(u.phonemes), cfg);
    h.id = u.id;
    std::vector<int> chars = h.tokens;
    NWF_REQUIRE(!chars.empty() && chars.back() == Vocab::kEos,
                "decode: hypothesis must end with EOS");
    chars.pop_back();
    h.text = char_vocab.decode(chars);
    out[static_cast<size_t>(i)] = std::move(h);
  });
  return out;
}

void save_hypotheses(const std::string& path,
                     const std::vector<Hypothesis>& hyps) {
  std::string blob;
  for (const auto& h : hyps) {
    json row = {{"id", h.id}, {"hyp", h.text}, {"score", h.score}};
    blob += row.dump();
    blob += '\n';
  }
  write_text_file(path, blob);
}

std::vector<Hypothesis> load_hypotheses(const std::string& path) {
  std::vector<Hypothesis> out;
  for (const auto& line : read_lines(path, true)) {
    try {
      json row = json::parse(line);
      Hypothesis h;
      h.id = row.at("id").get<std::string>();
      h.text = row.at("hyp").get<std::string>();
      h.score = row.at("score").get<double>();
      out.push_back(std::move(h));
    } catch (const json::exception& e) {
      throw FormatError(std::string("hypotheses: bad row: ") + e.what());
    }
  }
  return out;
}

}  // namespace nwf
