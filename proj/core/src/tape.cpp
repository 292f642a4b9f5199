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

#include "nwf/tape.hpp"

#include <cmath>
#include <cstring>
#include <memory>
#include <string>

#include "nwf/kernels.hpp"

namespace nwf {

namespace {

Tape& same_tape(Value a, Value b) {
  NWF_REQUIRE(a.valid() && b.valid(), "op: invalid value handle");
  NWF_REQUIRE(a.tape == b.tape, "op: operands on different tapes");
  return *a.tape;
}

Tape& tape_of(Value a) {
  NWF_REQUIRE(a.valid(), "op: invalid value handle");
  return *a.tape;
}

// Appends a node; if the tape records and any input needs gradients, asks
// make_back(self_id) for the backward closure.
template <class MakeBack>
Value make(Tape& t, Tensor value, bool needs, MakeBack&& make_back) {
  int id = t.new_node(std::move(value), needs, nullptr);
  if (t.recording() && needs) t.set_back(id, make_back(id));
  return Value{&t, id};
}

}  // namespace

namespace {

void require_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) {
    throw NumericError(std::string("tape: non-finite value in ") + what);
  }
}

}  // namespace

Value Tape::leaf(const Parameter& p) {
  auto it = leaf_cache_.find(&p);
  if (it != leaf_cache_.end()) return Value{this, it->second};
  require_finite(p.value, p.name.c_str());
  Node node;
  node.value = p.value;
  node.needs = recording_ && p.trainable;
  node.param = &p;
  int id = static_cast<int>(nodes_.size());
  nodes_.push_back(std::move(node));
  leaf_cache_[&p] = id;
  return Value{this, id};
}

Value Tape::constant(Tensor t) {
  require_finite(t, "constant");
  Node node;
  node.value = std::move(t);
  int id = static_cast<int>(nodes_.size());
  nodes_.push_back(std::move(node));
  return Value{this, id};
}

int Tape::new_node(Tensor value, bool needs, std::function<void(Tape&)> back) {
  require_finite(value, "op output");
  Node node;
  node.value = std::move(value);
  node.needs = recording_ && needs;
  if (node.needs && back) node.back = std::move(back);
  int id = static_cast<int>(nodes_.size());
  nodes_.push_back(std::move(node));
  return id;
}

void Tape::set_back(int id, std::function<void(Tape&)> back) {
  Node& n = nodes_[check(id)];
  NWF_REQUIRE(n.needs, "tape: closure on a node that needs no gradient");
  n.back = std::move(back);
}

Tensor& Tape::grad_of(int id) {
  Node& n = nodes_[check(id)];
  if (!n.grad_alloc) {
    n.grad = Tensor::zeros(n.value.shape);
    n.grad_alloc = true;
  }
  return n.grad;
}

const Tensor& Tape::grad_of_const(int id) const {
  const Node& n = nodes_[check(id)];
  NWF_REQUIRE(n.grad_alloc, "tape: gradient not computed for node");
  return n.grad;
}

const Tensor& Value::grad() const {
  NWF_REQUIRE(valid(), "value: invalid handle");
  return tape->grad_of_const(id);
}

void Tape::backward(Value loss, real_t seed) {
  NWF_REQUIRE(recording_, "backward: tape is not recording");
  NWF_REQUIRE(loss.tape == this, "backward: loss from another tape");
  const Node& ln = nodes_[check(loss.id)];
  NWF_REQUIRE(ln.value.numel() == 1, "backward: loss must be scalar");
  grad_of(loss.id).data[0] = seed;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad_alloc && n.back) n.back(*this);
  }
}

void Tape::accumulate_param_grads(real_t scale) {
  // Iterate leaves in creation order so accumulation order is deterministic.
  for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
    Node& n = nodes_[i];
    if (!n.param || !n.param->trainable || !n.grad_alloc) continue;
    kern::axpy(scale, n.grad.data.data(), static_cast<int>(n.grad.data.size()),
               n.param->grad.data.data());
  }
}

std::vector<std::pair<const Parameter*, const Tensor*>> Tape::param_grads()
    const {
  std::vector<std::pair<const Parameter*, const Tensor*>> out;
  for (const auto& n : nodes_) {
    if (n.param && n.param->trainable && n.grad_alloc)
      out.emplace_back(n.param, &n.grad);
  }
  return out;
}

// ----- ops -----

Value add(Value a, Value b) {
  Tape& t = same_tape(a, b);
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  NWF_REQUIRE(av.shape == bv.shape, "add: shape mismatch");
  Tensor out = av;
  kern::axpy(1, bv.data.data(), static_cast<int>(bv.data.size()),
             out.data.data());
  bool needs = t.needs_grad(a.id) || t.needs_grad(b.id);
  int ai = a.id, bi = b.id;
  return make(t, std::move(out), needs, [ai, bi](int self) {
    return [ai, bi, self](Tape& tp) {
      const Tensor& g = tp.grad_of_const(self);
      const int n = static_cast<int>(g.data.size());
      if (tp.needs_grad(ai))
        kern::axpy(1, g.data.data(), n, tp.grad_of(ai).data.data());
      if (tp.needs_grad(bi))
        kern::axpy(1, g.data.data(), n, tp.grad_of(bi).data.data());
    };
  });
}

Value scale(Value a, real_t c) {
  Tape& t = tape_of(a);
  Tensor out = a.val();
  for (auto& x : out.data) x *= c;
  int ai = a.id;
  return make(t, std::move(out), t.needs_grad(ai), [ai, c](int self) {
    return [ai, c, self](Tape& tp) {
      const Tensor& g = tp.grad_of_const(self);
      kern::axpy(c, g.data.data(), static_cast<int>(g.data.size()),
                 tp.grad_of(ai).data.data());
    };
  });
}

Value matmul(Value a, Value b) {
  Tape& t = same_tape(a, b);
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  const int n = av.rows(), k = av.cols(), m = bv.cols();
  NWF_REQUIRE(bv.rows() == k, "matmul: inner dimension mismatch");
  Tensor out = Tensor::zeros({n, m});
  kern::matmul_acc(av.data.data(), n, k, bv.data.data(), m, out.data.data());
  bool needs = t.needs_grad(a.id) || t.needs_grad(b.id);
  int ai = a.id, bi = b.id;
  return make(t, std::move(out), needs, [ai, bi, n, k, m](int self) {
    return [ai, bi, n, k, m, self](Tape& tp) {
      const Tensor& g = tp.grad_of_const(self);
      const Tensor& av = tp.value_of(ai);
      const Tensor& bv = tp.value_of(bi);
      if (tp.needs_grad(ai)) {
        // dA += g * B^T
        Tensor& ga = tp.grad_of(ai);
        for (int i = 0; i < n; ++i) {
          const real_t* grow = g.data.data() + static_cast<size_t>(i) * m;
          real_t* garow = ga.data.data() + static_cast<size_t>(i) * k;
          for (int p = 0; p < k; ++p) {
            garow[p] += kern::dot(grow, bv.data.data() + static_cast<size_t>(p) * m, m);
          }
        }
      }
      if (tp.needs_grad(bi)) {
        // dB += A^T * g
        kern::matmul_tn_acc(av.data.data(), n, k, g.data.data(), m,
                            tp.grad_of(bi).data.data());
      }
    };
  });
}

Value gelu(Value a) {
  Tape& t = tape_of(a);
  const Tensor& av = a.val();
  Tensor out = Tensor::zeros(av.shape);
  kern::gelu(av.data.data(), static_cast<int>(av.data.size()),
             out.data.data());
  int ai = a.id;
  return make(t, std::move(out), t.needs_grad(ai), [ai](int self) {
    return [ai, self](Tape& tp) {
      const Tensor& g = tp.grad_of_const(self);
      const Tensor& av = tp.value_of(ai);
      kern::gelu_backward(av.data.data(), g.data.data(),
                          static_cast<int>(av.data.size()),
                          tp.grad_of(ai).data.data());
    };
  });
}

Value layer_norm(Value x, real_t eps) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.val();
  const int rows = xv.rows(), n = xv.cols();
  Tensor out = Tensor::zeros(xv.shape);
  auto rstd = std::make_shared<std::vector<real_t>>(rows);
  for (int i = 0; i < rows; ++i) {
    real_t mean;
    kern::layernorm_row(xv.row_ptr(i), n, eps, out.row_ptr(i), &mean,
                        &(*rstd)[i]);
  }
  int xi = x.id;
  return make(t, std::move(out), t.needs_grad(xi), [xi, rows, n, rstd](int self) {
    return [xi, rows, n, rstd, self](Tape& tp) {
      const Tensor& g = tp.grad_of_const(self);
      const Tensor& y = tp.value_of(self);
      Tensor& gx = tp.grad_of(xi);
      for (int i = 0; i < rows; ++i) {
        const real_t* gr = g.row_ptr(i);
        const real_t* yr = y.row_ptr(i);
        real_t* gxr = gx.row_ptr(i);
        real_t m1 = 0, m2 = 0;
        for (int j = 0; j < n; ++j) {
          m1 += gr[j];
          m2 += gr[j] * yr[j];
        }
        m1 /= static_cast<real_t>(n);
        m2 /= static_cast<real_t>(n);
        const real_t r = (*rstd)[i];
        for (int j = 0; j < n; ++j) {
          gxr[j] += r * (gr[j] - m1 - yr[j] * m2);
        }
      }
    };
  });
}

Value rowwise_affine(Value x, Value gain, Value bias) {
  Tape& t = same_tape(x, gain);
  same_tape(gain, bias);
  const Tensor& xv = x.val();
  const Tensor& gv = gain.val();
  const Tensor& bv = bias.val();
  const int rows = xv.rows(), n = xv.cols();
  NWF_REQUIRE(gv.numel() == n && bv.numel() == n,
              "rowwise_affine: gain/bias length mismatch");
  Tensor out = Tensor::zeros(xv.shape);
  for (int i = 0; i < rows; ++i) {
    const real_t* xr = xv.row_ptr(i);
    real_t* orow = out.row_ptr(i);
    for (int j = 0; j < n; ++j) orow[j] = xr[j] * gv.data[j] + bv.data[j];
  }
  bool needs = t.needs_grad(x.id) || t.needs_grad(gain.id) || t.needs_grad(bias.id);
  int xi = x.id, gi = gain.id, bi = bias.id;
  return make(t, std::move(out), needs, [xi, gi, bi, rows, n](int self) {
    return [xi, gi, bi, rows, n, self](Tape& tp) {
      const Tensor& g = tp.grad_of_const(self);
      const Tensor& xv = tp.value_of(xi);
      const Tensor& gv = tp.value_of(gi);
      if (tp.needs_grad(xi)) {
        Tensor& gx = tp.grad_of(xi);
        for (int i = 0; i < rows; ++i) {
          const real_t* gr = g.row_ptr(i);
          real_t* gxr = gx.row_ptr(i);
          for (int j = 0; j < n; ++j) gxr[j] += gr[j] * gv.data[j];
        }
      }
      if (tp.needs_grad(gi)) {
        Tensor& gg = tp.grad_of(gi);
        for (int i = 0; i < rows; ++i) {
          const real_t* gr = g.row_ptr(i);
          const real_t* xr = xv.row_ptr(i);
          for (int j = 0; j < n; ++j) gg.data[j] += gr[j] * xr[j];
        }
      }
      if (tp.needs_grad(bi)) {
        Tensor& gb = tp.grad_of(bi);
        for (int i = 0; i < rows; ++i) {
          kern::axpy(1, g.row_ptr(i), n, gb.data.data());
        }
      }
    };
  });
}

Value softmax_rows(Value x) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.val();
  const int rows = xv.rows(), n = xv.cols();
  Tensor out = Tensor::zeros(xv.shape);
  for (int i = 0; i < rows; ++i) {
    kern::softmax_row(xv.row_ptr(i), n, out.row_ptr(i));
  }
  if (t.softmax_row_sum_probe) {
    for (int i = 0; i < rows; ++i) {
      double s = 0;
      for (int j = 0; j < n; ++j) s += static_cast<double>(out.at(i, j));
      t.softmax_row_sum_probe->push_back(s);
    }
  }
  int xi = x.id;
  return make(t, std::move(out), t.needs_grad(xi), [xi, rows, n](int self) {
    return [xi, rows, n, self](Tape& tp) {
      const Tensor& g = tp.grad_of_const(self);
      const Tensor& y = tp.value_of(self);
      Tensor& gx = tp.grad_of(xi);
      for (int i = 0; i < rows; ++i) {
        const real_t* gr = g.row_ptr(i);
        const real_t* yr = y.row_ptr(i);
        real_t* gxr = gx.row_ptr(i);
        real_t dotv = 0;
        for (int j = 0; j < n; ++j) dotv += gr[j] * yr[j];
        for (int j = 0; j < n; ++j) gxr[j] += yr[j] * (gr[j] - dotv);
      }
    };
  });
}

Value embedding(Value table, const std::vector<int>& ids) {
  Tape& t = tape_of(table);
  const Tensor& tv = table.val();
  const int vocab = tv.rows(), d = tv.cols();
  Tensor out = Tensor::zeros({static_cast<int>(ids.size()), d});
  for (size_t i = 0; i < ids.size(); ++i) {
    NWF_REQUIRE(ids[i] >= 0 && ids[i] < vocab, "embedding: id out of range");
    std::memcpy(out.row_ptr(static_cast<int>(i)), tv.row_ptr(ids[i]),
                sizeof(real_t) * static_cast<size_t>(d));
  }
  int ti = table.id;
  auto ids_copy = std::make_shared<std::vector<int>>(ids);
  return make(t, std::move(out), t.needs_grad(ti), [ti, d, ids_copy](int self) {
    return [ti, d, ids_copy, self](Tape& tp) {
      const Tensor& g = tp.grad_of_const(self);
      Tensor& gt = tp.grad_of(ti);
      for (size_t i = 0; i < ids_copy->size(); ++i) {
        kern::axpy(1, g.row_ptr(static_cast<int>(i)), d,
                   gt.row_ptr((*ids_copy)[i]));
      }
    };
  });
}

Value concat_rows(const std::vector<Value>& parts) {
  NWF_REQUIRE(!parts.empty(), "concat_rows: no parts");
  Tape& t = tape_of(parts[0]);
  const int cols = parts[0].val().cols();
  int rows = 0;
  bool needs = false;
  for (const Value& p : parts) {
    same_tape(parts[0], p);
    NWF_REQUIRE(p.val().cols() == cols, "concat_rows: column mismatch");
    rows += p.val().rows();
    needs = needs || t.needs_grad(p.id);
  }
  Tensor out = Tensor::zeros({rows, cols});
  int r = 0;
  std::vector<std::pair<int, int>> spans;  // (node id, row count)
  for (const Value& p : parts) {
    const Tensor& pv = p.val();
    std::memcpy(out.row_ptr(r), pv.data.data(),
                sizeof(real_t) * pv.data.size());
    spans.emplace_back(p.id, pv.rows());
    r += pv.rows();
  }
  return make(t, std::move(out), needs, [spans, cols](int self) {
    return [spans, cols, self](Tape& tp) {
      const Tensor& g = tp.grad_of_const(self);
      int r = 0;
      for (auto [id, rc] : spans) {
        if (tp.needs_grad(id)) {
          kern::axpy(1, g.row_ptr(r), rc * cols, tp.grad_of(id).data.data());
        }
        r += rc;
      }
    };
  });
}

Value slice_rows(Value x, int r0, int r1) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.val();
  NWF_REQUIRE(0 <= r0 && r0 <= r1 && r1 <= xv.rows(),
              "slice_rows: bad range");
  const int cols = xv.cols();
  Tensor out = Tensor::zeros({r1 - r0, cols});
  std::memcpy(out.data.data(), xv.row_ptr(r0),
              sizeof(real_t) * out.data.size());
  int xi = x.id;
  return make(t, std::move(out), t.needs_grad(xi), [xi, r0, r1, cols](int self) {
    return [xi, r0, r1, cols, self](Tape& tp) {
      const Tensor& g = tp.grad_of_const(self);
      Tensor& gx = tp.grad_of(xi);
      kern::axpy(1, g.data.data(), (r1 - r0) * cols, gx.row_ptr(r0));
    };
  });
}

Value concat_cols(const std::vector<Value>& parts) {
  NWF_REQUIRE(!parts.empty(), "concat_cols: no parts");
  Tape& t = tape_of(parts[0]);
  const int rows = parts[0].val().rows();
  int cols = 0;
  bool needs = false;
  for (const Value& p : parts) {
    same_tape(parts[0], p);
    NWF_REQUIRE(p.val().rows() == rows, "concat_cols: row mismatch");
    cols += p.val().cols();
    needs = needs || t.needs_grad(p.id);
  }
  Tensor out = Tensor::zeros({rows, cols});
  std::vector<std::tuple<int, int, int>> spans;  // (node id, col offset, width)
  int c = 0;
  for (const Value& p : parts) {
    const Tensor& pv = p.val();
    const int w = pv.cols();
    for (int i = 0; i < rows; ++i) {
      std::memcpy(out.row_ptr(i) + c, pv.row_ptr(i),
                  sizeof(real_t) * static_cast<size_t>(w));
    }
    spans.emplace_back(p.id, c, w);
    c += w;
  }
  return make(t, std::move(out), needs, [spans, rows](int self) {
    return [spans, rows, self](Tape& tp) {
      const Tensor& g = tp.grad_of_const(self);
      for (auto [id, off, w] : spans) {
        if (!tp.needs_grad(id)) continue;
        Tensor& gp = tp.grad_of(id);
        for (int i = 0; i < rows; ++i) {
          kern::axpy(1, g.row_ptr(i) + off, w, gp.row_ptr(i));
        }
      }
    };
  });
}

Value slice_cols(Value x, int c0, int c1) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.val();
  NWF_REQUIRE(0 <= c0 && c0 <= c1 && c1 <= xv.cols(),
              "slice_cols: bad range");
  const int rows = xv.rows(), w = c1 - c0;
  Tensor out = Tensor::zeros({rows, w});
  for (int i = 0; i < rows; ++i) {
    std::memcpy(out.row_ptr(i), xv.row_ptr(i) + c0,
                sizeof(real_t) * static_cast<size_t>(w));
  }
  int xi = x.id;
  return make(t, std::move(out), t.needs_grad(xi), [xi, c0, w, rows](int self) {
    return [xi, c0, w, rows, self](Tape& tp) {
      const Tensor& g = tp.grad_of_const(self);
      Tensor& gx = tp.grad_of(xi);
      for (int i = 0; i < rows; ++i) {
        kern::axpy(1, g.row_ptr(i), w, gx.row_ptr(i) + c0);
      }
    };
  });
}

Value mean_rows(Value x) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.val();
  const int rows = xv.rows(), n = xv.cols();
  NWF_REQUIRE(rows > 0, "mean_rows: empty input");
  Tensor out = Tensor::zeros({1, n});
  for (int i = 0; i < rows; ++i) {
    kern::axpy(1, xv.row_ptr(i), n, out.data.data());
  }
  const real_t inv = real_t(1) / static_cast<real_t>(rows);
  for (auto& v : out.data) v *= inv;
  int xi = x.id;
  return make(t, std::move(out), t.needs_grad(xi), [xi, rows, n, inv](int self) {
    return [xi, rows, n, inv, self](Tape& tp) {
      const Tensor& g = tp.grad_of_const(self);
      Tensor& gx = tp.grad_of(xi);
      for (int i = 0; i < rows; ++i) {
        kern::axpy(inv, g.data.data(), n, gx.row_ptr(i));
      }
    };
  });
}

Value attention_scores(Value q, Value k, real_t scale_factor,
                       const Tensor* mask) {
  Tape& t = same_tape(q, k);
  const Tensor& qv = q.val();
  const Tensor& kv = k.val();
  const int tq = qv.rows(), dh = qv.cols(), tk = kv.rows();
  NWF_REQUIRE(kv.cols() == dh, "attention_scores: depth mismatch");
  if (mask) {
    NWF_REQUIRE(mask->rows() == tq && mask->cols() == tk,
                "attention_scores: mask shape mismatch");
  }
  Tensor out = Tensor::zeros({tq, tk});
  kern::matmul_nt(qv.data.data(), tq, dh, kv.data.data(), tk,
                  out.data.data());
  for (auto& v : out.data) v *= scale_factor;
  if (mask) {
    kern::axpy(1, mask->data.data(), tq * tk, out.data.data());
  }
  bool needs = t.needs_grad(q.id) || t.needs_grad(k.id);
  int qi = q.id, ki = k.id;
  return make(t, std::move(out), needs,
              [qi, ki, tq, dh, tk, scale_factor](int self) {
    return [qi, ki, tq, dh, tk, scale_factor, self](Tape& tp) {
      const Tensor& g = tp.grad_of_const(self);
      Tensor gs = g;
      for (auto& v : gs.data) v *= scale_factor;
      if (tp.needs_grad(qi)) {
        // dQ += gs * K
        kern::matmul_acc(gs.data.data(), tq, tk,
                         tp.value_of(ki).data.data(), dh,
                         tp.grad_of(qi).data.data());
      }
      if (tp.needs_grad(ki)) {
        // dK += gs^T * Q
        kern::matmul_tn_acc(gs.data.data(), tq, tk,
                            tp.value_of(qi).data.data(), dh,
                            tp.grad_of(ki).data.data());
      }
    };
  });
}

Value entry_softmax_combine(Value scores, Value entry_weights,
                            const std::vector<int>& offsets) {
  Tape& t = same_tape(scores, entry_weights);
  const Tensor& sv = scores.val();
  const Tensor& wv = entry_weights.val();
  const int rows = sv.rows(), total = sv.cols();
  const int entries = static_cast<int>(offsets.size()) - 1;
  NWF_REQUIRE(entries >= 1, "entry_softmax_combine: no entries");
  NWF_REQUIRE(wv.rows() == rows && wv.cols() == entries,
              "entry_softmax_combine: weight shape mismatch");
  NWF_REQUIRE(offsets.front() == 0 && offsets.back() == total,
              "entry_softmax_combine: offsets must span all columns");
  for (int l = 0; l < entries; ++l) {
    NWF_REQUIRE(offsets[l] < offsets[l + 1],
                "entry_softmax_combine: empty entry block");
  }
  Tensor out = Tensor::zeros({rows, total});
  for (int i = 0; i < rows; ++i) {
    for (int l = 0; l < entries; ++l) {
      const int b = offsets[l], e = offsets[l + 1];
      kern::softmax_row(sv.row_ptr(i) + b, e - b, out.row_ptr(i) + b);
      const real_t w = wv.at(i, l);
      for (int j = b; j < e; ++j) out.at(i, j) *= w;
    }
  }
  if (t.softmax_row_sum_probe) {
    for (int i = 0; i < rows; ++i) {
      double s = 0;
      for (int j = 0; j < total; ++j) s += static_cast<double>(out.at(i, j));
      t.softmax_row_sum_probe->push_back(s);
    }
  }
  bool needs = t.needs_grad(scores.id) || t.needs_grad(entry_weights.id);
  int si = scores.id, wi = entry_weights.id;
  auto offs = std::make_shared<std::vector<int>>(offsets);
  return make(t, std::move(out), needs,
              [si, wi, rows, entries, offs](int self) {
    return [si, wi, rows, entries, offs, self](Tape& tp) {
      const Tensor& g = tp.grad_of_const(self);
      const Tensor& sv = tp.value_of(si);
      const Tensor& wv = tp.value_of(wi);
      const bool ns = tp.needs_grad(si);
      const bool nw = tp.needs_grad(wi);
      std::vector<real_t> p;
      for (int i = 0; i < rows; ++i) {
        for (int l = 0; l < entries; ++l) {
          const int b = (*offs)[l], e = (*offs)[l + 1], n = e - b;
          p.resize(static_cast<size_t>(n));
          kern::softmax_row(sv.row_ptr(i) + b, n, p.data());
          const real_t* gr = g.row_ptr(i) + b;
          real_t dotv = 0;
          for (int j = 0; j < n; ++j) dotv += gr[j] * p[j];
          if (nw) tp.grad_of(wi).at(i, l) += dotv;
          if (ns) {
            const real_t w = wv.at(i, l);
            real_t* gs = tp.grad_of(si).row_ptr(i) + b;
            for (int j = 0; j < n; ++j) {
              gs[j] += w * p[j] * (gr[j] - dotv);
            }
          }
        }
      }
    };
  });
}

Value low_rank_add(Value w, const std::vector<Value>& rs,
                   const std::vector<Value>& ss) {
  Tape& t = tape_of(w);
  NWF_REQUIRE(rs.size() == ss.size(), "low_rank_add: factor count mismatch");
  const Tensor& wv = w.val();
  const int n = wv.rows(), m = wv.cols();
  Tensor out = wv;
  bool needs = t.needs_grad(w.id);
  std::vector<std::pair<int, int>> factors;
  for (size_t i = 0; i < rs.size(); ++i) {
    same_tape(w, rs[i]);
    same_tape(w, ss[i]);
    const Tensor& rv = rs[i].val();
    const Tensor& sv = ss[i].val();
    NWF_REQUIRE(rv.numel() == n, "low_rank_add: r length mismatch");
    NWF_REQUIRE(sv.numel() == m, "low_rank_add: s length mismatch");
    for (int p = 0; p < n; ++p) {
      kern::axpy(rv.data[static_cast<size_t>(p)], sv.data.data(), m,
                 out.row_ptr(p));
    }
    needs = needs || t.needs_grad(rs[i].id) || t.needs_grad(ss[i].id);
    factors.emplace_back(rs[i].id, ss[i].id);
  }
  int wi = w.id;
  return make(t, std::move(out), needs, [wi, factors, n, m](int self) {
    return [wi, factors, n, m, self](Tape& tp) {
      const Tensor& g = tp.grad_of_const(self);
      if (tp.needs_grad(wi)) {
        kern::axpy(1, g.data.data(), n * m, tp.grad_of(wi).data.data());
      }
      for (auto [ri, si] : factors) {
        const Tensor& rv = tp.value_of(ri);
        const Tensor& sv = tp.value_of(si);
        if (tp.needs_grad(ri)) {
          Tensor& gr = tp.grad_of(ri);
          for (int p = 0; p < n; ++p) {
            gr.data[static_cast<size_t>(p)] +=
                kern::dot(g.row_ptr(p), sv.data.data(), m);
          }
        }
        if (tp.needs_grad(si)) {
          Tensor& gs = tp.grad_of(si);
          for (int p = 0; p < n; ++p) {
            kern::axpy(rv.data[static_cast<size_t>(p)], g.row_ptr(p), m,
                       gs.data.data());
          }
        }
      }
    };
  });
}

Value cross_entropy_sum(Value logits, const std::vector<int>& targets,
                        const std::vector<real_t>& weights) {
  Tape& t = tape_of(logits);
  const Tensor& lv = logits.val();
  const int rows = lv.rows(), vocab = lv.cols();
  NWF_REQUIRE(static_cast<int>(targets.size()) == rows,
              "cross_entropy_sum: target count mismatch");
  NWF_REQUIRE(weights.empty() || static_cast<int>(weights.size()) == rows,
              "cross_entropy_sum: weight count mismatch");
  auto probs = std::make_shared<Tensor>(Tensor::zeros(lv.shape));
  std::vector<real_t> lp(static_cast<size_t>(vocab));
  double loss = 0;
  for (int i = 0; i < rows; ++i) {
    NWF_REQUIRE(targets[i] >= 0 && targets[i] < vocab,
                "cross_entropy_sum: target out of range");
    kern::log_softmax_row(lv.row_ptr(i), vocab, lp.data());
    const real_t w = weights.empty() ? real_t(1) : weights[static_cast<size_t>(i)];
    loss -= static_cast<double>(w) *
            static_cast<double>(lp[static_cast<size_t>(targets[i])]);
    real_t* pr = probs->row_ptr(i);
    for (int j = 0; j < vocab; ++j) pr[j] = std::exp(lp[static_cast<size_t>(j)]);
  }
  Tensor out = Tensor::zeros({1, 1});
  out.data[0] = static_cast<real_t>(loss);
  int li = logits.id;
  auto tg = std::make_shared<std::vector<int>>(targets);
  auto wt = std::make_shared<std::vector<real_t>>(weights);
  return make(t, std::move(out), t.needs_grad(li),
              [li, rows, vocab, probs, tg, wt](int self) {
    return [li, rows, vocab, probs, tg, wt, self](Tape& tp) {
      const real_t seed = tp.grad_of_const(self).data[0];
      Tensor& gl = tp.grad_of(li);
      for (int i = 0; i < rows; ++i) {
        const real_t w = wt->empty() ? real_t(1) : (*wt)[static_cast<size_t>(i)];
        const real_t c = seed * w;
        const real_t* pr = probs->row_ptr(i);
        real_t* gr = gl.row_ptr(i);
        for (int j = 0; j < vocab; ++j) gr[j] += c * pr[j];
        gr[(*tg)[static_cast<size_t>(i)]] -= c;
      }
    };
  });
}

Value cross_entropy(Value logits, int target) {
  const Tensor& lv = logits.val();
  NWF_REQUIRE(lv.rank() == 1 || lv.rows() == 1,
              "cross_entropy: logits must be a single distribution");
  return cross_entropy_sum(logits, {target});
}

}  // namespace nwf
