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

#ifndef NWF_TAPE_HPP_
#define NWF_TAPE_HPP_

#include <functional>
#include <unordered_map>
#include <vector>

#include "nwf/param.hpp"
#include "nwf/tensor.hpp"

namespace nwf {

class Tape;

// Handle to a node on a tape. Cheap to copy; invalid when default constructed.
struct Value {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor& val() const;
  const Tensor& grad() const;
  int rows() const;
  int cols() const;
};

// Reverse-mode automatic differentiation tape. Operations append nodes during
// the forward pass; backward() replays recorded closures in reverse order.
// Gradients accumulate additively into node buffers and finally into
// Parameter::grad for trainable leaves; callers are responsible for zeroing
// parameter gradients between steps.
//
// A tape constructed with recording=false evaluates values only: no closures
// are recorded and backward() is rejected. Evaluation tapes never write to
// parameters, so a model can be shared read-only across threads.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  int size() const { return static_cast<int>(nodes_.size()); }

  // Leaf over a parameter. The same parameter maps to the same node within
  // one tape, so repeated uses share storage and gradients sum correctly.
  Value leaf(const Parameter& p);

  // Leaf over a plain tensor with no gradient.
  Value constant(Tensor t);

  // Runs the backward pass from a scalar loss node. seed is the incoming
  // gradient of the loss (normally 1). Fills node gradient buffers only;
  // parameter gradients are applied by accumulate_param_grads so callers can
  // control reduction order across items.
  void backward(Value loss, real_t seed = 1);

  // p->grad += scale * leaf_grad for every trainable parameter leaf, in leaf
  // creation order. Call after backward().
  void accumulate_param_grads(real_t scale = 1);

  // Read-only view of (parameter, leaf gradient) pairs after backward().
  std::vector<std::pair<const Parameter*, const Tensor*>> param_grads() const;

  // --- Introspection / op plumbing ---
  const Tensor& value_of(int id) const { return nodes_[check(id)].value; }
  const Tensor& grad_of_const(int id) const;
  bool has_grad(int id) const { return nodes_[check(id)].grad_alloc; }
  bool needs_grad(int id) const { return nodes_[check(id)].needs; }

  // Gradient buffer of a node, allocated (zeroed) on first use.
  Tensor& grad_of(int id);

  // Appends a node. back may be empty; it is dropped on non-recording tapes.
  int new_node(Tensor value, bool needs, std::function<void(Tape&)> back);

  // Attaches the backward closure of a freshly created node (two-phase
  // creation lets the closure capture its own node id).
  void set_back(int id, std::function<void(Tape&)> back);

  // Test hook: when set, every softmax-style op appends its attention row
  // sums here so invariants can be checked on live forward passes.
  std::vector<double>* softmax_row_sum_probe = nullptr;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs = false;
    bool grad_alloc = false;
    const Parameter* param = nullptr;
    std::function<void(Tape&)> back;
  };

  int check(int id) const {
    NWF_REQUIRE(id >= 0 && id < static_cast<int>(nodes_.size()),
                "tape: node id out of range");
    return id;
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> leaf_cache_;
  bool recording_;
};

inline const Tensor& Value::val() const {
  NWF_REQUIRE(valid(), "value: invalid handle");
  return tape->value_of(id);
}
inline int Value::rows() const { return val().rows(); }
inline int Value::cols() const { return val().cols(); }

// ----- Operations -----
// All operations require their operands to live on the same tape.

// Elementwise sum of two same-shape tensors.
Value add(Value a, Value b);

// Scalar multiple.
Value scale(Value a, real_t c);

// out = a (n x k) * b (k x m).
Value matmul(Value a, Value b);

// Exact GELU, elementwise.
Value gelu(Value a);

// Row-wise layer norm without affine parameters.
Value layer_norm(Value x, real_t eps);

// out[i][j] = x[i][j] * gain[j] + bias[j]. gain/bias are length-cols vectors.
Value rowwise_affine(Value x, Value gain, Value bias);

// Row-wise softmax.
Value softmax_rows(Value x);

// Gather rows of a (vocab x d) table.
Value embedding(Value table, const std::vector<int>& ids);

Value concat_rows(const std::vector<Value>& parts);
Value slice_rows(Value x, int r0, int r1);
Value concat_cols(const std::vector<Value>& parts);
Value slice_cols(Value x, int c0, int c1);

// Mean over rows, giving a 1 x cols tensor.
Value mean_rows(Value x);

// out = scale * q * k^T + mask (mask optional, additive, q.rows x k.rows).
Value attention_scores(Value q, Value k, real_t scale, const Tensor* mask);

// Hierarchical attention combine. scores is (T x total_tokens) where columns
// group into entries via offsets (offsets.size() == L + 1), entry_weights is
// (T x L). For each row t and entry l the block gets
//   entry_weights[t][l] * softmax(scores[t, offsets[l]:offsets[l+1]]).
// When entry_weights rows sum to one the combined row sums to one, giving a
// single distribution over all memory tokens.
Value entry_softmax_combine(Value scores, Value entry_weights,
                            const std::vector<int>& offsets);

// w + sum_i r_i * s_i^T with r_i (n x 1) and s_i (m x 1).
Value low_rank_add(Value w, const std::vector<Value>& rs,
                   const std::vector<Value>& ss);

// Sum over positions of weight[t] * -log softmax(logits[t])[targets[t]].
// weights may be empty (all ones). Returns a scalar (1 x 1).
Value cross_entropy_sum(Value logits, const std::vector<int>& targets,
                        const std::vector<real_t>& weights = {});

// Cross entropy of a single distribution: logits is a length-V vector (rank 1
// or 1 x V) and target an index into it.
Value cross_entropy(Value logits, int target);

}  // namespace nwf

#endif  // NWF_TAPE_HPP_
