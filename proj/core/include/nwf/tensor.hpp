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

#ifndef NWF_TENSOR_HPP_
#define NWF_TENSOR_HPP_

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "nwf/common.hpp"

namespace nwf {

// Dense row-major tensor. The model only ever needs rank 1 and rank 2, but
// shape is kept general for serialization.
struct Tensor {
  std::vector<int> shape;
  std::vector<real_t> data;

  Tensor() = default;

  static int64_t numel_of(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
      NWF_REQUIRE(d >= 0, "tensor: negative dimension");
      n *= d;
    }
    return n;
  }

  static Tensor zeros(std::vector<int> shape) {
    Tensor t;
    t.shape = std::move(shape);
    t.data.assign(static_cast<size_t>(numel_of(t.shape)), real_t(0));
    return t;
  }

  static Tensor full(std::vector<int> shape, real_t value) {
    Tensor t = zeros(std::move(shape));
    for (auto& x : t.data) x = value;
    return t;
  }

  static Tensor row(std::vector<real_t> values) {
    Tensor t;
    t.shape = {1, static_cast<int>(values.size())};
    t.data = std::move(values);
    return t;
  }

  static Tensor vec(std::vector<real_t> values) {
    Tensor t;
    t.shape = {static_cast<int>(values.size())};
    t.data = std::move(values);
    return t;
  }

  static Tensor from_rows(int rows, int cols, std::vector<real_t> values) {
    NWF_REQUIRE(static_cast<int64_t>(values.size()) ==
                    static_cast<int64_t>(rows) * cols,
                "tensor: value count does not match shape");
    Tensor t;
    t.shape = {rows, cols};
    t.data = std::move(values);
    return t;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }

  // 2-D accessors. Rank-1 tensors are treated as a single row.
  int rows() const { return rank() == 2 ? shape[0] : 1; }
  int cols() const {
    if (rank() == 2) return shape[1];
    NWF_REQUIRE(rank() == 1, "tensor: cols() needs rank 1 or 2");
    return shape[0];
  }

  real_t& at(int i, int j) { return data[static_cast<size_t>(i) * cols() + j]; }
  real_t at(int i, int j) const {
    return data[static_cast<size_t>(i) * cols() + j];
  }
  real_t& at(int i) { return data[static_cast<size_t>(i)]; }
  real_t at(int i) const { return data[static_cast<size_t>(i)]; }

  real_t* row_ptr(int i) { return data.data() + static_cast<size_t>(i) * cols(); }
  const real_t* row_ptr(int i) const {
    return data.data() + static_cast<size_t>(i) * cols();
  }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  bool all_finite() const {
    for (real_t x : data) {
      if (!std::isfinite(static_cast<double>(x))) return false;
    }
    return true;
  }

  void fill(real_t value) {
    for (auto& x : data) x = value;
  }

  real_t max_abs() const {
    real_t m = 0;
    for (real_t x : data) {
      real_t a = x < 0 ? -x : x;
      if (a > m) m = a;
    }
    return m;
  }
};

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) return false;
  for (size_t i = 0; i < a.data.size(); ++i) {
    if (a.data[i] != b.data[i]) return false;
  }
  return true;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  NWF_REQUIRE(a.shape == b.shape, "max_abs_diff: shape mismatch");
  double m = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = std::abs(static_cast<double>(a.data[i]) -
                        static_cast<double>(b.data[i]));
    if (d > m) m = d;
  }
  return m;
}

}  // namespace nwf

#endif  // NWF_TENSOR_HPP_
