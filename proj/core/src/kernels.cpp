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

#include "nwf/kernels.hpp"

#include <cmath>
#include <cstring>

namespace nwf::kern {

void matmul(const real_t* a, int n, int k, const real_t* b, int m,
            real_t* out) {
  std::memset(out, 0, sizeof(real_t) * static_cast<size_t>(n) * m);
  matmul_acc(a, n, k, b, m, out);
}

void matmul_acc(const real_t* a, int n, int k, const real_t* b, int m,
                real_t* out) {
  for (int i = 0; i < n; ++i) {
    const real_t* arow = a + static_cast<size_t>(i) * k;
    real_t* orow = out + static_cast<size_t>(i) * m;
    for (int p = 0; p < k; ++p) {
      const real_t c = arow[p];
      const real_t* brow = b + static_cast<size_t>(p) * m;
      for (int j = 0; j < m; ++j) orow[j] += c * brow[j];
    }
  }
}

real_t dot(const real_t* a, const real_t* b, int n) {
  real_t s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

void matmul_nt(const real_t* a, int n, int k, const real_t* b, int m,
               real_t* out) {
  for (int i = 0; i < n; ++i) {
    const real_t* arow = a + static_cast<size_t>(i) * k;
    real_t* orow = out + static_cast<size_t>(i) * m;
    for (int j = 0; j < m; ++j) {
      orow[j] = dot(arow, b + static_cast<size_t>(j) * k, k);
    }
  }
}

void matmul_tn_acc(const real_t* a, int n, int k, const real_t* c, int m,
                   real_t* out) {
  for (int i = 0; i < n; ++i) {
    const real_t* arow = a + static_cast<size_t>(i) * k;
    const real_t* crow = c + static_cast<size_t>(i) * m;
    for (int p = 0; p < k; ++p) {
      const real_t s = arow[p];
      real_t* orow = out + static_cast<size_t>(p) * m;
      for (int j = 0; j < m; ++j) orow[j] += s * crow[j];
    }
  }
}

void axpy(real_t alpha, const real_t* x, int n, real_t* y) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void softmax_row(const real_t* x, int n, real_t* out) {
  real_t mx = x[0];
  for (int i = 1; i < n; ++i) {
    if (x[i] > mx) mx = x[i];
  }
  real_t sum = 0;
  for (int i = 0; i < n; ++i) {
    out[i] = std::exp(x[i] - mx);
    sum += out[i];
  }
  const real_t inv = real_t(1) / sum;
  for (int i = 0; i < n; ++i) out[i] *= inv;
}

void log_softmax_row(const real_t* x, int n, real_t* out) {
  real_t mx = x[0];
  for (int i = 1; i < n; ++i) {
    if (x[i] > mx) mx = x[i];
  }
  real_t sum = 0;
  for (int i = 0; i < n; ++i) sum += std::exp(x[i] - mx);
  const real_t lse = mx + std::log(sum);
  for (int i = 0; i < n; ++i) out[i] = x[i] - lse;
}

void layernorm_row(const real_t* x, int n, real_t eps, real_t* out,
                   real_t* save_mean, real_t* save_rstd) {
  real_t mean = 0;
  for (int i = 0; i < n; ++i) mean += x[i];
  mean /= static_cast<real_t>(n);
  real_t var = 0;
  for (int i = 0; i < n; ++i) {
    const real_t d = x[i] - mean;
    var += d * d;
  }
  var /= static_cast<real_t>(n);
  const real_t rstd = real_t(1) / std::sqrt(var + eps);
  for (int i = 0; i < n; ++i) out[i] = (x[i] - mean) * rstd;
  if (save_mean) *save_mean = mean;
  if (save_rstd) *save_rstd = rstd;
}

void gelu(const real_t* x, int n, real_t* out) {
  constexpr real_t kInvSqrt2 = real_t(0.7071067811865475244);
  for (int i = 0; i < n; ++i) {
    out[i] = real_t(0.5) * x[i] *
             (real_t(1) + std::erf(x[i] * kInvSqrt2));
  }
}

void gelu_backward(const real_t* x, const real_t* dy, int n, real_t* dx) {
  constexpr real_t kInvSqrt2 = real_t(0.7071067811865475244);
  constexpr real_t kInvSqrt2Pi = real_t(0.3989422804014326779);
  for (int i = 0; i < n; ++i) {
    const real_t cdf =
        real_t(0.5) * (real_t(1) + std::erf(x[i] * kInvSqrt2));
    const real_t pdf = kInvSqrt2Pi * std::exp(real_t(-0.5) * x[i] * x[i]);
    dx[i] += dy[i] * (cdf + x[i] * pdf);
  }
}

}  // namespace nwf::kern
