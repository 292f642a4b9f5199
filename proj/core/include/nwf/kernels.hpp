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

#ifndef NWF_KERNELS_HPP_
#define NWF_KERNELS_HPP_

#include "nwf/common.hpp"

// Floating-point kernels shared by the training graph and the incremental
// decoder. Everything lives out of line in a single translation unit so both
// callers execute literally the same machine code: per output element the
// reduction order is fixed (ascending inner index) and independent of how
// many rows the caller processes, which is what makes incremental decoding
// bit-identical to full-sequence evaluation.

namespace nwf::kern {

// out = a (n x k) * b (k x m), overwriting out.
void matmul(const real_t* a, int n, int k, const real_t* b, int m, real_t* out);

// out += a (n x k) * b (k x m).
void matmul_acc(const real_t* a, int n, int k, const real_t* b, int m,
                real_t* out);

// out = a (n x k) * b^T where b is (m x k), giving n x m. Used for attention
// scores (rows attend over rows).
void matmul_nt(const real_t* a, int n, int k, const real_t* b, int m,
               real_t* out);

// out += a^T * c where a is (n x k) and c is (n x m), giving k x m. Used for
// weight gradients.
void matmul_tn_acc(const real_t* a, int n, int k, const real_t* c, int m,
                   real_t* out);

// y += alpha * x.
void axpy(real_t alpha, const real_t* x, int n, real_t* y);

// Row softmax: out = softmax(x) for one row of length n.
void softmax_row(const real_t* x, int n, real_t* out);

// Row log-softmax.
void log_softmax_row(const real_t* x, int n, real_t* out);

// Row layer norm without affine parameters, epsilon inside the square root.
// mean/rstd outputs are optional (needed by the backward pass).
void layernorm_row(const real_t* x, int n, real_t eps, real_t* out,
                   real_t* save_mean, real_t* save_rstd);

// Exact (erf-based) GELU.
void gelu(const real_t* x, int n, real_t* out);

// dx += dy * gelu'(x).
void gelu_backward(const real_t* x, const real_t* dy, int n, real_t* dx);

// Dot product with a fixed 4-accumulator reduction order.
real_t dot(const real_t* a, const real_t* b, int n);

}  // namespace nwf::kern

#endif  // NWF_KERNELS_HPP_
