// Copyright 2026 The semisup Authors
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
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>

// Dense kernels backing the autodiff engine. Two implementations with
// identical signatures:
//
//   kernels::par — OpenMP-parallel, used by the engine. Threads only ever
//                  split across independent output elements; every reduction
//                  runs serially inside one thread, so results are
//                  bit-identical for any thread count.
//   kernels::ref — plain serial loops, kept as the reference the tests and
//                  the benchmark compare against.
//
// Gradient kernels accumulate (+=) into their destination.

namespace semisup::kernels {

// SAME-padding geometry for 3x3 convolutions, stride in {1, 2}.
constexpr int64_t conv_out_extent(int64_t in, int64_t stride) {
  return (in + stride - 1) / stride;
}
constexpr int64_t conv_pad_before(int64_t in, int64_t stride) {
  int64_t out = conv_out_extent(in, stride);
  int64_t need = (out - 1) * stride + 3 - in;
  return need > 0 ? need / 2 : 0;
}

#define SEMISUP_DECLARE_KERNELS                                                \
  /* out[m x n] = A[m x k] * B[k x n]; ta/tb flag transposed storage. */       \
  template <typename T>                                                        \
  void matmul(const T* a, const T* b, T* out, int64_t m, int64_t k,            \
              int64_t n, bool ta, bool tb, bool accumulate);                   \
                                                                               \
  template <typename T>                                                        \
  void transpose2d(const T* x, T* out, int64_t rows, int64_t cols,             \
                   bool accumulate);                                           \
                                                                               \
  /* x[n,c,h,w] (*) k[o,c,3,3] -> y[n,o,ho,wo], SAME padding. */               \
  template <typename T>                                                        \
  void conv2d_fwd(const T* x, const T* k, T* y, int64_t n, int64_t c,          \
                  int64_t h, int64_t w, int64_t o, int64_t stride);            \
                                                                               \
  template <typename T>                                                        \
  void conv2d_bwd_input(const T* dy, const T* k, T* dx, int64_t n, int64_t c,  \
                        int64_t h, int64_t w, int64_t o, int64_t stride);      \
                                                                               \
  template <typename T>                                                        \
  void conv2d_bwd_kernel(const T* dy, const T* x, T* dk, int64_t n, int64_t c, \
                         int64_t h, int64_t w, int64_t o, int64_t stride);     \
                                                                               \
  /* Batch norm over channel axis; layout [rows, channels, inner]. */          \
  template <typename T>                                                        \
  void bn_stats(const T* x, int64_t rows, int64_t ch, int64_t inner, T* mean,  \
                T* var);                                                       \
                                                                               \
  template <typename T>                                                        \
  void bn_normalize(const T* x, const T* mean, const T* var, const T* gamma,   \
                    const T* beta, T eps, T* y, int64_t rows, int64_t ch,      \
                    int64_t inner);                                            \
                                                                               \
  template <typename T>                                                        \
  void bn_backward(const T* x, const T* dy, const T* mean, const T* var,       \
                   const T* gamma, T eps, bool batch_stats, T* dx, T* dgamma,  \
                   T* dbeta, int64_t rows, int64_t ch, int64_t inner);         \
                                                                               \
  template <typename T>                                                        \
  void ew_add(const T* a, const T* b, T* out, int64_t n);                      \
  template <typename T>                                                        \
  void ew_mul(const T* a, const T* b, T* out, int64_t n);                      \
  template <typename T>                                                        \
  void ew_relu(const T* a, T* out, int64_t n);                                 \
  template <typename T>                                                        \
  void ew_exp(const T* a, T* out, int64_t n);                                  \
  template <typename T>                                                        \
  void ew_log(const T* a, T* out, int64_t n);                                  \
  template <typename T>                                                        \
  void ew_scale(const T* a, T c, T* out, int64_t n);                           \
                                                                               \
  /* Gradient accumulators. */                                                 \
  template <typename T>                                                        \
  void acc_scaled(const T* src, T c, T* dst, int64_t n); /* dst += c*src */    \
  template <typename T>                                                        \
  void acc_mul(const T* a, const T* b, T* dst, int64_t n); /* dst += a*b */    \
  template <typename T>                                                        \
  void acc_div(const T* a, const T* b, T* dst, int64_t n); /* dst += a/b */    \
  template <typename T>                                                        \
  void acc_relu_mask(const T* x, const T* dy, T* dst, int64_t n);              \
                                                                               \
  /* Row-broadcast bias. */                                                    \
  template <typename T>                                                        \
  void add_rowvec(const T* x, const T* b, T* out, int64_t rows, int64_t cols); \
  template <typename T>                                                        \
  void col_sum_acc(const T* dy, T* db, int64_t rows, int64_t cols);            \
                                                                               \
  /* Reduce one axis; layout [outer, extent, inner]. */                        \
  template <typename T>                                                        \
  void reduce_sum_axis(const T* x, T* out, int64_t outer, int64_t extent,      \
                       int64_t inner, T scale);                                \
  template <typename T>                                                        \
  void reduce_bcast_acc(const T* dout, T* dx, int64_t outer, int64_t extent,   \
                        int64_t inner, T scale);                               \
                                                                               \
  template <typename T>                                                        \
  T sum_all(const T* x, int64_t n);                                            \
                                                                               \
  /* Row-wise L2 normalization; norms[i] = ||x_i||. */                         \
  template <typename T>                                                        \
  void l2norm_rows(const T* x, T* y, T* norms, int64_t rows, int64_t cols);    \
  template <typename T>                                                        \
  void l2norm_rows_bwd(const T* y, const T* norms, const T* dy, T* dx,         \
                       int64_t rows, int64_t cols);                            \
                                                                               \
  /* Numerically stable row-wise log-softmax. */                               \
  template <typename T>                                                        \
  void logsoftmax_rows(const T* x, T* y, int64_t rows, int64_t cols);          \
  template <typename T>                                                        \
  void logsoftmax_rows_bwd(const T* y, const T* dy, T* dx, int64_t rows,       \
                           int64_t cols);

namespace par {
SEMISUP_DECLARE_KERNELS
}
namespace ref {
SEMISUP_DECLARE_KERNELS
}

#undef SEMISUP_DECLARE_KERNELS

}  // namespace semisup::kernels
