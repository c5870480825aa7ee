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

// OpenMP kernels. Parallel loops run over independent output elements only;
// each reduction stays inside one thread in a fixed order, so output is
// bit-identical to kernels::ref for any OMP_NUM_THREADS.

#include "semisup/kernels.hpp"

#include <cmath>

namespace semisup::kernels::par {

template <typename T>
void matmul(const T* a, const T* b, T* out, int64_t m, int64_t k, int64_t n,
            bool ta, bool tb, bool accumulate) {
#pragma omp parallel for
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      T acc = 0;
      for (int64_t l = 0; l < k; ++l) {
        T av = ta ? a[l * m + i] : a[i * k + l];
        T bv = tb ? b[j * k + l] : b[l * n + j];
        acc += av * bv;
      }
      if (accumulate) {
        out[i * n + j] += acc;
      } else {
        out[i * n + j] = acc;
      }
    }
  }
}

template <typename T>
void transpose2d(const T* x, T* out, int64_t rows, int64_t cols,
                 bool accumulate) {
#pragma omp parallel for
  for (int64_t j = 0; j < cols; ++j) {
    for (int64_t i = 0; i < rows; ++i) {
      if (accumulate) {
        out[j * rows + i] += x[i * cols + j];
      } else {
        out[j * rows + i] = x[i * cols + j];
      }
    }
  }
}

template <typename T>
void conv2d_fwd(const T* x, const T* k, T* y, int64_t n, int64_t c, int64_t h,
                int64_t w, int64_t o, int64_t stride) {
  const int64_t ho = conv_out_extent(h, stride);
  const int64_t wo = conv_out_extent(w, stride);
  const int64_t ph = conv_pad_before(h, stride);
  const int64_t pw = conv_pad_before(w, stride);
#pragma omp parallel for collapse(2)
  for (int64_t in = 0; in < n; ++in) {
    for (int64_t io = 0; io < o; ++io) {
      for (int64_t oy = 0; oy < ho; ++oy) {
        for (int64_t ox = 0; ox < wo; ++ox) {
          T acc = 0;
          for (int64_t ic = 0; ic < c; ++ic) {
            for (int64_t ky = 0; ky < 3; ++ky) {
              int64_t iy = oy * stride + ky - ph;
              if (iy < 0 || iy >= h) continue;
              for (int64_t kx = 0; kx < 3; ++kx) {
                int64_t ix = ox * stride + kx - pw;
                if (ix < 0 || ix >= w) continue;
                acc += x[((in * c + ic) * h + iy) * w + ix] *
                       k[((io * c + ic) * 3 + ky) * 3 + kx];
              }
            }
          }
          y[((in * o + io) * ho + oy) * wo + ox] = acc;
        }
      }
    }
  }
}

template <typename T>
void conv2d_bwd_input(const T* dy, const T* k, T* dx, int64_t n, int64_t c,
                      int64_t h, int64_t w, int64_t o, int64_t stride) {
  const int64_t ho = conv_out_extent(h, stride);
  const int64_t wo = conv_out_extent(w, stride);
  const int64_t ph = conv_pad_before(h, stride);
  const int64_t pw = conv_pad_before(w, stride);
#pragma omp parallel for collapse(2)
  for (int64_t in = 0; in < n; ++in) {
    for (int64_t ic = 0; ic < c; ++ic) {
      for (int64_t iy = 0; iy < h; ++iy) {
        for (int64_t ix = 0; ix < w; ++ix) {
          T acc = 0;
          for (int64_t io = 0; io < o; ++io) {
            for (int64_t ky = 0; ky < 3; ++ky) {
              int64_t num_y = iy + ph - ky;
              if (num_y % stride != 0) continue;
              int64_t oy = num_y / stride;
              if (oy < 0 || oy >= ho) continue;
              for (int64_t kx = 0; kx < 3; ++kx) {
                int64_t num_x = ix + pw - kx;
                if (num_x % stride != 0) continue;
                int64_t ox = num_x / stride;
                if (ox < 0 || ox >= wo) continue;
                acc += dy[((in * o + io) * ho + oy) * wo + ox] *
                       k[((io * c + ic) * 3 + ky) * 3 + kx];
              }
            }
          }
          dx[((in * c + ic) * h + iy) * w + ix] += acc;
        }
      }
    }
  }
}

template <typename T>
void conv2d_bwd_kernel(const T* dy, const T* x, T* dk, int64_t n, int64_t c,
                       int64_t h, int64_t w, int64_t o, int64_t stride) {
  const int64_t ho = conv_out_extent(h, stride);
  const int64_t wo = conv_out_extent(w, stride);
  const int64_t ph = conv_pad_before(h, stride);
  const int64_t pw = conv_pad_before(w, stride);
#pragma omp parallel for collapse(2)
  for (int64_t io = 0; io < o; ++io) {
    for (int64_t ic = 0; ic < c; ++ic) {
      for (int64_t ky = 0; ky < 3; ++ky) {
        for (int64_t kx = 0; kx < 3; ++kx) {
          T acc = 0;
          for (int64_t in = 0; in < n; ++in) {
            for (int64_t oy = 0; oy < ho; ++oy) {
              int64_t iy = oy * stride + ky - ph;
              if (iy < 0 || iy >= h) continue;
              for (int64_t ox = 0; ox < wo; ++ox) {
                int64_t ix = ox * stride + kx - pw;
                if (ix < 0 || ix >= w) continue;
                acc += dy[((in * o + io) * ho + oy) * wo + ox] *
                       x[((in * c + ic) * h + iy) * w + ix];
              }
            }
          }
          dk[((io * c + ic) * 3 + ky) * 3 + kx] += acc;
        }
      }
    }
  }
}

template <typename T>
void bn_stats(const T* x, int64_t rows, int64_t ch, int64_t inner, T* mean,
              T* var) {
  const T count = static_cast<T>(rows * inner);
#pragma omp parallel for
  for (int64_t j = 0; j < ch; ++j) {
    T sum = 0;
    for (int64_t i = 0; i < rows; ++i) {
      for (int64_t s = 0; s < inner; ++s) {
        sum += x[(i * ch + j) * inner + s];
      }
    }
    T mu = sum / count;
    T sq = 0;
    for (int64_t i = 0; i < rows; ++i) {
      for (int64_t s = 0; s < inner; ++s) {
        T d = x[(i * ch + j) * inner + s] - mu;
        sq += d * d;
      }
    }
    mean[j] = mu;
    var[j] = sq / count;
  }
}

template <typename T>
void bn_normalize(const T* x, const T* mean, const T* var, const T* gamma,
                  const T* beta, T eps, T* y, int64_t rows, int64_t ch,
                  int64_t inner) {
#pragma omp parallel for
  for (int64_t j = 0; j < ch; ++j) {
    const T inv = T(1) / std::sqrt(var[j] + eps);
    for (int64_t i = 0; i < rows; ++i) {
      for (int64_t s = 0; s < inner; ++s) {
        int64_t idx = (i * ch + j) * inner + s;
        y[idx] = gamma[j] * ((x[idx] - mean[j]) * inv) + beta[j];
      }
    }
  }
}

template <typename T>
void bn_backward(const T* x, const T* dy, const T* mean, const T* var,
                 const T* gamma, T eps, bool batch_stats, T* dx, T* dgamma,
                 T* dbeta, int64_t rows, int64_t ch, int64_t inner) {
  const T count = static_cast<T>(rows * inner);
#pragma omp parallel for
  for (int64_t j = 0; j < ch; ++j) {
    const T inv = T(1) / std::sqrt(var[j] + eps);
    T sum_dy = 0;
    T sum_dy_xhat = 0;
    for (int64_t i = 0; i < rows; ++i) {
      for (int64_t s = 0; s < inner; ++s) {
        int64_t idx = (i * ch + j) * inner + s;
        T xhat = (x[idx] - mean[j]) * inv;
        sum_dy += dy[idx];
        sum_dy_xhat += dy[idx] * xhat;
      }
    }
    dgamma[j] += sum_dy_xhat;
    dbeta[j] += sum_dy;
    for (int64_t i = 0; i < rows; ++i) {
      for (int64_t s = 0; s < inner; ++s) {
        int64_t idx = (i * ch + j) * inner + s;
        if (batch_stats) {
          T xhat = (x[idx] - mean[j]) * inv;
          dx[idx] += gamma[j] * inv *
                     (dy[idx] - sum_dy / count - xhat * sum_dy_xhat / count);
        } else {
          dx[idx] += gamma[j] * inv * dy[idx];
        }
      }
    }
  }
}

template <typename T>
void ew_add(const T* a, const T* b, T* out, int64_t n) {
#pragma omp parallel for
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void ew_mul(const T* a, const T* b, T* out, int64_t n) {
#pragma omp parallel for
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void ew_relu(const T* a, T* out, int64_t n) {
#pragma omp parallel for
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] > T(0) ? a[i] : T(0);
}

template <typename T>
void ew_exp(const T* a, T* out, int64_t n) {
#pragma omp parallel for
  for (int64_t i = 0; i < n; ++i) out[i] = std::exp(a[i]);
}

template <typename T>
void ew_log(const T* a, T* out, int64_t n) {
#pragma omp parallel for
  for (int64_t i = 0; i < n; ++i) out[i] = std::log(a[i]);
}

template <typename T>
void ew_scale(const T* a, T c, T* out, int64_t n) {
#pragma omp parallel for
  for (int64_t i = 0; i < n; ++i) out[i] = c * a[i];
}

template <typename T>
void acc_scaled(const T* src, T c, T* dst, int64_t n) {
#pragma omp parallel for
  for (int64_t i = 0; i < n; ++i) dst[i] += c * src[i];
}

template <typename T>
void acc_mul(const T* a, const T* b, T* dst, int64_t n) {
#pragma omp parallel for
  for (int64_t i = 0; i < n; ++i) dst[i] += a[i] * b[i];
}

template <typename T>
void acc_div(const T* a, const T* b, T* dst, int64_t n) {
#pragma omp parallel for
  for (int64_t i = 0; i < n; ++i) dst[i] += a[i] / b[i];
}

template <typename T>
void acc_relu_mask(const T* x, const T* dy, T* dst, int64_t n) {
#pragma omp parallel for
  for (int64_t i = 0; i < n; ++i) {
    if (x[i] > T(0)) dst[i] += dy[i];
  }
}

template <typename T>
void add_rowvec(const T* x, const T* b, T* out, int64_t rows, int64_t cols) {
#pragma omp parallel for
  for (int64_t i = 0; i < rows; ++i) {
    for (int64_t j = 0; j < cols; ++j) {
      out[i * cols + j] = x[i * cols + j] + b[j];
    }
  }
}

template <typename T>
void col_sum_acc(const T* dy, T* db, int64_t rows, int64_t cols) {
#pragma omp parallel for
  for (int64_t j = 0; j < cols; ++j) {
    T acc = 0;
    for (int64_t i = 0; i < rows; ++i) acc += dy[i * cols + j];
    db[j] += acc;
  }
}

template <typename T>
void reduce_sum_axis(const T* x, T* out, int64_t outer, int64_t extent,
                     int64_t inner, T scale) {
#pragma omp parallel for collapse(2)
  for (int64_t a = 0; a < outer; ++a) {
    for (int64_t s = 0; s < inner; ++s) {
      T acc = 0;
      for (int64_t e = 0; e < extent; ++e) {
        acc += x[(a * extent + e) * inner + s];
      }
      out[a * inner + s] = scale * acc;
    }
  }
}

template <typename T>
void reduce_bcast_acc(const T* dout, T* dx, int64_t outer, int64_t extent,
                      int64_t inner, T scale) {
#pragma omp parallel for collapse(2)
  for (int64_t a = 0; a < outer; ++a) {
    for (int64_t s = 0; s < inner; ++s) {
      T g = scale * dout[a * inner + s];
      for (int64_t e = 0; e < extent; ++e) {
        dx[(a * extent + e) * inner + s] += g;
      }
    }
  }
}

// Whole-tensor reduction stays serial in both backends so order is fixed.
template <typename T>
T sum_all(const T* x, int64_t n) {
  T acc = 0;
  for (int64_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

template <typename T>
void l2norm_rows(const T* x, T* y, T* norms, int64_t rows, int64_t cols) {
#pragma omp parallel for
  for (int64_t i = 0; i < rows; ++i) {
    T sq = 0;
    for (int64_t j = 0; j < cols; ++j) sq += x[i * cols + j] * x[i * cols + j];
    T r = std::sqrt(sq);
    norms[i] = r;
    for (int64_t j = 0; j < cols; ++j) y[i * cols + j] = x[i * cols + j] / r;
  }
}

template <typename T>
void l2norm_rows_bwd(const T* y, const T* norms, const T* dy, T* dx,
                     int64_t rows, int64_t cols) {
#pragma omp parallel for
  for (int64_t i = 0; i < rows; ++i) {
    T dot = 0;
    for (int64_t j = 0; j < cols; ++j) dot += dy[i * cols + j] * y[i * cols + j];
    for (int64_t j = 0; j < cols; ++j) {
      dx[i * cols + j] += (dy[i * cols + j] - y[i * cols + j] * dot) / norms[i];
    }
  }
}

template <typename T>
void logsoftmax_rows(const T* x, T* y, int64_t rows, int64_t cols) {
#pragma omp parallel for
  for (int64_t i = 0; i < rows; ++i) {
    T mx = x[i * cols];
    for (int64_t j = 1; j < cols; ++j) {
      if (x[i * cols + j] > mx) mx = x[i * cols + j];
    }
    T sum = 0;
    for (int64_t j = 0; j < cols; ++j) sum += std::exp(x[i * cols + j] - mx);
    T lse = mx + std::log(sum);
    for (int64_t j = 0; j < cols; ++j) y[i * cols + j] = x[i * cols + j] - lse;
  }
}

template <typename T>
void logsoftmax_rows_bwd(const T* y, const T* dy, T* dx, int64_t rows,
                         int64_t cols) {
#pragma omp parallel for
  for (int64_t i = 0; i < rows; ++i) {
    T sum_dy = 0;
    for (int64_t j = 0; j < cols; ++j) sum_dy += dy[i * cols + j];
    for (int64_t j = 0; j < cols; ++j) {
      dx[i * cols + j] += dy[i * cols + j] - std::exp(y[i * cols + j]) * sum_dy;
    }
  }
}

#define SEMISUP_INSTANTIATE_KERNELS(T)                                         \
  template void matmul<T>(const T*, const T*, T*, int64_t, int64_t, int64_t,  \
                          bool, bool, bool);                                   \
  template void transpose2d<T>(const T*, T*, int64_t, int64_t, bool);          \
  template void conv2d_fwd<T>(const T*, const T*, T*, int64_t, int64_t,        \
                              int64_t, int64_t, int64_t, int64_t);             \
  template void conv2d_bwd_input<T>(const T*, const T*, T*, int64_t, int64_t,  \
                                    int64_t, int64_t, int64_t, int64_t);       \
  template void conv2d_bwd_kernel<T>(const T*, const T*, T*, int64_t, int64_t, \
                                     int64_t, int64_t, int64_t, int64_t);      \
  template void bn_stats<T>(const T*, int64_t, int64_t, int64_t, T*, T*);      \
  template void bn_normalize<T>(const T*, const T*, const T*, const T*,        \
                                const T*, T, T*, int64_t, int64_t, int64_t);   \
  template void bn_backward<T>(const T*, const T*, const T*, const T*,         \
                               const T*, T, bool, T*, T*, T*, int64_t,         \
                               int64_t, int64_t);                              \
  template void ew_add<T>(const T*, const T*, T*, int64_t);                    \
  template void ew_mul<T>(const T*, const T*, T*, int64_t);                    \
  template void ew_relu<T>(const T*, T*, int64_t);                             \
  template void ew_exp<T>(const T*, T*, int64_t);                              \
  template void ew_log<T>(const T*, T*, int64_t);                              \
  template void ew_scale<T>(const T*, T, T*, int64_t);                         \
  template void acc_scaled<T>(const T*, T, T*, int64_t);                       \
  template void acc_mul<T>(const T*, const T*, T*, int64_t);                   \
  template void acc_div<T>(const T*, const T*, T*, int64_t);                   \
  template void acc_relu_mask<T>(const T*, const T*, T*, int64_t);             \
  template void add_rowvec<T>(const T*, const T*, T*, int64_t, int64_t);       \
  template void col_sum_acc<T>(const T*, T*, int64_t, int64_t);                \
  template void reduce_sum_axis<T>(const T*, T*, int64_t, int64_t, int64_t,    \
                                   T);                                         \
  template void reduce_bcast_acc<T>(const T*, T*, int64_t, int64_t, int64_t,   \
                                    T);                                        \
  template T sum_all<T>(const T*, int64_t);                                    \
  template void l2norm_rows<T>(const T*, T*, T*, int64_t, int64_t);            \
  template void l2norm_rows_bwd<T>(const T*, const T*, const T*, T*, int64_t,  \
                                   int64_t);                                   \
  template void logsoftmax_rows<T>(const T*, T*, int64_t, int64_t);            \
  template void logsoftmax_rows_bwd<T>(const T*, const T*, T*, int64_t,        \
                                       int64_t);

SEMISUP_INSTANTIATE_KERNELS(float)
SEMISUP_INSTANTIATE_KERNELS(double)

#undef SEMISUP_INSTANTIATE_KERNELS

}  // namespace semisup::kernels::par
