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

// Times the OpenMP kernels against the serial reference on training-sized
// shapes and verifies bit-identical results while at it.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "semisup/kernels.hpp"
#include "semisup/rng.hpp"

using namespace semisup;
using Clock = std::chrono::steady_clock;

namespace {

std::vector<float> random_vec(Rng& rng, size_t n) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count() /
         reps;
}

void report(const char* name, double ref_ms, double par_ms, bool exact) {
  std::printf("%-28s ref %8.3f ms   par %8.3f ms   speedup %5.2fx   %s\n",
              name, ref_ms, par_ms, ref_ms / par_ms,
              exact ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
  Rng rng(1234);

  {
    const int64_t m = 256, k = 256, n = 256;
    auto a = random_vec(rng, m * k);
    auto b = random_vec(rng, k * n);
    std::vector<float> out_r(m * n), out_p(m * n);
    double ref_ms = time_ms(
        [&]() {
          kernels::ref::matmul(a.data(), b.data(), out_r.data(), m, k, n,
                               false, false, false);
        },
        5);
    double par_ms = time_ms(
        [&]() {
          kernels::par::matmul(a.data(), b.data(), out_p.data(), m, k, n,
                               false, false, false);
        },
        5);
    report("matmul 256x256x256", ref_ms, par_ms, out_r == out_p);
  }

  {
    const int64_t n = 64, c = 8, h = 32, w = 32, o = 16;
    auto x = random_vec(rng, n * c * h * w);
    auto k = random_vec(rng, o * c * 9);
    std::vector<float> y_r(n * o * h * w), y_p(n * o * h * w);
    double ref_ms = time_ms(
        [&]() {
          kernels::ref::conv2d_fwd(x.data(), k.data(), y_r.data(), n, c, h, w,
                                   o, 1);
        },
        3);
    double par_ms = time_ms(
        [&]() {
          kernels::par::conv2d_fwd(x.data(), k.data(), y_p.data(), n, c, h, w,
                                   o, 1);
        },
        3);
    report("conv2d 64x8x32x32 -> 16ch", ref_ms, par_ms, y_r == y_p);
  }

  {
    const int64_t rows = 4096, ch = 256;
    auto x = random_vec(rng, rows * ch);
    std::vector<float> mean_r(ch), var_r(ch), mean_p(ch), var_p(ch);
    double ref_ms = time_ms(
        [&]() {
          kernels::ref::bn_stats(x.data(), rows, ch, 1, mean_r.data(),
                                 var_r.data());
        },
        10);
    double par_ms = time_ms(
        [&]() {
          kernels::par::bn_stats(x.data(), rows, ch, 1, mean_p.data(),
                                 var_p.data());
        },
        10);
    report("bn_stats 4096x256", ref_ms, par_ms,
           mean_r == mean_p && var_r == var_p);
  }

  {
    const int64_t rows = 2048, cols = 512;
    auto x = random_vec(rng, rows * cols);
    std::vector<float> y_r(rows * cols), y_p(rows * cols);
    double ref_ms = time_ms(
        [&]() {
          kernels::ref::logsoftmax_rows(x.data(), y_r.data(), rows, cols);
        },
        10);
    double par_ms = time_ms(
        [&]() {
          kernels::par::logsoftmax_rows(x.data(), y_p.data(), rows, cols);
        },
        10);
    report("log_softmax 2048x512", ref_ms, par_ms, y_r == y_p);
  }

  {
    const int64_t rows = 2048, cols = 128;
    auto x = random_vec(rng, rows * cols);
    std::vector<float> y_r(rows * cols), y_p(rows * cols);
    std::vector<float> n_r(rows), n_p(rows);
    double ref_ms = time_ms(
        [&]() {
          kernels::ref::l2norm_rows(x.data(), y_r.data(), n_r.data(), rows,
                                    cols);
        },
        20);
    double par_ms = time_ms(
        [&]() {
          kernels::par::l2norm_rows(x.data(), y_p.data(), n_p.data(), rows,
                                    cols);
        },
        20);
    report("l2norm 2048x128", ref_ms, par_ms, y_r == y_p);
  }

  return 0;
}
