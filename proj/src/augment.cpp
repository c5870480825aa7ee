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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "semisup/data.hpp"

namespace semisup {

namespace {

// Bilinear resize of a crop window back to the full image size.
void crop_resize(const float* src, float* dst, int64_t c, int64_t h, int64_t w,
                 int64_t top, int64_t left, int64_t ch, int64_t cw) {
  if (ch == h && cw == w && top == 0 && left == 0) {
    std::memcpy(dst, src, sizeof(float) * static_cast<size_t>(c * h * w));
    return;
  }
  for (int64_t cc = 0; cc < c; ++cc) {
    const float* plane = src + cc * h * w;
    float* out = dst + cc * h * w;
    for (int64_t y = 0; y < h; ++y) {
      double sy = (y + 0.5) * ch / h - 0.5;
      sy = std::clamp(sy, 0.0, static_cast<double>(ch - 1));
      int64_t y0 = static_cast<int64_t>(sy);
      int64_t y1 = std::min(y0 + 1, ch - 1);
      double fy = sy - y0;
      for (int64_t x = 0; x < w; ++x) {
        double sx = (x + 0.5) * cw / w - 0.5;
        sx = std::clamp(sx, 0.0, static_cast<double>(cw - 1));
        int64_t x0 = static_cast<int64_t>(sx);
        int64_t x1 = std::min(x0 + 1, cw - 1);
        double fx = sx - x0;
        auto at = [&](int64_t yy, int64_t xx) {
          return static_cast<double>(plane[(top + yy) * w + (left + xx)]);
        };
        double v = at(y0, x0) * (1 - fy) * (1 - fx) +
                   at(y1, x0) * fy * (1 - fx) + at(y0, x1) * (1 - fy) * fx +
                   at(y1, x1) * fy * fx;
        out[y * w + x] = static_cast<float>(v);
      }
    }
  }
}

// 3x3 Gaussian blur with replicated edges.
void gaussian_blur3(float* img, int64_t c, int64_t h, int64_t w,
                    double sigma) {
  double k[3];
  double s2 = 2.0 * sigma * sigma;
  k[0] = std::exp(-1.0 / s2);
  k[1] = 1.0;
  k[2] = k[0];
  std::vector<float> tmp(static_cast<size_t>(h * w));
  for (int64_t cc = 0; cc < c; ++cc) {
    float* plane = img + cc * h * w;
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        double acc = 0, norm = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            int64_t yy = std::clamp<int64_t>(y + dy, 0, h - 1);
            int64_t xx = std::clamp<int64_t>(x + dx, 0, w - 1);
            double kv = k[dy + 1] * k[dx + 1];
            acc += kv * plane[yy * w + xx];
            norm += kv;
          }
        }
        tmp[static_cast<size_t>(y * w + x)] = static_cast<float>(acc / norm);
      }
    }
    std::memcpy(plane, tmp.data(), sizeof(float) * static_cast<size_t>(h * w));
  }
}

}  // namespace

void flip_horizontal(float* img, int64_t c, int64_t h, int64_t w) {
  for (int64_t cc = 0; cc < c; ++cc) {
    float* plane = img + cc * h * w;
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w / 2; ++x) {
        std::swap(plane[y * w + x], plane[y * w + (w - 1 - x)]);
      }
    }
  }
}

void augment_view(const float* src, float* dst, int64_t c, int64_t h,
                  int64_t w, const AugmentSpec& spec, Rng& rng) {
  // random area crop, resized back
  double area = rng.uniform(spec.crop_scale_min, spec.crop_scale_max);
  double side = std::sqrt(area);
  int64_t ch = std::clamp<int64_t>(std::llround(side * h), 1, h);
  int64_t cw = std::clamp<int64_t>(std::llround(side * w), 1, w);
  int64_t top = rng.uniform_int(0, h - ch);
  int64_t left = rng.uniform_int(0, w - cw);
  crop_resize(src, dst, c, h, w, top, left, ch, cw);

  if (rng.bernoulli(spec.flip_prob)) {
    flip_horizontal(dst, c, h, w);
  }

  if (spec.kind == AugmentKind::pretrain) {
    if (spec.jitter_strength > 0) {
      // per-image brightness/contrast jitter scaled by the strength knob
      double s = spec.jitter_strength;
      double brightness = rng.uniform(-0.4 * s, 0.4 * s);
      double contrast = rng.uniform(1.0 - 0.4 * s, 1.0 + 0.4 * s);
      double mean = 0;
      const int64_t total = c * h * w;
      for (int64_t i = 0; i < total; ++i) mean += dst[i];
      mean /= static_cast<double>(total);
      for (int64_t i = 0; i < total; ++i) {
        dst[i] = static_cast<float>((dst[i] - mean) * contrast + mean +
                                    brightness);
      }
      if (c > 1 && rng.bernoulli(spec.grayscale_prob)) {
        for (int64_t y = 0; y < h; ++y) {
          for (int64_t x = 0; x < w; ++x) {
            double g = 0;
            for (int64_t cc = 0; cc < c; ++cc) g += dst[(cc * h + y) * w + x];
            g /= static_cast<double>(c);
            for (int64_t cc = 0; cc < c; ++cc) {
              dst[(cc * h + y) * w + x] = static_cast<float>(g);
            }
          }
        }
      }
    }
    if (spec.blur_prob > 0 && rng.bernoulli(spec.blur_prob)) {
      double sigma = rng.uniform(spec.blur_sigma_min, spec.blur_sigma_max);
      gaussian_blur3(dst, c, h, w, sigma);
    }
  }

  const int64_t total = c * h * w;
  for (int64_t i = 0; i < total; ++i) {
    dst[i] = std::clamp(dst[i], 0.0f, 1.0f);
  }
}

BatchViews make_pair_batch(const Dataset& ds,
                           const std::vector<int64_t>& indices,
                           const AugmentSpec& spec, Rng& rng) {
  const int64_t n = static_cast<int64_t>(indices.size());
  if (n < 2) {
    throw DegenerateBatchError("make_pair_batch: need N >= 2 images, got " +
                               std::to_string(n));
  }
  BatchViews batch;
  batch.n_views = 2 * n;
  const int64_t sz = ds.image_size();
  batch.views.resize(static_cast<size_t>(batch.n_views * sz));
  batch.positive_of.resize(static_cast<size_t>(batch.n_views));
  batch.source.resize(static_cast<size_t>(batch.n_views));
  for (int64_t k = 0; k < n; ++k) {
    const float* src = ds.image_ptr(indices[static_cast<size_t>(k)]);
    augment_view(src, batch.views.data() + (2 * k) * sz, ds.c, ds.h, ds.w,
                 spec, rng);
    augment_view(src, batch.views.data() + (2 * k + 1) * sz, ds.c, ds.h, ds.w,
                 spec, rng);
    batch.positive_of[static_cast<size_t>(2 * k)] = 2 * k + 1;
    batch.positive_of[static_cast<size_t>(2 * k + 1)] = 2 * k;
    batch.source[static_cast<size_t>(2 * k)] = indices[static_cast<size_t>(k)];
    batch.source[static_cast<size_t>(2 * k + 1)] =
        indices[static_cast<size_t>(k)];
  }
  return batch;
}

std::vector<float> make_augmented_batch(const Dataset& ds,
                                        const std::vector<int64_t>& indices,
                                        const AugmentSpec& spec, Rng& rng) {
  const int64_t sz = ds.image_size();
  std::vector<float> out(indices.size() * static_cast<size_t>(sz));
  for (size_t k = 0; k < indices.size(); ++k) {
    augment_view(ds.image_ptr(indices[k]), out.data() + k * sz, ds.c, ds.h,
                 ds.w, spec, rng);
  }
  return out;
}

}  // namespace semisup
