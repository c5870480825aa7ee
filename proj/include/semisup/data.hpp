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
#include <string>
#include <vector>

#include "semisup/error.hpp"
#include "semisup/rng.hpp"

namespace semisup {

// Image dataset with byte-quantized values scaled to [0, 1]. Label reads are
// instrumented: a counter tracks every access, and stages that must not see
// labels (pretraining, label-free distillation) lock them so any access
// throws.
class Dataset {
 public:
  int64_t n = 0, c = 0, h = 0, w = 0;
  int64_t num_classes = 0;
  std::string split;  // "train" or "test"
  std::vector<float> images;

  int label(int64_t i) const {
    if (labels_locked_) {
      throw ProtocolError(
          "label access while labels are locked (task-agnostic stage)");
    }
    ++label_reads_;
    return labels_[static_cast<size_t>(i)];
  }

  const float* image_ptr(int64_t i) const {
    return images.data() + i * c * h * w;
  }
  int64_t image_size() const { return c * h * w; }

  int64_t label_access_count() const { return label_reads_; }
  bool labels_locked() const { return labels_locked_; }

  // Raw label storage, used by loaders and split construction only.
  std::vector<uint16_t>& raw_labels() { return labels_; }
  const std::vector<uint16_t>& raw_labels() const { return labels_; }

  void validate() const;

 private:
  friend class LabelLock;
  std::vector<uint16_t> labels_;
  mutable int64_t label_reads_ = 0;
  bool labels_locked_ = false;
};

// RAII guard installing the label lock for the duration of a stage.
class LabelLock {
 public:
  explicit LabelLock(Dataset& ds) : ds_(ds) { ds_.labels_locked_ = true; }
  ~LabelLock() { ds_.labels_locked_ = false; }
  LabelLock(const LabelLock&) = delete;
  LabelLock& operator=(const LabelLock&) = delete;

 private:
  Dataset& ds_;
};

struct DataBundle {
  Dataset train;
  Dataset test;
};

// On-disk format: magic "SSDS", version u16, n/c/h/w u32 LE, num_classes
// u32, images as u8 row-major, labels as u16 LE.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// Synthetic generator grammar: "blobs:<classes>:<h>x<w>x<c>:<ntrain>/<ntest>:<seed>".
// Each class is a smooth random prototype image; samples add a small random
// translation plus Gaussian pixel noise.
bool is_synthetic_spec(const std::string& source);
DataBundle make_blobs(const std::string& spec);

// Deterministic stratified label subset. Per-class quotas differ by at most
// one; identical (fraction, seed) always select the same indices. The
// unlabeled pool is the full training set.
struct LabelFractionSplit {
  double fraction = 1.0;
  uint64_t seed = 0;
  std::vector<int64_t> labeled;  // sorted indices into the training set
};

LabelFractionSplit subsample_labels(const Dataset& ds, double fraction,
                                    uint64_t seed);

// ---- augmentation ----

enum class AugmentKind { pretrain, finetune };

// Pretraining views get crop + flip + color distortion + blur; the finetune
// pipeline applies only crop and horizontal flip.
struct AugmentSpec {
  AugmentKind kind = AugmentKind::pretrain;
  double crop_scale_min = 0.6;
  double crop_scale_max = 1.0;
  double flip_prob = 0.5;
  double jitter_strength = 0.5;
  double blur_prob = 0.5;
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 1.0;
  double grayscale_prob = 0.2;

  static AugmentSpec pretrain_default() { return AugmentSpec{}; }
  static AugmentSpec finetune_default() {
    AugmentSpec s;
    s.kind = AugmentKind::finetune;
    // deep crops destroy the class-bearing layout of 8x8-scale images; the
    // supervised stages only jitter mildly
    s.crop_scale_min = 0.9;
    return s;
  }
};

void augment_view(const float* src, float* dst, int64_t c, int64_t h,
                  int64_t w, const AugmentSpec& spec, Rng& rng);

void flip_horizontal(float* img, int64_t c, int64_t h, int64_t w);

// 2N augmented views of N images, interleaved so views 2k and 2k+1 come from
// indices[k]; positive_of maps each view to its partner.
struct BatchViews {
  int64_t n_views = 0;
  std::vector<float> views;          // [2N, c, h, w] row-major
  std::vector<int64_t> positive_of;  // involution over views
  std::vector<int64_t> source;       // dataset index per view
};

BatchViews make_pair_batch(const Dataset& ds,
                           const std::vector<int64_t>& indices,
                           const AugmentSpec& spec, Rng& rng);

// Single augmented view per index, for supervised stages.
std::vector<float> make_augmented_batch(const Dataset& ds,
                                        const std::vector<int64_t>& indices,
                                        const AugmentSpec& spec, Rng& rng);

}  // namespace semisup
