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

#include <vector>

#include "semisup/tensor.hpp"

namespace semisup {

struct ContrastiveConfig {
  double temperature = 0.1;
  bool use_queue = false;
  int64_t queue_capacity = 1024;
};

struct DistillConfig {
  double temperature = 0.1;
  double alpha = 1.0;  // weight on the distillation term; 1 uses no labels
};

// FIFO ring of unit-norm embedding rows used as extra contrastive negatives.
// Single-writer: owned by the pretraining loop.
template <typename T>
class MemoryQueueT {
 public:
  MemoryQueueT(int64_t capacity, int64_t dim);

  // Appends rows (given as a [n x dim] row-major block); evicts oldest
  // entries beyond capacity. Rows must be unit-norm within 1e-5.
  void enqueue(const std::vector<T>& rows, int64_t n);

  int64_t fill() const { return fill_; }
  int64_t capacity() const { return capacity_; }
  int64_t dim() const { return dim_; }

  // Snapshot of the stored rows as a constant [fill x dim] tensor,
  // oldest first.
  TensorPtrT<T> as_tensor() const;

 private:
  int64_t capacity_;
  int64_t dim_;
  int64_t fill_ = 0;
  int64_t head_ = 0;  // slot that the next enqueue overwrites
  std::vector<T> buf_;
};

// z[m x d] * w[k x d]^T; rows are expected unit-norm upstream so entries are
// cosine similarities in [-1, 1].
template <typename T>
TensorPtrT<T> cosine_sim_matrix(GraphT<T>& g, TensorPtrT<T> z,
                                TensorPtrT<T> w);

// Normalized-temperature cross entropy over 2N views. positive_of maps each
// row to its positive partner; the loss is the mean over all 2N ordered
// pairs. Queue rows (if any) enter the denominator only.
template <typename T>
TensorPtrT<T> nt_xent(GraphT<T>& g, TensorPtrT<T> z,
                      const std::vector<int64_t>& positive_of,
                      const ContrastiveConfig& cfg,
                      const MemoryQueueT<T>* queue = nullptr);

template <typename T>
TensorPtrT<T> temperature_softmax(GraphT<T>& g, TensorPtrT<T> logits,
                                  double tau);

template <typename T>
TensorPtrT<T> cross_entropy(GraphT<T>& g, TensorPtrT<T> logits,
                            const std::vector<int>& labels);

// Teacher probabilities are a constant input: no gradient reaches them.
template <typename T>
TensorPtrT<T> distill_loss(GraphT<T>& g, TensorPtrT<T> student_logits,
                           TensorPtrT<T> teacher_probs, double tau);

// (1-alpha) * cross_entropy + alpha * distill_loss. labeled_logits may be
// null when the batch carries no labeled examples (the label term is then 0);
// with alpha == 1 labels are never consulted at all.
template <typename T>
TensorPtrT<T> combined_loss(GraphT<T>& g, TensorPtrT<T> labeled_logits,
                            const std::vector<int>& labels,
                            TensorPtrT<T> unlabeled_logits,
                            TensorPtrT<T> teacher_probs,
                            const DistillConfig& cfg);

using MemoryQueue = MemoryQueueT<float>;

}  // namespace semisup
