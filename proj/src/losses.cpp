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

#include "semisup/losses.hpp"

#include <cmath>
#include <cstring>

namespace semisup {

namespace {

template <typename T>
void check_unit_rows(const TensorPtrT<T>& z, double tol, const char* what) {
  const int64_t rows = z->dim(0), cols = z->dim(1);
  for (int64_t i = 0; i < rows; ++i) {
    double sq = 0;
    for (int64_t j = 0; j < cols; ++j) {
      double v = static_cast<double>(z->data[i * cols + j]);
      sq += v * v;
    }
    if (std::fabs(std::sqrt(sq) - 1.0) > tol) {
      throw ContractError(std::string(what) + ": row " + std::to_string(i) +
                          " is not unit-norm (|.|=" +
                          std::to_string(std::sqrt(sq)) + ")");
    }
  }
}

}  // namespace

template <typename T>
MemoryQueueT<T>::MemoryQueueT(int64_t capacity, int64_t dim)
    : capacity_(capacity), dim_(dim) {
  if (capacity < 1 || dim < 1) {
    throw ConfigError("memory queue: capacity and dim must be positive");
  }
  buf_.assign(static_cast<size_t>(capacity * dim), T(0));
}

template <typename T>
void MemoryQueueT<T>::enqueue(const std::vector<T>& rows, int64_t n) {
  if (static_cast<int64_t>(rows.size()) != n * dim_) {
    throw ShapeError("memory queue: got " + std::to_string(rows.size()) +
                     " values for " + std::to_string(n) + " rows of dim " +
                     std::to_string(dim_));
  }
  for (int64_t i = 0; i < n; ++i) {
    double sq = 0;
    for (int64_t j = 0; j < dim_; ++j) {
      double v = static_cast<double>(rows[i * dim_ + j]);
      sq += v * v;
    }
    if (std::fabs(std::sqrt(sq) - 1.0) > 1e-5) {
      throw ContractError("memory queue: enqueued row " + std::to_string(i) +
                          " is not unit-norm");
    }
  }
  for (int64_t i = 0; i < n; ++i) {
    std::memcpy(&buf_[static_cast<size_t>(head_ * dim_)], &rows[i * dim_],
                sizeof(T) * static_cast<size_t>(dim_));
    head_ = (head_ + 1) % capacity_;
    if (fill_ < capacity_) ++fill_;
  }
}

template <typename T>
TensorPtrT<T> MemoryQueueT<T>::as_tensor() const {
  auto out = GraphT<T>::leaf({fill_, dim_});
  // oldest entry sits at head_ once the ring has wrapped
  int64_t start = fill_ < capacity_ ? 0 : head_;
  for (int64_t i = 0; i < fill_; ++i) {
    int64_t src = (start + i) % capacity_;
    std::memcpy(&out->data[static_cast<size_t>(i * dim_)],
                &buf_[static_cast<size_t>(src * dim_)],
                sizeof(T) * static_cast<size_t>(dim_));
  }
  return out;
}

template <typename T>
TensorPtrT<T> cosine_sim_matrix(GraphT<T>& g, TensorPtrT<T> z,
                                TensorPtrT<T> w) {
  if (z->rank() != 2 || w->rank() != 2 || z->dim(1) != w->dim(1)) {
    throw ShapeError("cosine_sim_matrix: incompatible shapes " +
                     shape_str(z->shape) + " vs " + shape_str(w->shape));
  }
  return g.matmul(z, g.transpose(w));
}

template <typename T>
TensorPtrT<T> nt_xent(GraphT<T>& g, TensorPtrT<T> z,
                      const std::vector<int64_t>& positive_of,
                      const ContrastiveConfig& cfg,
                      const MemoryQueueT<T>* queue) {
  if (cfg.temperature <= 0) {
    throw ConfigError("nt_xent: temperature must be positive");
  }
  if (z->rank() != 2) {
    throw ShapeError("nt_xent: want [2N x d], got " + shape_str(z->shape));
  }
  const int64_t m = z->dim(0);
  if (m < 4 || m % 2 != 0) {
    throw DegenerateBatchError("nt_xent: need 2N >= 4 views, got " +
                               std::to_string(m));
  }
  if (static_cast<int64_t>(positive_of.size()) != m) {
    throw ShapeError("nt_xent: pairing size " +
                     std::to_string(positive_of.size()) + " != " +
                     std::to_string(m));
  }
  for (int64_t i = 0; i < m; ++i) {
    int64_t j = positive_of[static_cast<size_t>(i)];
    if (j < 0 || j >= m || j == i ||
        positive_of[static_cast<size_t>(j)] != i) {
      throw ContractError("nt_xent: pairing is not an involution at row " +
                          std::to_string(i));
    }
  }
  check_unit_rows(z, 1e-3, "nt_xent");

  const T inv_tau = static_cast<T>(1.0 / cfg.temperature);
  auto sims = g.scale(g.matmul(z, g.transpose(z)), inv_tau);

  // exclude k == i from the denominator, select k == positive(i) for the
  // numerator
  std::vector<T> off_diag(static_cast<size_t>(m * m), T(1));
  std::vector<T> pos_mask(static_cast<size_t>(m * m), T(0));
  for (int64_t i = 0; i < m; ++i) {
    off_diag[static_cast<size_t>(i * m + i)] = T(0);
    pos_mask[static_cast<size_t>(
        i * m + positive_of[static_cast<size_t>(i)])] = T(1);
  }
  auto exp_sims = g.exp(sims);
  auto masked = g.mul(exp_sims, GraphT<T>::leaf({m, m}, std::move(off_diag)));
  auto denom = g.reduce(masked, ReduceKind::sum, 1);  // [m]

  if (queue != nullptr && queue->fill() > 0) {
    if (queue->dim() != z->dim(1)) {
      throw ShapeError("nt_xent: queue dim " + std::to_string(queue->dim()) +
                       " != embedding dim " + std::to_string(z->dim(1)));
    }
    auto qsims =
        g.scale(g.matmul(z, g.transpose(queue->as_tensor())), inv_tau);
    auto qsum = g.reduce(g.exp(qsims), ReduceKind::sum, 1);
    denom = g.add(denom, qsum);
  }

  auto pos =
      g.reduce(g.mul(sims, GraphT<T>::leaf({m, m}, std::move(pos_mask))),
               ReduceKind::sum, 1);  // [m], sim(z_i, z_pos(i)) / tau
  auto per_pair = g.add(g.log(denom), g.neg(pos));
  return g.mean_all(per_pair);
}

template <typename T>
TensorPtrT<T> temperature_softmax(GraphT<T>& g, TensorPtrT<T> logits,
                                  double tau) {
  if (tau <= 0) {
    throw ConfigError("temperature_softmax: tau must be positive, got " +
                      std::to_string(tau));
  }
  return g.exp(g.log_softmax(g.scale(logits, static_cast<T>(1.0 / tau))));
}

template <typename T>
TensorPtrT<T> cross_entropy(GraphT<T>& g, TensorPtrT<T> logits,
                            const std::vector<int>& labels) {
  if (logits->rank() != 2 ||
      logits->dim(0) != static_cast<int64_t>(labels.size())) {
    throw ShapeError("cross_entropy: logits " + shape_str(logits->shape) +
                     " vs " + std::to_string(labels.size()) + " labels");
  }
  const int64_t n = logits->dim(0), c = logits->dim(1);
  std::vector<T> onehot(static_cast<size_t>(n * c), T(0));
  for (int64_t i = 0; i < n; ++i) {
    int y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= c) {
      throw DataError("cross_entropy: label " + std::to_string(y) +
                      " out of range for " + std::to_string(c) + " classes");
    }
    onehot[static_cast<size_t>(i * c + y)] = T(1);
  }
  auto lsm = g.log_softmax(logits);
  auto picked = g.mul(lsm, GraphT<T>::leaf({n, c}, std::move(onehot)));
  return g.scale(g.sum_all(picked), static_cast<T>(-1.0 / n));
}

template <typename T>
TensorPtrT<T> distill_loss(GraphT<T>& g, TensorPtrT<T> student_logits,
                           TensorPtrT<T> teacher_probs, double tau) {
  if (tau <= 0) {
    throw ConfigError("distill_loss: tau must be positive");
  }
  if (student_logits->shape != teacher_probs->shape ||
      student_logits->rank() != 2) {
    throw ShapeError("distill_loss: student " +
                     shape_str(student_logits->shape) + " vs teacher " +
                     shape_str(teacher_probs->shape));
  }
  const int64_t n = teacher_probs->dim(0), c = teacher_probs->dim(1);
  for (int64_t i = 0; i < n; ++i) {
    double s = 0;
    for (int64_t j = 0; j < c; ++j) {
      s += static_cast<double>(teacher_probs->data[i * c + j]);
    }
    if (std::fabs(s - 1.0) > 1e-5) {
      throw ContractError("distill_loss: teacher row " + std::to_string(i) +
                          " sums to " + std::to_string(s));
    }
  }
  auto lsm = g.log_softmax(g.scale(student_logits, static_cast<T>(1.0 / tau)));
  return g.scale(g.sum_all(g.mul(teacher_probs, lsm)),
                 static_cast<T>(-1.0 / n));
}

template <typename T>
TensorPtrT<T> combined_loss(GraphT<T>& g, TensorPtrT<T> labeled_logits,
                            const std::vector<int>& labels,
                            TensorPtrT<T> unlabeled_logits,
                            TensorPtrT<T> teacher_probs,
                            const DistillConfig& cfg) {
  if (cfg.alpha < 0 || cfg.alpha > 1) {
    throw ConfigError("combined_loss: alpha must be in [0, 1], got " +
                      std::to_string(cfg.alpha));
  }
  if (cfg.alpha == 1.0) {
    return distill_loss(g, unlabeled_logits, teacher_probs, cfg.temperature);
  }
  auto label_term = labeled_logits != nullptr && !labels.empty()
                        ? cross_entropy(g, labeled_logits, labels)
                        : GraphT<T>::scalar(T(0));
  if (cfg.alpha == 0.0) {
    return label_term;
  }
  auto dist =
      distill_loss(g, unlabeled_logits, teacher_probs, cfg.temperature);
  return g.add(g.scale(label_term, static_cast<T>(1.0 - cfg.alpha)),
               g.scale(dist, static_cast<T>(cfg.alpha)));
}

#define SEMISUP_INSTANTIATE_LOSSES(T)                                        \
  template class MemoryQueueT<T>;                                            \
  template TensorPtrT<T> cosine_sim_matrix<T>(GraphT<T>&, TensorPtrT<T>,     \
                                              TensorPtrT<T>);                \
  template TensorPtrT<T> nt_xent<T>(GraphT<T>&, TensorPtrT<T>,               \
                                    const std::vector<int64_t>&,             \
                                    const ContrastiveConfig&,                \
                                    const MemoryQueueT<T>*);                 \
  template TensorPtrT<T> temperature_softmax<T>(GraphT<T>&, TensorPtrT<T>,   \
                                                double);                     \
  template TensorPtrT<T> cross_entropy<T>(GraphT<T>&, TensorPtrT<T>,         \
                                          const std::vector<int>&);          \
  template TensorPtrT<T> distill_loss<T>(GraphT<T>&, TensorPtrT<T>,          \
                                         TensorPtrT<T>, double);             \
  template TensorPtrT<T> combined_loss<T>(GraphT<T>&, TensorPtrT<T>,         \
                                          const std::vector<int>&,           \
                                          TensorPtrT<T>, TensorPtrT<T>,      \
                                          const DistillConfig&);

SEMISUP_INSTANTIATE_LOSSES(float)
SEMISUP_INSTANTIATE_LOSSES(double)

#undef SEMISUP_INSTANTIATE_LOSSES

}  // namespace semisup
