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
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "semisup/error.hpp"
#include "semisup/kernels.hpp"

namespace semisup {

enum class Mode { train, eval };
enum class ReduceKind { sum, mean };

std::string shape_str(const std::vector<int64_t>& shape);
int64_t shape_numel(const std::vector<int64_t>& shape);

// Dense n-dimensional value with an optional gradient buffer of the same
// shape. Ops execute eagerly; the producing GraphT records how to push
// gradients back to the inputs.
template <typename T>
struct TensorT {
  std::vector<int64_t> shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a backward pass reaches this tensor
  bool requires_grad = false;

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }

  T item() const {
    if (numel() != 1) {
      throw ShapeError("item: tensor " + shape_str(shape) + " is not scalar");
    }
    return data[0];
  }

  bool has_grad() const { return !grad.empty(); }

  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
  }

  void zero_grad() { grad.assign(data.size(), T(0)); }
};

template <typename T>
using TensorPtrT = std::shared_ptr<TensorT<T>>;

// Reverse-mode tape. Op records are appended in execution order, which is a
// topological order by construction; backward() replays them in reverse.
template <typename T>
class GraphT {
 public:
  static TensorPtrT<T> leaf(std::vector<int64_t> shape,
                            bool requires_grad = false) {
    auto t = std::make_shared<TensorT<T>>();
    t->shape = std::move(shape);
    t->data.assign(static_cast<size_t>(shape_numel(t->shape)), T(0));
    t->requires_grad = requires_grad;
    return t;
  }

  static TensorPtrT<T> leaf(std::vector<int64_t> shape, std::vector<T> data,
                            bool requires_grad = false) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
      throw ShapeError("leaf: shape " + shape_str(shape) + " wants " +
                       std::to_string(shape_numel(shape)) + " values, got " +
                       std::to_string(data.size()));
    }
    auto t = std::make_shared<TensorT<T>>();
    t->shape = std::move(shape);
    t->data = std::move(data);
    t->requires_grad = requires_grad;
    return t;
  }

  static TensorPtrT<T> scalar(T v, bool requires_grad = false) {
    return leaf({1}, {v}, requires_grad);
  }

  // ---- differentiable primitives ----

  TensorPtrT<T> matmul(TensorPtrT<T> a, TensorPtrT<T> b) {
    if (a->rank() != 2 || b->rank() != 2 || a->dim(1) != b->dim(0)) {
      throw ShapeError("matmul: incompatible shapes " + shape_str(a->shape) +
                       " x " + shape_str(b->shape));
    }
    const int64_t m = a->dim(0), k = a->dim(1), n = b->dim(1);
    auto out = leaf({m, n});
    kernels::par::matmul(a->data.data(), b->data.data(), out->data.data(), m,
                         k, n, false, false, false);
    record(out, {a, b}, [a, b, out, m, k, n]() {
      if (a->requires_grad) {
        a->ensure_grad();
        kernels::par::matmul(out->grad.data(), b->data.data(), a->grad.data(),
                             m, n, k, false, true, true);
      }
      if (b->requires_grad) {
        b->ensure_grad();
        kernels::par::matmul(a->data.data(), out->grad.data(), b->grad.data(),
                             k, m, n, true, false, true);
      }
    });
    return out;
  }

  TensorPtrT<T> transpose(TensorPtrT<T> x) {
    if (x->rank() != 2) {
      throw ShapeError("transpose: want rank 2, got " + shape_str(x->shape));
    }
    const int64_t r = x->dim(0), c = x->dim(1);
    auto out = leaf({c, r});
    kernels::par::transpose2d(x->data.data(), out->data.data(), r, c, false);
    record(out, {x}, [x, out, r, c]() {
      x->ensure_grad();
      kernels::par::transpose2d(out->grad.data(), x->grad.data(), c, r, true);
    });
    return out;
  }

  TensorPtrT<T> conv2d(TensorPtrT<T> x, TensorPtrT<T> k, int64_t stride) {
    if (x->rank() != 4 || k->rank() != 4) {
      throw ShapeError("conv2d: want 4-d input and kernel, got " +
                       shape_str(x->shape) + " and " + shape_str(k->shape));
    }
    if (k->dim(2) != 3 || k->dim(3) != 3) {
      throw ShapeError("conv2d: only 3x3 kernels, got " + shape_str(k->shape));
    }
    if (x->dim(1) != k->dim(1)) {
      throw ShapeError("conv2d: channel mismatch " + shape_str(x->shape) +
                       " vs " + shape_str(k->shape));
    }
    if (stride != 1 && stride != 2) {
      throw ConfigError("conv2d: stride must be 1 or 2, got " +
                        std::to_string(stride));
    }
    const int64_t n = x->dim(0), c = x->dim(1), h = x->dim(2), w = x->dim(3);
    const int64_t o = k->dim(0);
    auto out = leaf({n, o, kernels::conv_out_extent(h, stride),
                     kernels::conv_out_extent(w, stride)});
    kernels::par::conv2d_fwd(x->data.data(), k->data.data(), out->data.data(),
                             n, c, h, w, o, stride);
    record(out, {x, k}, [x, k, out, n, c, h, w, o, stride]() {
      if (x->requires_grad) {
        x->ensure_grad();
        kernels::par::conv2d_bwd_input(out->grad.data(), k->data.data(),
                                       x->grad.data(), n, c, h, w, o, stride);
      }
      if (k->requires_grad) {
        k->ensure_grad();
        kernels::par::conv2d_bwd_kernel(out->grad.data(), x->data.data(),
                                        k->grad.data(), n, c, h, w, o, stride);
      }
    });
    return out;
  }

  // Normalizes over every axis except axis 1. Accepts [n, d] and
  // [n, c, h, w]. In train mode batch statistics are used and the running
  // buffers update in place; eval mode reads the running buffers.
  TensorPtrT<T> batchnorm(TensorPtrT<T> x, TensorPtrT<T> gamma,
                          TensorPtrT<T> beta, TensorPtrT<T> running_mean,
                          TensorPtrT<T> running_var, T momentum, T eps,
                          Mode mode) {
    if (x->rank() != 2 && x->rank() != 4) {
      throw ShapeError("batchnorm: want rank 2 or 4, got " +
                       shape_str(x->shape));
    }
    const int64_t rows = x->dim(0);
    const int64_t ch = x->dim(1);
    const int64_t inner = x->numel() / (rows * ch);
    if (gamma->numel() != ch || beta->numel() != ch ||
        running_mean->numel() != ch || running_var->numel() != ch) {
      throw ShapeError("batchnorm: parameter size mismatch for " +
                       std::to_string(ch) + " channels");
    }
    std::vector<T> mean(static_cast<size_t>(ch));
    std::vector<T> var(static_cast<size_t>(ch));
    if (mode == Mode::train) {
      if (rows < 2) {
        throw DegenerateBatchError(
            "batchnorm: train mode needs a batch of at least 2, got " +
            std::to_string(rows));
      }
      kernels::par::bn_stats(x->data.data(), rows, ch, inner, mean.data(),
                             var.data());
      for (int64_t j = 0; j < ch; ++j) {
        running_mean->data[j] = momentum * running_mean->data[j] +
                                (T(1) - momentum) * mean[j];
        running_var->data[j] =
            momentum * running_var->data[j] + (T(1) - momentum) * var[j];
      }
    } else {
      mean.assign(running_mean->data.begin(), running_mean->data.end());
      var.assign(running_var->data.begin(), running_var->data.end());
    }
    auto out = leaf(x->shape);
    kernels::par::bn_normalize(x->data.data(), mean.data(), var.data(),
                               gamma->data.data(), beta->data.data(), eps,
                               out->data.data(), rows, ch, inner);
    const bool batch_stats = (mode == Mode::train);
    record(out, {x, gamma, beta},
           [x, gamma, beta, out, mean, var, eps, batch_stats, rows, ch,
            inner]() {
             x->ensure_grad();
             gamma->ensure_grad();
             beta->ensure_grad();
             std::vector<T> dx_sink, dg_sink, db_sink;
             kernels::par::bn_backward(
                 x->data.data(), out->grad.data(), mean.data(), var.data(),
                 gamma->data.data(), eps, batch_stats,
                 x->requires_grad ? x->grad.data() : sink(dx_sink, x->numel()),
                 gamma->requires_grad ? gamma->grad.data()
                                      : sink(dg_sink, ch),
                 beta->requires_grad ? beta->grad.data() : sink(db_sink, ch),
                 rows, ch, inner);
           });
    return out;
  }

  TensorPtrT<T> add(TensorPtrT<T> a, TensorPtrT<T> b) {
    check_same_shape("add", a, b);
    auto out = leaf(a->shape);
    kernels::par::ew_add(a->data.data(), b->data.data(), out->data.data(),
                         out->numel());
    record(out, {a, b}, [a, b, out]() {
      if (a->requires_grad) {
        a->ensure_grad();
        kernels::par::acc_scaled(out->grad.data(), T(1), a->grad.data(),
                                 out->numel());
      }
      if (b->requires_grad) {
        b->ensure_grad();
        kernels::par::acc_scaled(out->grad.data(), T(1), b->grad.data(),
                                 out->numel());
      }
    });
    return out;
  }

  TensorPtrT<T> mul(TensorPtrT<T> a, TensorPtrT<T> b) {
    check_same_shape("mul", a, b);
    auto out = leaf(a->shape);
    kernels::par::ew_mul(a->data.data(), b->data.data(), out->data.data(),
                         out->numel());
    record(out, {a, b}, [a, b, out]() {
      if (a->requires_grad) {
        a->ensure_grad();
        kernels::par::acc_mul(out->grad.data(), b->data.data(), a->grad.data(),
                              out->numel());
      }
      if (b->requires_grad) {
        b->ensure_grad();
        kernels::par::acc_mul(out->grad.data(), a->data.data(), b->grad.data(),
                              out->numel());
      }
    });
    return out;
  }

  TensorPtrT<T> relu(TensorPtrT<T> x) {
    auto out = leaf(x->shape);
    kernels::par::ew_relu(x->data.data(), out->data.data(), out->numel());
    record(out, {x}, [x, out]() {
      x->ensure_grad();
      // Subgradient at 0 is 0.
      kernels::par::acc_relu_mask(x->data.data(), out->grad.data(),
                                  x->grad.data(), out->numel());
    });
    return out;
  }

  TensorPtrT<T> exp(TensorPtrT<T> x) {
    auto out = leaf(x->shape);
    kernels::par::ew_exp(x->data.data(), out->data.data(), out->numel());
    record(out, {x}, [x, out]() {
      x->ensure_grad();
      kernels::par::acc_mul(out->grad.data(), out->data.data(), x->grad.data(),
                            out->numel());
    });
    return out;
  }

  TensorPtrT<T> log(TensorPtrT<T> x) {
    for (int64_t i = 0; i < x->numel(); ++i) {
      if (!(x->data[i] > T(0))) {
        throw DomainError("log: non-positive input " +
                          std::to_string(static_cast<double>(x->data[i])) +
                          " at index " + std::to_string(i));
      }
    }
    auto out = leaf(x->shape);
    kernels::par::ew_log(x->data.data(), out->data.data(), out->numel());
    record(out, {x}, [x, out]() {
      x->ensure_grad();
      kernels::par::acc_div(out->grad.data(), x->data.data(), x->grad.data(),
                            out->numel());
    });
    return out;
  }

  TensorPtrT<T> neg(TensorPtrT<T> x) { return scale(x, T(-1)); }

  TensorPtrT<T> scale(TensorPtrT<T> x, T c) {
    auto out = leaf(x->shape);
    kernels::par::ew_scale(x->data.data(), c, out->data.data(), out->numel());
    record(out, {x}, [x, out, c]() {
      x->ensure_grad();
      kernels::par::acc_scaled(out->grad.data(), c, x->grad.data(),
                               out->numel());
    });
    return out;
  }

  // x[rows, cols] + b[cols], broadcast over rows.
  TensorPtrT<T> add_bias(TensorPtrT<T> x, TensorPtrT<T> b) {
    if (x->rank() != 2 || b->rank() != 1 || x->dim(1) != b->dim(0)) {
      throw ShapeError("add_bias: incompatible shapes " +
                       shape_str(x->shape) + " + " + shape_str(b->shape));
    }
    const int64_t rows = x->dim(0), cols = x->dim(1);
    auto out = leaf(x->shape);
    kernels::par::add_rowvec(x->data.data(), b->data.data(), out->data.data(),
                             rows, cols);
    record(out, {x, b}, [x, b, out, rows, cols]() {
      if (x->requires_grad) {
        x->ensure_grad();
        kernels::par::acc_scaled(out->grad.data(), T(1), x->grad.data(),
                                 out->numel());
      }
      if (b->requires_grad) {
        b->ensure_grad();
        kernels::par::col_sum_acc(out->grad.data(), b->grad.data(), rows,
                                  cols);
      }
    });
    return out;
  }

  TensorPtrT<T> reduce(TensorPtrT<T> x, ReduceKind kind, int axis) {
    if (axis < 0 || axis >= x->rank()) {
      throw ShapeError("reduce: axis " + std::to_string(axis) +
                       " out of range for " + shape_str(x->shape));
    }
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= x->dim(i);
    const int64_t extent = x->dim(axis);
    for (int i = axis + 1; i < x->rank(); ++i) inner *= x->dim(i);
    std::vector<int64_t> out_shape;
    for (int i = 0; i < x->rank(); ++i) {
      if (i != axis) out_shape.push_back(x->dim(i));
    }
    if (out_shape.empty()) out_shape = {1};
    const T s = kind == ReduceKind::mean ? T(1) / static_cast<T>(extent) : T(1);
    auto out = leaf(out_shape);
    kernels::par::reduce_sum_axis(x->data.data(), out->data.data(), outer,
                                  extent, inner, s);
    record(out, {x}, [x, out, outer, extent, inner, s]() {
      x->ensure_grad();
      kernels::par::reduce_bcast_acc(out->grad.data(), x->grad.data(), outer,
                                     extent, inner, s);
    });
    return out;
  }

  TensorPtrT<T> sum_all(TensorPtrT<T> x) { return reduce_all(x, T(1)); }

  TensorPtrT<T> mean_all(TensorPtrT<T> x) {
    return reduce_all(x, T(1) / static_cast<T>(x->numel()));
  }

  TensorPtrT<T> l2_normalize(TensorPtrT<T> x) {
    if (x->rank() != 2) {
      throw ShapeError("l2_normalize: want rank 2, got " +
                       shape_str(x->shape));
    }
    const int64_t rows = x->dim(0), cols = x->dim(1);
    constexpr double kMinNorm = 1e-12;
    for (int64_t i = 0; i < rows; ++i) {
      double sq = 0;
      for (int64_t j = 0; j < cols; ++j) {
        double v = static_cast<double>(x->data[i * cols + j]);
        sq += v * v;
      }
      if (sq < kMinNorm * kMinNorm) {
        throw DomainError("l2_normalize: degenerate embedding, row " +
                          std::to_string(i) + " has near-zero norm");
      }
    }
    auto out = leaf(x->shape);
    auto norms = std::make_shared<std::vector<T>>(static_cast<size_t>(rows));
    kernels::par::l2norm_rows(x->data.data(), out->data.data(), norms->data(),
                              rows, cols);
    record(out, {x}, [x, out, norms, rows, cols]() {
      x->ensure_grad();
      kernels::par::l2norm_rows_bwd(out->data.data(), norms->data(),
                                    out->grad.data(), x->grad.data(), rows,
                                    cols);
    });
    return out;
  }

  TensorPtrT<T> log_softmax(TensorPtrT<T> x) {
    if (x->rank() != 2) {
      throw ShapeError("log_softmax: want rank 2, got " +
                       shape_str(x->shape));
    }
    const int64_t rows = x->dim(0), cols = x->dim(1);
    auto out = leaf(x->shape);
    kernels::par::logsoftmax_rows(x->data.data(), out->data.data(), rows,
                                  cols);
    record(out, {x}, [x, out, rows, cols]() {
      x->ensure_grad();
      kernels::par::logsoftmax_rows_bwd(out->data.data(), out->grad.data(),
                                        x->grad.data(), rows, cols);
    });
    return out;
  }

  // Gather rows of a matrix; backward scatters into the source rows.
  TensorPtrT<T> select_rows(TensorPtrT<T> x, std::vector<int64_t> rows) {
    if (x->rank() != 2) {
      throw ShapeError("select_rows: want rank 2, got " + shape_str(x->shape));
    }
    const int64_t cols = x->dim(1);
    for (int64_t r : rows) {
      if (r < 0 || r >= x->dim(0)) {
        throw ShapeError("select_rows: row " + std::to_string(r) +
                         " out of range for " + shape_str(x->shape));
      }
    }
    auto out = leaf({static_cast<int64_t>(rows.size()), cols});
    for (size_t i = 0; i < rows.size(); ++i) {
      for (int64_t j = 0; j < cols; ++j) {
        out->data[i * cols + j] = x->data[rows[i] * cols + j];
      }
    }
    auto idx = std::make_shared<std::vector<int64_t>>(std::move(rows));
    record(out, {x}, [x, out, idx, cols]() {
      x->ensure_grad();
      for (size_t i = 0; i < idx->size(); ++i) {
        for (int64_t j = 0; j < cols; ++j) {
          x->grad[(*idx)[i] * cols + j] += out->grad[i * cols + j];
        }
      }
    });
    return out;
  }

  TensorPtrT<T> reshape(TensorPtrT<T> x, std::vector<int64_t> new_shape) {
    if (shape_numel(new_shape) != x->numel()) {
      throw ShapeError("reshape: cannot view " + shape_str(x->shape) + " as " +
                       shape_str(new_shape));
    }
    auto out = leaf(std::move(new_shape), x->data);
    record(out, {x}, [x, out]() {
      x->ensure_grad();
      kernels::par::acc_scaled(out->grad.data(), T(1), x->grad.data(),
                               out->numel());
    });
    return out;
  }

  // ---- backward ----

  void backward(TensorPtrT<T> loss) {
    if (loss->numel() != 1) {
      throw ShapeError("backward: loss must be scalar, got " +
                       shape_str(loss->shape));
    }
    if (consumed_ && records_.size() == records_at_backward_) {
      throw GraphReuseError(
          "backward: graph already consumed; run a new forward first");
    }
    int64_t loss_idx = -1;
    for (int64_t i = static_cast<int64_t>(records_.size()) - 1; i >= 0; --i) {
      if (records_[static_cast<size_t>(i)].out == loss) {
        loss_idx = i;
        break;
      }
    }
    if (loss_idx < 0) {
      throw NumericError("backward: loss was not produced by this graph");
    }
    loss->ensure_grad();
    loss->grad[0] += T(1);
    for (int64_t i = loss_idx; i >= 0; --i) {
      auto& rec = records_[static_cast<size_t>(i)];
      if (rec.out->has_grad()) rec.backprop();
    }
    consumed_ = true;
    records_at_backward_ = records_.size();
  }

  void clear() {
    records_.clear();
    consumed_ = false;
    records_at_backward_ = 0;
  }

  size_t num_records() const { return records_.size(); }

 private:
  struct Record {
    TensorPtrT<T> out;
    std::function<void()> backprop;
  };

  static T* sink(std::vector<T>& v, int64_t n) {
    v.assign(static_cast<size_t>(n), T(0));
    return v.data();
  }

  static void check_same_shape(const char* op, const TensorPtrT<T>& a,
                               const TensorPtrT<T>& b) {
    if (a->shape != b->shape) {
      throw ShapeError(std::string(op) + ": shape mismatch " +
                       shape_str(a->shape) + " vs " + shape_str(b->shape));
    }
  }

  TensorPtrT<T> reduce_all(TensorPtrT<T> x, T s) {
    auto out = leaf({1});
    out->data[0] = s * kernels::par::sum_all(x->data.data(), x->numel());
    record(out, {x}, [x, out, s]() {
      x->ensure_grad();
      kernels::par::reduce_bcast_acc(out->grad.data(), x->grad.data(), 1,
                                     x->numel(), 1, s);
    });
    return out;
  }

  void record(TensorPtrT<T>& out, std::initializer_list<TensorPtrT<T>> inputs,
              std::function<void()> backprop) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || in->requires_grad;
    out->requires_grad = needs;
    if (needs) {
      records_.push_back({out, std::move(backprop)});
    }
  }

  std::vector<Record> records_;
  bool consumed_ = false;
  size_t records_at_backward_ = 0;
};

using Tensor = TensorT<float>;
using TensorPtr = TensorPtrT<float>;
using Graph = GraphT<float>;

}  // namespace semisup
