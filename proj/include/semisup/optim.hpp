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

#include <set>
#include <string>
#include <vector>

#include "semisup/nn.hpp"

namespace semisup {

enum class OptimizerKind { lars, sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::lars;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double trust_coefficient = 0.001;
};

// Linear warmup over the first warmup_fraction of steps, then cosine decay
// to zero. Peak learning rate follows the sqrt-batch-size rule.
struct ScheduleSpec {
  double base_coefficient = 0.1;
  int64_t batch_size = 128;
  int64_t total_steps = 1;
  double warmup_fraction = 0.05;

  double peak_lr() const;
};

double schedule_lr(const ScheduleSpec& spec, int64_t step);

// Heavy-ball optimizer over a set of named parameters. For kind == lars the
// update of each adapted parameter is scaled by the layer-wise trust ratio
//   ratio = trust_coefficient * ||w|| / (||g + wd*w|| + 1e-9)
// (1 if either norm is zero). Parameters in the excluded set (biases,
// batch-norm affine) always use ratio 1 and no weight decay; sgd uses
// ratio 1 everywhere.
//
//   g' = grad + wd * w
//   m  = momentum * m + ratio * lr * g'
//   w  = w - m
template <typename T>
class OptimizerT {
 public:
  OptimizerT(OptimizerConfig cfg, std::vector<NamedTensorT<T>> params,
             std::set<std::string> excluded);

  void step(double lr);

  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  std::vector<NamedTensorT<T>> params_;
  std::set<std::string> excluded_;
  std::vector<std::vector<T>> momentum_;
};

template <typename T>
OptimizerT<T> make_optimizer(OptimizerConfig cfg, const NetworkT<T>& net) {
  return OptimizerT<T>(cfg, net.params, param_groups(net).excluded);
}

using Optimizer = OptimizerT<float>;

}  // namespace semisup
