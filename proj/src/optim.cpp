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

#include "semisup/optim.hpp"

#include <cmath>

namespace semisup {

double ScheduleSpec::peak_lr() const {
  return base_coefficient * std::sqrt(static_cast<double>(batch_size));
}

double schedule_lr(const ScheduleSpec& spec, int64_t step) {
  if (step < 0 || step > spec.total_steps) {
    throw ConfigError("schedule_lr: step " + std::to_string(step) +
                      " outside [0, " + std::to_string(spec.total_steps) +
                      "]");
  }
  if (spec.warmup_fraction < 0 || spec.warmup_fraction >= 1) {
    throw ConfigError("schedule_lr: warmup_fraction must be in [0, 1)");
  }
  const double peak = spec.peak_lr();
  const double total = static_cast<double>(spec.total_steps);
  const double warmup = spec.warmup_fraction * total;
  const double s = static_cast<double>(step);
  if (s < warmup) {
    return peak * s / warmup;
  }
  const double progress = (s - warmup) / (total - warmup);
  return peak * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

template <typename T>
OptimizerT<T>::OptimizerT(OptimizerConfig cfg,
                          std::vector<NamedTensorT<T>> params,
                          std::set<std::string> excluded)
    : cfg_(cfg), params_(std::move(params)), excluded_(std::move(excluded)) {
  if (cfg_.momentum < 0 || cfg_.momentum >= 1) {
    throw ConfigError("optimizer: momentum must be in [0, 1)");
  }
  momentum_.reserve(params_.size());
  for (const auto& p : params_) {
    momentum_.emplace_back(p.tensor->data.size(), T(0));
  }
}

template <typename T>
void OptimizerT<T>::step(double lr) {
  if (lr < 0) throw ConfigError("optimizer: negative learning rate");
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    auto& p = params_[pi];
    auto& w = p.tensor->data;
    auto& m = momentum_[pi];
    p.tensor->ensure_grad();
    const auto& grad = p.tensor->grad;

    const bool excluded = excluded_.count(p.name) > 0;
    const double wd = excluded ? 0.0 : cfg_.weight_decay;

    // g' = grad + wd * w, with norms accumulated in double
    double w_norm_sq = 0.0, g_norm_sq = 0.0;
    for (size_t i = 0; i < w.size(); ++i) {
      const double gi = static_cast<double>(grad[i]);
      if (!std::isfinite(gi)) {
        throw NumericError("optimizer: non-finite gradient in '" + p.name +
                           "'");
      }
      const double gp = gi + wd * static_cast<double>(w[i]);
      w_norm_sq += static_cast<double>(w[i]) * static_cast<double>(w[i]);
      g_norm_sq += gp * gp;
    }

    double ratio = 1.0;
    if (cfg_.kind == OptimizerKind::lars && !excluded && w_norm_sq > 0 &&
        g_norm_sq > 0) {
      ratio = cfg_.trust_coefficient * std::sqrt(w_norm_sq) /
              (std::sqrt(g_norm_sq) + 1e-9);
    }

    const double scale = ratio * lr;
    for (size_t i = 0; i < w.size(); ++i) {
      const double gp =
          static_cast<double>(grad[i]) + wd * static_cast<double>(w[i]);
      m[i] = static_cast<T>(cfg_.momentum * static_cast<double>(m[i]) +
                            scale * gp);
      w[i] -= m[i];
    }
  }
}

template class OptimizerT<float>;
template class OptimizerT<double>;

}  // namespace semisup
