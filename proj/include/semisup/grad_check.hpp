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

#include <cmath>
#include <functional>
#include <vector>

#include "semisup/tensor.hpp"

namespace semisup {

// Verification harness: compares reverse-mode gradients against central
// finite differences. Runs in double regardless of training precision.

struct GradCheckReport {
  double worst_rel_err = 0.0;
  int64_t worst_coord = -1;
  int64_t checked = 0;
  int64_t excluded = 0;  // coordinates sitting on a kink (e.g. relu at 0)
  bool pass = true;
};

// f must be deterministic and scalar-valued: it builds a fresh forward for
// the given input tensor on the given graph.
using ScalarFn =
    std::function<TensorPtrT<double>(GraphT<double>&, TensorPtrT<double>)>;

inline GradCheckReport grad_check(const ScalarFn& f,
                                  const std::vector<int64_t>& shape,
                                  std::vector<double> x0, double eps = 1e-5,
                                  double tol = 1e-4) {
  GradCheckReport report;

  GraphT<double> g;
  auto x = GraphT<double>::leaf(shape, x0, true);
  auto loss = f(g, x);
  if (loss->numel() != 1) {
    throw ShapeError("grad_check: f must be scalar-valued, got " +
                     shape_str(loss->shape));
  }
  const double f0 = loss->item();
  g.backward(loss);
  std::vector<double> analytic = x->grad;

  auto eval = [&](const std::vector<double>& xv) {
    GraphT<double> gg;
    auto xt = GraphT<double>::leaf(shape, xv, false);
    return f(gg, xt)->item();
  };

  for (size_t i = 0; i < x0.size(); ++i) {
    const double saved = x0[i];
    x0[i] = saved + eps;
    const double fp = eval(x0);
    x0[i] = saved - eps;
    const double fm = eval(x0);
    x0[i] = saved;

    // One-sided slopes disagreeing by a large fraction of their magnitude
    // means the coordinate sits on a kink; central differences are
    // meaningless there, so it is excluded from the comparison.
    const double fwd = (fp - f0) / eps;
    const double bwd = (f0 - fm) / eps;
    const double kink_scale = std::max({std::fabs(fwd), std::fabs(bwd), 1.0});
    if (std::fabs(fwd - bwd) > 0.1 * kink_scale) {
      ++report.excluded;
      continue;
    }

    const double numeric = (fp - fm) / (2.0 * eps);
    const double denom =
        std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-2});
    const double rel = std::fabs(analytic[i] - numeric) / denom;
    ++report.checked;
    if (rel > report.worst_rel_err) {
      report.worst_rel_err = rel;
      report.worst_coord = static_cast<int64_t>(i);
    }
  }
  report.pass = report.worst_rel_err < tol;
  return report;
}

}  // namespace semisup
