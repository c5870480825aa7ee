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

#include "semisup/verify.hpp"

#include <functional>
#include <ostream>
#include <vector>

#include "semisup/grad_check.hpp"
#include "semisup/losses.hpp"
#include "semisup/rng.hpp"

namespace semisup {

namespace {

using G = GraphT<double>;
using P = TensorPtrT<double>;

struct Check {
  const char* name;
  std::vector<int64_t> shape;
  double lo, hi;
  double tol;
  // builds the scalar function for one trial; may draw trial-specific
  // constants from the rng
  std::function<ScalarFn(Rng&)> make;
};

std::vector<double> draw(Rng& rng, int64_t n, double lo, double hi) {
  std::vector<double> v(static_cast<size_t>(n));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

bool run_grad_check_suite(std::ostream& out) {
  Rng rng(0xC0FFEE);
  const int kTrials = 20;

  std::vector<Check> checks;

  checks.push_back({"matmul(lhs)", {5, 7}, -1, 1, 1e-4, [](Rng& r) {
    auto b = draw(r, 7 * 3, -1, 1);
    return [b](G& g, P x) {
      auto bt = G::leaf({7, 3}, b);
      auto y = g.matmul(x, bt);
      return g.sum_all(g.mul(y, y));
    };
  }});
  checks.push_back({"matmul(rhs)", {7, 3}, -1, 1, 1e-4, [](Rng& r) {
    auto a = draw(r, 5 * 7, -1, 1);
    return [a](G& g, P x) {
      auto at = G::leaf({5, 7}, a);
      auto y = g.matmul(at, x);
      return g.sum_all(g.mul(y, y));
    };
  }});
  checks.push_back({"conv2d(input)", {2, 3, 8, 8}, -1, 1, 1e-4, [](Rng& r) {
    auto k = draw(r, 4 * 3 * 9, -0.5, 0.5);
    int64_t stride = 1 + (r.next_u64() % 2);
    return [k, stride](G& g, P x) {
      auto kt = G::leaf({4, 3, 3, 3}, k);
      auto y = g.conv2d(x, kt, stride);
      return g.sum_all(g.mul(y, y));
    };
  }});
  checks.push_back({"conv2d(kernel)", {4, 3, 3, 3}, -0.5, 0.5, 1e-4,
                    [](Rng& r) {
    auto xd = draw(r, 2 * 3 * 8 * 8, -1, 1);
    return [xd](G& g, P k) {
      auto xt = G::leaf({2, 3, 8, 8}, xd);
      auto y = g.conv2d(xt, k, 1);
      return g.sum_all(g.mul(y, y));
    };
  }});
  checks.push_back({"batchnorm(input)", {6, 4}, -2, 2, 1e-4, [](Rng& r) {
    auto gm = draw(r, 4, 0.5, 1.5);
    auto bt = draw(r, 4, -0.5, 0.5);
    return [gm, bt](G& g, P x) {
      auto gamma = G::leaf({4}, gm);
      auto beta = G::leaf({4}, bt);
      auto rm = G::leaf({4});
      auto rv = G::leaf({4}, std::vector<double>(4, 1.0));
      auto y = g.batchnorm(x, gamma, beta, rm, rv, 0.9, 1e-5, Mode::train);
      return g.sum_all(g.mul(y, y));
    };
  }});
  checks.push_back({"batchnorm(affine)", {4}, 0.5, 1.5, 1e-4, [](Rng& r) {
    auto xd = draw(r, 6 * 4, -2, 2);
    return [xd](G& g, P gamma) {
      auto x = G::leaf({6, 4}, xd);
      auto beta = G::leaf({4});
      auto rm = G::leaf({4});
      auto rv = G::leaf({4}, std::vector<double>(4, 1.0));
      auto y = g.batchnorm(x, gamma, beta, rm, rv, 0.9, 1e-5, Mode::train);
      return g.sum_all(g.mul(y, y));
    };
  }});
  checks.push_back({"elementwise suite", {3, 4}, -1.5, 1.5, 1e-4, [](Rng&) {
    return [](G& g, P x) {
      auto a = g.relu(x);
      auto b = g.add(g.mul(a, a), g.exp(g.scale(x, 0.3)));
      auto c = g.add(b, g.neg(g.scale(x, 0.7)));
      return g.mean_all(c);
    };
  }});
  checks.push_back({"log", {6}, 0.1, 3.0, 1e-4, [](Rng&) {
    return [](G& g, P x) { return g.sum_all(g.mul(g.log(x), g.log(x))); };
  }});
  checks.push_back({"reduce(sum/mean)", {3, 5}, -1, 1, 1e-4, [](Rng&) {
    return [](G& g, P x) {
      auto s = g.reduce(x, ReduceKind::sum, 1);
      auto m = g.reduce(x, ReduceKind::mean, 0);
      return g.add(g.sum_all(g.mul(s, s)), g.sum_all(g.mul(m, m)));
    };
  }});
  checks.push_back({"add_bias", {4}, -1, 1, 1e-4, [](Rng& r) {
    auto xd = draw(r, 3 * 4, -1, 1);
    return [xd](G& g, P b) {
      auto x = G::leaf({3, 4}, xd);
      auto y = g.add_bias(x, b);
      return g.sum_all(g.mul(y, y));
    };
  }});
  checks.push_back({"l2_normalize", {4, 6}, -2, 2, 1e-4, [](Rng&) {
    return [](G& g, P x) {
      auto y = g.l2_normalize(x);
      return g.sum_all(g.mul(y, g.exp(g.scale(y, 0.5))));
    };
  }});
  checks.push_back({"log_softmax", {4, 5}, -3, 3, 1e-4, [](Rng& r) {
    auto wd = draw(r, 4 * 5, 0.0, 1.0);
    return [wd](G& g, P x) {
      auto w = G::leaf({4, 5}, wd);
      return g.neg(g.mean_all(g.mul(g.log_softmax(x), w)));
    };
  }});
  checks.push_back({"select_rows", {5, 3}, -1, 1, 1e-4, [](Rng&) {
    return [](G& g, P x) {
      auto y = g.select_rows(x, {4, 0, 2, 0});
      return g.sum_all(g.mul(y, y));
    };
  }});
  checks.push_back({"softmax cross-entropy", {4, 5}, -2, 2, 1e-3, [](Rng& r) {
    std::vector<int> labels;
    for (int i = 0; i < 4; ++i) {
      labels.push_back(static_cast<int>(r.uniform_int(0, 4)));
    }
    return [labels](G& g, P x) { return cross_entropy(g, x, labels); };
  }});
  checks.push_back({"nt-xent composed", {5, 6}, -0.8, 0.8, 1e-3, [](Rng& r) {
    auto xd = draw(r, 8 * 5, -1, 1);
    return [xd](G& g, P w) {
      auto x = G::leaf({8, 5}, xd);
      auto z = g.l2_normalize(g.matmul(x, w));
      ContrastiveConfig cfg;
      cfg.temperature = 0.5;
      return nt_xent(g, z, {1, 0, 3, 2, 5, 4, 7, 6}, cfg);
    };
  }});
  checks.push_back({"distillation composed", {4, 5}, -2, 2, 1e-3, [](Rng& r) {
    std::vector<double> probs(4 * 5);
    for (int i = 0; i < 4; ++i) {
      double sum = 0;
      for (int j = 0; j < 5; ++j) {
        probs[i * 5 + j] = r.uniform(0.05, 1.0);
        sum += probs[i * 5 + j];
      }
      for (int j = 0; j < 5; ++j) probs[i * 5 + j] /= sum;
    }
    return [probs](G& g, P x) {
      auto teacher = G::leaf({4, 5}, probs);
      return distill_loss(g, x, teacher, 0.7);
    };
  }});
  checks.push_back({"combined loss composed", {4, 5}, -2, 2, 1e-3, [](Rng& r) {
    std::vector<double> probs(4 * 5);
    for (int i = 0; i < 4; ++i) {
      double sum = 0;
      for (int j = 0; j < 5; ++j) {
        probs[i * 5 + j] = r.uniform(0.05, 1.0);
        sum += probs[i * 5 + j];
      }
      for (int j = 0; j < 5; ++j) probs[i * 5 + j] /= sum;
    }
    std::vector<int> labels;
    for (int i = 0; i < 4; ++i) {
      labels.push_back(static_cast<int>(r.uniform_int(0, 4)));
    }
    return [probs, labels](G& g, P x) {
      auto teacher = G::leaf({4, 5}, probs);
      DistillConfig cfg;
      cfg.alpha = 0.5;
      cfg.temperature = 1.0;
      auto labeled = g.select_rows(x, {0, 2});
      std::vector<int> lab = {labels[0], labels[2]};
      return combined_loss(g, labeled, lab, x, teacher, cfg);
    };
  }});

  bool all_ok = true;
  for (const auto& check : checks) {
    double worst = 0;
    int64_t excluded = 0;
    bool ok = true;
    for (int t = 0; t < kTrials; ++t) {
      auto fn = check.make(rng);
      auto x0 = draw(rng, shape_numel(check.shape), check.lo, check.hi);
      auto report = grad_check(fn, check.shape, x0, 1e-5, check.tol);
      worst = std::max(worst, report.worst_rel_err);
      excluded += report.excluded;
      ok = ok && report.pass;
    }
    all_ok = all_ok && ok;
    char line[160];
    std::snprintf(line, sizeof(line),
                  "%-24s %2d instances  worst rel err %.3e  tol %.0e%s  [%s]",
                  check.name, kTrials, worst, check.tol,
                  excluded > 0
                      ? ("  (" + std::to_string(excluded) + " kink coords skipped)").c_str()
                      : "",
                  ok ? "ok" : "FAIL");
    out << line << "\n";
  }
  return all_ok;
}

}  // namespace semisup
