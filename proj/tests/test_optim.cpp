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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "semisup/optim.hpp"
#include "semisup/rng.hpp"

using namespace semisup;

namespace {

NamedTensorT<double> named(const std::string& name, std::vector<double> data,
                           ParamKind kind = ParamKind::weight) {
  const int64_t n = static_cast<int64_t>(data.size());
  auto t = GraphT<double>::leaf({n}, std::move(data), true);
  t->ensure_grad();
  return {name, t, kind};
}

}  // namespace

TEST_CASE("schedule: paper peak learning rates are exact") {
  ScheduleSpec a;
  a.base_coefficient = 0.1;
  a.batch_size = 4096;
  CHECK(a.peak_lr() == 6.4);

  ScheduleSpec b;
  b.base_coefficient = 0.005;
  b.batch_size = 1024;
  CHECK(b.peak_lr() == 0.16);
}

TEST_CASE("schedule: endpoints and warmup junction continuity") {
  ScheduleSpec s;
  s.base_coefficient = 0.1;
  s.batch_size = 256;
  s.total_steps = 1000;
  s.warmup_fraction = 0.05;
  const double peak = s.peak_lr();

  CHECK(schedule_lr(s, 0) == 0.0);
  CHECK(schedule_lr(s, 50) == doctest::Approx(peak).epsilon(1e-15));
  CHECK(schedule_lr(s, 1000) == doctest::Approx(0.0).scale(1).epsilon(1e-12));

  // continuity at the junction: approach from both sides
  double below = schedule_lr(s, 49);
  double at = schedule_lr(s, 50);
  CHECK(std::fabs(at - peak) < 1e-9);
  CHECK(below < at);
  CHECK(at - below < peak * 0.03);

  // no warmup: starts at peak
  ScheduleSpec nw = s;
  nw.warmup_fraction = 0.0;
  CHECK(schedule_lr(nw, 0) == doctest::Approx(peak).epsilon(1e-15));

  CHECK_THROWS_AS(schedule_lr(s, -1), ConfigError);
  CHECK_THROWS_AS(schedule_lr(s, 1001), ConfigError);
}

TEST_CASE("lars: zero gradient with zero momentum and wd changes nothing") {
  auto p = named("w", {1.0, 2.0, 3.0});
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::lars;
  cfg.weight_decay = 0.0;
  OptimizerT<double> opt(cfg, {p}, {});
  opt.step(0.5);
  CHECK(p.tensor->data[0] == 1.0);
  CHECK(p.tensor->data[1] == 2.0);
  CHECK(p.tensor->data[2] == 3.0);
}

TEST_CASE("lars: zero-norm weights fall back to ratio 1") {
  auto p = named("w", {0.0, 0.0});
  p.tensor->grad = {1.0, 0.0};
  OptimizerConfig cfg;
  cfg.weight_decay = 0.0;
  cfg.trust_coefficient = 0.001;
  OptimizerT<double> opt(cfg, {p}, {});
  opt.step(0.1);
  // ratio falls back to 1: w -= lr * g
  CHECK(p.tensor->data[0] == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(p.tensor->data[1] == 0.0);
}

TEST_CASE("lars single step matches the stated recursion on a 2-vector") {
  auto p = named("w", {3.0, 4.0});
  p.tensor->grad = {1.0, 0.0};
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::lars;
  cfg.weight_decay = 0.0;
  cfg.trust_coefficient = 1.0;
  cfg.momentum = 0.9;
  OptimizerT<double> opt(cfg, {p}, {});
  opt.step(0.1);
  // direct evaluation: ||w|| = 5, ||g'|| = 1, ratio = 5/(1+1e-9)
  double ratio = 1.0 * 5.0 / (1.0 + 1e-9);
  double m0 = ratio * 0.1 * 1.0;
  CHECK(p.tensor->data[0] == doctest::Approx(3.0 - m0).epsilon(1e-12));
  CHECK(p.tensor->data[1] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("lars is scale-equivariant in the gradient (fresh momentum, wd=0)") {
  Rng rng(301);
  std::vector<double> w0(20), g0(20);
  for (auto& v : w0) v = rng.uniform(-1.0, 1.0);
  for (auto& v : g0) v = rng.uniform(-1.0, 1.0);

  auto run = [&](double c) {
    auto p = named("w", w0);
    p.tensor->grad.assign(g0.begin(), g0.end());
    for (auto& v : p.tensor->grad) v *= c;
    OptimizerConfig cfg;
    cfg.weight_decay = 0.0;
    cfg.trust_coefficient = 0.01;
    OptimizerT<double> opt(cfg, {p}, {});
    opt.step(0.3);
    return p.tensor->data;
  };
  auto base = run(1.0);
  for (double c : {3.0, 0.25, 1000.0}) {
    auto scaled = run(c);
    for (size_t i = 0; i < base.size(); ++i) {
      CHECK(std::fabs(scaled[i] - base[i]) < 1e-6);
    }
  }
}

TEST_CASE("weight decay never touches excluded parameters") {
  Rng rng(302);
  std::vector<double> b0(8), g0(8);
  for (auto& v : b0) v = rng.uniform(-1.0, 1.0);
  for (auto& v : g0) v = rng.uniform(-1.0, 1.0);

  auto run = [&](double wd) {
    auto p = named("layer.bias", b0, ParamKind::bias);
    p.tensor->grad.assign(g0.begin(), g0.end());
    OptimizerConfig cfg;
    cfg.weight_decay = wd;
    OptimizerT<double> opt(cfg, {p}, {"layer.bias"});
    opt.step(0.2);
    return p.tensor->data;
  };
  auto no_wd = run(0.0);
  auto with_wd = run(0.5);
  for (size_t i = 0; i < no_wd.size(); ++i) {
    CHECK(no_wd[i] == with_wd[i]);  // bit-exact
  }
}

TEST_CASE("one optimizer step with lr=0 changes nothing") {
  Rng rng(303);
  std::vector<double> w0(10), g0(10);
  for (auto& v : w0) v = rng.uniform(-1.0, 1.0);
  for (auto& v : g0) v = rng.uniform(-1.0, 1.0);
  for (auto kind : {OptimizerKind::lars, OptimizerKind::sgd}) {
    auto p = named("w", w0);
    p.tensor->grad.assign(g0.begin(), g0.end());
    OptimizerConfig cfg;
    cfg.kind = kind;
    OptimizerT<double> opt(cfg, {p}, {});
    opt.step(0.0);
    for (size_t i = 0; i < w0.size(); ++i) CHECK(p.tensor->data[i] == w0[i]);
  }
}

TEST_CASE("sgd with momentum 0 reduces to vanilla gradient descent") {
  auto p = named("w", {1.0, -2.0});
  p.tensor->grad = {0.5, 0.25};
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::sgd;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.0;
  OptimizerT<double> opt(cfg, {p}, {});
  opt.step(0.1);
  CHECK(p.tensor->data[0] == doctest::Approx(1.0 - 0.05).epsilon(1e-15));
  CHECK(p.tensor->data[1] == doctest::Approx(-2.0 - 0.025).epsilon(1e-15));
}

TEST_CASE("sgd equals lars when the trust ratio is forced to 1") {
  // craft ||w|| == ||g'|| so the lars ratio with tc=1 is 1/(1+eps)
  std::vector<double> w0 = {3.0, 4.0};
  std::vector<double> g0 = {0.0, 5.0};
  auto run = [&](OptimizerKind kind) {
    auto p = named("w", w0);
    p.tensor->grad.assign(g0.begin(), g0.end());
    OptimizerConfig cfg;
    cfg.kind = kind;
    cfg.weight_decay = 0.0;
    cfg.trust_coefficient = 1.0;
    OptimizerT<double> opt(cfg, {p}, {});
    opt.step(0.25);
    return p.tensor->data;
  };
  auto lars = run(OptimizerKind::lars);
  auto sgd = run(OptimizerKind::sgd);
  for (size_t i = 0; i < w0.size(); ++i) {
    CHECK(lars[i] == doctest::Approx(sgd[i]).epsilon(1e-9));
  }
}

TEST_CASE("sgd momentum converges on a quadratic bowl") {
  // f(w) = 0.5 * sum a_i (w_i - t_i)^2, minimum at t
  std::vector<double> a = {1.2, 0.6, 0.9, 1.5};
  std::vector<double> t = {0.3, -1.0, 2.0, 0.7};
  auto p = named("w", {0.0, 0.0, 0.0, 0.0});
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::sgd;
  cfg.momentum = 0.9;
  cfg.weight_decay = 0.0;
  OptimizerT<double> opt(cfg, {p}, {});
  for (int step = 0; step < 200; ++step) {
    for (int i = 0; i < 4; ++i) {
      p.tensor->grad[i] = a[i] * (p.tensor->data[i] - t[i]);
    }
    opt.step(0.1);
  }
  double dist = 0;
  for (int i = 0; i < 4; ++i) {
    dist += (p.tensor->data[i] - t[i]) * (p.tensor->data[i] - t[i]);
  }
  CHECK(std::sqrt(dist) < 1e-4);
}

TEST_CASE("non-finite gradients are rejected with the parameter name") {
  auto p = named("encoder.block0.weight", {1.0, 2.0});
  p.tensor->grad = {std::nan(""), 0.0};
  OptimizerT<double> opt(OptimizerConfig{}, {p}, {});
  CHECK_THROWS_WITH_AS(opt.step(0.1),
                       doctest::Contains("encoder.block0.weight"),
                       NumericError);
}
