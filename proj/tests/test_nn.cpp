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

#include "semisup/nn.hpp"
#include "semisup/rng.hpp"
#include "semisup/tensor.hpp"

using namespace semisup;

namespace {

NetworkSpec small_mlp_spec() {
  NetworkSpec spec;
  spec.encoder.kind = EncoderKind::mlp;
  spec.encoder.depth_blocks = 2;
  spec.encoder.width_multiplier = 1.0;
  spec.encoder.input_shape = {1, 8, 8};
  spec.head.num_layers = 3;
  spec.head.output_dim = 32;
  return spec;
}

TensorPtrT<double> random_batch(Rng& rng, int64_t n, const EncoderSpec& enc) {
  auto x = GraphT<double>::leaf(
      {n, enc.input_shape[0], enc.input_shape[1], enc.input_shape[2]});
  for (auto& v : x->data) v = rng.uniform(0.0, 1.0);
  return x;
}

}  // namespace

TEST_CASE("zero weights give zero encoder output (beta of final BN)") {
  auto spec = small_mlp_spec();
  auto net = build_network<double>(spec, Rng(1));
  for (auto& p : net.params) {
    for (auto& v : p.tensor->data) v = 0.0;
  }
  // restore gamma=1 so batchnorm is not degenerate in eval
  Rng rng(2);
  auto x = random_batch(rng, 4, spec.encoder);
  GraphT<double> g;
  auto h = net.encoder_forward(g, x, Mode::train);
  for (double v : h->data) CHECK(v == 0.0);
}

TEST_CASE("width multiplier 2 doubles the feature dim") {
  EncoderSpec e;
  e.kind = EncoderKind::mlp;
  int64_t base = e.feature_dim();
  e.width_multiplier = 2.0;
  CHECK(e.feature_dim() == 2 * base);

  EncoderSpec c;
  c.kind = EncoderKind::smallconv;
  c.depth_blocks = 2;
  int64_t cbase = c.feature_dim();
  c.width_multiplier = 2.0;
  CHECK(c.feature_dim() == 2 * cbase);
}

TEST_CASE("parameter count matches the closed form for a known mlp") {
  // (mlp, depth 2, width 1, in 64): two blocks of linear(64->128, 128->128)
  // with bias + bn gamma/beta
  auto spec = small_mlp_spec();
  spec.head.num_layers = 0;
  auto net = build_network<double>(spec, Rng(3));
  int64_t closed_form = (64 * 128 + 128 + 2 * 128) + (128 * 128 + 128 + 2 * 128);
  CHECK(net.param_count() == closed_form);
}

TEST_CASE("head_forward returns L+1 activations, a_0 is h, z is unit") {
  auto spec = small_mlp_spec();
  auto net = build_network<double>(spec, Rng(4));
  Rng rng(5);
  auto x = random_batch(rng, 6, spec.encoder);
  GraphT<double> g;
  auto h = net.encoder_forward(g, x, Mode::train);
  auto acts = net.head_forward(g, h);
  REQUIRE(acts.size() == 4);  // a_0..a_3
  CHECK(acts[0] == h);        // identically the same node
  CHECK(acts[3]->dim(1) == spec.head.output_dim);

  auto z = g.l2_normalize(acts[3]);
  for (int64_t i = 0; i < z->dim(0); ++i) {
    double sq = 0;
    for (int64_t j = 0; j < z->dim(1); ++j) {
      sq += z->data[i * z->dim(1) + j] * z->data[i * z->dim(1) + j];
    }
    CHECK(std::fabs(std::sqrt(sq) - 1.0) < 1e-6);
  }
}

TEST_CASE("L=2 head returns 3 activations") {
  auto spec = small_mlp_spec();
  spec.head.num_layers = 2;
  auto net = build_network<double>(spec, Rng(6));
  Rng rng(7);
  auto x = random_batch(rng, 4, spec.encoder);
  GraphT<double> g;
  auto acts = net.head_forward(g, net.encoder_forward(g, x, Mode::train));
  CHECK(acts.size() == 3);
}

TEST_CASE("build_finetune_network: from_layer 0 is encoder plus task head") {
  auto spec = small_mlp_spec();
  auto pre = build_network<double>(spec, Rng(8));
  auto ft = build_finetune_network(pre, 0, 10, Rng(9));
  CHECK(ft.head_layers.empty());
  CHECK(ft.task_head.has_value());
  int64_t expected =
      pre.param_count() -
      [&] {
        // remove all head layers from the pretrained count
        int64_t head = 0;
        for (const auto& p : pre.params) {
          if (p.name.rfind("head.", 0) == 0) head += p.tensor->numel();
        }
        return head;
      }() +
      (128 * 10 + 10);
  CHECK(ft.param_count() == expected);
}

TEST_CASE("build_finetune_network: from_layer 1 keeps exactly one head layer") {
  auto spec = small_mlp_spec();
  auto pre = build_network<double>(spec, Rng(10));
  auto ft = build_finetune_network(pre, 1, 10, Rng(11));
  CHECK(ft.head_layers.size() == 1);
  // retained weights are bit-equal to the pretrained values before any step
  auto src = pre.param("head.layer1.weight");
  auto dst = ft.param("head.layer1.weight");
  REQUIRE(src->data.size() == dst->data.size());
  for (size_t i = 0; i < src->data.size(); ++i) {
    CHECK(src->data[i] == dst->data[i]);
  }
  auto esrc = pre.param("encoder.block0.weight");
  auto edst = ft.param("encoder.block0.weight");
  for (size_t i = 0; i < esrc->data.size(); ++i) {
    CHECK(esrc->data[i] == edst->data[i]);
  }
}

TEST_CASE("finetune parameter count identity for every retain depth") {
  auto spec = small_mlp_spec();
  auto pre = build_network<double>(spec, Rng(12));
  int64_t encoder_count = 0;
  std::vector<int64_t> head_layer_count(4, 0);
  for (const auto& p : pre.params) {
    if (p.name.rfind("encoder.", 0) == 0) encoder_count += p.tensor->numel();
    for (int k = 1; k <= 3; ++k) {
      if (p.name.rfind("head.layer" + std::to_string(k) + ".", 0) == 0) {
        head_layer_count[k] += p.tensor->numel();
      }
    }
  }
  for (int k = 0; k < 3; ++k) {
    auto ft = build_finetune_network(pre, k, 10, Rng(13));
    int64_t task_count = ft.task_head->w->numel() + ft.task_head->b->numel();
    int64_t expected = encoder_count + task_count;
    for (int i = 1; i <= k; ++i) expected += head_layer_count[i];
    CHECK(ft.param_count() == expected);
  }
  CHECK_THROWS_AS(build_finetune_network(pre, 3, 10, Rng(14)), ConfigError);
  CHECK_THROWS_AS(build_finetune_network(pre, -1, 10, Rng(14)), ConfigError);
}

TEST_CASE("ema update: decay endpoints and geometric convergence") {
  auto spec = small_mlp_spec();
  spec.head.num_layers = 0;
  auto src = build_network<double>(spec, Rng(15));

  EmaNetworkT<double> zero_decay(src, 0.0);
  auto perturbed = src.clone();
  for (auto& p : perturbed.params) {
    for (auto& v : p.tensor->data) v += 0.5;
  }
  zero_decay.update(perturbed);
  for (size_t i = 0; i < src.params.size(); ++i) {
    CHECK(zero_decay.shadow().params[i].tensor->data[0] ==
          perturbed.params[i].tensor->data[0]);
  }

  EmaNetworkT<double> one_decay(src, 1.0);
  one_decay.update(perturbed);
  for (size_t i = 0; i < src.params.size(); ++i) {
    CHECK(one_decay.shadow().params[i].tensor->data[0] ==
          src.params[i].tensor->data[0]);
  }

  // shadow after k steps of constant source: w + (s0 - w) * decay^k
  EmaNetworkT<double> ema(src, 0.999);
  const int k = 50;
  for (int i = 0; i < k; ++i) ema.update(perturbed);
  double s0 = src.params[0].tensor->data[0];
  double w = perturbed.params[0].tensor->data[0];
  double expected = w + (s0 - w) * std::pow(0.999, k);
  CHECK(ema.shadow().params[0].tensor->data[0] ==
        doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("ema update is a contraction toward a constant source") {
  auto spec = small_mlp_spec();
  spec.head.num_layers = 0;
  spec.encoder.depth_blocks = 1;
  auto src = build_network<double>(spec, Rng(16));
  auto target = src.clone();
  for (auto& p : target.params) {
    for (auto& v : p.tensor->data) v += 0.25;
  }
  EmaNetworkT<double> ema(src, 0.7);
  auto dist = [&]() {
    double sq = 0;
    for (size_t i = 0; i < target.params.size(); ++i) {
      const auto& a = ema.shadow().params[i].tensor->data;
      const auto& b = target.params[i].tensor->data;
      for (size_t j = 0; j < a.size(); ++j) sq += (a[j] - b[j]) * (a[j] - b[j]);
    }
    return std::sqrt(sq);
  };
  double prev = dist();
  for (int it = 0; it < 5; ++it) {
    ema.update(target);
    double cur = dist();
    CHECK(cur <= 0.7 * prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("ema rejects mismatched topology") {
  auto spec = small_mlp_spec();
  auto a = build_network<double>(spec, Rng(17));
  spec.encoder.depth_blocks = 3;
  auto b = build_network<double>(spec, Rng(18));
  EmaNetworkT<double> ema(a, 0.9);
  CHECK_THROWS_AS(ema.update(b), StructureError);
}

TEST_CASE("param_groups: weights adapted, bias and bn excluded, partition") {
  auto spec = small_mlp_spec();
  spec.num_classes = 10;
  spec.head.num_layers = 0;
  auto net = build_network<double>(spec, Rng(19));
  auto groups = param_groups(net);

  CHECK(groups.adapted.count("encoder.block0.weight") == 1);
  CHECK(groups.adapted.count("task.weight") == 1);
  CHECK(groups.excluded.count("encoder.block0.bias") == 1);
  CHECK(groups.excluded.count("encoder.block0.bn.gamma") == 1);
  CHECK(groups.excluded.count("encoder.block0.bn.beta") == 1);
  CHECK(groups.excluded.count("task.bias") == 1);

  // disjoint union covers all parameters
  CHECK(groups.adapted.size() + groups.excluded.size() == net.params.size());
  for (const auto& name : groups.adapted) {
    CHECK(groups.excluded.count(name) == 0);
  }
}

TEST_CASE("two networks from the same spec and seed are identical") {
  auto spec = small_mlp_spec();
  auto a = build_network<double>(spec, Rng(77));
  auto b = build_network<double>(spec, Rng(77));
  REQUIRE(a.params.size() == b.params.size());
  for (size_t i = 0; i < a.params.size(); ++i) {
    CHECK(a.params[i].name == b.params[i].name);
    for (size_t j = 0; j < a.params[i].tensor->data.size(); ++j) {
      CHECK(a.params[i].tensor->data[j] == b.params[i].tensor->data[j]);
    }
  }
  auto c = build_network<double>(spec, Rng(78));
  bool any_diff = false;
  for (size_t j = 0; j < a.params[0].tensor->data.size(); ++j) {
    any_diff = any_diff ||
               (a.params[0].tensor->data[j] != c.params[0].tensor->data[j]);
  }
  CHECK(any_diff);
}

TEST_CASE("smallconv encoder: shapes, pooling, task path") {
  NetworkSpec spec;
  spec.encoder.kind = EncoderKind::smallconv;
  spec.encoder.depth_blocks = 2;
  spec.encoder.width_multiplier = 1.0;
  spec.encoder.input_shape = {1, 8, 8};
  spec.head.num_layers = 2;
  spec.head.output_dim = 16;
  auto net = build_network<double>(spec, Rng(20));
  CHECK(spec.encoder.feature_dim() == 32);  // 16 * 2^(2-1)

  Rng rng(21);
  auto x = random_batch(rng, 4, spec.encoder);
  GraphT<double> g;
  auto h = net.encoder_forward(g, x, Mode::train);
  CHECK(h->shape == std::vector<int64_t>({4, 32}));
  auto acts = net.head_forward(g, h);
  CHECK(acts.back()->shape == std::vector<int64_t>({4, 16}));

  auto ft = build_finetune_network(net, 1, 5, Rng(22));
  GraphT<double> g2;
  auto logits = ft.task_logits(g2, random_batch(rng, 3, spec.encoder),
                               Mode::eval);
  CHECK(logits->shape == std::vector<int64_t>({3, 5}));
}

TEST_CASE("input shape mismatch raises a dimension error") {
  auto spec = small_mlp_spec();
  auto net = build_network<double>(spec, Rng(23));
  GraphT<double> g;
  auto bad = GraphT<double>::leaf({2, 3, 8, 8});
  CHECK_THROWS_AS(net.encoder_forward(g, bad, Mode::train), ShapeError);
}
