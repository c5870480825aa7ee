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
#include <cstdio>
#include <fstream>
#include <vector>

#include "semisup/checkpoint.hpp"
#include "semisup/pipeline.hpp"

using namespace semisup;

namespace {

DataBundle tiny_data() { return make_blobs("blobs:4:6x6x1:64/32:3"); }

NetworkSpec tiny_spec() {
  NetworkSpec spec;
  spec.encoder.kind = EncoderKind::mlp;
  spec.encoder.depth_blocks = 1;
  spec.encoder.width_multiplier = 0.25;  // width 32
  spec.encoder.input_shape = {1, 6, 6};
  spec.head.num_layers = 3;
  spec.head.output_dim = 16;
  return spec;
}

TrainPlan tiny_pretrain_plan() {
  TrainPlan plan;
  plan.stage = Stage::pretrain;
  plan.net = tiny_spec();
  plan.epochs = 2;
  plan.batch_size = 16;
  plan.base_lr_coefficient = 0.02;
  plan.seed = 5;
  plan.contrastive.temperature = 0.2;
  return plan;
}

std::string temp_path(const char* name) {
  return std::string("/tmp/semisup_pipe_") + name;
}

}  // namespace

TEST_CASE("checkpoint round-trip: bit-exact eval forward after save/load") {
  auto data = tiny_data();
  auto plan = tiny_pretrain_plan();
  auto result = run_pretrain(plan, data.train);

  Network net = restore(result.checkpoint);
  Graph g;
  std::vector<float> buf(data.test.image_ptr(0),
                         data.test.image_ptr(0) + 8 * data.test.image_size());
  auto x = Graph::leaf({8, 1, 6, 6}, buf);
  auto before = net.project(g, x, Mode::eval)->data;

  auto path = temp_path("ck.ckpt");
  Checkpoint ck = result.checkpoint;
  save_checkpoint(ck, path);
  CHECK(!ck.content_hash.empty());
  auto loaded = load_checkpoint(path);
  CHECK(loaded.content_hash == ck.content_hash);
  Network net2 = restore(loaded);
  Graph g2;
  auto x2 = Graph::leaf({8, 1, 6, 6}, buf);
  auto after = net2.project(g2, x2, Mode::eval)->data;
  REQUIRE(before.size() == after.size());
  for (size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint corruption and truncation are detected") {
  auto data = tiny_data();
  auto plan = tiny_pretrain_plan();
  plan.epochs = 1;
  auto result = run_pretrain(plan, data.train);
  auto path = temp_path("corrupt.ckpt");
  Checkpoint ck = result.checkpoint;
  save_checkpoint(ck, path);

  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  in.close();

  // flip one payload byte: hash mismatch
  std::string flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x40;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(flipped.data(), static_cast<std::streamsize>(flipped.size()));
  out.close();
  CHECK_THROWS_AS(load_checkpoint(path), CorruptionError);

  // drop the tail: also a hash mismatch (the stored hash moves)
  std::ofstream out2(path, std::ios::binary | std::ios::trunc);
  out2.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 9));
  out2.close();
  CHECK_THROWS_AS(load_checkpoint(path), CorruptionError);
  std::remove(path.c_str());
}

TEST_CASE("pretraining touches zero labels and leaves them unlocked") {
  auto data = tiny_data();
  auto plan = tiny_pretrain_plan();
  auto result = run_pretrain(plan, data.train);
  CHECK(result.label_reads == 0);
  CHECK(data.train.label_access_count() == 0);
  CHECK_FALSE(data.train.labels_locked());
  CHECK(std::isfinite(result.first_loss));
  CHECK(std::isfinite(result.final_loss));
  CHECK(result.final_loss >= 0.0);
  // per-epoch rows, no top-1 during pretraining
  CHECK(result.log.rows().size() == 2);
  CHECK(std::isnan(result.log.rows()[0].top1));
}

TEST_CASE("pretrain rejects a one-layer head") {
  auto data = tiny_data();
  auto plan = tiny_pretrain_plan();
  plan.net.head.num_layers = 1;
  CHECK_THROWS_AS(run_pretrain(plan, data.train), ConfigError);
}

TEST_CASE("pretrain with memory queue runs and keeps loss sane") {
  auto data = tiny_data();
  auto plan = tiny_pretrain_plan();
  plan.use_ema_queue = true;
  plan.contrastive.use_queue = true;
  plan.contrastive.queue_capacity = 64;
  plan.ema_decay = 0.99;
  auto result = run_pretrain(plan, data.train);
  CHECK(result.label_reads == 0);
  CHECK(std::isfinite(result.final_loss));
  // queue negatives only enlarge the denominator: loss stays >= 0
  CHECK(result.final_loss >= 0.0);
}

TEST_CASE("queue negatives never shrink the loss for identical embeddings") {
  // structural: the queue contributes denominator terms only
  GraphT<double> g;
  std::vector<double> z = {1, 0, 0, 1, 1, 0, 0, 1};
  auto zt = GraphT<double>::leaf({4, 2}, z);
  ContrastiveConfig cfg;
  cfg.temperature = 0.5;
  double without = nt_xent(g, zt, {1, 0, 3, 2}, cfg)->item();
  MemoryQueueT<double> queue(8, 2);
  queue.enqueue({0.6, 0.8, -1.0, 0.0}, 2);
  GraphT<double> g2;
  auto zt2 = GraphT<double>::leaf({4, 2}, z);
  double with = nt_xent(g2, zt2, {1, 0, 3, 2}, cfg, &queue)->item();
  CHECK(with > without);
}

TEST_CASE("finetune: default layer rule, retained weights, provenance") {
  auto data = tiny_data();
  auto pre = run_pretrain(tiny_pretrain_plan(), data.train);

  auto split = subsample_labels(data.train, 0.25, 7);
  TrainPlan ft;
  ft.stage = Stage::finetune;
  ft.net = tiny_spec();
  ft.epochs = 2;
  ft.batch_size = 16;
  ft.base_lr_coefficient = 0.02;
  ft.seed = 6;
  ft.label_fraction = 0.25;
  auto r = run_finetune(ft, pre.checkpoint, data.train, split, data.test);

  // label fraction < 1 defaults to fine-tuning from head layer 1
  CHECK(r.checkpoint.spec.head.num_layers == 1);
  CHECK(r.checkpoint.spec.head_truncated);
  CHECK(r.checkpoint.spec.num_classes == 4);
  CHECK(r.label_reads > 0);
  CHECK(r.final_top1 >= 0.0);
  CHECK(r.final_top1 <= 1.0);

  REQUIRE(r.checkpoint.chain.size() == 2);
  CHECK(r.checkpoint.chain[0].stage == "pretrain");
  CHECK(r.checkpoint.chain[1].stage == "finetune");
  // in-memory checkpoints already carry their content hash, so the chain
  // links parents without a save/load round trip
  CHECK_FALSE(pre.checkpoint.content_hash.empty());
  CHECK(r.checkpoint.chain[1].parent_hash == pre.checkpoint.content_hash);

  TrainPlan ft_full = ft;
  ft_full.label_fraction = 1.0;
  auto split_full = subsample_labels(data.train, 1.0, 7);
  auto r2 =
      run_finetune(ft_full, pre.checkpoint, data.train, split_full, data.test);
  CHECK(r2.checkpoint.spec.head.num_layers == 0);
}

TEST_CASE("distill: alpha=1 touches no labels, teacher file is untouched") {
  auto data = tiny_data();
  auto pre = run_pretrain(tiny_pretrain_plan(), data.train);
  auto split = subsample_labels(data.train, 0.25, 7);

  TrainPlan ft;
  ft.stage = Stage::finetune;
  ft.net = tiny_spec();
  ft.epochs = 2;
  ft.batch_size = 16;
  ft.base_lr_coefficient = 0.02;
  ft.seed = 6;
  ft.label_fraction = 0.25;
  auto teacher = run_finetune(ft, pre.checkpoint, data.train, split, data.test);

  auto teacher_path = temp_path("teacher.ckpt");
  Checkpoint tck = teacher.checkpoint;
  save_checkpoint(tck, teacher_path);
  std::string teacher_hash = tck.content_hash;

  TrainPlan dt;
  dt.stage = Stage::distill;
  dt.net = tiny_spec();
  dt.epochs = 2;
  dt.batch_size = 16;
  dt.base_lr_coefficient = 0.02;
  dt.seed = 8;
  dt.distill.alpha = 1.0;
  const int64_t reads_before = data.train.label_access_count();
  auto student = run_distill(dt, tck, data.train, &split, data.test);
  CHECK(student.label_reads == 0);
  CHECK(data.train.label_access_count() == reads_before);

  // teacher checkpoint on disk is bit-identical after distillation
  auto reloaded = load_checkpoint(teacher_path);
  CHECK(reloaded.content_hash == teacher_hash);
  std::remove(teacher_path.c_str());

  // provenance chain reconstructs the full pretrain -> finetune -> distill
  REQUIRE(student.checkpoint.chain.size() == 3);
  CHECK(student.checkpoint.chain[0].stage == "pretrain");
  CHECK(student.checkpoint.chain[1].stage == "finetune");
  CHECK(student.checkpoint.chain[2].stage == "distill");
  CHECK(student.checkpoint.chain[2].parent_hash == teacher_hash);

  // self-distillation (same encoder spec) resolves tau to 0.1 by default;
  // a smaller student resolves to 1.0. Both paths must run.
  TrainPlan small = dt;
  small.net.encoder.width_multiplier = 0.125;
  auto small_student = run_distill(small, tck, data.train, &split, data.test);
  CHECK(small_student.checkpoint.spec.encoder.width_multiplier == 0.125);
}

TEST_CASE("distill with alpha < 1 consumes labels and needs a split") {
  auto data = tiny_data();
  auto pre = run_pretrain(tiny_pretrain_plan(), data.train);
  auto split = subsample_labels(data.train, 0.5, 7);
  TrainPlan ft;
  ft.stage = Stage::finetune;
  ft.net = tiny_spec();
  ft.epochs = 1;
  ft.batch_size = 16;
  ft.base_lr_coefficient = 0.02;
  ft.seed = 6;
  ft.label_fraction = 0.5;
  auto teacher = run_finetune(ft, pre.checkpoint, data.train, split, data.test);

  TrainPlan dt;
  dt.stage = Stage::distill;
  dt.net = tiny_spec();
  dt.epochs = 1;
  dt.batch_size = 16;
  dt.base_lr_coefficient = 0.02;
  dt.seed = 9;
  dt.distill.alpha = 0.5;
  CHECK_THROWS_AS(
      run_distill(dt, teacher.checkpoint, data.train, nullptr, data.test),
      ConfigError);
  auto student =
      run_distill(dt, teacher.checkpoint, data.train, &split, data.test);
  CHECK(student.label_reads > 0);
}

TEST_CASE("three-stage determinism: identical seeds reproduce top-1 exactly") {
  auto run_chain = [&]() {
    auto data = tiny_data();
    auto pre = run_pretrain(tiny_pretrain_plan(), data.train);
    auto split = subsample_labels(data.train, 0.25, 7);
    TrainPlan ft;
    ft.stage = Stage::finetune;
    ft.net = tiny_spec();
    ft.epochs = 2;
    ft.batch_size = 16;
    ft.base_lr_coefficient = 0.02;
    ft.seed = 6;
    ft.label_fraction = 0.25;
    auto teacher =
        run_finetune(ft, pre.checkpoint, data.train, split, data.test);
    TrainPlan dt;
    dt.stage = Stage::distill;
    dt.net = tiny_spec();
    dt.epochs = 2;
    dt.batch_size = 16;
    dt.base_lr_coefficient = 0.02;
    dt.seed = 8;
    auto student =
        run_distill(dt, teacher.checkpoint, data.train, &split, data.test);
    return std::make_pair(teacher.final_top1, student.final_top1);
  };
  auto first = run_chain();
  auto second = run_chain();
  CHECK(first.first == second.first);
  CHECK(first.second == second.second);
}

TEST_CASE("supervised baseline runs the same machinery from scratch") {
  auto data = tiny_data();
  auto split = subsample_labels(data.train, 0.5, 7);
  TrainPlan plan;
  plan.stage = Stage::supervised;
  plan.net = tiny_spec();
  plan.epochs = 3;
  plan.batch_size = 16;
  plan.base_lr_coefficient = 0.02;
  plan.seed = 4;
  plan.label_fraction = 0.5;
  auto r = run_supervised(plan, data.train, split, data.test);
  CHECK(r.checkpoint.spec.head.num_layers == 0);
  CHECK(r.checkpoint.spec.num_classes == 4);
  CHECK(r.final_top1 >= 0.0);
  REQUIRE(r.checkpoint.chain.size() == 1);
  CHECK(r.checkpoint.chain[0].stage == "supervised");
}

TEST_CASE("evaluate_top1: rigged logits, tie rule, temperature invariance") {
  auto data = tiny_data();
  // zero weights make eval-mode features zero, so logits equal the task bias
  NetworkSpec spec = tiny_spec();
  spec.head.num_layers = 0;
  spec.num_classes = 4;
  auto net = build_network<float>(spec, Rng(3));
  for (auto& p : net.params) {
    for (auto& v : p.tensor->data) v = 0.0f;
  }

  // constant (all-zero) logits: ties resolve to class 0
  double freq0 = 0;
  for (int64_t i = 0; i < data.test.n; ++i) {
    freq0 += data.test.label(i) == 0 ? 1 : 0;
  }
  freq0 /= static_cast<double>(data.test.n);
  CHECK(evaluate_top1(net, data.test) == doctest::Approx(freq0));

  // bias argmax = class 2: accuracy equals the class-2 frequency
  auto bias = net.param("task.bias");
  bias->data = {0.0f, 0.0f, 1.0f, 0.0f};
  double freq2 = 0;
  for (int64_t i = 0; i < data.test.n; ++i) {
    freq2 += data.test.label(i) == 2 ? 1 : 0;
  }
  freq2 /= static_cast<double>(data.test.n);
  CHECK(evaluate_top1(net, data.test) == doctest::Approx(freq2));

  // all labels class 2 -> rigged logits are always correct
  Dataset all2 = data.test;
  for (auto& y : all2.raw_labels()) y = 2;
  CHECK(evaluate_top1(net, all2) == 1.0);

  // temperature scaling of the logits never changes top-1
  auto w = net.param("task.weight");
  for (auto& v : w->data) v *= 2.5f;
  for (auto& v : bias->data) v *= 2.5f;
  CHECK(evaluate_top1(net, data.test) == doctest::Approx(freq2));

  Dataset empty;
  CHECK_THROWS_AS(evaluate_top1(net, empty), DataError);
}

TEST_CASE("linear_eval: chance band for random features, 100% for one-hot") {
  Rng rng(11);
  const int64_t n = 600, nt = 300, d = 16, classes = 10;
  std::vector<float> ftrain(n * d), ftest(nt * d);
  std::vector<int> ltrain(n), ltest(nt);
  for (auto& v : ftrain) v = static_cast<float>(rng.normal());
  for (auto& v : ftest) v = static_cast<float>(rng.normal());
  for (int64_t i = 0; i < n; ++i) ltrain[i] = static_cast<int>(i % classes);
  for (int64_t i = 0; i < nt; ++i) ltest[i] = static_cast<int>(i % classes);

  double random_top1 = linear_eval_on_features(ftrain, ltrain, ftest, ltest, d,
                                               classes, 123);
  CHECK(random_top1 >= 0.05);
  CHECK(random_top1 <= 0.25);

  // one-hot features by class: a linear probe is perfect
  std::vector<float> otrain(n * classes, 0.0f), otest(nt * classes, 0.0f);
  for (int64_t i = 0; i < n; ++i) otrain[i * classes + ltrain[i]] = 1.0f;
  for (int64_t i = 0; i < nt; ++i) otest[i * classes + ltest[i]] = 1.0f;
  double perfect = linear_eval_on_features(otrain, ltrain, otest, ltest,
                                           classes, classes, 123);
  CHECK(perfect == 1.0);

  // same seed, same result
  double again = linear_eval_on_features(ftrain, ltrain, ftest, ltest, d,
                                         classes, 123);
  CHECK(again == random_top1);
}

TEST_CASE("metric log enforces a monotone step sequence and writes csv") {
  MetricLog log;
  log.append({"pretrain", 0, 10, 0.1, 1.5, std::nan(""), 12.0});
  log.append({"pretrain", 1, 20, 0.1, 1.2, std::nan(""), 24.0});
  CHECK_THROWS_AS(log.append({"pretrain", 2, 5, 0.1, 1.0, 0.5, 30.0}),
                  ContractError);
  auto path = temp_path("metrics.csv");
  log.save_csv(path);
  std::ifstream f(path);
  std::string header;
  std::getline(f, header);
  CHECK(header == "stage,epoch,step,lr,loss,top1,wall_ms");
  std::string row;
  std::getline(f, row);
  CHECK(row.substr(0, 9) == "pretrain,");
  // NaN top1 serializes as an empty field
  CHECK(row.find(",,") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("stage composability: finetune and supervised share step counts") {
  auto data = tiny_data();
  auto pre = run_pretrain(tiny_pretrain_plan(), data.train);
  auto split = subsample_labels(data.train, 0.5, 7);
  TrainPlan plan;
  plan.stage = Stage::finetune;
  plan.net = tiny_spec();
  plan.epochs = 2;
  plan.batch_size = 16;
  plan.base_lr_coefficient = 0.02;
  plan.warmup_fraction = 0.0;  // same plan for both stages
  plan.opt.weight_decay = 0.0;
  plan.seed = 6;
  plan.label_fraction = 0.5;
  plan.from_layer = 0;
  auto ft = run_finetune(plan, pre.checkpoint, data.train, split, data.test);
  plan.stage = Stage::supervised;
  auto sup = run_supervised(plan, data.train, split, data.test);
  REQUIRE(ft.log.rows().size() == sup.log.rows().size());
  for (size_t i = 0; i < ft.log.rows().size(); ++i) {
    CHECK(ft.log.rows()[i].step == sup.log.rows()[i].step);
    CHECK(ft.log.rows()[i].lr == sup.log.rows()[i].lr);
  }
  // identical parameter shapes: same model family, different init only
  CHECK(ft.checkpoint.spec.head.num_layers == 0);  // from_layer 0
  Network a = restore(ft.checkpoint);
  Network b = restore(sup.checkpoint);
  REQUIRE(a.params.size() == b.params.size());
  for (size_t i = 0; i < a.params.size(); ++i) {
    CHECK(a.params[i].name == b.params[i].name);
    CHECK(a.params[i].tensor->shape == b.params[i].tensor->shape);
  }
}

TEST_CASE("pretraining loss decreases over training, three seeds") {
  auto bundle = make_blobs("blobs:10:8x8x1:400/100:7");
  for (uint64_t seed : {21u, 22u, 23u}) {
    TrainPlan plan;
    plan.stage = Stage::pretrain;
    plan.net.encoder.kind = EncoderKind::mlp;
    plan.net.encoder.depth_blocks = 2;
    plan.net.encoder.width_multiplier = 0.5;
    plan.net.encoder.input_shape = {1, 8, 8};
    plan.net.head.num_layers = 3;
    plan.net.head.output_dim = 32;
    plan.epochs = 30;
    plan.batch_size = 64;
    plan.base_lr_coefficient = 0.1;
    plan.contrastive.temperature = 0.2;
    plan.seed = seed;
    Dataset train = bundle.train;
    auto r = run_pretrain(plan, train);
    const auto& rows = r.log.rows();
    REQUIRE(rows.size() == 30);
    // mean of the last tenth of epochs sits below the mean of the first tenth
    double head = (rows[0].loss + rows[1].loss + rows[2].loss) / 3.0;
    double tail =
        (rows[27].loss + rows[28].loss + rows[29].loss) / 3.0;
    CHECK(tail < head);
  }
}
