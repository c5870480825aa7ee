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

#include "semisup/pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace semisup {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

TensorPtr views_leaf(const std::vector<float>& buf, int64_t n, int64_t c,
                     int64_t h, int64_t w) {
  return Graph::leaf({n, c, h, w}, buf);
}

std::vector<int64_t> shuffled_indices(const std::vector<int64_t>& pool,
                                      Rng rng) {
  auto order = pool;
  rng.shuffle(order);
  return order;
}

std::vector<int64_t> all_indices(int64_t n) {
  std::vector<int64_t> idx(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  return idx;
}

// Contiguous slices of the (shuffled) pool; a trailing slice of one example
// is dropped because train-mode batch norm needs at least two rows.
std::vector<std::pair<int64_t, int64_t>> epoch_slices(int64_t n,
                                                      int64_t batch) {
  std::vector<std::pair<int64_t, int64_t>> slices;
  for (int64_t start = 0; start < n; start += batch) {
    int64_t end = std::min(start + batch, n);
    if (end - start >= 2) slices.emplace_back(start, end);
  }
  if (slices.empty()) {
    throw DegenerateBatchError("training pool of " + std::to_string(n) +
                               " examples cannot form a batch");
  }
  return slices;
}

void maybe_periodic_checkpoint(const TrainPlan& plan, const Network& net,
                               const std::vector<ProvenanceEntry>& chain,
                               int64_t epoch, const std::string& stage) {
  if (plan.checkpoint_every <= 0 || plan.out_dir.empty()) return;
  if ((epoch + 1) % plan.checkpoint_every != 0) return;
  std::filesystem::create_directories(plan.out_dir);
  Checkpoint ck = snapshot(net, chain);
  save_checkpoint(ck, plan.out_dir + "/" + stage + "_epoch" +
                          std::to_string(epoch + 1) + ".ckpt");
}

// A freshly initialized task head grafted onto a pretrained network is not
// layer-adapted: the trust ratio would keep renormalizing its (initially
// meaningless) scale against the encoder's pretrained one, and after the
// small label set is memorized it would keep rewriting the encoder at a
// constant relative rate. Stages that start from a checkpoint train the
// fresh head at plain momentum-SGD speed instead.
std::set<std::string> classifier_exclusions(const Network& net,
                                            bool fresh_head_on_pretrained) {
  auto excluded = param_groups(net).excluded;
  if (fresh_head_on_pretrained) excluded.insert("task.weight");
  return excluded;
}

// Shared loop for the label-consuming stages (fine-tune, supervised).
StageResult train_classifier(Network net, const TrainPlan& plan,
                             Dataset& train,
                             const std::vector<int64_t>& pool,
                             const Dataset& test, Rng rng,
                             const std::string& stage,
                             std::vector<ProvenanceEntry> chain,
                             bool fresh_head_on_pretrained) {
  auto t0 = Clock::now();
  StageResult result;
  const int64_t reads0 = train.label_access_count();

  AugmentSpec aug = plan.aug.value_or(AugmentSpec::finetune_default());
  aug.kind = AugmentKind::finetune;

  const int64_t batch =
      std::min<int64_t>(plan.batch_size, static_cast<int64_t>(pool.size()));
  auto slices = epoch_slices(static_cast<int64_t>(pool.size()), batch);
  ScheduleSpec sched;
  sched.base_coefficient = plan.base_lr_coefficient;
  sched.batch_size = batch;
  sched.total_steps = plan.epochs * static_cast<int64_t>(slices.size());
  sched.warmup_fraction = plan.warmup_fraction;

  Optimizer opt(plan.opt, net.params,
                classifier_exclusions(net, fresh_head_on_pretrained));
  int64_t step = 0;
  for (int64_t epoch = 0; epoch < plan.epochs; ++epoch) {
    auto order = shuffled_indices(
        pool, rng.fork("order/e" + std::to_string(epoch)));
    double epoch_loss = 0;
    double lr = 0;
    for (size_t s = 0; s < slices.size(); ++s) {
      std::vector<int64_t> slice(order.begin() + slices[s].first,
                                 order.begin() + slices[s].second);
      Rng arng = rng.fork("aug/e" + std::to_string(epoch) + "/s" +
                          std::to_string(s));
      auto views = make_augmented_batch(train, slice, aug, arng);
      std::vector<int> labels;
      labels.reserve(slice.size());
      for (int64_t i : slice) labels.push_back(train.label(i));

      Graph g;
      auto x = views_leaf(views, static_cast<int64_t>(slice.size()), train.c,
                          train.h, train.w);
      auto logits = net.task_logits(g, x, Mode::train);
      auto loss = cross_entropy(g, logits, labels);
      if (std::isnan(result.first_loss)) result.first_loss = loss->item();
      epoch_loss += loss->item();
      g.backward(loss);
      lr = schedule_lr(sched, step);
      opt.step(lr);
      net.zero_grad();
      ++step;
    }
    result.final_loss = epoch_loss / static_cast<double>(slices.size());
    result.final_top1 = evaluate_top1(net, test);
    result.log.append({stage, epoch, step, lr, result.final_loss,
                       result.final_top1, ms_since(t0)});
    maybe_periodic_checkpoint(plan, net, chain, epoch, stage);
  }
  result.label_reads = train.label_access_count() - reads0;
  result.checkpoint = snapshot(net, std::move(chain));
  return result;
}

double resolve_distill_temperature(const TrainPlan& plan,
                                   const NetworkSpec& student,
                                   const NetworkSpec& teacher) {
  if (plan.distill.temperature > 0) return plan.distill.temperature;
  // self-distillation runs sharper than big-to-small
  return student.encoder == teacher.encoder ? 0.1 : 1.0;
}

}  // namespace

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::pretrain: return "pretrain";
    case Stage::finetune: return "finetune";
    case Stage::distill: return "distill";
    case Stage::lineareval: return "lineareval";
    case Stage::supervised: return "supervised";
  }
  return "?";
}

std::string plan_fingerprint(const TrainPlan& plan) {
  std::ostringstream s;
  s << stage_name(plan.stage) << "|"
    << (plan.net.encoder.kind == EncoderKind::mlp ? "mlp" : "smallconv") << ","
    << plan.net.encoder.depth_blocks << "," << plan.net.encoder.width_multiplier
    << "," << plan.net.head.num_layers << "," << plan.net.head.output_dim
    << "|" << plan.base_lr_coefficient << "," << plan.warmup_fraction << ","
    << plan.opt.weight_decay << "," << plan.opt.momentum << ","
    << plan.opt.trust_coefficient << ","
    << (plan.opt.kind == OptimizerKind::lars ? "lars" : "sgd") << "|"
    << plan.epochs << "," << plan.batch_size << "," << plan.seed << "|"
    << plan.label_fraction << "," << plan.from_layer << "|"
    << plan.contrastive.temperature << "," << plan.use_ema_queue << ","
    << plan.contrastive.queue_capacity << "," << plan.ema_decay << "|"
    << plan.distill.temperature << "," << plan.distill.alpha;
  return hash_hex(fnv1a(s.str().data(), s.str().size()));
}

void MetricLog::append(MetricRow row) {
  // steps are monotone within a stage; a new stage restarts its counter
  if (!rows_.empty() && rows_.back().stage == row.stage &&
      row.step < rows_.back().step) {
    throw ContractError("metric log: step sequence must be monotone");
  }
  rows_.push_back(std::move(row));
}

void MetricLog::save_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw DataError("metric log: cannot open " + path);
  f << "stage,epoch,step,lr,loss,top1,wall_ms\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
  };
  for (const auto& r : rows_) {
    f << r.stage << "," << r.epoch << "," << r.step << "," << num(r.lr) << ","
      << num(r.loss) << "," << (std::isnan(r.top1) ? "" : num(r.top1)) << ","
      << num(r.wall_ms) << "\n";
  }
}

StageResult run_pretrain(const TrainPlan& plan, Dataset& train) {
  if (plan.net.head.num_layers < 2 || plan.net.head.num_layers > 4) {
    throw ConfigError("pretrain: projection head must have 2..4 layers");
  }
  auto t0 = Clock::now();
  NetworkSpec spec = plan.net;
  spec.num_classes = 0;
  spec.head_truncated = false;

  Rng rng = Rng(plan.seed).fork("pretrain");
  Network net = build_network<float>(spec, rng);

  AugmentSpec aug = plan.aug.value_or(AugmentSpec::pretrain_default());
  aug.kind = AugmentKind::pretrain;

  const int64_t batch = std::min<int64_t>(plan.batch_size, train.n);
  const int64_t steps_per_epoch = std::max<int64_t>(1, train.n / batch);
  ScheduleSpec sched;
  sched.base_coefficient = plan.base_lr_coefficient;
  sched.batch_size = batch;
  sched.total_steps = plan.epochs * steps_per_epoch;
  sched.warmup_fraction = plan.warmup_fraction;

  auto opt = make_optimizer(plan.opt, net);

  std::optional<EmaNetwork> ema;
  std::optional<MemoryQueue> queue;
  if (plan.use_ema_queue) {
    ema.emplace(net, static_cast<float>(plan.ema_decay));
    queue.emplace(plan.contrastive.queue_capacity, spec.head.output_dim);
  }

  StageResult result;
  const int64_t reads0 = train.label_access_count();
  std::vector<ProvenanceEntry> chain = {
      {"pretrain", plan.seed, plan.epochs, plan_fingerprint(plan), ""}};
  {
    LabelLock lock(train);
    auto pool = all_indices(train.n);
    int64_t step = 0;
    for (int64_t epoch = 0; epoch < plan.epochs; ++epoch) {
      auto order = shuffled_indices(
          pool, rng.fork("order/e" + std::to_string(epoch)));
      double epoch_loss = 0;
      double lr = 0;
      for (int64_t s = 0; s < steps_per_epoch; ++s) {
        std::vector<int64_t> slice(order.begin() + s * batch,
                                   order.begin() + (s + 1) * batch);
        Rng arng = rng.fork("aug/e" + std::to_string(epoch) + "/s" +
                            std::to_string(s));
        BatchViews bv = make_pair_batch(train, slice, aug, arng);

        Graph g;
        auto x = views_leaf(bv.views, bv.n_views, train.c, train.h, train.w);
        auto z = net.project(g, x, Mode::train);
        auto loss =
            nt_xent(g, z, bv.positive_of, plan.contrastive,
                    plan.use_ema_queue ? &*queue : nullptr);
        if (std::isnan(result.first_loss)) result.first_loss = loss->item();
        epoch_loss += loss->item();
        g.backward(loss);
        lr = schedule_lr(sched, step);
        opt.step(lr);
        net.zero_grad();
        ++step;

        if (plan.use_ema_queue) {
          ema->update(net);
          Graph ge;
          auto z_ema = ema->shadow().project(ge, x, Mode::eval);
          queue->enqueue(z_ema->data, bv.n_views);
        }
      }
      result.final_loss = epoch_loss / static_cast<double>(steps_per_epoch);
      result.log.append({"pretrain", epoch, step, lr, result.final_loss,
                         std::nan(""), ms_since(t0)});
      maybe_periodic_checkpoint(plan, net, chain, epoch, "pretrain");
    }
  }
  result.label_reads = train.label_access_count() - reads0;
  result.checkpoint = snapshot(net, std::move(chain));
  return result;
}

StageResult run_finetune(const TrainPlan& plan, const Checkpoint& source,
                         Dataset& train, const LabelFractionSplit& split,
                         const Dataset& test) {
  if (split.labeled.empty()) {
    throw ConfigError("finetune: label-fraction split is empty");
  }
  Network src = restore(source);
  int from_layer = plan.from_layer;
  if (from_layer < 0) {
    // default: first head layer at small fractions, encoder output at 100%
    from_layer = plan.label_fraction < 1.0
                     ? std::min(1, src.spec.head.num_layers - 1)
                     : 0;
  }
  Rng rng = Rng(plan.seed).fork("finetune");
  Network net =
      build_finetune_network(src, from_layer, train.num_classes, rng);

  TrainPlan normalized = plan;
  normalized.opt.weight_decay = 0.0;  // fine-tuning removes wd and warmup
  normalized.warmup_fraction = 0.0;

  auto chain = source.chain;
  chain.push_back({"finetune", plan.seed, plan.epochs,
                   plan_fingerprint(normalized), source.content_hash});
  return train_classifier(std::move(net), normalized, train, split.labeled,
                          test, rng, "finetune", std::move(chain),
                          /*fresh_head_on_pretrained=*/true);
}

StageResult run_supervised(const TrainPlan& plan, Dataset& train,
                           const LabelFractionSplit& split,
                           const Dataset& test) {
  if (split.labeled.empty()) {
    throw ConfigError("supervised: label-fraction split is empty");
  }
  NetworkSpec spec = plan.net;
  spec.head.num_layers = 0;
  spec.head_truncated = false;
  spec.num_classes = train.num_classes;
  Rng rng = Rng(plan.seed).fork("supervised");
  Network net = build_network<float>(spec, rng);
  std::vector<ProvenanceEntry> chain = {{"supervised", plan.seed, plan.epochs,
                                         plan_fingerprint(plan), ""}};
  return train_classifier(std::move(net), plan, train, split.labeled, test,
                          rng, "supervised", std::move(chain),
                          /*fresh_head_on_pretrained=*/false);
}

StageResult run_distill(const TrainPlan& plan, const Checkpoint& teacher,
                        Dataset& train, const LabelFractionSplit* split,
                        const Dataset& test, const Checkpoint* student_init) {
  Network teacher_net = restore(teacher);
  if (!teacher_net.task_head.has_value()) {
    throw ConfigError("distill: teacher checkpoint has no task head");
  }
  if (teacher_net.spec.num_classes != train.num_classes) {
    throw ConfigError("distill: teacher has " +
                      std::to_string(teacher_net.spec.num_classes) +
                      " classes, dataset has " +
                      std::to_string(train.num_classes));
  }

  Rng rng = Rng(plan.seed).fork("distill");
  Network student = [&]() {
    if (student_init != nullptr) {
      Network base = restore(*student_init);
      int from_layer = plan.from_layer >= 0
                           ? plan.from_layer
                           : std::min(1, base.spec.head.num_layers - 1);
      return build_finetune_network(base, from_layer, train.num_classes, rng);
    }
    NetworkSpec spec = plan.net;
    spec.head.num_layers = teacher_net.spec.head.num_layers;
    spec.head.hidden_dim = 0;  // re-derived from the student encoder width
    spec.head.output_dim = spec.head_hidden_dim();
    spec.head_truncated = teacher_net.spec.head_truncated;
    spec.num_classes = train.num_classes;
    return build_network<float>(spec, rng);
  }();

  DistillConfig dcfg = plan.distill;
  dcfg.temperature =
      resolve_distill_temperature(plan, student.spec, teacher_net.spec);
  if (dcfg.alpha < 1.0 && split == nullptr) {
    throw ConfigError("distill: alpha < 1 needs a label-fraction split");
  }

  auto t0 = Clock::now();
  StageResult result;
  const int64_t reads0 = train.label_access_count();

  AugmentSpec aug = plan.aug.value_or(AugmentSpec::finetune_default());
  aug.kind = AugmentKind::finetune;  // crop and flip only

  const int64_t batch = std::min<int64_t>(plan.batch_size, train.n);
  auto slices = epoch_slices(train.n, batch);
  ScheduleSpec sched;
  sched.base_coefficient = plan.base_lr_coefficient;
  sched.batch_size = batch;
  sched.total_steps = plan.epochs * static_cast<int64_t>(slices.size());
  sched.warmup_fraction = plan.warmup_fraction;
  Optimizer opt(plan.opt, student.params,
                classifier_exclusions(student, student_init != nullptr));

  std::vector<bool> is_labeled(static_cast<size_t>(train.n), false);
  if (split != nullptr) {
    for (int64_t i : split->labeled) is_labeled[static_cast<size_t>(i)] = true;
  }

  auto chain = teacher.chain;
  chain.push_back({"distill", plan.seed, plan.epochs, plan_fingerprint(plan),
                   teacher.content_hash});

  std::optional<LabelLock> lock;
  if (dcfg.alpha == 1.0) lock.emplace(train);

  auto pool = all_indices(train.n);
  int64_t step = 0;
  for (int64_t epoch = 0; epoch < plan.epochs; ++epoch) {
    auto order =
        shuffled_indices(pool, rng.fork("order/e" + std::to_string(epoch)));
    double epoch_loss = 0;
    double lr = 0;
    for (size_t s = 0; s < slices.size(); ++s) {
      std::vector<int64_t> slice(order.begin() + slices[s].first,
                                 order.begin() + slices[s].second);
      Rng arng = rng.fork("aug/e" + std::to_string(epoch) + "/s" +
                          std::to_string(s));
      auto views = make_augmented_batch(train, slice, aug, arng);
      const int64_t bs = static_cast<int64_t>(slice.size());

      // teacher imputes labels for the same augmented views, frozen
      std::vector<float> teacher_probs;
      {
        Graph tg;
        auto tx = views_leaf(views, bs, train.c, train.h, train.w);
        auto probs = temperature_softmax(
            tg, teacher_net.task_logits(tg, tx, Mode::eval),
            dcfg.temperature);
        teacher_probs = probs->data;
        // sharp temperatures leave f32 row sums a few ulp off 1; renormalize
        // so the materialized rows meet the loss contract exactly
        for (int64_t r = 0; r < bs; ++r) {
          double sum = 0;
          for (int64_t cc = 0; cc < train.num_classes; ++cc) {
            sum += teacher_probs[r * train.num_classes + cc];
          }
          for (int64_t cc = 0; cc < train.num_classes; ++cc) {
            teacher_probs[r * train.num_classes + cc] =
                static_cast<float>(teacher_probs[r * train.num_classes + cc] /
                                   sum);
          }
        }
      }

      Graph g;
      auto x = views_leaf(views, bs, train.c, train.h, train.w);
      auto slogits = student.task_logits(g, x, Mode::train);
      auto tprobs =
          Graph::leaf({bs, train.num_classes}, std::move(teacher_probs));

      TensorPtr labeled_logits;
      std::vector<int> labels;
      if (dcfg.alpha < 1.0) {
        std::vector<int64_t> rows;
        for (int64_t r = 0; r < bs; ++r) {
          if (is_labeled[static_cast<size_t>(slice[static_cast<size_t>(r)])]) {
            rows.push_back(r);
            labels.push_back(train.label(slice[static_cast<size_t>(r)]));
          }
        }
        if (!rows.empty()) labeled_logits = g.select_rows(slogits, rows);
      }
      auto loss = combined_loss(g, labeled_logits, labels, slogits, tprobs,
                                dcfg);
      if (std::isnan(result.first_loss)) result.first_loss = loss->item();
      epoch_loss += loss->item();
      lr = schedule_lr(sched, step);
      // alpha == 0 with no labeled example in the batch leaves a constant
      // loss: nothing to learn from this batch
      if (loss->requires_grad) {
        g.backward(loss);
        opt.step(lr);
        student.zero_grad();
      }
      ++step;
    }
    result.final_loss = epoch_loss / static_cast<double>(slices.size());
    result.final_top1 = evaluate_top1(student, test);
    result.log.append({"distill", epoch, step, lr, result.final_loss,
                       result.final_top1, ms_since(t0)});
    maybe_periodic_checkpoint(plan, student, chain, epoch, "distill");
  }
  result.label_reads = train.label_access_count() - reads0;
  result.checkpoint = snapshot(student, std::move(chain));
  return result;
}

std::vector<float> extract_features(const Network& net, const Dataset& ds,
                                    int layer, int64_t batch) {
  if (layer < 0 || layer > net.spec.head.num_layers) {
    throw ConfigError("extract_features: layer " + std::to_string(layer) +
                      " out of range [0, " +
                      std::to_string(net.spec.head.num_layers) + "]");
  }
  const int64_t dim = net.spec.head_activation_dim(layer);
  std::vector<float> features(static_cast<size_t>(ds.n * dim));
  for (int64_t start = 0; start < ds.n; start += batch) {
    int64_t end = std::min(start + batch, ds.n);
    int64_t bs = end - start;
    std::vector<float> buf(static_cast<size_t>(bs * ds.image_size()));
    for (int64_t i = 0; i < bs; ++i) {
      std::copy_n(ds.image_ptr(start + i), ds.image_size(),
                  buf.begin() + i * ds.image_size());
    }
    Graph g;
    auto x = views_leaf(buf, bs, ds.c, ds.h, ds.w);
    auto acts = net.head_forward(g, net.encoder_forward(g, x, Mode::eval));
    const auto& a = acts[static_cast<size_t>(layer)];
    std::copy_n(a->data.begin(), bs * dim,
                features.begin() + start * dim);
  }
  return features;
}

double linear_eval_on_features(const std::vector<float>& train_features,
                               const std::vector<int>& train_labels,
                               const std::vector<float>& test_features,
                               const std::vector<int>& test_labels,
                               int64_t dim, int64_t num_classes,
                               uint64_t seed) {
  const int64_t n = static_cast<int64_t>(train_labels.size());
  Rng rng = Rng(seed).fork("lineareval");
  Rng init = rng.fork("init");
  std::vector<float> w0(static_cast<size_t>(dim * num_classes));
  const double std_dev = 1.0 / std::sqrt(static_cast<double>(dim));
  for (auto& v : w0) v = static_cast<float>(init.normal(0.0, std_dev));

  NamedTensorT<float> w{"linear.weight",
                        Graph::leaf({dim, num_classes}, std::move(w0), true),
                        ParamKind::weight};
  NamedTensorT<float> b{
      "linear.bias", Graph::leaf({num_classes}, true), ParamKind::bias};

  OptimizerConfig ocfg;
  ocfg.kind = OptimizerKind::sgd;
  ocfg.momentum = 0.9;
  ocfg.weight_decay = 0.0;
  OptimizerT<float> opt(ocfg, {w, b}, {"linear.bias"});

  const int64_t batch = std::min<int64_t>(256, n);
  const int64_t epochs = 60;
  std::vector<std::pair<int64_t, int64_t>> slices;
  for (int64_t start = 0; start < n; start += batch) {
    slices.emplace_back(start, std::min(start + batch, n));
  }
  ScheduleSpec sched;
  sched.base_coefficient = 0.0125;
  sched.batch_size = batch;
  sched.total_steps = epochs * static_cast<int64_t>(slices.size());
  sched.warmup_fraction = 0.0;

  auto pool = all_indices(n);
  int64_t step = 0;
  for (int64_t epoch = 0; epoch < epochs; ++epoch) {
    auto order =
        shuffled_indices(pool, rng.fork("order/e" + std::to_string(epoch)));
    for (const auto& [s0, s1] : slices) {
      const int64_t bs = s1 - s0;
      std::vector<float> fb(static_cast<size_t>(bs * dim));
      std::vector<int> lb(static_cast<size_t>(bs));
      for (int64_t i = 0; i < bs; ++i) {
        int64_t src = order[static_cast<size_t>(s0 + i)];
        std::copy_n(train_features.begin() + src * dim, dim,
                    fb.begin() + i * dim);
        lb[static_cast<size_t>(i)] = train_labels[static_cast<size_t>(src)];
      }
      Graph g;
      auto x = Graph::leaf({bs, dim}, std::move(fb));
      auto logits = g.add_bias(g.matmul(x, w.tensor), b.tensor);
      auto loss = cross_entropy(g, logits, lb);
      g.backward(loss);
      opt.step(schedule_lr(sched, step));
      w.tensor->zero_grad();
      b.tensor->zero_grad();
      ++step;
    }
  }

  // test top-1 with ties resolved to the lowest class id
  const int64_t nt = static_cast<int64_t>(test_labels.size());
  int64_t correct = 0;
  for (int64_t i = 0; i < nt; ++i) {
    int best = 0;
    double best_v = -1e300;
    for (int64_t cls = 0; cls < num_classes; ++cls) {
      double v = b.tensor->data[static_cast<size_t>(cls)];
      for (int64_t j = 0; j < dim; ++j) {
        v += static_cast<double>(test_features[i * dim + j]) *
             static_cast<double>(w.tensor->data[j * num_classes + cls]);
      }
      if (v > best_v) {
        best_v = v;
        best = static_cast<int>(cls);
      }
    }
    if (best == test_labels[static_cast<size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(nt);
}

double linear_eval(const Checkpoint& source, int layer, const Dataset& train,
                   const Dataset& test, uint64_t seed) {
  Network net = restore(source);
  auto ftrain = extract_features(net, train, layer);
  auto ftest = extract_features(net, test, layer);
  std::vector<int> ltrain(static_cast<size_t>(train.n));
  std::vector<int> ltest(static_cast<size_t>(test.n));
  for (int64_t i = 0; i < train.n; ++i) {
    ltrain[static_cast<size_t>(i)] = train.label(i);
  }
  for (int64_t i = 0; i < test.n; ++i) {
    ltest[static_cast<size_t>(i)] = test.label(i);
  }
  return linear_eval_on_features(ftrain, ltrain, ftest, ltest,
                                 net.spec.head_activation_dim(layer),
                                 train.num_classes, seed);
}

double evaluate_top1(const Network& net, const Dataset& ds, int64_t batch) {
  if (ds.n < 1) throw DataError("evaluate_top1: empty dataset");
  const int64_t classes = net.spec.num_classes;
  int64_t correct = 0;
  for (int64_t start = 0; start < ds.n; start += batch) {
    int64_t end = std::min(start + batch, ds.n);
    int64_t bs = end - start;
    std::vector<float> buf(static_cast<size_t>(bs * ds.image_size()));
    for (int64_t i = 0; i < bs; ++i) {
      std::copy_n(ds.image_ptr(start + i), ds.image_size(),
                  buf.begin() + i * ds.image_size());
    }
    Graph g;
    auto x = views_leaf(buf, bs, ds.c, ds.h, ds.w);
    auto logits = net.task_logits(g, x, Mode::eval);
    for (int64_t i = 0; i < bs; ++i) {
      int best = 0;
      float best_v = logits->data[static_cast<size_t>(i * classes)];
      for (int64_t cls = 1; cls < classes; ++cls) {
        float v = logits->data[static_cast<size_t>(i * classes + cls)];
        if (v > best_v) {  // strict: ties keep the lowest class id
          best_v = v;
          best = static_cast<int>(cls);
        }
      }
      if (best == ds.label(start + i)) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(ds.n);
}

}  // namespace semisup
