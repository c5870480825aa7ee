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
#include <optional>
#include <string>
#include <vector>

#include "semisup/checkpoint.hpp"
#include "semisup/data.hpp"
#include "semisup/losses.hpp"
#include "semisup/nn.hpp"
#include "semisup/optim.hpp"

namespace semisup {

enum class Stage { pretrain, finetune, distill, lineareval, supervised };

std::string stage_name(Stage s);

// Everything one training stage needs: network spec, schedule, optimizer and
// loss settings, seeds, data provenance. Stage functions force the
// stage-appropriate overrides (e.g. fine-tuning removes weight decay and
// warmup; augmentation kind follows the stage).
struct TrainPlan {
  Stage stage = Stage::pretrain;
  NetworkSpec net;

  OptimizerConfig opt;
  double base_lr_coefficient = 0.05;
  double warmup_fraction = 0.05;
  int64_t epochs = 10;
  int64_t batch_size = 128;
  uint64_t seed = 1;

  double label_fraction = 1.0;
  int from_layer = -1;  // -1: layer 1 below full labels, layer 0 at 100%

  ContrastiveConfig contrastive;
  bool use_ema_queue = false;
  double ema_decay = 0.999;

  DistillConfig distill;  // temperature <= 0 selects the stage default

  // Unset means the stage-appropriate pipeline default (pretraining: crop +
  // flip + color + blur; fine-tune/distill: mild crop + flip). The kind is
  // always forced to match the stage.
  std::optional<AugmentSpec> aug;

  int64_t checkpoint_every = 0;  // epochs between periodic saves; 0 = off
  std::string out_dir;           // empty: no periodic files written
};

std::string plan_fingerprint(const TrainPlan& plan);

struct MetricRow {
  std::string stage;
  int64_t epoch = 0;
  int64_t step = 0;
  double lr = 0;
  double loss = 0;
  double top1 = std::nan("");  // fraction in [0, 1]; NaN when not measured
  double wall_ms = 0;
};

// Append-only per-epoch records with a strictly increasing step sequence.
class MetricLog {
 public:
  void append(MetricRow row);
  const std::vector<MetricRow>& rows() const { return rows_; }
  void save_csv(const std::string& path) const;

 private:
  std::vector<MetricRow> rows_;
};

struct StageResult {
  Checkpoint checkpoint;
  MetricLog log;
  double first_loss = std::nan("");
  double final_loss = std::nan("");
  double final_top1 = std::nan("");
  int64_t label_reads = 0;  // train-set label accesses during the stage
};

// Task-agnostic contrastive pretraining; train-set labels are locked for the
// whole stage.
StageResult run_pretrain(const TrainPlan& plan, Dataset& train);

// Supervised fine-tuning of a pretrained checkpoint from a middle head
// layer, on the labeled subset only. Weight decay and warmup are removed.
StageResult run_finetune(const TrainPlan& plan, const Checkpoint& source,
                         Dataset& train, const LabelFractionSplit& split,
                         const Dataset& test);

// Supervised baseline trained from scratch on the labeled subset.
StageResult run_supervised(const TrainPlan& plan, Dataset& train,
                           const LabelFractionSplit& split,
                           const Dataset& test);

// Task-specific distillation on the full (unlabeled) pool. The teacher stays
// frozen; with alpha == 1 labels are locked. student_init, when given, seeds
// the student from a pretrained checkpoint; otherwise the student starts
// from random init.
StageResult run_distill(const TrainPlan& plan, const Checkpoint& teacher,
                        Dataset& train, const LabelFractionSplit* split,
                        const Dataset& test,
                        const Checkpoint* student_init = nullptr);

// Linear classifier on frozen features from head activation `layer`,
// trained with all labels; returns test top-1.
double linear_eval(const Checkpoint& source, int layer, const Dataset& train,
                   const Dataset& test, uint64_t seed);

// Linear probe on precomputed feature rows (used by linear_eval and tests).
double linear_eval_on_features(const std::vector<float>& train_features,
                               const std::vector<int>& train_labels,
                               const std::vector<float>& test_features,
                               const std::vector<int>& test_labels,
                               int64_t dim, int64_t num_classes,
                               uint64_t seed);

// Frozen features of every example at head activation `layer`, eval mode.
std::vector<float> extract_features(const Network& net, const Dataset& ds,
                                    int layer, int64_t batch = 256);

// Fraction of argmax matches; ties resolve to the lowest class id.
double evaluate_top1(const Network& net, const Dataset& ds,
                     int64_t batch = 256);

}  // namespace semisup
