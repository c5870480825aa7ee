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
#include <string>
#include <vector>

#include "semisup/config.hpp"

namespace semisup {

// Final metrics of one experiment (a chain of stages over one dataset,
// seed, and label fraction). NaN marks stages that did not run.
struct ExperimentResult {
  double width = 1.0;
  double label_fraction = 1.0;
  int head_layers = 0;
  int from_layer = -1;
  double alpha = std::nan("");
  double tau = std::nan("");
  bool memory = false;
  uint64_t seed = 0;
  double pretrain_loss = std::nan("");
  double supervised_top1 = std::nan("");
  double finetune_top1 = std::nan("");
  double linear_top1 = std::nan("");
  double distill_top1 = std::nan("");
  std::string config_hash;
  std::string out_dir;
};

// Validates the full stage chain up front (fail fast before any compute),
// then runs the stages in order, writing checkpoints, metrics.csv, the
// resolved config manifest and a one-row result.csv into out_dir.
ExperimentResult run_experiment(const Config& cfg, const std::string& out_dir);

// Cartesian sweep over the axes in [sweep]; one cell directory and one
// results row per (cell x seed). Refuses to reuse an existing cell
// directory. jobs > 1 runs independent cells concurrently.
std::vector<ExperimentResult> run_sweep(const Config& cfg,
                                        const std::string& out_dir,
                                        int jobs = 1);

std::string results_csv_header();
std::string result_to_csv_row(const ExperimentResult& r);

// Re-emit a results table with a stable column order and schema header.
// format is "csv" or "json". Returns the number of data rows written.
int export_results(const std::string& results_dir, const std::string& format,
                   const std::string& out_path);

}  // namespace semisup
