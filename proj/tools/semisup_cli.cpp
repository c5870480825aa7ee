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

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "semisup/config.hpp"
#include "semisup/data.hpp"
#include "semisup/experiment.hpp"
#include "semisup/verify.hpp"

namespace {

using namespace semisup;

Config load_config(const std::string& path,
                   const std::vector<std::string>& overrides,
                   const std::string& out, const std::string& seed) {
  Config cfg = path.empty() ? Config{} : Config::parse_file(path);
  for (const auto& kv : overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    }
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!out.empty()) cfg.set("run.out", out);
  if (!seed.empty()) cfg.set("run.seed", seed);
  return cfg;
}

void print_result(const ExperimentResult& r) {
  auto pct = [](double v) {
    if (std::isnan(v)) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * v);
    return std::string(buf);
  };
  std::printf("seed %llu  width %gx  fraction %g\n",
              static_cast<unsigned long long>(r.seed), r.width,
              r.label_fraction);
  if (!std::isnan(r.pretrain_loss)) {
    std::printf("  pretrain loss   %.4f\n", r.pretrain_loss);
  }
  if (!std::isnan(r.supervised_top1)) {
    std::printf("  supervised top1 %s\n", pct(r.supervised_top1).c_str());
  }
  if (!std::isnan(r.finetune_top1)) {
    std::printf("  finetune top1   %s\n", pct(r.finetune_top1).c_str());
  }
  if (!std::isnan(r.linear_top1)) {
    std::printf("  linear top1     %s\n", pct(r.linear_top1).c_str());
  }
  if (!std::isnan(r.distill_top1)) {
    std::printf("  distill top1    %s\n", pct(r.distill_top1).c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semisup: pretrain / fine-tune / distill experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, seed_str, spec, format = "csv";
  std::string results_dir, export_out;
  std::vector<std::string> overrides;
  int jobs = 1;

  auto* run = app.add_subcommand("run", "run a configured stage chain");
  run->add_option("--config", config_path, "experiment config file")
      ->required();
  run->add_option("--set", overrides,
                  "override a config key (section.key=value)");
  run->add_option("--out", out_dir, "output directory (overrides run.out)");
  run->add_option("--seed", seed_str, "seed (overrides run.seed)");

  auto* sweep = app.add_subcommand("sweep", "run the [sweep] grid");
  sweep->add_option("--config", config_path, "experiment config file")
      ->required();
  sweep->add_option("--set", overrides, "override a config key");
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--seed", seed_str, "seed (overrides run.seed)");
  sweep->add_option("--jobs", jobs, "concurrent sweep cells")
      ->check(CLI::PositiveNumber);

  auto* exp = app.add_subcommand("export", "re-emit a results table");
  exp->add_option("results_dir", results_dir, "run or sweep output directory")
      ->required();
  exp->add_option("--format", format, "csv or json");
  exp->add_option("--out", export_out, "output file");

  auto* gc = app.add_subcommand("grad-check",
                                "finite-difference verification suite");

  auto* dataset = app.add_subcommand("dataset", "dataset utilities");
  dataset->require_subcommand(1);
  auto* gen = dataset->add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("--spec", spec, "e.g. blobs:10:8x8x1:2000/500:7")
      ->required();
  gen->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      Config cfg = load_config(config_path, overrides, out_dir, seed_str);
      std::string out = cfg.get("run.out", "runs/out");
      auto result = run_experiment(cfg, out);
      print_result(result);
      std::printf("artifacts in %s\n", out.c_str());
    } else if (sweep->parsed()) {
      Config cfg = load_config(config_path, overrides, out_dir, seed_str);
      std::string out = cfg.get("run.out", "runs/sweep");
      auto results = run_sweep(cfg, out, jobs);
      std::printf("%zu sweep cells -> %s/results.csv\n", results.size(),
                  out.c_str());
    } else if (exp->parsed()) {
      if (export_out.empty()) {
        export_out = results_dir + "/export." + format;
      }
      int rows = export_results(results_dir, format, export_out);
      std::printf("exported %d row(s) to %s\n", rows, export_out.c_str());
    } else if (gc->parsed()) {
      bool ok = run_grad_check_suite(std::cout);
      if (!ok) {
        std::fprintf(stderr, "grad-check: FAILED\n");
        return 4;
      }
      std::printf("grad-check: all checks passed\n");
    } else if (gen->parsed()) {
      auto bundle = make_blobs(spec);
      std::filesystem::create_directories(out_dir);
      save_dataset(bundle.train, out_dir + "/train.ssds");
      save_dataset(bundle.test, out_dir + "/test.ssds");
      std::printf(
          "wrote %s/train.ssds (%lld images) and %s/test.ssds (%lld)\n",
          out_dir.c_str(), static_cast<long long>(bundle.train.n),
          out_dir.c_str(), static_cast<long long>(bundle.test.n));
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
  return 0;
}
