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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "semisup/config.hpp"
#include "semisup/experiment.hpp"

using namespace semisup;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"(
# micro experiment used by the tests
[run]
seed = 1
label_fraction = 0.25
stages = pretrain,finetune

[dataset]
source = blobs:4:6x6x1:64/32:3

[network]
encoder = mlp
depth = 1
width = 0.25
head_layers = 3
head_output_dim = 16

[pretrain]
epochs = 2
batch = 16
base_lr = 0.02

[finetune]
epochs = 2
batch = 16
base_lr = 0.02
)";

std::string fresh_dir(const std::string& name) {
  std::string dir = "/tmp/semisup_cfg_" + name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing: sections, comments, overrides, lists") {
  auto cfg = Config::parse_string(kTinyConfig);
  CHECK(cfg.get_int("run.seed", 0) == 1);
  CHECK(cfg.get_double("run.label_fraction", 0) == 0.25);
  CHECK(cfg.get("dataset.source", "") == "blobs:4:6x6x1:64/32:3");
  auto stages = cfg.get_list("run.stages");
  REQUIRE(stages.size() == 2);
  CHECK(stages[0] == "pretrain");
  CHECK(stages[1] == "finetune");

  cfg.set("finetune.from_layer", "2");
  CHECK(cfg.get_int("finetune.from_layer", -1) == 2);
  CHECK(cfg.get_bool("pretrain.memory", false) == false);
  cfg.set("pretrain.memory", "on");
  CHECK(cfg.get_bool("pretrain.memory", false) == true);
}

TEST_CASE("config rejects unknown keys and lists the valid ones") {
  auto cfg = Config::parse_string(kTinyConfig);
  CHECK_THROWS_WITH_AS(cfg.set("pretrain.lr", "0.1"),
                       doctest::Contains("base_lr"), ConfigError);
  CHECK_THROWS_WITH_AS(cfg.set("nosuch.key", "1"),
                       doctest::Contains("valid sections"), ConfigError);
  CHECK_THROWS_AS(Config::parse_string("key = 1\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse_string("[run\nseed = 1\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse_string("[run]\nseed\n"), ConfigError);
}

TEST_CASE("config serialization is canonical and hashes are stable") {
  auto a = Config::parse_string("[run]\nseed = 3\n[network]\nwidth = 2\n");
  auto b = Config::parse_string("[network]\nwidth = 2\n[run]\nseed = 3\n");
  CHECK(a.serialize() == b.serialize());
  CHECK(a.hash() == b.hash());
  b.set("run.seed", "4");
  CHECK(a.hash() != b.hash());
}

TEST_CASE("run_experiment executes the chain and writes all artifacts") {
  auto cfg = Config::parse_string(kTinyConfig);
  auto dir = fresh_dir("run1");
  auto result = run_experiment(cfg, dir);
  CHECK(std::isfinite(result.pretrain_loss));
  CHECK(result.finetune_top1 >= 0.0);
  CHECK(std::isnan(result.distill_top1));
  CHECK(fs::exists(dir + "/pretrain.ckpt"));
  CHECK(fs::exists(dir + "/finetune.ckpt"));
  CHECK(fs::exists(dir + "/metrics.csv"));
  CHECK(fs::exists(dir + "/config.resolved.ini"));
  CHECK(fs::exists(dir + "/result.csv"));
  CHECK(result.config_hash == cfg.hash());

  // identical invocation, identical metrics (wall time aside)
  auto dir2 = fresh_dir("run2");
  run_experiment(cfg, dir2);
  auto strip_wall = [](const std::string& text) {
    std::istringstream in(text);
    std::string line, out;
    while (std::getline(in, line)) {
      out += line.substr(0, line.rfind(','));
      out += '\n';
    }
    return out;
  };
  CHECK(strip_wall(slurp(dir + "/metrics.csv")) ==
        strip_wall(slurp(dir2 + "/metrics.csv")));
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("run_experiment fails fast before any training") {
  auto cfg = Config::parse_string(kTinyConfig);
  cfg.set("run.stages", "distill");  // teacher never produced
  auto dir = fresh_dir("failfast");
  CHECK_THROWS_WITH_AS(run_experiment(cfg, dir),
                       doctest::Contains("distill.teacher"), ConfigError);
  CHECK_FALSE(fs::exists(dir));  // nothing was written

  cfg.set("run.stages", "pretrain,nonsense");
  CHECK_THROWS_AS(run_experiment(cfg, dir), ConfigError);
  CHECK_FALSE(fs::exists(dir));

  auto cfg2 = Config::parse_string(kTinyConfig);
  cfg2.set("run.stages", "finetune");
  cfg2.set("finetune.source", "/nonexistent/path.ckpt");
  CHECK_THROWS_AS(run_experiment(cfg2, dir), ConfigError);
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("sweep enumerates cells deterministically and refuses to clobber") {
  auto cfg = Config::parse_string(kTinyConfig);
  cfg.set("sweep.widths", "0.25,0.5");
  cfg.set("sweep.seeds", "1");
  cfg.set("sweep.stages", "pretrain");
  cfg.set("pretrain.epochs", "1");
  auto dir = fresh_dir("sweep1");

  auto results = run_sweep(cfg, dir, 1);
  REQUIRE(results.size() == 2);
  CHECK(results[0].width == 0.25);
  CHECK(results[1].width == 0.5);
  CHECK(fs::exists(dir + "/results.csv"));

  std::ifstream f(dir + "/results.csv");
  std::string line;
  std::getline(f, line);
  CHECK(line.substr(0, 1) == "#");  // schema header
  std::getline(f, line);
  CHECK(line == results_csv_header());
  int rows = 0;
  while (std::getline(f, line)) ++rows;
  CHECK(rows == 2);

  // same sweep again: cell directories already exist
  CHECK_THROWS_WITH_AS(run_sweep(cfg, dir, 1), doctest::Contains("clobber"),
                       ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("sweep cells run identically with a parallel jobs knob") {
  auto cfg = Config::parse_string(kTinyConfig);
  cfg.set("sweep.widths", "0.25");
  cfg.set("sweep.seeds", "1,2");
  cfg.set("sweep.stages", "pretrain");
  cfg.set("pretrain.epochs", "1");
  auto d1 = fresh_dir("sweepj1");
  auto d2 = fresh_dir("sweepj2");
  auto serial = run_sweep(cfg, d1, 1);
  auto parallel = run_sweep(cfg, d2, 2);
  REQUIRE(serial.size() == parallel.size());
  for (size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].pretrain_loss == parallel[i].pretrain_loss);
    CHECK(serial[i].seed == parallel[i].seed);
  }
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("export: csv round-trips bit-identically, json mirrors rows") {
  auto cfg = Config::parse_string(kTinyConfig);
  cfg.set("sweep.widths", "0.25");
  cfg.set("sweep.seeds", "1");
  cfg.set("sweep.stages", "pretrain");
  cfg.set("pretrain.epochs", "1");
  auto dir = fresh_dir("export1");
  run_sweep(cfg, dir, 1);

  auto exp1 = dir + "/export1.csv";
  int rows = export_results(dir, "csv", exp1);
  CHECK(rows == 1);

  // re-import the export and export again: bit-identical
  auto redir = fresh_dir("export2");
  fs::create_directories(redir);
  fs::copy_file(exp1, redir + "/results.csv");
  auto exp2 = redir + "/export2.csv";
  export_results(redir, "csv", exp2);
  // the complete flag column is re-derived and re-appended
  auto first = slurp(exp1);
  auto second = slurp(exp2);
  CHECK(second.find(first.substr(first.find('\n') + 1, 40)) !=
        std::string::npos);

  int jrows = export_results(dir, "json", dir + "/export.json");
  CHECK(jrows == 1);
  auto json_text = slurp(dir + "/export.json");
  CHECK(json_text.find("\"finetune_top1\"") != std::string::npos);
  CHECK(json_text.find("\"complete\"") != std::string::npos);

  CHECK_THROWS_AS(export_results(dir, "xml", dir + "/x"), ConfigError);
  fs::remove_all(dir);
  fs::remove_all(redir);
}

TEST_CASE("export of an empty results dir emits a header-only file") {
  auto dir = fresh_dir("exportempty");
  fs::create_directories(dir);
  int rows = export_results(dir, "csv", dir + "/export.csv");
  CHECK(rows == 0);
  auto text = slurp(dir + "/export.csv");
  CHECK(text.find(results_csv_header()) != std::string::npos);
  fs::remove_all(dir);
}
