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

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "semisup/experiment.hpp"
#include "semisup/pipeline.hpp"

namespace semisup {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSchemaLine = "# semisup-results schema=1";

std::string fmt_num(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct StagePlanDefaults {
  int64_t epochs;
  double base_lr;
};

DataBundle load_bundle(const Config& cfg) {
  std::string source = cfg.get("dataset.source", "");
  if (!source.empty()) {
    if (!is_synthetic_spec(source)) {
      throw ConfigError("dataset.source must be a blobs: spec, got '" +
                        source + "'");
    }
    return make_blobs(source);
  }
  std::string train = cfg.get("dataset.train", "");
  std::string test = cfg.get("dataset.test", "");
  if (train.empty() || test.empty()) {
    throw ConfigError(
        "dataset: need either dataset.source or dataset.train + dataset.test");
  }
  DataBundle bundle;
  bundle.train = load_dataset(train);
  bundle.train.split = "train";
  bundle.test = load_dataset(test);
  bundle.test.split = "test";
  return bundle;
}

NetworkSpec network_spec_from(const Config& cfg, const DataBundle& data) {
  NetworkSpec spec;
  std::string enc = cfg.get("network.encoder", "mlp");
  if (enc == "mlp") {
    spec.encoder.kind = EncoderKind::mlp;
  } else if (enc == "smallconv") {
    spec.encoder.kind = EncoderKind::smallconv;
  } else {
    throw ConfigError("network.encoder must be mlp or smallconv, got '" + enc +
                      "'");
  }
  spec.encoder.depth_blocks =
      static_cast<int>(cfg.get_int("network.depth", 2));
  spec.encoder.width_multiplier = cfg.get_double("network.width", 1.0);
  spec.encoder.input_shape = {data.train.c, data.train.h, data.train.w};
  spec.head.num_layers = static_cast<int>(cfg.get_int("network.head_layers", 3));
  spec.head.output_dim = cfg.get_int("network.head_output_dim", 64);
  spec.encoder.validate();
  return spec;
}

OptimizerConfig optimizer_from(const Config& cfg, const std::string& stage,
                               double default_wd) {
  OptimizerConfig opt;
  std::string kind = cfg.get(stage + ".optimizer", "lars");
  if (kind == "lars") {
    opt.kind = OptimizerKind::lars;
  } else if (kind == "sgd") {
    opt.kind = OptimizerKind::sgd;
  } else {
    throw ConfigError(stage + ".optimizer must be lars or sgd, got '" + kind +
                      "'");
  }
  opt.momentum = 0.9;
  opt.weight_decay = cfg.get_double(stage + ".weight_decay", default_wd);
  opt.trust_coefficient = cfg.get_double(stage + ".trust_coefficient", 0.001);
  return opt;
}

// "pretrain" | "finetune" | path: resolve a stage reference into a
// checkpoint path inside out_dir, requiring the referenced stage to have run
// earlier in the chain.
std::string resolve_source(const std::string& ref,
                           const std::vector<std::string>& prior_stages,
                           const std::string& out_dir,
                           const std::string& what) {
  for (const auto& s : prior_stages) {
    if (ref == s) return out_dir + "/" + ref + ".ckpt";
  }
  if (ref == "pretrain" || ref == "finetune" || ref == "distill" ||
      ref == "supervised") {
    throw ConfigError(what + " references stage '" + ref +
                      "' which does not run earlier in the chain");
  }
  if (!fs::exists(ref)) {
    throw ConfigError(what + " checkpoint not found: " + ref);
  }
  return ref;
}

}  // namespace

ExperimentResult run_experiment(const Config& cfg,
                                const std::string& out_dir) {
  // ---- resolve and validate everything before any training ----
  DataBundle data = load_bundle(cfg);
  NetworkSpec net_spec = network_spec_from(cfg, data);

  const uint64_t seed = static_cast<uint64_t>(cfg.get_int("run.seed", 1));
  const double fraction = cfg.get_double("run.label_fraction", 1.0);
  const uint64_t label_seed =
      static_cast<uint64_t>(cfg.get_int("run.label_seed", seed));

  auto stages = cfg.get_list("run.stages");
  if (stages.empty()) {
    throw ConfigError("run.stages is empty; nothing to do");
  }
  std::vector<std::string> seen;
  for (const auto& s : stages) {
    if (s == "pretrain" || s == "supervised") {
      // no prerequisites
    } else if (s == "finetune") {
      resolve_source(cfg.get("finetune.source", "pretrain"), seen, out_dir,
                     "finetune.source");
    } else if (s == "distill") {
      resolve_source(cfg.get("distill.teacher", "finetune"), seen, out_dir,
                     "distill.teacher");
      std::string init = cfg.get("distill.student_init", "none");
      if (init != "none") {
        resolve_source(init, seen, out_dir, "distill.student_init");
      }
    } else if (s == "lineareval") {
      resolve_source(cfg.get("lineareval.source", "pretrain"), seen, out_dir,
                     "lineareval.source");
    } else {
      throw ConfigError("unknown stage '" + s +
                        "' in run.stages (pretrain, finetune, distill, "
                        "lineareval, supervised)");
    }
    seen.push_back(s);
  }
  if (fraction <= 0 || fraction > 1) {
    throw ConfigError("run.label_fraction must be in (0, 1]");
  }

  fs::create_directories(out_dir);
  {
    std::ofstream manifest(out_dir + "/config.resolved.ini");
    manifest << cfg.serialize();
  }

  // default fine-tune epoch rule: 60 epochs at the 1% fraction, 30 at 10%+
  const int64_t ft_epochs_default = fraction <= 0.01 ? 60 : 30;

  ExperimentResult result;
  result.width = net_spec.encoder.width_multiplier;
  result.label_fraction = fraction;
  result.head_layers = net_spec.head.num_layers;
  result.from_layer = static_cast<int>(cfg.get_int("finetune.from_layer", -1));
  result.memory = cfg.get_bool("pretrain.memory", false);
  result.seed = seed;
  result.config_hash = cfg.hash();
  result.out_dir = out_dir;

  LabelFractionSplit split = subsample_labels(data.train, fraction, label_seed);

  MetricLog all_metrics;
  auto merge_log = [&](const MetricLog& log) {
    for (const auto& row : log.rows()) all_metrics.append(row);
  };

  for (const auto& s : stages) {
    if (s == "pretrain") {
      TrainPlan plan;
      plan.stage = Stage::pretrain;
      plan.net = net_spec;
      plan.opt = optimizer_from(cfg, "pretrain", 1e-4);
      plan.base_lr_coefficient = cfg.get_double("pretrain.base_lr", 0.1);
      plan.warmup_fraction = cfg.get_double("pretrain.warmup", 0.05);
      plan.epochs = cfg.get_int("pretrain.epochs", 200);
      plan.batch_size = cfg.get_int("pretrain.batch", 128);
      plan.seed = seed;
      plan.contrastive.temperature =
          cfg.get_double("pretrain.temperature", 0.2);
      plan.contrastive.queue_capacity =
          cfg.get_int("pretrain.queue_capacity", 1024);
      plan.use_ema_queue = cfg.get_bool("pretrain.memory", false);
      plan.contrastive.use_queue = plan.use_ema_queue;
      plan.ema_decay = cfg.get_double("pretrain.ema_decay", 0.999);
      plan.checkpoint_every = cfg.get_int("pretrain.checkpoint_every", 0);
      plan.out_dir = out_dir;
      auto r = run_pretrain(plan, data.train);
      result.pretrain_loss = r.final_loss;
      merge_log(r.log);
      save_checkpoint(r.checkpoint, out_dir + "/pretrain.ckpt");
    } else if (s == "finetune") {
      TrainPlan plan;
      plan.stage = Stage::finetune;
      plan.net = net_spec;
      plan.opt = optimizer_from(cfg, "finetune", 0.0);
      plan.base_lr_coefficient = cfg.get_double("finetune.base_lr", 0.05);
      plan.epochs = cfg.get_int("finetune.epochs", ft_epochs_default);
      plan.batch_size = cfg.get_int("finetune.batch", 128);
      plan.seed = seed;
      plan.label_fraction = fraction;
      plan.from_layer =
          static_cast<int>(cfg.get_int("finetune.from_layer", -1));
      auto source = load_checkpoint(resolve_source(
          cfg.get("finetune.source", "pretrain"), seen, out_dir, "finetune"));
      auto r = run_finetune(plan, source, data.train, split, data.test);
      result.finetune_top1 = r.final_top1;
      merge_log(r.log);
      save_checkpoint(r.checkpoint, out_dir + "/finetune.ckpt");
    } else if (s == "supervised") {
      TrainPlan plan;
      plan.stage = Stage::supervised;
      plan.net = net_spec;
      plan.opt = optimizer_from(cfg, "supervised", 1e-4);
      plan.base_lr_coefficient = cfg.get_double("supervised.base_lr", 1.0);
      plan.epochs = cfg.get_int("supervised.epochs", ft_epochs_default);
      plan.batch_size = cfg.get_int("supervised.batch", 128);
      plan.seed = seed;
      plan.label_fraction = fraction;
      auto r = run_supervised(plan, data.train, split, data.test);
      result.supervised_top1 = r.final_top1;
      merge_log(r.log);
      save_checkpoint(r.checkpoint, out_dir + "/supervised.ckpt");
    } else if (s == "distill") {
      TrainPlan plan;
      plan.stage = Stage::distill;
      plan.net = net_spec;
      plan.net.encoder.width_multiplier =
          cfg.get_double("distill.student_width",
                         net_spec.encoder.width_multiplier);
      plan.net.encoder.depth_blocks = static_cast<int>(
          cfg.get_int("distill.student_depth", net_spec.encoder.depth_blocks));
      // distillation inherits the pretraining schedule settings unless set
      plan.opt = optimizer_from(cfg, "distill",
                                cfg.get_double("pretrain.weight_decay", 1e-4));
      plan.base_lr_coefficient = cfg.get_double(
          "distill.base_lr", cfg.get_double("pretrain.base_lr", 0.1));
      plan.warmup_fraction = cfg.get_double("pretrain.warmup", 0.05);
      plan.epochs = cfg.get_int("distill.epochs", 100);
      plan.batch_size = cfg.get_int(
          "distill.batch", cfg.get_int("pretrain.batch", 128));
      plan.seed = seed;
      plan.label_fraction = fraction;
      plan.distill.alpha = cfg.get_double("distill.alpha", 1.0);
      plan.distill.temperature = cfg.get_double("distill.tau", 0.0);
      result.alpha = plan.distill.alpha;
      result.tau = plan.distill.temperature;

      auto teacher = load_checkpoint(resolve_source(
          cfg.get("distill.teacher", "finetune"), seen, out_dir, "distill"));
      std::string init_ref = cfg.get("distill.student_init", "none");
      StageResult r;
      if (init_ref == "none") {
        r = run_distill(plan, teacher, data.train, &split, data.test, nullptr);
      } else {
        auto init = load_checkpoint(
            resolve_source(init_ref, seen, out_dir, "distill.student_init"));
        r = run_distill(plan, teacher, data.train, &split, data.test, &init);
      }
      result.distill_top1 = r.final_top1;
      if (std::isnan(result.tau)) result.tau = plan.distill.temperature;
      merge_log(r.log);
      save_checkpoint(r.checkpoint, out_dir + "/distill.ckpt");
    } else if (s == "lineareval") {
      auto source = load_checkpoint(
          resolve_source(cfg.get("lineareval.source", "pretrain"), seen,
                         out_dir, "lineareval"));
      int layer = static_cast<int>(cfg.get_int("lineareval.layer", 0));
      result.linear_top1 =
          linear_eval(source, layer, data.train, data.test, seed);
    }
  }

  all_metrics.save_csv(out_dir + "/metrics.csv");
  {
    std::ofstream row(out_dir + "/result.csv");
    row << kSchemaLine << "\n" << results_csv_header() << "\n";
    row << result_to_csv_row(result) << "\n";
  }
  return result;
}

std::string results_csv_header() {
  return "width,label_fraction,head_layers,from_layer,alpha,tau,memory,seed,"
         "pretrain_loss,supervised_top1,finetune_top1,linear_top1,"
         "distill_top1,config_hash,build_id,out_dir";
}

std::string result_to_csv_row(const ExperimentResult& r) {
  std::ostringstream s;
  s << fmt_num(r.width) << "," << fmt_num(r.label_fraction) << ","
    << r.head_layers << "," << r.from_layer << "," << fmt_num(r.alpha) << ","
    << fmt_num(r.tau) << "," << (r.memory ? "on" : "off") << "," << r.seed
    << "," << fmt_num(r.pretrain_loss) << "," << fmt_num(r.supervised_top1)
    << "," << fmt_num(r.finetune_top1) << "," << fmt_num(r.linear_top1) << ","
    << fmt_num(r.distill_top1) << "," << r.config_hash << ","
    << SEMISUP_BUILD_ID << "," << r.out_dir;
  return s.str();
}

std::vector<ExperimentResult> run_sweep(const Config& cfg,
                                        const std::string& out_dir,
                                        int jobs) {
  auto list_or = [&](const std::string& key,
                     std::vector<std::string> def) {
    auto v = cfg.get_list(key);
    return v.empty() ? def : v;
  };
  auto widths = list_or("sweep.widths", {"1"});
  auto fractions = list_or("sweep.label_fractions", {"0.01"});
  auto heads = list_or("sweep.head_layers", {"3"});
  auto layers = list_or("sweep.from_layers", {"-1"});
  auto alphas = list_or("sweep.alphas", {"1"});
  auto taus = list_or("sweep.taus", {"0"});
  auto memories = list_or("sweep.memory", {"off"});
  auto seeds = list_or("sweep.seeds", {"1"});
  auto stages = cfg.get("sweep.stages", "pretrain,finetune");

  // deterministic cell enumeration, independent of any filesystem order
  struct Cell {
    Config cfg;
    std::string dir;
  };
  std::vector<Cell> cells;
  for (const auto& w : widths) {
    for (const auto& f : fractions) {
      for (const auto& hl : heads) {
        for (const auto& fl : layers) {
          for (const auto& a : alphas) {
            for (const auto& t : taus) {
              for (const auto& mem : memories) {
                for (const auto& sd : seeds) {
                  Config c = cfg;
                  c.set("network.width", w);
                  c.set("run.label_fraction", f);
                  c.set("network.head_layers", hl);
                  c.set("finetune.from_layer", fl);
                  c.set("distill.alpha", a);
                  c.set("distill.tau", t);
                  c.set("pretrain.memory", mem);
                  c.set("run.seed", sd);
                  c.set("run.stages", stages);
                  std::string dir = out_dir + "/cells/w" + w + "_f" + f +
                                    "_h" + hl + "_l" + fl + "_a" + a + "_t" +
                                    t + "_m" + mem + "/s" + sd;
                  cells.push_back({std::move(c), std::move(dir)});
                }
              }
            }
          }
        }
      }
    }
  }

  for (const auto& cell : cells) {
    if (fs::exists(cell.dir)) {
      throw ConfigError("sweep: refusing to clobber existing cell directory " +
                        cell.dir);
    }
  }
  fs::create_directories(out_dir);

  std::vector<ExperimentResult> results(cells.size());
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= cells.size()) break;
      try {
        results[i] = run_experiment(cells[i].cfg, cells[i].dir);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  std::ofstream f(out_dir + "/results.csv");
  if (!f) throw DataError("sweep: cannot write results.csv");
  f << kSchemaLine << "\n" << results_csv_header() << "\n";
  for (const auto& r : results) f << result_to_csv_row(r) << "\n";
  return results;
}

int export_results(const std::string& results_dir, const std::string& format,
                   const std::string& out_path) {
  if (format != "csv" && format != "json") {
    throw ConfigError("export: format must be csv or json, got '" + format +
                      "'");
  }
  std::string in_path = results_dir + "/results.csv";
  if (!fs::exists(in_path)) {
    // a single run directory carries result.csv instead
    in_path = results_dir + "/result.csv";
  }
  std::vector<std::string> lines;
  if (fs::exists(in_path)) {
    std::ifstream in(in_path);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line[0] != '#') lines.push_back(line);
    }
  }
  std::vector<std::string> header_cols;
  {
    std::string header = lines.empty() ? results_csv_header() : lines[0];
    std::istringstream hs(header);
    std::string col;
    while (std::getline(hs, col, ',')) header_cols.push_back(col);
  }

  auto split_row = [](const std::string& line) {
    std::vector<std::string> cols;
    std::string col;
    std::istringstream ls(line);
    while (std::getline(ls, col, ',')) cols.push_back(col);
    // a trailing empty field is dropped by getline; restore it
    if (!line.empty() && line.back() == ',') cols.push_back("");
    return cols;
  };

  int rows_written = 0;
  int incomplete = 0;
  if (format == "csv") {
    std::ofstream out(out_path);
    if (!out) throw DataError("export: cannot write " + out_path);
    out << kSchemaLine << "\n";
    for (size_t i = 0; i < header_cols.size(); ++i) {
      out << (i ? "," : "") << header_cols[i];
    }
    out << ",complete\n";
    for (size_t i = 1; i < lines.size(); ++i) {
      auto cols = split_row(lines[i]);
      bool complete = cols.size() == header_cols.size();
      if (!complete) ++incomplete;
      out << lines[i] << "," << (complete ? "1" : "0") << "\n";
      ++rows_written;
    }
  } else {
    nlohmann::json doc;
    doc["schema"] = 1;
    doc["rows"] = nlohmann::json::array();
    for (size_t i = 1; i < lines.size(); ++i) {
      auto cols = split_row(lines[i]);
      bool complete = cols.size() == header_cols.size();
      if (!complete) ++incomplete;
      nlohmann::json row;
      for (size_t ci = 0; ci < header_cols.size() && ci < cols.size(); ++ci) {
        row[header_cols[ci]] = cols[ci];
      }
      row["complete"] = complete;
      doc["rows"].push_back(row);
      ++rows_written;
    }
    std::ofstream out(out_path);
    if (!out) throw DataError("export: cannot write " + out_path);
    out << doc.dump(2) << "\n";
  }
  if (incomplete > 0) {
    fprintf(stderr, "export: warning: %d incomplete row(s) flagged\n",
            incomplete);
  }
  return rows_written;
}

}  // namespace semisup
