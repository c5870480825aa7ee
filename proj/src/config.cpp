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

#include "semisup/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "semisup/checkpoint.hpp"

namespace semisup {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

const std::map<std::string, std::vector<std::string>>& Config::schema() {
  static const std::map<std::string, std::vector<std::string>> kSchema = {
      {"run", {"seed", "out", "stages", "label_fraction", "label_seed"}},
      {"dataset", {"source", "train", "test"}},
      {"network",
       {"encoder", "depth", "width", "head_layers", "head_output_dim"}},
      {"pretrain",
       {"epochs", "batch", "base_lr", "warmup", "weight_decay", "temperature",
        "memory", "queue_capacity", "ema_decay", "checkpoint_every",
        "optimizer", "trust_coefficient"}},
      {"finetune",
       {"epochs", "batch", "base_lr", "from_layer", "source", "optimizer",
        "trust_coefficient"}},
      {"supervised",
       {"epochs", "batch", "base_lr", "weight_decay", "optimizer",
        "trust_coefficient"}},
      {"distill",
       {"epochs", "batch", "base_lr", "weight_decay", "teacher",
        "student_width", "student_depth", "student_init", "alpha", "tau",
        "optimizer", "trust_coefficient"}},
      {"lineareval", {"source", "layer"}},
      {"sweep",
       {"widths", "label_fractions", "head_layers", "from_layers", "alphas",
        "taus", "memory", "seeds", "stages"}},
  };
  return kSchema;
}

namespace {

void validate_key(const std::string& dotted) {
  auto dot = dotted.find('.');
  if (dot == std::string::npos) {
    throw ConfigError("config key '" + dotted +
                      "' must be of the form section.key");
  }
  std::string section = dotted.substr(0, dot);
  std::string key = dotted.substr(dot + 1);
  const auto& schema = Config::schema();
  auto it = schema.find(section);
  if (it == schema.end()) {
    std::string sections;
    for (const auto& [name, keys] : schema) {
      if (!sections.empty()) sections += ", ";
      sections += name;
    }
    throw ConfigError("unknown config section '" + section +
                      "'; valid sections: " + sections);
  }
  if (std::find(it->second.begin(), it->second.end(), key) ==
      it->second.end()) {
    std::string keys;
    for (const auto& k : it->second) {
      if (!keys.empty()) keys += ", ";
      keys += k;
    }
    throw ConfigError("unknown key '" + key + "' in section [" + section +
                      "]; valid keys: " + keys);
  }
}

}  // namespace

Config Config::parse_string(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": key '" +
                        key + "' outside any [section]");
    }
    cfg.set(section + "." + key, value);
  }
  return cfg;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return parse_string(text);
}

void Config::set(const std::string& dotted, const std::string& value) {
  validate_key(dotted);
  kv_[dotted] = value;
}

bool Config::has(const std::string& dotted) const {
  return kv_.count(dotted) > 0;
}

std::string Config::get(const std::string& dotted,
                        const std::string& def) const {
  auto it = kv_.find(dotted);
  return it == kv_.end() ? def : it->second;
}

double Config::get_double(const std::string& dotted, double def) const {
  auto it = kv_.find(dotted);
  if (it == kv_.end()) return def;
  try {
    size_t used = 0;
    double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError("config " + dotted + ": '" + it->second +
                      "' is not a number");
  }
}

int64_t Config::get_int(const std::string& dotted, int64_t def) const {
  auto it = kv_.find(dotted);
  if (it == kv_.end()) return def;
  try {
    size_t used = 0;
    int64_t v = std::stoll(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError("config " + dotted + ": '" + it->second +
                      "' is not an integer");
  }
}

bool Config::get_bool(const std::string& dotted, bool def) const {
  auto it = kv_.find(dotted);
  if (it == kv_.end()) return def;
  const std::string& v = it->second;
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config " + dotted + ": '" + v + "' is not a boolean");
}

std::vector<std::string> Config::get_list(const std::string& dotted) const {
  std::vector<std::string> out;
  auto it = kv_.find(dotted);
  if (it == kv_.end()) return out;
  std::string cur;
  for (char c : it->second) {
    if (c == ',') {
      cur = trim(cur);
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  cur = trim(cur);
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string Config::serialize() const {
  // std::map keeps keys sorted, so grouping by section is a single pass
  std::ostringstream out;
  std::string open_section;
  for (const auto& [dotted, value] : kv_) {
    auto dot = dotted.find('.');
    std::string section = dotted.substr(0, dot);
    if (section != open_section) {
      if (!open_section.empty()) out << "\n";
      out << "[" << section << "]\n";
      open_section = section;
    }
    out << dotted.substr(dot + 1) << " = " << value << "\n";
  }
  return out.str();
}

std::string Config::hash() const {
  std::string s = serialize();
  return hash_hex(fnv1a(s.data(), s.size()));
}

}  // namespace semisup
