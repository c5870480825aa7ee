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

#include <map>
#include <string>
#include <vector>

#include "semisup/error.hpp"

namespace semisup {

// Sectioned key-value experiment config (INI-style). Keys are validated
// against a fixed schema so typos fail fast with the list of valid keys; the
// fully resolved config is serialized next to the results as the
// reproducibility manifest.
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text);

  // dotted = "section.key"; validates against the schema
  void set(const std::string& dotted, const std::string& value);

  bool has(const std::string& dotted) const;
  std::string get(const std::string& dotted, const std::string& def) const;
  double get_double(const std::string& dotted, double def) const;
  int64_t get_int(const std::string& dotted, int64_t def) const;
  bool get_bool(const std::string& dotted, bool def) const;
  std::vector<std::string> get_list(const std::string& dotted) const;

  // canonical sorted form; equal configs serialize identically
  std::string serialize() const;
  std::string hash() const;

  static const std::map<std::string, std::vector<std::string>>& schema();

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace semisup
