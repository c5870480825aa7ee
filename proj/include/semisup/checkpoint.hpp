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

#include <cstdint>
#include <string>
#include <vector>

#include "semisup/nn.hpp"

namespace semisup {

// One step in a checkpoint's training history; the chain reconstructs
// pretrain -> finetune -> distill end to end.
struct ProvenanceEntry {
  std::string stage;
  uint64_t seed = 0;
  int64_t epochs = 0;
  std::string plan_hash;
  std::string parent_hash;  // content hash of the source checkpoint
};

struct NamedArray {
  std::string name;
  std::vector<int64_t> shape;
  std::vector<float> data;
};

// File format "SSCK": magic, version u16, length-prefixed text manifest
// (network spec + provenance), named f32 little-endian tensors with length
// prefixes, trailing FNV-1a content hash.
struct Checkpoint {
  uint16_t version = 1;
  NetworkSpec spec;
  std::vector<NamedArray> tensors;  // parameters then buffers
  std::vector<ProvenanceEntry> chain;
  std::string content_hash;  // filled by save/load
};

Checkpoint snapshot(const Network& net, std::vector<ProvenanceEntry> chain);
Network restore(const Checkpoint& ckpt);

void save_checkpoint(Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

uint64_t fnv1a(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ull);
std::string hash_hex(uint64_t h);

}  // namespace semisup
