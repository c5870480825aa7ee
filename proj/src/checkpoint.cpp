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

#include "semisup/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace semisup {

uint64_t fnv1a(const void* data, size_t len, uint64_t seed) {
  const uint8_t* p = static_cast<const uint8_t*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string spec_manifest(const NetworkSpec& spec,
                          const std::vector<ProvenanceEntry>& chain) {
  std::ostringstream out;
  out << "encoder.kind="
      << (spec.encoder.kind == EncoderKind::mlp ? "mlp" : "smallconv") << "\n";
  out << "encoder.depth_blocks=" << spec.encoder.depth_blocks << "\n";
  out << "encoder.width_multiplier=" << spec.encoder.width_multiplier << "\n";
  out << "encoder.input=" << spec.encoder.input_shape[0] << ","
      << spec.encoder.input_shape[1] << "," << spec.encoder.input_shape[2]
      << "\n";
  out << "head.num_layers=" << spec.head.num_layers << "\n";
  out << "head.hidden_dim=" << spec.head.hidden_dim << "\n";
  out << "head.output_dim=" << spec.head.output_dim << "\n";
  out << "num_classes=" << spec.num_classes << "\n";
  out << "head_truncated=" << (spec.head_truncated ? 1 : 0) << "\n";
  for (const auto& p : chain) {
    out << "prov=" << p.stage << ";" << p.seed << ";" << p.epochs << ";"
        << p.plan_hash << ";" << p.parent_hash << "\n";
  }
  return out.str();
}

void parse_manifest(const std::string& text, NetworkSpec& spec,
                    std::vector<ProvenanceEntry>& chain) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("checkpoint manifest: bad line '" + line + "'");
    }
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    if (key == "encoder.kind") {
      spec.encoder.kind =
          val == "mlp" ? EncoderKind::mlp : EncoderKind::smallconv;
    } else if (key == "encoder.depth_blocks") {
      spec.encoder.depth_blocks = std::stoi(val);
    } else if (key == "encoder.width_multiplier") {
      spec.encoder.width_multiplier = std::stod(val);
    } else if (key == "encoder.input") {
      std::sscanf(val.c_str(), "%ld,%ld,%ld", &spec.encoder.input_shape[0],
                  &spec.encoder.input_shape[1], &spec.encoder.input_shape[2]);
    } else if (key == "head.num_layers") {
      spec.head.num_layers = std::stoi(val);
    } else if (key == "head.hidden_dim") {
      spec.head.hidden_dim = std::stoll(val);
    } else if (key == "head.output_dim") {
      spec.head.output_dim = std::stoll(val);
    } else if (key == "num_classes") {
      spec.num_classes = std::stoll(val);
    } else if (key == "head_truncated") {
      spec.head_truncated = val == "1";
    } else if (key == "prov") {
      ProvenanceEntry p;
      std::istringstream ps(val);
      std::string field;
      std::getline(ps, p.stage, ';');
      std::getline(ps, field, ';');
      p.seed = std::stoull(field);
      std::getline(ps, field, ';');
      p.epochs = std::stoll(field);
      std::getline(ps, p.plan_hash, ';');
      std::getline(ps, p.parent_hash, ';');
      chain.push_back(std::move(p));
    } else {
      throw FormatError("checkpoint manifest: unknown key '" + key + "'");
    }
  }
}

template <typename T>
void append_raw(std::string& out, const T& v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

// Everything up to (not including) the trailing content hash.
std::string serialize_body(const Checkpoint& ckpt) {
  std::string out;
  out += "SSCK";
  append_raw<uint16_t>(out, ckpt.version);
  std::string manifest = spec_manifest(ckpt.spec, ckpt.chain);
  append_raw<uint32_t>(out, static_cast<uint32_t>(manifest.size()));
  out += manifest;
  append_raw<uint32_t>(out, static_cast<uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    append_raw<uint16_t>(out, static_cast<uint16_t>(t.name.size()));
    out += t.name;
    append_raw<uint8_t>(out, static_cast<uint8_t>(t.shape.size()));
    for (int64_t d : t.shape) {
      append_raw<uint32_t>(out, static_cast<uint32_t>(d));
    }
    append_raw<uint64_t>(out, static_cast<uint64_t>(t.data.size()));
    out.append(reinterpret_cast<const char*>(t.data.data()),
               t.data.size() * sizeof(float));
  }
  return out;
}

}  // namespace

Checkpoint snapshot(const Network& net, std::vector<ProvenanceEntry> chain) {
  Checkpoint ck;
  ck.spec = net.spec;
  ck.chain = std::move(chain);
  auto push = [&](const NamedTensorT<float>& t) {
    ck.tensors.push_back({t.name, t.tensor->shape, t.tensor->data});
  };
  for (const auto& p : net.params) push(p);
  for (const auto& b : net.buffers) push(b);
  std::string body = serialize_body(ck);
  ck.content_hash = hash_hex(fnv1a(body.data(), body.size()));
  return ck;
}

Network restore(const Checkpoint& ckpt) {
  Network net = build_network<float>(ckpt.spec, Rng(0));
  size_t idx = 0;
  auto pull = [&](NamedTensorT<float>& t) {
    if (idx >= ckpt.tensors.size()) {
      throw CorruptionError("restore: checkpoint has too few tensors");
    }
    const NamedArray& a = ckpt.tensors[idx++];
    if (a.name != t.name || a.shape != t.tensor->shape) {
      throw StructureError("restore: tensor '" + a.name +
                           "' does not match expected '" + t.name + "' " +
                           shape_str(t.tensor->shape));
    }
    t.tensor->data = a.data;
  };
  for (auto& p : net.params) pull(p);
  for (auto& b : net.buffers) pull(b);
  if (idx != ckpt.tensors.size()) {
    throw StructureError("restore: checkpoint has extra tensors");
  }
  return net;
}

void save_checkpoint(Checkpoint& ckpt, const std::string& path) {
  std::string out = serialize_body(ckpt);
  uint64_t h = fnv1a(out.data(), out.size());
  append_raw<uint64_t>(out, h);
  ckpt.content_hash = hash_hex(h);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("save_checkpoint: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("load_checkpoint: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  if (buf.size() < 4 + 2 + 8 || buf.substr(0, 4) != "SSCK") {
    throw FormatError(path + ": not a checkpoint file (bad magic)");
  }
  uint64_t stored;
  std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
  uint64_t computed = fnv1a(buf.data(), buf.size() - 8);
  if (stored != computed) {
    throw CorruptionError(path + ": content hash mismatch (file corrupt)");
  }

  size_t pos = 4;
  auto read_raw = [&](auto& v) {
    if (pos + sizeof(v) > buf.size() - 8) {
      throw FormatError(path + ": truncated at byte offset " +
                        std::to_string(pos));
    }
    std::memcpy(&v, buf.data() + pos, sizeof(v));
    pos += sizeof(v);
  };

  Checkpoint ck;
  read_raw(ck.version);
  if (ck.version != 1) {
    throw FormatError(path + ": unsupported checkpoint version " +
                      std::to_string(ck.version));
  }
  uint32_t manifest_len;
  read_raw(manifest_len);
  if (pos + manifest_len > buf.size() - 8) {
    throw FormatError(path + ": manifest overruns file at byte offset " +
                      std::to_string(pos));
  }
  parse_manifest(buf.substr(pos, manifest_len), ck.spec, ck.chain);
  pos += manifest_len;

  uint32_t count;
  read_raw(count);
  for (uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    uint16_t name_len;
    read_raw(name_len);
    if (pos + name_len > buf.size() - 8) {
      throw FormatError(path + ": tensor name overruns file");
    }
    a.name = buf.substr(pos, name_len);
    pos += name_len;
    uint8_t rank;
    read_raw(rank);
    for (uint8_t r = 0; r < rank; ++r) {
      uint32_t d;
      read_raw(d);
      a.shape.push_back(d);
    }
    uint64_t n;
    read_raw(n);
    if (pos + n * sizeof(float) > buf.size() - 8) {
      throw FormatError(path + ": tensor data overruns file");
    }
    a.data.resize(n);
    std::memcpy(a.data.data(), buf.data() + pos, n * sizeof(float));
    pos += n * sizeof(float);
    ck.tensors.push_back(std::move(a));
  }
  ck.content_hash = hash_hex(stored);
  return ck;
}

}  // namespace semisup
