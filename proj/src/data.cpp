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

#include "semisup/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace semisup {

void Dataset::validate() const {
  if (n < 1 || c < 1 || h < 1 || w < 1 || num_classes < 1) {
    throw DataError("dataset: empty or malformed dimensions");
  }
  if (static_cast<int64_t>(images.size()) != n * c * h * w ||
      static_cast<int64_t>(labels_.size()) != n) {
    throw DataError("dataset: storage does not match dimensions");
  }
  for (uint16_t y : labels_) {
    if (y >= num_classes) {
      throw DataError("dataset: label " + std::to_string(y) +
                      " out of range for " + std::to_string(num_classes) +
                      " classes");
    }
  }
  for (float v : images) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw DataError("dataset: image value outside [0, 1]");
    }
  }
}

namespace {

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  ByteReader(const std::string& buf, const std::string& path)
      : buf_(buf), path_(path) {}

  uint16_t u16() { return static_cast<uint16_t>(byte() | (byte() << 8)); }

  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(byte()) << (8 * i);
    return v;
  }

  uint32_t byte() {
    if (pos_ >= buf_.size()) {
      throw FormatError(path_ + ": truncated at byte offset " +
                        std::to_string(pos_));
    }
    return static_cast<uint8_t>(buf_[pos_++]);
  }

  size_t pos() const { return pos_; }
  size_t remaining() const { return buf_.size() - pos_; }

 private:
  const std::string& buf_;
  std::string path_;
  size_t pos_ = 0;
};

// Sample corruption: pixel noise plus a per-sample brightness/contrast wobble
// so class identity lives in the spatial pattern, not the intensity level.
constexpr double kBlobNoiseSigma = 0.22;
constexpr double kBlobBrightnessSigma = 0.14;
constexpr double kBlobContrastHalfRange = 0.3;

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::string out;
  out += "SSDS";
  put_u16(out, 1);  // version
  put_u32(out, static_cast<uint32_t>(ds.n));
  put_u32(out, static_cast<uint32_t>(ds.c));
  put_u32(out, static_cast<uint32_t>(ds.h));
  put_u32(out, static_cast<uint32_t>(ds.w));
  put_u32(out, static_cast<uint32_t>(ds.num_classes));
  for (float v : ds.images) {
    out.push_back(static_cast<char>(std::lround(v * 255.0f)));
  }
  for (uint16_t y : ds.raw_labels()) put_u16(out, y);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("save_dataset: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("save_dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("load_dataset: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  ByteReader r(buf, path);
  char magic[4];
  for (char& m : magic) m = static_cast<char>(r.byte());
  if (std::string(magic, 4) != "SSDS") {
    throw FormatError(path + ": bad magic at byte offset 0");
  }
  uint16_t version = r.u16();
  if (version != 1) {
    throw FormatError(path + ": unsupported version " +
                      std::to_string(version) + " at byte offset 4");
  }
  Dataset ds;
  ds.n = r.u32();
  ds.c = r.u32();
  ds.h = r.u32();
  ds.w = r.u32();
  ds.num_classes = r.u32();
  const int64_t pixels = ds.n * ds.c * ds.h * ds.w;
  if (pixels < 0 ||
      r.remaining() != static_cast<size_t>(pixels + 2 * ds.n)) {
    throw FormatError(path + ": payload length mismatch at byte offset " +
                      std::to_string(r.pos()) + " (want " +
                      std::to_string(pixels + 2 * ds.n) + " bytes, have " +
                      std::to_string(r.remaining()) + ")");
  }
  ds.images.resize(static_cast<size_t>(pixels));
  for (int64_t i = 0; i < pixels; ++i) {
    ds.images[static_cast<size_t>(i)] = static_cast<float>(r.byte()) / 255.0f;
  }
  ds.raw_labels().resize(static_cast<size_t>(ds.n));
  for (int64_t i = 0; i < ds.n; ++i) {
    ds.raw_labels()[static_cast<size_t>(i)] = r.u16();
  }
  ds.split = "train";
  ds.validate();
  return ds;
}

bool is_synthetic_spec(const std::string& source) {
  return source.rfind("blobs:", 0) == 0;
}

namespace {

struct BlobsParams {
  int64_t classes, h, w, c, ntrain, ntest;
  uint64_t seed;
};

BlobsParams parse_blobs(const std::string& spec) {
  // blobs:<classes>:<h>x<w>x<c>:<ntrain>/<ntest>:<seed>
  auto fail = [&](const std::string& why) {
    throw ConfigError("synthetic spec '" + spec + "': " + why +
                      " (want blobs:<classes>:<h>x<w>x<c>:<ntrain>/<ntest>:<seed>)");
  };
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    size_t colon = spec.find(':', start);
    if (colon == std::string::npos) {
      parts.push_back(spec.substr(start));
      break;
    }
    parts.push_back(spec.substr(start, colon - start));
    start = colon + 1;
  }
  if (parts.size() != 5 || parts[0] != "blobs") fail("expected 5 fields");
  auto to_int = [&](const std::string& s) -> int64_t {
    try {
      size_t used = 0;
      int64_t v = std::stoll(s, &used);
      if (used != s.size() || v < 1) fail("bad number '" + s + "'");
      return v;
    } catch (const Error&) {
      throw;
    } catch (...) {
      fail("bad number '" + s + "'");
    }
    return 0;
  };
  BlobsParams p{};
  p.classes = to_int(parts[1]);
  size_t x1 = parts[2].find('x');
  size_t x2 = x1 == std::string::npos ? std::string::npos
                                      : parts[2].find('x', x1 + 1);
  if (x2 == std::string::npos) fail("bad dims field '" + parts[2] + "'");
  p.h = to_int(parts[2].substr(0, x1));
  p.w = to_int(parts[2].substr(x1 + 1, x2 - x1 - 1));
  p.c = to_int(parts[2].substr(x2 + 1));
  size_t slash = parts[3].find('/');
  if (slash == std::string::npos) fail("bad counts field '" + parts[3] + "'");
  p.ntrain = to_int(parts[3].substr(0, slash));
  p.ntest = to_int(parts[3].substr(slash + 1));
  p.seed = static_cast<uint64_t>(to_int(parts[4]));
  if (p.ntrain < p.classes) fail("fewer training examples than classes");
  return p;
}

// Smooth per-class prototype: a coarse random grid upsampled bilinearly.
std::vector<float> make_prototype(const BlobsParams& p, Rng& rng) {
  const int64_t gh = std::max<int64_t>(2, std::min<int64_t>(4, p.h / 2));
  const int64_t gw = std::max<int64_t>(2, std::min<int64_t>(4, p.w / 2));
  std::vector<double> grid(static_cast<size_t>(p.c * gh * gw));
  for (auto& v : grid) v = rng.uniform(0.1, 0.9);
  std::vector<float> proto(static_cast<size_t>(p.c * p.h * p.w));
  for (int64_t ch = 0; ch < p.c; ++ch) {
    for (int64_t y = 0; y < p.h; ++y) {
      for (int64_t x = 0; x < p.w; ++x) {
        double sy = (y + 0.5) * gh / p.h - 0.5;
        double sx = (x + 0.5) * gw / p.w - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(gh - 1));
        sx = std::clamp(sx, 0.0, static_cast<double>(gw - 1));
        int64_t y0 = static_cast<int64_t>(sy), x0 = static_cast<int64_t>(sx);
        int64_t y1 = std::min(y0 + 1, gh - 1), x1 = std::min(x0 + 1, gw - 1);
        double fy = sy - y0, fx = sx - x0;
        double v = grid[(ch * gh + y0) * gw + x0] * (1 - fy) * (1 - fx) +
                   grid[(ch * gh + y1) * gw + x0] * fy * (1 - fx) +
                   grid[(ch * gh + y0) * gw + x1] * (1 - fy) * fx +
                   grid[(ch * gh + y1) * gw + x1] * fy * fx;
        proto[(ch * p.h + y) * p.w + x] = static_cast<float>(v);
      }
    }
  }
  return proto;
}

Dataset make_blob_split(const BlobsParams& p,
                        const std::vector<std::vector<float>>& protos,
                        int64_t count, Rng rng, const char* split) {
  Dataset ds;
  ds.n = count;
  ds.c = p.c;
  ds.h = p.h;
  ds.w = p.w;
  ds.num_classes = p.classes;
  ds.split = split;
  ds.images.resize(static_cast<size_t>(count * p.c * p.h * p.w));
  ds.raw_labels().resize(static_cast<size_t>(count));

  // balanced classes, then shuffle the order
  std::vector<int64_t> order(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) order[static_cast<size_t>(i)] = i;
  Rng order_rng = rng.fork("order");
  order_rng.shuffle(order);

  Rng noise = rng.fork("noise");
  for (int64_t i = 0; i < count; ++i) {
    int64_t cls = i % p.classes;
    int64_t dst = order[static_cast<size_t>(i)];
    ds.raw_labels()[static_cast<size_t>(dst)] = static_cast<uint16_t>(cls);
    float* img = ds.images.data() + dst * p.c * p.h * p.w;
    const auto& proto = protos[static_cast<size_t>(cls)];
    int64_t dy = noise.uniform_int(-1, 1);
    int64_t dx = noise.uniform_int(-1, 1);
    double brightness = noise.normal(0.0, kBlobBrightnessSigma);
    double contrast = noise.uniform(1.0 - kBlobContrastHalfRange,
                                    1.0 + kBlobContrastHalfRange);
    for (int64_t ch = 0; ch < p.c; ++ch) {
      for (int64_t y = 0; y < p.h; ++y) {
        for (int64_t x = 0; x < p.w; ++x) {
          int64_t sy = std::clamp(y + dy, int64_t{0}, p.h - 1);
          int64_t sx = std::clamp(x + dx, int64_t{0}, p.w - 1);
          double v = proto[(ch * p.h + sy) * p.w + sx];
          v = (v - 0.5) * contrast + 0.5 + brightness;
          v += noise.normal(0.0, kBlobNoiseSigma);
          v = std::clamp(v, 0.0, 1.0);
          // quantize to the u8 grid so save/load round-trips bit-exactly
          img[(ch * p.h + y) * p.w + x] =
              static_cast<float>(std::lround(v * 255.0) / 255.0);
        }
      }
    }
  }
  return ds;
}

}  // namespace

DataBundle make_blobs(const std::string& spec) {
  BlobsParams p = parse_blobs(spec);
  Rng rng = Rng(p.seed).fork("blobs");
  Rng proto_rng = rng.fork("prototypes");
  std::vector<std::vector<float>> protos;
  protos.reserve(static_cast<size_t>(p.classes));
  for (int64_t k = 0; k < p.classes; ++k) {
    protos.push_back(make_prototype(p, proto_rng));
  }
  DataBundle bundle;
  bundle.train =
      make_blob_split(p, protos, p.ntrain, rng.fork("train"), "train");
  bundle.test = make_blob_split(p, protos, p.ntest, rng.fork("test"), "test");
  return bundle;
}

LabelFractionSplit subsample_labels(const Dataset& ds, double fraction,
                                    uint64_t seed) {
  if (fraction <= 0.0 || fraction > 1.0) {
    throw ConfigError("subsample_labels: fraction must be in (0, 1], got " +
                      std::to_string(fraction));
  }
  const int64_t classes = ds.num_classes;
  std::vector<std::vector<int64_t>> by_class(static_cast<size_t>(classes));
  for (int64_t i = 0; i < ds.n; ++i) {
    by_class[ds.raw_labels()[static_cast<size_t>(i)]].push_back(i);
  }
  for (int64_t k = 0; k < classes; ++k) {
    if (by_class[static_cast<size_t>(k)].empty()) {
      throw DataError("subsample_labels: class " + std::to_string(k) +
                      " has no training examples");
    }
  }

  const int64_t total = std::max<int64_t>(
      1, std::llround(fraction * static_cast<double>(ds.n)));
  // equal per-class quotas differing by at most one; the classes receiving
  // the remainder are chosen by a seeded shuffle
  const int64_t base = total / classes;
  const int64_t remainder = total % classes;
  std::vector<int64_t> class_order(static_cast<size_t>(classes));
  for (int64_t k = 0; k < classes; ++k) class_order[static_cast<size_t>(k)] = k;
  Rng rng = Rng(seed).fork("label-subset");
  Rng extra_rng = rng.fork("remainder");
  extra_rng.shuffle(class_order);

  LabelFractionSplit split;
  split.fraction = fraction;
  split.seed = seed;
  for (int64_t rank = 0; rank < classes; ++rank) {
    int64_t k = class_order[static_cast<size_t>(rank)];
    int64_t quota = base + (rank < remainder ? 1 : 0);
    auto& candidates = by_class[static_cast<size_t>(k)];
    if (quota > static_cast<int64_t>(candidates.size())) {
      throw DataError("subsample_labels: class " + std::to_string(k) +
                      " has " + std::to_string(candidates.size()) +
                      " examples, quota is " + std::to_string(quota));
    }
    Rng pick = rng.fork("class" + std::to_string(k));
    pick.shuffle(candidates);
    for (int64_t i = 0; i < quota; ++i) {
      split.labeled.push_back(candidates[static_cast<size_t>(i)]);
    }
  }
  std::sort(split.labeled.begin(), split.labeled.end());
  return split;
}

}  // namespace semisup
