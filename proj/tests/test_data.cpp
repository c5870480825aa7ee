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

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <vector>

#include "semisup/data.hpp"

using namespace semisup;

namespace {

const char* kBlobSpec = "blobs:10:8x8x1:2000/500:7";

std::string temp_path(const char* name) {
  return std::string("/tmp/semisup_test_") + name;
}

}  // namespace

TEST_CASE("blobs generator is deterministic and well-formed") {
  auto a = make_blobs(kBlobSpec);
  auto b = make_blobs(kBlobSpec);
  CHECK(a.train.n == 2000);
  CHECK(a.test.n == 500);
  CHECK(a.train.num_classes == 10);
  CHECK(a.train.c == 1);
  CHECK(a.train.h == 8);
  a.train.validate();
  a.test.validate();
  CHECK(a.train.images == b.train.images);
  CHECK(a.train.raw_labels() == b.train.raw_labels());
  CHECK(a.test.images == b.test.images);

  auto c = make_blobs("blobs:10:8x8x1:2000/500:8");
  CHECK(a.train.images != c.train.images);

  // balanced classes
  std::map<int, int> hist;
  for (auto y : a.train.raw_labels()) hist[y]++;
  for (auto& [cls, count] : hist) CHECK(count == 200);
}

TEST_CASE("malformed synthetic specs are rejected") {
  CHECK_THROWS_AS(make_blobs("blobs:10:8x8:2000/500:7"), ConfigError);
  CHECK_THROWS_AS(make_blobs("blobs:0:8x8x1:2000/500:7"), ConfigError);
  CHECK_THROWS_AS(make_blobs("blobs:10:8x8x1:2000:7"), ConfigError);
  CHECK_THROWS_AS(make_blobs("blobs:10:axbx1:2000/500:7"), ConfigError);
  CHECK(is_synthetic_spec("blobs:2:4x4x1:10/10:1"));
  CHECK_FALSE(is_synthetic_spec("/data/train.ssds"));
}

TEST_CASE("dataset file round-trip is bit-identical") {
  auto bundle = make_blobs("blobs:4:6x5x2:40/8:11");
  auto path = temp_path("roundtrip.ssds");
  save_dataset(bundle.train, path);
  auto loaded = load_dataset(path);
  CHECK(loaded.n == bundle.train.n);
  CHECK(loaded.images == bundle.train.images);
  CHECK(loaded.raw_labels() == bundle.train.raw_labels());
  std::remove(path.c_str());
}

TEST_CASE("truncated and corrupt dataset files raise format errors") {
  auto bundle = make_blobs("blobs:3:4x4x1:12/6:3");
  auto path = temp_path("trunc.ssds");
  save_dataset(bundle.train, path);

  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  in.close();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  out.close();
  CHECK_THROWS_AS(load_dataset(path), FormatError);

  std::ofstream out2(path, std::ios::binary | std::ios::trunc);
  out2 << "NOPE" << bytes.substr(4);
  out2.close();
  CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("bad magic"),
                       FormatError);
  std::remove(path.c_str());
}

TEST_CASE("subsample_labels: full fraction takes everything") {
  auto bundle = make_blobs("blobs:5:4x4x1:50/10:2");
  auto split = subsample_labels(bundle.train, 1.0, 9);
  CHECK(split.labeled.size() == 50);
  for (int64_t i = 0; i < 50; ++i) CHECK(split.labeled[i] == i);
}

TEST_CASE("subsample_labels: 1% of 10x200 is exactly 2 per class") {
  auto bundle = make_blobs(kBlobSpec);
  auto split = subsample_labels(bundle.train, 0.01, 5);
  CHECK(split.labeled.size() == 20);
  std::map<int, int> hist;
  for (auto i : split.labeled) hist[bundle.train.raw_labels()[i]]++;
  CHECK(hist.size() == 10);
  for (auto& [cls, count] : hist) CHECK(count == 2);
}

TEST_CASE("subsample_labels: deterministic per seed, differs across seeds") {
  auto bundle = make_blobs(kBlobSpec);
  auto a = subsample_labels(bundle.train, 0.05, 42);
  auto b = subsample_labels(bundle.train, 0.05, 42);
  CHECK(a.labeled == b.labeled);
  auto c = subsample_labels(bundle.train, 0.05, 43);
  CHECK(a.labeled != c.labeled);
}

TEST_CASE("subsample_labels histogram property: max - min <= 1") {
  auto bundle = make_blobs("blobs:7:4x4x1:61/10:13");
  for (double fraction : {0.1, 0.33, 0.5, 0.9}) {
    auto split = subsample_labels(bundle.train, fraction, 3);
    std::map<int, int> hist;
    for (int k = 0; k < 7; ++k) hist[k] = 0;
    for (auto i : split.labeled) hist[bundle.train.raw_labels()[i]]++;
    int mn = 1 << 30, mx = 0;
    for (auto& [cls, count] : hist) {
      mn = std::min(mn, count);
      mx = std::max(mx, count);
    }
    CHECK(mx - mn <= 1);
    CHECK(static_cast<int64_t>(split.labeled.size()) ==
          std::llround(fraction * 61));
  }
  CHECK_THROWS_AS(subsample_labels(bundle.train, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(subsample_labels(bundle.train, 1.5, 1), ConfigError);
}

TEST_CASE("augment: neutral knobs give the identity") {
  auto bundle = make_blobs("blobs:2:8x8x1:8/2:21");
  AugmentSpec spec;
  spec.crop_scale_min = 1.0;
  spec.crop_scale_max = 1.0;
  spec.flip_prob = 0.0;
  spec.jitter_strength = 0.0;
  spec.blur_prob = 0.0;
  Rng rng(4);
  std::vector<float> out(64);
  augment_view(bundle.train.image_ptr(0), out.data(), 1, 8, 8, spec, rng);
  for (int i = 0; i < 64; ++i) {
    CHECK(out[i] == bundle.train.image_ptr(0)[i]);
  }

  // the finetune pipeline with the same knobs is also the identity
  spec.kind = AugmentKind::finetune;
  spec.jitter_strength = 0.9;  // must be ignored by the finetune pipeline
  spec.blur_prob = 0.9;
  Rng rng2(4);
  augment_view(bundle.train.image_ptr(0), out.data(), 1, 8, 8, spec, rng2);
  for (int i = 0; i < 64; ++i) {
    CHECK(out[i] == bundle.train.image_ptr(0)[i]);
  }
}

TEST_CASE("flip applied twice is the identity") {
  auto bundle = make_blobs("blobs:2:5x6x3:8/2:23");
  std::vector<float> img(bundle.train.image_ptr(1),
                         bundle.train.image_ptr(1) + 3 * 5 * 6);
  auto orig = img;
  flip_horizontal(img.data(), 3, 5, 6);
  CHECK(img != orig);
  flip_horizontal(img.data(), 3, 5, 6);
  CHECK(img == orig);
}

TEST_CASE("augment determinism: same seed, same view; output stays in range") {
  auto bundle = make_blobs("blobs:3:8x8x2:12/3:31");
  auto spec = AugmentSpec::pretrain_default();
  std::vector<float> a(2 * 64), b(2 * 64);
  Rng r1(99), r2(99);
  augment_view(bundle.train.image_ptr(2), a.data(), 2, 8, 8, spec, r1);
  augment_view(bundle.train.image_ptr(2), b.data(), 2, 8, 8, spec, r2);
  CHECK(a == b);

  Rng r3(100);
  for (int trial = 0; trial < 20; ++trial) {
    augment_view(bundle.train.image_ptr(trial % 12), a.data(), 2, 8, 8, spec,
                 r3);
    for (float v : a) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
}

TEST_CASE("make_pair_batch: interleaved views with involution pairing") {
  auto bundle = make_blobs("blobs:2:6x6x1:8/2:41");
  auto spec = AugmentSpec::pretrain_default();
  Rng rng(7);
  auto batch = make_pair_batch(bundle.train, {0, 3}, spec, rng);
  CHECK(batch.n_views == 4);
  CHECK(batch.positive_of == std::vector<int64_t>({1, 0, 3, 2}));
  CHECK(batch.source == std::vector<int64_t>({0, 0, 3, 3}));

  Rng rng2(8);
  CHECK_THROWS_AS(make_pair_batch(bundle.train, {0}, spec, rng2),
                  DegenerateBatchError);
}

TEST_CASE("identity augmentation makes the two views of an image equal") {
  auto bundle = make_blobs("blobs:2:6x6x1:8/2:43");
  AugmentSpec spec;
  spec.crop_scale_min = 1.0;
  spec.crop_scale_max = 1.0;
  spec.flip_prob = 0.0;
  spec.jitter_strength = 0.0;
  spec.blur_prob = 0.0;
  Rng rng(9);
  auto batch = make_pair_batch(bundle.train, {1, 4, 6}, spec, rng);
  const int64_t sz = 36;
  for (int64_t k = 0; k < 3; ++k) {
    for (int64_t i = 0; i < sz; ++i) {
      CHECK(batch.views[(2 * k) * sz + i] == batch.views[(2 * k + 1) * sz + i]);
    }
  }
}

TEST_CASE("pairing survives an arbitrary permutation of the views") {
  auto bundle = make_blobs("blobs:3:6x6x1:12/3:47");
  auto spec = AugmentSpec::pretrain_default();
  Rng rng(10);
  auto batch = make_pair_batch(bundle.train, {2, 5, 7, 9}, spec, rng);

  // apply a random permutation and remap the pairing the same way
  std::vector<int64_t> perm(static_cast<size_t>(batch.n_views));
  for (int64_t i = 0; i < batch.n_views; ++i) perm[i] = i;
  Rng prng(11);
  prng.shuffle(perm);

  std::vector<int64_t> new_pos(perm.size());
  std::vector<int64_t> new_source(perm.size());
  for (int64_t i = 0; i < batch.n_views; ++i) {
    new_pos[perm[i]] = perm[batch.positive_of[i]];
    new_source[perm[i]] = batch.source[i];
  }
  // oracle: every view's positive must still share its source image
  for (int64_t i = 0; i < batch.n_views; ++i) {
    int64_t j = new_pos[static_cast<size_t>(i)];
    CHECK(j != i);
    CHECK(new_pos[static_cast<size_t>(j)] == i);
    CHECK(new_source[static_cast<size_t>(i)] ==
          new_source[static_cast<size_t>(j)]);
  }
}

TEST_CASE("label lock: reads are counted and locked access throws") {
  auto bundle = make_blobs("blobs:2:4x4x1:8/2:53");
  auto& ds = bundle.train;
  CHECK(ds.label_access_count() == 0);
  (void)ds.label(0);
  (void)ds.label(1);
  CHECK(ds.label_access_count() == 2);
  {
    LabelLock lock(ds);
    CHECK_THROWS_AS(ds.label(0), ProtocolError);
  }
  (void)ds.label(0);
  CHECK(ds.label_access_count() == 3);
}
