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

#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "semisup/rng.hpp"
#include "semisup/tensor.hpp"

namespace semisup {

enum class EncoderKind { mlp, smallconv };

// Desk-scale encoder f(.). `mlp` flattens the image and stacks
// depth_blocks [linear -> batchnorm -> relu] blocks of width
// 128 * width_multiplier. `smallconv` stacks depth_blocks
// [3x3 conv stride 2 -> batchnorm -> relu] stages starting at
// 16 * width_multiplier channels, doubling per stage, then global average
// pooling. Depth and width play the roles of the original's depth/width
// axes.
struct EncoderSpec {
  EncoderKind kind = EncoderKind::mlp;
  int depth_blocks = 2;
  double width_multiplier = 1.0;
  std::array<int64_t, 3> input_shape = {1, 8, 8};  // channels, height, width

  int64_t mlp_width() const;
  int64_t conv_channels(int stage) const;
  int64_t feature_dim() const;
  void validate() const;

  bool operator==(const EncoderSpec&) const = default;
};

// Projection head g(.): num_layers fully-connected layers, relu between
// layers and none after the last. hidden_dim 0 means "same as the encoder
// feature dim" (so it scales with the width multiplier too).
struct HeadSpec {
  int num_layers = 3;
  int64_t hidden_dim = 0;
  int64_t output_dim = 64;

  bool operator==(const HeadSpec&) const = default;
};

struct NetworkSpec {
  EncoderSpec encoder;
  HeadSpec head;           // num_layers == 0 means no head layers retained
  int64_t num_classes = 0;  // > 0 attaches a linear task head
  // True for networks cut at a middle head layer: every remaining head layer
  // was interior at pretraining, so all of them keep their relu.
  bool head_truncated = false;

  int64_t head_hidden_dim() const {
    return head.hidden_dim > 0 ? head.hidden_dim : encoder.feature_dim();
  }
  // Width of activation a_k (0 = encoder output h).
  int64_t head_activation_dim(int k) const;

  bool operator==(const NetworkSpec&) const = default;
};

enum class ParamKind { weight, kernel, bias, bn_gamma, bn_beta };

template <typename T>
struct NamedTensorT {
  std::string name;
  TensorPtrT<T> tensor;
  ParamKind kind = ParamKind::weight;
};

template <typename T>
struct LinearT {
  TensorPtrT<T> w;  // [in x out]
  TensorPtrT<T> b;  // [out]
};

template <typename T>
struct BatchNormT {
  TensorPtrT<T> gamma, beta;          // trainable
  TensorPtrT<T> run_mean, run_var;    // buffers
};

template <typename T>
class NetworkT {
 public:
  NetworkSpec spec;

  // Trainable parameters and batch-norm buffers, in a fixed deterministic
  // order; names are unique and stable across save/load.
  std::vector<NamedTensorT<T>> params;
  std::vector<NamedTensorT<T>> buffers;

  TensorPtrT<T> param(const std::string& name) const;
  int64_t param_count() const;
  void zero_grad();
  NetworkT<T> clone() const;

  TensorPtrT<T> encoder_forward(GraphT<T>& g, TensorPtrT<T> x,
                                Mode mode) const;
  // Returns [a_0 = h, a_1, ..., a_L]; a_L is the pre-normalization
  // projection output.
  std::vector<TensorPtrT<T>> head_forward(GraphT<T>& g,
                                          TensorPtrT<T> h) const;
  // l2-normalized contrastive embedding z.
  TensorPtrT<T> project(GraphT<T>& g, TensorPtrT<T> x, Mode mode) const;
  // encoder -> retained head layers -> task head.
  TensorPtrT<T> task_logits(GraphT<T>& g, TensorPtrT<T> x, Mode mode) const;

  // structured views used by the forward paths
  struct MlpBlock {
    LinearT<T> lin;
    BatchNormT<T> bn;
  };
  struct ConvStage {
    TensorPtrT<T> kernel;
    BatchNormT<T> bn;
  };
  std::vector<MlpBlock> mlp_blocks;
  std::vector<ConvStage> conv_stages;
  std::vector<LinearT<T>> head_layers;
  std::optional<LinearT<T>> task_head;

  static constexpr T kBnMomentum = T(0.9);
  static constexpr T kBnEps = T(1e-5);
};

template <typename T>
NetworkT<T> build_network(const NetworkSpec& spec, Rng rng);

// Keep the encoder plus head layers 1..from_layer (their pretrained values),
// attach a fresh linear task head on activation a_{from_layer}. The final
// head layer is never retained.
template <typename T>
NetworkT<T> build_finetune_network(const NetworkT<T>& pretrained,
                                   int from_layer, int64_t num_classes,
                                   Rng rng);

struct ParamGroups {
  std::set<std::string> adapted;   // weights and kernels
  std::set<std::string> excluded;  // biases and batch-norm affine params
};

template <typename T>
ParamGroups param_groups(const NetworkT<T>& net);

// Shadow copy of a network updated as an exponential moving average of the
// source. Buffers follow the same recursion as parameters.
template <typename T>
class EmaNetworkT {
 public:
  EmaNetworkT(const NetworkT<T>& src, T decay);
  void update(const NetworkT<T>& src);
  const NetworkT<T>& shadow() const { return shadow_; }
  T decay() const { return decay_; }

 private:
  NetworkT<T> shadow_;
  T decay_;
};

using Network = NetworkT<float>;
using EmaNetwork = EmaNetworkT<float>;

}  // namespace semisup
