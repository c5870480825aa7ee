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

#include "semisup/nn.hpp"

#include <cmath>

namespace semisup {

int64_t EncoderSpec::mlp_width() const {
  return std::max<int64_t>(1, std::llround(128.0 * width_multiplier));
}

int64_t EncoderSpec::conv_channels(int stage) const {
  int64_t base = std::max<int64_t>(1, std::llround(16.0 * width_multiplier));
  return base << stage;
}

int64_t EncoderSpec::feature_dim() const {
  return kind == EncoderKind::mlp ? mlp_width()
                                  : conv_channels(depth_blocks - 1);
}

void EncoderSpec::validate() const {
  if (depth_blocks < 1) {
    throw ConfigError("encoder: depth_blocks must be >= 1");
  }
  if (width_multiplier <= 0) {
    throw ConfigError("encoder: width_multiplier must be positive");
  }
  for (int64_t d : input_shape) {
    if (d < 1) throw ConfigError("encoder: bad input shape");
  }
}

int64_t NetworkSpec::head_activation_dim(int k) const {
  if (k == 0) return encoder.feature_dim();
  return k < head.num_layers ? head_hidden_dim() : head.output_dim;
}

namespace {

template <typename T>
TensorPtrT<T> make_param(std::vector<NamedTensorT<T>>& out, std::string name,
                         ParamKind kind, std::vector<int64_t> shape,
                         std::vector<T> data) {
  auto t = GraphT<T>::leaf(std::move(shape), std::move(data), true);
  out.push_back({std::move(name), t, kind});
  return t;
}

template <typename T>
TensorPtrT<T> make_buffer(std::vector<NamedTensorT<T>>& out, std::string name,
                          std::vector<int64_t> shape, T fill) {
  auto t = GraphT<T>::leaf(std::move(shape));
  for (auto& v : t->data) v = fill;
  out.push_back({std::move(name), t, ParamKind::weight});
  return t;
}

// Fan-in scaled Gaussian init for weight matrices and kernels.
template <typename T>
std::vector<T> gaussian_init(Rng& rng, int64_t n, int64_t fan_in) {
  std::vector<T> v(static_cast<size_t>(n));
  const double std_dev = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& x : v) x = static_cast<T>(rng.normal(0.0, std_dev));
  return v;
}

template <typename T>
BatchNormT<T> make_bn(NetworkT<T>& net, const std::string& prefix,
                      int64_t ch) {
  BatchNormT<T> bn;
  bn.gamma = make_param(net.params, prefix + ".bn.gamma", ParamKind::bn_gamma,
                        {ch}, std::vector<T>(static_cast<size_t>(ch), T(1)));
  bn.beta = make_param(net.params, prefix + ".bn.beta", ParamKind::bn_beta,
                       {ch}, std::vector<T>(static_cast<size_t>(ch), T(0)));
  bn.run_mean = make_buffer(net.buffers, prefix + ".bn.running_mean", {ch},
                            T(0));
  bn.run_var = make_buffer(net.buffers, prefix + ".bn.running_var", {ch},
                           T(1));
  return bn;
}

template <typename T>
LinearT<T> make_linear(NetworkT<T>& net, const std::string& prefix,
                       int64_t in, int64_t out, Rng& rng) {
  LinearT<T> lin;
  lin.w = make_param(net.params, prefix + ".weight", ParamKind::weight,
                     {in, out}, gaussian_init<T>(rng, in * out, in));
  lin.b = make_param(net.params, prefix + ".bias", ParamKind::bias, {out},
                     std::vector<T>(static_cast<size_t>(out), T(0)));
  return lin;
}

template <typename T>
void build_head_layers(NetworkT<T>& net, int first_layer, Rng& rng) {
  const NetworkSpec& spec = net.spec;
  for (int k = first_layer; k <= spec.head.num_layers; ++k) {
    int64_t in = spec.head_activation_dim(k - 1);
    int64_t out = spec.head_activation_dim(k);
    net.head_layers.push_back(
        make_linear(net, "head.layer" + std::to_string(k), in, out, rng));
  }
}

}  // namespace

template <typename T>
TensorPtrT<T> NetworkT<T>::param(const std::string& name) const {
  for (const auto& p : params) {
    if (p.name == name) return p.tensor;
  }
  for (const auto& b : buffers) {
    if (b.name == name) return b.tensor;
  }
  throw StructureError("network: no parameter named '" + name + "'");
}

template <typename T>
int64_t NetworkT<T>::param_count() const {
  int64_t n = 0;
  for (const auto& p : params) n += p.tensor->numel();
  return n;
}

template <typename T>
void NetworkT<T>::zero_grad() {
  for (auto& p : params) p.tensor->zero_grad();
}

template <typename T>
NetworkT<T> NetworkT<T>::clone() const {
  NetworkT<T> out = build_network<T>(spec, Rng(0));
  if (out.params.size() != params.size() ||
      out.buffers.size() != buffers.size()) {
    throw StructureError("clone: rebuilt network has different topology");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    out.params[i].tensor->data = params[i].tensor->data;
  }
  for (size_t i = 0; i < buffers.size(); ++i) {
    out.buffers[i].tensor->data = buffers[i].tensor->data;
  }
  return out;
}

template <typename T>
TensorPtrT<T> NetworkT<T>::encoder_forward(GraphT<T>& g, TensorPtrT<T> x,
                                           Mode mode) const {
  const auto& in = spec.encoder.input_shape;
  if (spec.encoder.kind == EncoderKind::mlp) {
    const int64_t flat = in[0] * in[1] * in[2];
    if (x->rank() == 4) {
      if (x->dim(1) != in[0] || x->dim(2) != in[1] || x->dim(3) != in[2]) {
        throw ShapeError("encoder_forward: input " + shape_str(x->shape) +
                         " does not match spec input shape");
      }
      x = g.reshape(x, {x->dim(0), flat});
    } else if (x->rank() != 2 || x->dim(1) != flat) {
      throw ShapeError("encoder_forward: input " + shape_str(x->shape) +
                       " does not match flattened dim " +
                       std::to_string(flat));
    }
    auto h = x;
    for (const auto& block : mlp_blocks) {
      auto pre = g.add_bias(g.matmul(h, block.lin.w), block.lin.b);
      auto normed =
          g.batchnorm(pre, block.bn.gamma, block.bn.beta, block.bn.run_mean,
                      block.bn.run_var, kBnMomentum, kBnEps, mode);
      h = g.relu(normed);
    }
    return h;
  }

  if (x->rank() != 4 || x->dim(1) != in[0] || x->dim(2) != in[1] ||
      x->dim(3) != in[2]) {
    throw ShapeError("encoder_forward: input " + shape_str(x->shape) +
                     " does not match spec input shape");
  }
  auto h = x;
  for (const auto& stage : conv_stages) {
    auto pre = g.conv2d(h, stage.kernel, 2);
    auto normed =
        g.batchnorm(pre, stage.bn.gamma, stage.bn.beta, stage.bn.run_mean,
                    stage.bn.run_var, kBnMomentum, kBnEps, mode);
    h = g.relu(normed);
  }
  // global average pool over the spatial axes
  auto pooled = g.reduce(g.reduce(h, ReduceKind::mean, 3), ReduceKind::mean,
                         2);
  return pooled;
}

template <typename T>
std::vector<TensorPtrT<T>> NetworkT<T>::head_forward(GraphT<T>& g,
                                                     TensorPtrT<T> h) const {
  std::vector<TensorPtrT<T>> acts;
  acts.push_back(h);
  const int total = static_cast<int>(head_layers.size());
  for (int k = 0; k < total; ++k) {
    auto pre = g.add_bias(g.matmul(acts.back(), head_layers[k].w),
                          head_layers[k].b);
    const bool interior = k + 1 < total || spec.head_truncated;
    acts.push_back(interior ? g.relu(pre) : pre);
  }
  return acts;
}

template <typename T>
TensorPtrT<T> NetworkT<T>::project(GraphT<T>& g, TensorPtrT<T> x,
                                   Mode mode) const {
  auto acts = head_forward(g, encoder_forward(g, x, mode));
  return g.l2_normalize(acts.back());
}

template <typename T>
TensorPtrT<T> NetworkT<T>::task_logits(GraphT<T>& g, TensorPtrT<T> x,
                                       Mode mode) const {
  if (!task_head.has_value()) {
    throw ConfigError("task_logits: network has no task head");
  }
  auto acts = head_forward(g, encoder_forward(g, x, mode));
  return g.add_bias(g.matmul(acts.back(), task_head->w), task_head->b);
}

template <typename T>
NetworkT<T> build_network(const NetworkSpec& spec, Rng rng) {
  spec.encoder.validate();
  if (spec.head.num_layers < 0) {
    throw ConfigError("head: num_layers must be >= 0");
  }
  NetworkT<T> net;
  net.spec = spec;
  Rng init = rng.fork("init");

  const auto& in = spec.encoder.input_shape;
  if (spec.encoder.kind == EncoderKind::mlp) {
    int64_t prev = in[0] * in[1] * in[2];
    for (int i = 0; i < spec.encoder.depth_blocks; ++i) {
      const std::string prefix = "encoder.block" + std::to_string(i);
      typename NetworkT<T>::MlpBlock block;
      int64_t width = spec.encoder.mlp_width();
      block.lin = make_linear(net, prefix, prev, width, init);
      block.bn = make_bn(net, prefix, width);
      net.mlp_blocks.push_back(block);
      prev = width;
    }
  } else {
    int64_t prev_ch = in[0];
    for (int i = 0; i < spec.encoder.depth_blocks; ++i) {
      const std::string prefix = "encoder.stage" + std::to_string(i);
      typename NetworkT<T>::ConvStage stage;
      int64_t ch = spec.encoder.conv_channels(i);
      stage.kernel = make_param(
          net.params, prefix + ".kernel", ParamKind::kernel, {ch, prev_ch, 3, 3},
          gaussian_init<T>(init, ch * prev_ch * 9, prev_ch * 9));
      stage.bn = make_bn(net, prefix, ch);
      net.conv_stages.push_back(stage);
      prev_ch = ch;
    }
  }

  if (spec.head.num_layers > 0) {
    build_head_layers(net, 1, init);
  }

  if (spec.num_classes > 0) {
    int64_t feat = spec.head_activation_dim(spec.head.num_layers);
    net.task_head =
        make_linear(net, "task", feat, spec.num_classes, init);
  }
  return net;
}

template <typename T>
NetworkT<T> build_finetune_network(const NetworkT<T>& pretrained,
                                   int from_layer, int64_t num_classes,
                                   Rng rng) {
  const NetworkSpec& src_spec = pretrained.spec;
  if (from_layer < 0 || from_layer >= src_spec.head.num_layers) {
    throw ConfigError("build_finetune_network: from_layer " +
                      std::to_string(from_layer) + " out of range [0, " +
                      std::to_string(src_spec.head.num_layers) + ")");
  }
  if (num_classes < 2) {
    throw ConfigError("build_finetune_network: need at least 2 classes");
  }
  NetworkSpec spec = src_spec;
  spec.head.num_layers = from_layer;
  spec.head.hidden_dim = src_spec.head_hidden_dim();
  spec.head.output_dim = spec.head.hidden_dim;
  spec.num_classes = num_classes;
  spec.head_truncated = from_layer > 0;

  NetworkT<T> net = build_network<T>(spec, rng);
  // copy retained parameters and buffers from the pretrained network
  for (auto& p : net.params) {
    if (p.name.rfind("task", 0) == 0) continue;  // fresh task head
    p.tensor->data = pretrained.param(p.name)->data;
  }
  for (auto& b : net.buffers) {
    b.tensor->data = pretrained.param(b.name)->data;
  }
  return net;
}

template <typename T>
ParamGroups param_groups(const NetworkT<T>& net) {
  ParamGroups groups;
  for (const auto& p : net.params) {
    if (p.kind == ParamKind::weight || p.kind == ParamKind::kernel) {
      groups.adapted.insert(p.name);
    } else {
      groups.excluded.insert(p.name);
    }
  }
  return groups;
}

template <typename T>
EmaNetworkT<T>::EmaNetworkT(const NetworkT<T>& src, T decay)
    : shadow_(src.clone()), decay_(decay) {
  if (decay < T(0) || decay > T(1)) {
    throw ConfigError("ema: decay must be in [0, 1]");
  }
}

template <typename T>
void EmaNetworkT<T>::update(const NetworkT<T>& src) {
  if (src.params.size() != shadow_.params.size() ||
      src.buffers.size() != shadow_.buffers.size()) {
    throw StructureError("ema: source topology does not match shadow");
  }
  auto blend = [this](TensorPtrT<T>& sh, const TensorPtrT<T>& s,
                      const std::string& name, const std::string& sname) {
    if (name != sname || sh->data.size() != s->data.size()) {
      throw StructureError("ema: mismatched parameter '" + name + "' vs '" +
                           sname + "'");
    }
    for (size_t i = 0; i < sh->data.size(); ++i) {
      sh->data[i] = decay_ * sh->data[i] + (T(1) - decay_) * s->data[i];
    }
  };
  for (size_t i = 0; i < shadow_.params.size(); ++i) {
    blend(shadow_.params[i].tensor, src.params[i].tensor,
          shadow_.params[i].name, src.params[i].name);
  }
  for (size_t i = 0; i < shadow_.buffers.size(); ++i) {
    blend(shadow_.buffers[i].tensor, src.buffers[i].tensor,
          shadow_.buffers[i].name, src.buffers[i].name);
  }
}

#define SEMISUP_INSTANTIATE_NN(T)                                           \
  template class NetworkT<T>;                                               \
  template class EmaNetworkT<T>;                                            \
  template NetworkT<T> build_network<T>(const NetworkSpec&, Rng);           \
  template NetworkT<T> build_finetune_network<T>(const NetworkT<T>&, int,   \
                                                 int64_t, Rng);             \
  template ParamGroups param_groups<T>(const NetworkT<T>&);

SEMISUP_INSTANTIATE_NN(float)
SEMISUP_INSTANTIATE_NN(double)

#undef SEMISUP_INSTANTIATE_NN

}  // namespace semisup
