// Copyright 2026 The nerfprune Authors
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

#include "nerfprune/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "nerfprune/error.hpp"
#include "nerfprune/kernels.hpp"

namespace nerfprune {

void NetworkSpec::validate() const {
  if (layer_widths.size() < 2) {
    throw ConfigError("network needs at least an input and an output width");
  }
  for (std::size_t i = 0; i < layer_widths.size(); ++i) {
    if (layer_widths[i] == 0) {
      throw ConfigError("layer width " + std::to_string(i) + " is zero");
    }
  }
  if (skip_input_at) {
    const std::size_t at = *skip_input_at;
    if (at == 0 || at >= layer_count()) {
      throw ConfigError("skip_input_at " + std::to_string(at) +
                        " must name an interior layer in [1, " +
                        std::to_string(layer_count() - 1) + "]");
    }
  }
  if (hidden_activation != Activation::kRelu) {
    throw ConfigError("unsupported hidden activation");
  }
}

std::size_t NetworkSpec::fan_in(std::size_t layer) const {
  const std::size_t base = layer_widths[layer];
  return (skip_input_at && *skip_input_at == layer) ? base + input_width() : base;
}

std::size_t MaskedMatrix::kept() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

void GradientBuffer::zero() {
  for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0f);
  for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0f);
}

void GradientBuffer::add(const GradientBuffer& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (std::size_t i = 0; i < weights[l].size(); ++i) weights[l][i] += other.weights[l][i];
    for (std::size_t i = 0; i < biases[l].size(); ++i) biases[l][i] += other.biases[l][i];
  }
}

Mlp Mlp::create(const NetworkSpec& spec) {
  spec.validate();
  Mlp net;
  net.spec_ = spec;
  std::mt19937_64 gen(spec.seed);
  const std::size_t n_layers = spec.layer_count();
  net.layers_.reserve(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const std::size_t fan = spec.fan_in(l);
    const std::size_t out = spec.layer_widths[l + 1];
    DenseLayer layer{MaskedMatrix(out, fan), BiasVector(out)};
    // One fan-in rule for every layer: a smaller output-layer scale would make
    // the output layers the first casualties of a global magnitude threshold.
    const double bound = std::sqrt(6.0 / static_cast<double>(fan));
    for (float& w : layer.weight.values) {
      const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
      w = static_cast<float>((2.0 * u - 1.0) * bound);
    }
    net.layers_.push_back(std::move(layer));
  }
  return net;
}

Mlp Mlp::from_layers(const NetworkSpec& spec, std::vector<DenseLayer> layers) {
  spec.validate();
  if (layers.size() != spec.layer_count()) {
    throw ContractError("layer count does not match network spec");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& w = layers[l].weight;
    const std::size_t out = spec.layer_widths[l + 1];
    if (w.rows != out || w.cols != spec.fan_in(l) || w.values.size() != w.rows * w.cols ||
        w.mask.size() != w.values.size() || layers[l].bias.size() != out) {
      throw ContractError("layer " + std::to_string(l) + " shape does not match network spec");
    }
    layers[l].weight.grads.assign(w.values.size(), 0.0f);
    layers[l].bias.grads.assign(out, 0.0f);
  }
  Mlp net;
  net.spec_ = spec;
  net.layers_ = std::move(layers);
  return net;
}

std::size_t Mlp::weight_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.size();
  return n;
}

void Mlp::forward(std::span<const float> batch, std::size_t rows, ActivationTape& tape) const {
  const std::size_t in = spec_.input_width();
  if (batch.size() != rows * in) {
    throw ContractError("forward: batch has " + std::to_string(batch.size()) +
                        " values, expected " + std::to_string(rows) + " x " +
                        std::to_string(in));
  }
  const std::size_t n_layers = layers_.size();
  tape.owner = this;
  tape.generation = generation_;
  tape.rows = rows;
  tape.inputs.resize(n_layers);
  tape.packed_weights.resize(n_layers);
  tape.inputs[0].assign(batch.begin(), batch.end());

  for (std::size_t l = 0; l < n_layers; ++l) {
    const DenseLayer& layer = layers_[l];
    const std::size_t fan = layer.weight.cols;
    const std::size_t out = layer.weight.rows;

    auto& packed = tape.packed_weights[l];
    packed.resize(fan * out);
    for (std::size_t o = 0; o < out; ++o) {
      const float* wrow = layer.weight.values.data() + o * fan;
      for (std::size_t p = 0; p < fan; ++p) packed[p * out + o] = wrow[p];
    }

    const bool hidden = l + 1 < n_layers;
    std::vector<float>& dest = hidden ? tape.inputs[l + 1] : tape.outputs;
    const std::size_t ld = hidden ? spec_.fan_in(l + 1) : out;
    dest.resize(rows * ld);

    kernels::gemm(false, {tape.inputs[l].data(), rows, fan, fan}, {packed.data(), fan, out, out},
                  {dest.data(), rows, out, ld}, false);

    const float* bias = layer.bias.values.data();
    for (std::size_t r = 0; r < rows; ++r) {
      float* row = dest.data() + r * ld;
      if (hidden) {
        for (std::size_t o = 0; o < out; ++o) row[o] = std::max(row[o] + bias[o], 0.0f);
      } else {
        for (std::size_t o = 0; o < out; ++o) row[o] += bias[o];
      }
    }
    if (hidden && spec_.skip_input_at && *spec_.skip_input_at == l + 1) {
      for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(batch.data() + r * in, in, dest.data() + r * ld + out);
      }
    }
  }
}

std::vector<float> Mlp::forward(std::span<const float> batch, std::size_t rows) const {
  ActivationTape tape;
  forward(batch, rows, tape);
  return std::move(tape.outputs);
}

void Mlp::backward(ActivationTape& tape, std::span<const float> out_grads, GradientBuffer& into,
                   std::span<float> input_grads) const {
  if (tape.owner != this || tape.generation != generation_) {
    throw ContractError("backward: tape was not produced by the current state of this network");
  }
  const std::size_t rows = tape.rows;
  const std::size_t in = spec_.input_width();
  if (out_grads.size() != rows * spec_.output_width()) {
    throw ContractError("backward: output gradient shape mismatch");
  }
  if (!input_grads.empty() && input_grads.size() != rows * in) {
    throw ContractError("backward: input gradient shape mismatch");
  }
  if (into.weights.size() != layers_.size()) {
    throw ContractError("backward: gradient buffer does not match network");
  }
  const bool want_input = !input_grads.empty();
  if (want_input) std::fill(input_grads.begin(), input_grads.end(), 0.0f);

  std::vector<float>& grad = tape.grad_a;
  std::vector<float>& dx = tape.grad_b;
  grad.assign(out_grads.begin(), out_grads.end());

  for (std::size_t l = layers_.size(); l-- > 0;) {
    const DenseLayer& layer = layers_[l];
    const std::size_t fan = layer.weight.cols;
    const std::size_t out = layer.weight.rows;
    const std::vector<float>& x = tape.inputs[l];

    auto& dw = into.weights[l];
    kernels::gemm(true, {grad.data(), rows, out, out}, {x.data(), rows, fan, fan},
                  {dw.data(), out, fan, fan}, true);
    const auto& mask = layer.weight.mask;
    for (std::size_t i = 0; i < dw.size(); ++i) {
      if (!mask[i]) dw[i] = 0.0f;
    }
    auto& db = into.biases[l];
    for (std::size_t r = 0; r < rows; ++r) {
      const float* g = grad.data() + r * out;
      for (std::size_t o = 0; o < out; ++o) db[o] += g[o];
    }

    if (l == 0 && !want_input) break;

    dx.resize(rows * fan);
    kernels::gemm(false, {grad.data(), rows, out, out},
                  {layer.weight.values.data(), out, fan, fan}, {dx.data(), rows, fan, fan}, false);

    if (l == 0) {
      for (std::size_t i = 0; i < rows * in; ++i) input_grads[i] += dx[i];
      break;
    }
    const std::size_t width = spec_.layer_widths[l];
    if (want_input && fan > width) {
      for (std::size_t r = 0; r < rows; ++r) {
        const float* src = dx.data() + r * fan + width;
        float* dst = input_grads.data() + r * in;
        for (std::size_t c = 0; c < in; ++c) dst[c] += src[c];
      }
    }
    grad.resize(rows * width);
    for (std::size_t r = 0; r < rows; ++r) {
      const float* d = dx.data() + r * fan;
      const float* act = x.data() + r * fan;
      float* g = grad.data() + r * width;
      for (std::size_t c = 0; c < width; ++c) g[c] = act[c] > 0.0f ? d[c] : 0.0f;
    }
  }
}

void Mlp::backward(ActivationTape& tape, std::span<const float> out_grads,
                   std::span<float> input_grads) {
  GradientBuffer buffer = make_gradient_buffer();
  backward(tape, out_grads, buffer, input_grads);
  accumulate_grads(buffer);
}

GradientBuffer Mlp::make_gradient_buffer() const {
  GradientBuffer buffer;
  for (const auto& layer : layers_) {
    buffer.weights.emplace_back(layer.weight.size(), 0.0f);
    buffer.biases.emplace_back(layer.bias.size(), 0.0f);
  }
  return buffer;
}

void Mlp::accumulate_grads(const GradientBuffer& grads) {
  if (grads.weights.size() != layers_.size()) {
    throw ContractError("gradient buffer does not match network");
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto& w = layers_[l].weight;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w.mask[i]) w.grads[i] += grads.weights[l][i];
    }
    auto& b = layers_[l].bias;
    for (std::size_t i = 0; i < b.size(); ++i) b.grads[i] += grads.biases[l][i];
  }
}

void Mlp::zero_grads() {
  for (auto& layer : layers_) {
    std::fill(layer.weight.grads.begin(), layer.weight.grads.end(), 0.0f);
    std::fill(layer.bias.grads.begin(), layer.bias.grads.end(), 0.0f);
  }
}

void AdamConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
}

AdamState::AdamState(const Mlp& net, AdamConfig config) : config_(config) {
  config_.validate();
  for (const auto& layer : net.layers()) {
    weight_m_.emplace_back(layer.weight.size(), 0.0f);
    weight_v_.emplace_back(layer.weight.size(), 0.0f);
    bias_m_.emplace_back(layer.bias.size(), 0.0f);
    bias_v_.emplace_back(layer.bias.size(), 0.0f);
  }
}

namespace {

struct AdamScalars {
  double lr, beta1, beta2, eps, correction1, correction2;
};

// Returns false when the update is non-finite.
inline bool adam_update(float& param, float grad, float& m, float& v, const AdamScalars& s) {
  const double g = grad;
  const double m_new = s.beta1 * m + (1.0 - s.beta1) * g;
  const double v_new = s.beta2 * v + (1.0 - s.beta2) * g * g;
  m = static_cast<float>(m_new);
  v = static_cast<float>(v_new);
  const double m_hat = m_new / s.correction1;
  const double v_hat = v_new / s.correction2;
  const double next = param - s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
  param = static_cast<float>(next);
  return std::isfinite(param);
}

}  // namespace

void optimizer_step(Mlp& net, AdamState& state) {
  const auto layers = net.layers();
  if (state.weight_m_.size() != layers.size()) {
    throw ContractError("optimizer state does not match network");
  }
  ++state.step_;
  const auto& cfg = state.config_;
  const double t = static_cast<double>(state.step_);
  const AdamScalars s{cfg.lr,
                      cfg.beta1,
                      cfg.beta2,
                      cfg.eps,
                      1.0 - std::pow(cfg.beta1, t),
                      1.0 - std::pow(cfg.beta2, t)};

  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& w = layers[l].weight;
    auto& wm = state.weight_m_[l];
    auto& wv = state.weight_v_[l];
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!w.mask[i]) {
        w.values[i] = 0.0f;
        w.grads[i] = 0.0f;
        continue;
      }
      if (!adam_update(w.values[i], w.grads[i], wm[i], wv[i], s)) {
        throw NumericError("optimizer step " + std::to_string(state.step_) +
                           " produced a non-finite weight in layer " + std::to_string(l));
      }
      w.grads[i] = 0.0f;
    }
    auto& b = layers[l].bias;
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (!adam_update(b.values[i], b.grads[i], state.bias_m_[l][i], state.bias_v_[l][i], s)) {
        throw NumericError("optimizer step " + std::to_string(state.step_) +
                           " produced a non-finite bias in layer " + std::to_string(l));
      }
      b.grads[i] = 0.0f;
    }
  }
  net.touch();
}

}  // namespace nerfprune
