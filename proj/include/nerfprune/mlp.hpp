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

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace nerfprune {

enum class Activation : std::uint8_t { kRelu = 0 };

/// Shape of a fully-connected network. Layer l maps width[l] (plus the
/// network input when l == skip_input_at) to width[l + 1]. Hidden layers
/// apply `hidden_activation`; the last layer is linear.
struct NetworkSpec {
  std::vector<std::size_t> layer_widths;
  std::optional<std::size_t> skip_input_at;
  Activation hidden_activation = Activation::kRelu;
  std::uint64_t seed = 0;

  /// Throws ConfigError when the spec cannot describe a network.
  void validate() const;

  std::size_t layer_count() const { return layer_widths.size() - 1; }
  std::size_t input_width() const { return layer_widths.front(); }
  std::size_t output_width() const { return layer_widths.back(); }
  /// Input width of layer l including a re-concatenated network input.
  std::size_t fan_in(std::size_t layer) const;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Dense weight matrix (rows = outputs, cols = inputs, row-major) with its
/// gradient and keep-mask. mask[i] == 0 means the weight is pruned and its
/// value is held at exactly +0.0f.
struct MaskedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;
  std::vector<float> grads;
  std::vector<std::uint8_t> mask;

  MaskedMatrix() = default;
  MaskedMatrix(std::size_t r, std::size_t c)
      : rows(r), cols(c), values(r * c, 0.0f), grads(r * c, 0.0f), mask(r * c, 1) {}

  std::size_t size() const { return values.size(); }
  std::size_t kept() const;
};

/// Biases are never masked.
struct BiasVector {
  std::vector<float> values;
  std::vector<float> grads;

  BiasVector() = default;
  explicit BiasVector(std::size_t len) : values(len, 0.0f), grads(len, 0.0f) {}

  std::size_t size() const { return values.size(); }
};

struct DenseLayer {
  MaskedMatrix weight;
  BiasVector bias;
};

/// Gradients for one network, detached from it so that independent
/// backward passes can run concurrently and be reduced in a fixed order.
struct GradientBuffer {
  std::vector<std::vector<float>> weights;
  std::vector<std::vector<float>> biases;

  void zero();
  void add(const GradientBuffer& other);
};

class Mlp;

/// Intermediates recorded by Mlp::forward. inputs[l] holds the input of
/// layer l (rows x fan_in(l)), which for l > 0 is the activated output of
/// layer l - 1, optionally followed by the network input at the skip.
struct ActivationTape {
  const Mlp* owner = nullptr;
  std::uint64_t generation = 0;
  std::size_t rows = 0;
  std::vector<std::vector<float>> inputs;
  std::vector<float> outputs;

  // Scratch reused across passes; backward() writes here.
  std::vector<std::vector<float>> packed_weights;
  std::vector<float> grad_a;
  std::vector<float> grad_b;
};

class Mlp {
 public:
  Mlp() = default;

  /// Fan-in scaled uniform weights, zero biases, all mask bits set.
  static Mlp create(const NetworkSpec& spec);

  /// Builds a network from explicit parameters (decoder path).
  static Mlp from_layers(const NetworkSpec& spec, std::vector<DenseLayer> layers);

  const NetworkSpec& spec() const { return spec_; }
  std::span<DenseLayer> layers() { return layers_; }
  std::span<const DenseLayer> layers() const { return layers_; }
  std::size_t weight_count() const;

  /// Forward pass over `rows` inputs laid out row-major in `batch`.
  /// Outputs are left in tape.outputs (rows x output_width).
  void forward(std::span<const float> batch, std::size_t rows, ActivationTape& tape) const;

  /// Convenience form returning outputs and a fresh tape.
  std::vector<float> forward(std::span<const float> batch, std::size_t rows) const;

  /// Reverse pass. Weight and bias gradients are accumulated into `into`;
  /// pruned weight positions receive exactly zero. When `input_grads` is
  /// non-empty it receives dL/d(input) (rows x input_width, overwritten).
  void backward(ActivationTape& tape, std::span<const float> out_grads,
                GradientBuffer& into, std::span<float> input_grads = {}) const;

  /// Same as above but accumulating into this network's own grads.
  void backward(ActivationTape& tape, std::span<const float> out_grads,
                std::span<float> input_grads = {});

  GradientBuffer make_gradient_buffer() const;
  /// Adds a detached buffer into the network's grads (masked positions stay 0).
  void accumulate_grads(const GradientBuffer& grads);
  void zero_grads();

  /// Invalidates outstanding tapes; called after any parameter mutation.
  void touch() { ++generation_; }
  std::uint64_t generation() const { return generation_; }

 private:
  NetworkSpec spec_;
  std::vector<DenseLayer> layers_;
  std::uint64_t generation_ = 0;
};

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

/// Bias-corrected Adam moments for one network. Moments start at zero.
class AdamState {
 public:
  AdamState() = default;
  AdamState(const Mlp& net, AdamConfig config);

  const AdamConfig& config() const { return config_; }
  std::uint64_t step() const { return step_; }

 private:
  friend void optimizer_step(Mlp& net, AdamState& state);

  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<float>> weight_m_, weight_v_;
  std::vector<std::vector<float>> bias_m_, bias_v_;
};

/// One Adam update of every unmasked parameter, then clears grads.
/// Throws NumericError if an update produces a non-finite value.
void optimizer_step(Mlp& net, AdamState& state);

}  // namespace nerfprune
