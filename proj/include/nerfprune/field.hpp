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

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "nerfprune/mlp.hpp"

namespace nerfprune {

using Vec3 = Eigen::Vector3d;

struct EncodingConfig {
  std::size_t l_pos = 6;
  std::size_t l_dir = 4;
  bool include_identity = true;

  void validate() const;
  /// Encoded width of a d-dimensional input with `freqs` frequencies.
  std::size_t width(std::size_t dims, std::size_t freqs) const {
    return dims * 2 * freqs + (include_identity ? dims : 0);
  }
  std::size_t position_width() const { return width(3, l_pos); }
  std::size_t direction_width() const { return width(3, l_dir); }

  friend bool operator==(const EncodingConfig&, const EncodingConfig&) = default;
};

/// Frequency encoding [v?, sin(2^0 pi v), cos(2^0 pi v), ..., sin(2^(l-1) pi v),
/// cos(2^(l-1) pi v)], each block spanning all components of v.
std::vector<double> encode(std::span<const double> v, std::size_t l, bool include_identity);

/// Same layout written as floats into `out` (size width(v.size(), l)).
void encode_into(std::span<const double> v, std::size_t l, bool include_identity,
                 std::span<float> out);

/// A point of the 5D scene function. The viewing direction is kept as a
/// unit vector; from_angles() converts polar/azimuth angles.
struct FieldSample {
  Vec3 position = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();

  /// theta is the polar angle from +z, phi the azimuth from +x.
  static FieldSample from_angles(const Vec3& position, double theta, double phi);
};

struct FieldOutput {
  double sigma = 0.0;
  Vec3 rgb = Vec3::Zero();
};

/// Per-worker buffers for batched field evaluation.
struct FieldScratch {
  virtual ~FieldScratch() = default;
};

/// Anything the volume renderer can march through: N samples in,
/// N densities and N x 3 colours out.
class FieldSource {
 public:
  virtual ~FieldSource() = default;
  virtual std::unique_ptr<FieldScratch> make_scratch() const { return nullptr; }
  virtual void evaluate(std::span<const double> positions, std::span<const double> directions,
                        std::span<double> sigma, std::span<double> rgb,
                        FieldScratch* scratch) const = 0;
};

struct FieldArchitecture {
  EncodingConfig encoding;
  std::size_t trunk_width = 64;
  std::size_t trunk_layers = 4;
  std::size_t skip_at = 3;
  std::size_t head_width = 32;

  NetworkSpec trunk_spec(std::uint64_t seed) const;
  NetworkSpec head_spec(std::uint64_t seed) const;
};

/// Forward intermediates plus backward scratch for one batch.
struct FieldPass : FieldScratch {
  std::size_t count = 0;
  std::vector<float> trunk_in;
  std::vector<float> head_in;
  ActivationTape trunk_tape;
  ActivationTape head_tape;
  std::vector<double> sigma;
  std::vector<double> rgb;

  std::vector<float> d_trunk_out;
  std::vector<float> d_head_out;
  std::vector<float> d_head_in;
};

struct FieldGradients {
  GradientBuffer trunk;
  GradientBuffer head;

  void zero() {
    trunk.zero();
    head.zero();
  }
  void add(const FieldGradients& other) {
    trunk.add(other.trunk);
    head.add(other.head);
  }
};

/// The scene function: a position trunk producing raw density and a
/// feature vector, and a colour head fed the feature plus the encoded
/// direction. Density is softplus(raw), colour is logistic(raw).
class RadianceField : public FieldSource {
 public:
  RadianceField() = default;

  static RadianceField create(const FieldArchitecture& arch, std::uint64_t seed);

  /// Assembles a field from decoded networks; throws ContractError when the
  /// network shapes do not fit together.
  static RadianceField from_networks(const EncodingConfig& encoding, Mlp trunk, Mlp head,
                                     std::uint64_t seed);

  const EncodingConfig& encoding() const { return encoding_; }
  std::uint64_t seed() const { return seed_; }
  Mlp& trunk() { return trunk_; }
  const Mlp& trunk() const { return trunk_; }
  Mlp& head() { return head_; }
  const Mlp& head() const { return head_; }
  std::size_t feature_width() const { return trunk_.spec().output_width() - 1; }
  std::size_t weight_count() const { return trunk_.weight_count() + head_.weight_count(); }

  FieldOutput query(const FieldSample& sample) const;

  /// Batched evaluation; positions and directions are N x 3.
  void forward(std::span<const double> positions, std::span<const double> directions,
               FieldPass& pass) const;

  /// Density only (trunk pass), N values into pass.sigma.
  void density(std::span<const double> positions, FieldPass& pass) const;

  /// Backpropagates dL/dsigma (N) and dL/drgb (N x 3) through the last
  /// forward() recorded in `pass`.
  void backward(FieldPass& pass, std::span<const double> d_sigma, std::span<const double> d_rgb,
                FieldGradients& grads) const;

  FieldGradients make_gradients() const {
    return {trunk_.make_gradient_buffer(), head_.make_gradient_buffer()};
  }
  void accumulate_grads(const FieldGradients& grads) {
    trunk_.accumulate_grads(grads.trunk);
    head_.accumulate_grads(grads.head);
  }

  std::unique_ptr<FieldScratch> make_scratch() const override;
  void evaluate(std::span<const double> positions, std::span<const double> directions,
                std::span<double> sigma, std::span<double> rgb,
                FieldScratch* scratch) const override;

 private:
  void encode_positions(std::span<const double> positions, FieldPass& pass) const;

  EncodingConfig encoding_;
  Mlp trunk_;
  Mlp head_;
  std::uint64_t seed_ = 0;
};

double softplus(double x);
double logistic(double x);

}  // namespace nerfprune
