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

#include "nerfprune/field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "nerfprune/error.hpp"
#include "nerfprune/random.hpp"

namespace nerfprune {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void EncodingConfig::validate() const {
  if (l_pos < 1) throw ConfigError("l_pos must be >= 1");
  if (l_pos > 20 || l_dir > 20) throw ConfigError("encoding frequency count above 20");
}

namespace {

// Doubling recurrences: sin 2a = 2 sin a cos a, cos 2a = cos^2 a - sin^2 a.
// The error at most doubles per octave, far below float resolution for the
// frequency counts in use.
template <typename Out>
void encode_impl(std::span<const double> v, std::size_t l, bool include_identity, Out* out) {
  const std::size_t d = v.size();
  std::size_t o = 0;
  if (include_identity) {
    for (std::size_t i = 0; i < d; ++i) out[o++] = static_cast<Out>(v[i]);
  }
  if (l == 0) return;
  double s[8];
  double c[8];
  double* sp = s;
  double* cp = c;
  std::vector<double> s_heap, c_heap;
  if (d > 8) {
    s_heap.resize(d);
    c_heap.resize(d);
    sp = s_heap.data();
    cp = c_heap.data();
  }
  for (std::size_t i = 0; i < d; ++i) {
    const double a = std::numbers::pi * v[i];
    sp[i] = std::sin(a);
    cp[i] = std::cos(a);
  }
  for (std::size_t k = 0; k < l; ++k) {
    if (k > 0) {
      for (std::size_t i = 0; i < d; ++i) {
        const double sn = 2.0 * sp[i] * cp[i];
        const double cn = (cp[i] - sp[i]) * (cp[i] + sp[i]);
        sp[i] = sn;
        cp[i] = cn;
      }
    }
    for (std::size_t i = 0; i < d; ++i) out[o++] = static_cast<Out>(sp[i]);
    for (std::size_t i = 0; i < d; ++i) out[o++] = static_cast<Out>(cp[i]);
  }
}

}  // namespace

std::vector<double> encode(std::span<const double> v, std::size_t l, bool include_identity) {
  std::vector<double> out(v.size() * 2 * l + (include_identity ? v.size() : 0));
  encode_impl(v, l, include_identity, out.data());
  return out;
}

void encode_into(std::span<const double> v, std::size_t l, bool include_identity,
                 std::span<float> out) {
  if (out.size() != v.size() * 2 * l + (include_identity ? v.size() : 0)) {
    throw ContractError("encode_into: output width mismatch");
  }
  encode_impl(v, l, include_identity, out.data());
}

FieldSample FieldSample::from_angles(const Vec3& position, double theta, double phi) {
  return {position,
          Vec3(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta))};
}

NetworkSpec FieldArchitecture::trunk_spec(std::uint64_t seed) const {
  NetworkSpec spec;
  spec.layer_widths.push_back(encoding.position_width());
  for (std::size_t i = 0; i < trunk_layers; ++i) spec.layer_widths.push_back(trunk_width);
  spec.layer_widths.push_back(trunk_width + 1);
  spec.skip_input_at = skip_at;
  spec.seed = counter_hash(seed, stream::kInit, 0);
  return spec;
}

NetworkSpec FieldArchitecture::head_spec(std::uint64_t seed) const {
  NetworkSpec spec;
  spec.layer_widths = {trunk_width + encoding.direction_width(), head_width, 3};
  spec.seed = counter_hash(seed, stream::kInit, 1);
  return spec;
}

RadianceField RadianceField::create(const FieldArchitecture& arch, std::uint64_t seed) {
  arch.encoding.validate();
  return from_networks(arch.encoding, Mlp::create(arch.trunk_spec(seed)),
                       Mlp::create(arch.head_spec(seed)), seed);
}

RadianceField RadianceField::from_networks(const EncodingConfig& encoding, Mlp trunk, Mlp head,
                                           std::uint64_t seed) {
  encoding.validate();
  const auto& ts = trunk.spec();
  const auto& hs = head.spec();
  if (ts.input_width() != encoding.position_width()) {
    throw ContractError("trunk input width " + std::to_string(ts.input_width()) +
                        " does not match position encoding width " +
                        std::to_string(encoding.position_width()));
  }
  if (ts.output_width() < 2) throw ContractError("trunk must output density plus features");
  if (hs.input_width() != ts.output_width() - 1 + encoding.direction_width()) {
    throw ContractError("head input width does not match feature + direction encoding");
  }
  if (hs.output_width() != 3) throw ContractError("head must output three colour channels");
  RadianceField field;
  field.encoding_ = encoding;
  field.trunk_ = std::move(trunk);
  field.head_ = std::move(head);
  field.seed_ = seed;
  return field;
}

void RadianceField::encode_positions(std::span<const double> positions, FieldPass& pass) const {
  if (positions.size() % 3 != 0) throw ContractError("positions must be N x 3");
  const std::size_t n = positions.size() / 3;
  const std::size_t pw = encoding_.position_width();
  pass.count = n;
  pass.trunk_in.resize(n * pw);
  for (std::size_t i = 0; i < n; ++i) {
    encode_into(positions.subspan(i * 3, 3), encoding_.l_pos, encoding_.include_identity,
                std::span<float>(pass.trunk_in).subspan(i * pw, pw));
  }
}

void RadianceField::density(std::span<const double> positions, FieldPass& pass) const {
  encode_positions(positions, pass);
  const std::size_t n = pass.count;
  trunk_.forward(pass.trunk_in, n, pass.trunk_tape);
  const std::size_t tw = trunk_.spec().output_width();
  pass.sigma.resize(n);
  for (std::size_t i = 0; i < n; ++i) pass.sigma[i] = softplus(pass.trunk_tape.outputs[i * tw]);
}

void RadianceField::forward(std::span<const double> positions, std::span<const double> directions,
                            FieldPass& pass) const {
  if (directions.size() != positions.size()) {
    throw ContractError("directions must match positions (N x 3)");
  }
  density(positions, pass);
  const std::size_t n = pass.count;
  const std::size_t tw = trunk_.spec().output_width();
  const std::size_t feat = tw - 1;
  const std::size_t dw = encoding_.direction_width();
  const std::size_t hw = feat + dw;
  pass.head_in.resize(n * hw);
  for (std::size_t i = 0; i < n; ++i) {
    float* row = pass.head_in.data() + i * hw;
    const float* t = pass.trunk_tape.outputs.data() + i * tw + 1;
    std::copy_n(t, feat, row);
    encode_into(directions.subspan(i * 3, 3), encoding_.l_dir, encoding_.include_identity,
                std::span<float>(row + feat, dw));
  }
  head_.forward(pass.head_in, n, pass.head_tape);
  pass.rgb.resize(n * 3);
  for (std::size_t i = 0; i < n * 3; ++i) pass.rgb[i] = logistic(pass.head_tape.outputs[i]);
}

void RadianceField::backward(FieldPass& pass, std::span<const double> d_sigma,
                             std::span<const double> d_rgb, FieldGradients& grads) const {
  const std::size_t n = pass.count;
  if (d_sigma.size() != n || d_rgb.size() != n * 3) {
    throw ContractError("field backward: gradient shapes do not match the recorded batch");
  }
  const std::size_t tw = trunk_.spec().output_width();
  const std::size_t feat = tw - 1;
  const std::size_t hw = head_.spec().input_width();

  pass.d_head_out.resize(n * 3);
  for (std::size_t i = 0; i < n * 3; ++i) {
    const double s = pass.rgb[i];
    pass.d_head_out[i] = static_cast<float>(d_rgb[i] * s * (1.0 - s));
  }
  pass.d_head_in.resize(n * hw);
  head_.backward(pass.head_tape, pass.d_head_out, grads.head, pass.d_head_in);

  pass.d_trunk_out.resize(n * tw);
  for (std::size_t i = 0; i < n; ++i) {
    float* row = pass.d_trunk_out.data() + i * tw;
    row[0] = static_cast<float>(d_sigma[i] * logistic(pass.trunk_tape.outputs[i * tw]));
    std::copy_n(pass.d_head_in.data() + i * hw, feat, row + 1);
  }
  trunk_.backward(pass.trunk_tape, pass.d_trunk_out, grads.trunk);
}

FieldOutput RadianceField::query(const FieldSample& sample) const {
  FieldPass pass;
  const double pos[3] = {sample.position.x(), sample.position.y(), sample.position.z()};
  const double dir[3] = {sample.direction.x(), sample.direction.y(), sample.direction.z()};
  forward(pos, dir, pass);
  return {pass.sigma[0], Vec3(pass.rgb[0], pass.rgb[1], pass.rgb[2])};
}

std::unique_ptr<FieldScratch> RadianceField::make_scratch() const {
  return std::make_unique<FieldPass>();
}

void RadianceField::evaluate(std::span<const double> positions,
                             std::span<const double> directions, std::span<double> sigma,
                             std::span<double> rgb, FieldScratch* scratch) const {
  FieldPass local;
  FieldPass* pass = scratch ? dynamic_cast<FieldPass*>(scratch) : &local;
  if (!pass) throw ContractError("evaluate: scratch was not created by this field type");
  forward(positions, directions, *pass);
  if (sigma.size() != pass->count || rgb.size() != pass->count * 3) {
    throw ContractError("evaluate: output spans have the wrong size");
  }
  std::copy(pass->sigma.begin(), pass->sigma.end(), sigma.begin());
  std::copy(pass->rgb.begin(), pass->rgb.end(), rgb.begin());
}

}  // namespace nerfprune
