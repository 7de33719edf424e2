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
#include <optional>
#include <span>
#include <vector>

#include "nerfprune/field.hpp"
#include "nerfprune/image.hpp"

namespace nerfprune {

struct Intrinsics {
  double focal = 1.0;  // pixels
  double cx = 0.0;     // principal point, pixels
  double cy = 0.0;
  std::size_t width = 1;
  std::size_t height = 1;

  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

/// Pinhole camera. The pose maps camera to world coordinates; the camera
/// looks down its -z axis with +y up and +x right (OpenGL convention).
struct Camera {
  Intrinsics intrinsics;
  Eigen::Matrix<double, 3, 4> pose = Eigen::Matrix<double, 3, 4>::Identity();

  void validate() const;
  Eigen::Matrix3d rotation() const { return pose.leftCols<3>(); }
  Vec3 position() const { return pose.col(3); }
  std::size_t pixel_count() const { return intrinsics.width * intrinsics.height; }

  /// Camera at `eye` looking at `target`; `up` must not be parallel to the
  /// viewing direction.
  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up,
                        const Intrinsics& intrinsics);
};

struct DepthRange {
  double near = 0.0;
  double far = 1.0;
};

/// Near/far interval covering a bounding sphere of `radius` around the
/// origin, padded by `padding` (1.1 = 10%).
DepthRange depth_range_for(const Camera& camera, double radius, double padding = 1.1);

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = -Vec3::UnitZ();
  double near = 0.0;
  double far = 1.0;
};

struct SamplingConfig {
  std::size_t n_samples = 64;
  bool stratified = true;
  std::uint64_t seed = 0;
  bool white_background = true;

  void validate() const;
};

struct RenderResult {
  Vec3 rgb = Vec3::Zero();
  double depth = 0.0;
  double opacity = 0.0;
  bool depth_valid = false;  // false when opacity < kMinOpacity; depth is then 0
  std::vector<double> weights;
};

inline constexpr double kMinOpacity = 1e-6;

/// Ray through the centre of pixel `index` (row-major, top row first).
Ray pixel_ray(const Camera& camera, DepthRange range, std::size_t index);

/// One ray per requested pixel, or per image pixel when `pixels` is empty.
std::vector<Ray> generate_rays(const Camera& camera, DepthRange range,
                               std::span<const std::size_t> pixels = {});

struct RaySamples {
  std::vector<double> t;
  std::vector<double> delta;
};

/// Partitions [near, far] into n equal bins and takes the midpoint of each
/// bin, or one uniform draw per bin when stratified. Draws are keyed by
/// (cfg.seed, ray_key, bin), never by call order.
void sample_along(const Ray& ray, const SamplingConfig& cfg, std::uint64_t ray_key,
                  std::span<double> t, std::span<double> delta);
RaySamples sample_along(const Ray& ray, const SamplingConfig& cfg, std::uint64_t ray_key);

/// Emission-absorption quadrature:
///   alpha_i = 1 - exp(-sigma_i delta_i),  T_i = prod_{j<i} (1 - alpha_j),
///   w_i = T_i alpha_i,  rgb = sum w_i c_i (+ (1 - sum w_i) on white).
/// Throws ContractError on negative density.
RenderResult composite(std::span<const double> sigma, std::span<const double> rgb,
                       std::span<const double> t, std::span<const double> delta,
                       bool white_background);

/// Gradient of the composited colour with respect to every sigma_i and c_i,
/// given dL/d(rgb). Outputs: d_sigma (n), d_rgb (n x 3).
void composite_backward(std::span<const double> sigma, std::span<const double> rgb,
                        std::span<const double> delta, bool white_background,
                        const double d_color[3], std::span<double> d_sigma,
                        std::span<double> d_rgb);

struct RenderedImage {
  Image rgb;
  Image depth;        // 1 channel, 0 where invalid
  Image opacity;      // 1 channel
  DepthRange range;
};

/// Renders every pixel of `camera`. Work is split into fixed pixel tiles and
/// each ray's stratified draws are keyed by its pixel index, so the result
/// does not depend on `threads`.
RenderedImage render_image(const FieldSource& field, const Camera& camera, DepthRange range,
                           const SamplingConfig& cfg, unsigned threads = 1);

/// Renders a list of rays (keys used for stratified draws).
std::vector<RenderResult> render_rays(const FieldSource& field, std::span<const Ray> rays,
                                      std::span<const std::uint64_t> keys,
                                      const SamplingConfig& cfg, FieldScratch* scratch);

}  // namespace nerfprune
