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

#include "nerfprune/renderer.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <string>

#include "nerfprune/error.hpp"
#include "nerfprune/parallel.hpp"
#include "nerfprune/random.hpp"

namespace nerfprune {

void Camera::validate() const {
  const auto& in = intrinsics;
  if (!(in.focal > 0.0) || !std::isfinite(in.focal)) throw ContractError("camera focal must be > 0");
  if (in.width == 0 || in.height == 0) throw ContractError("camera image size must be non-zero");
  const Eigen::Matrix3d r = rotation();
  const double err = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (!(err <= 1e-6)) throw ContractError("camera rotation is not orthonormal");
  if (!pose.allFinite()) throw ContractError("camera pose is not finite");
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up,
                       const Intrinsics& intrinsics) {
  const Vec3 forward = (target - eye).normalized();
  const Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) throw ContractError("look_at: up is parallel to the view direction");
  const Vec3 r = right.normalized();
  const Vec3 u = r.cross(forward);
  Camera cam;
  cam.intrinsics = intrinsics;
  cam.pose.col(0) = r;
  cam.pose.col(1) = u;
  cam.pose.col(2) = -forward;
  cam.pose.col(3) = eye;
  return cam;
}

DepthRange depth_range_for(const Camera& camera, double radius, double padding) {
  const double dist = camera.position().norm();
  const double r = radius * padding;
  return {std::max(1e-3, dist - r), dist + r};
}

void SamplingConfig::validate() const {
  if (n_samples < 2) throw ConfigError("n_samples must be >= 2");
}

Ray pixel_ray(const Camera& camera, DepthRange range, std::size_t index) {
  const auto& in = camera.intrinsics;
  if (index >= in.width * in.height) {
    throw ContractError("pixel index " + std::to_string(index) + " outside " +
                        std::to_string(in.width) + "x" + std::to_string(in.height) + " image");
  }
  const double x = static_cast<double>(index % in.width) + 0.5;
  const double y = static_cast<double>(index / in.width) + 0.5;
  const Vec3 local((x - in.cx) / in.focal, -(y - in.cy) / in.focal, -1.0);
  Ray ray;
  ray.origin = camera.position();
  ray.direction = (camera.rotation() * local).normalized();
  ray.near = range.near;
  ray.far = range.far;
  return ray;
}

std::vector<Ray> generate_rays(const Camera& camera, DepthRange range,
                               std::span<const std::size_t> pixels) {
  camera.validate();
  if (!(range.near > 0.0 && range.near < range.far)) {
    throw ContractError("ray bounds must satisfy 0 < near < far");
  }
  std::vector<Ray> rays;
  if (pixels.empty()) {
    rays.reserve(camera.pixel_count());
    for (std::size_t i = 0; i < camera.pixel_count(); ++i) rays.push_back(pixel_ray(camera, range, i));
  } else {
    rays.reserve(pixels.size());
    for (std::size_t p : pixels) rays.push_back(pixel_ray(camera, range, p));
  }
  return rays;
}

void sample_along(const Ray& ray, const SamplingConfig& cfg, std::uint64_t ray_key,
                  std::span<double> t, std::span<double> delta) {
  const std::size_t n = cfg.n_samples;
  if (t.size() != n || delta.size() != n) throw ContractError("sample_along: span size mismatch");
  const double span = ray.far - ray.near;
  const double bin = span / static_cast<double>(n);
  const std::uint64_t key = counter_hash(cfg.seed, stream::kRaySamples, ray_key);
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = ray.near + span * static_cast<double>(i) / static_cast<double>(n);
    const double u = cfg.stratified ? counter_uniform(key, 0, i) : 0.5;
    t[i] = lo + u * bin;
  }
  for (std::size_t i = 0; i + 1 < n; ++i) delta[i] = t[i + 1] - t[i];
  delta[n - 1] = ray.far - t[n - 1];
}

RaySamples sample_along(const Ray& ray, const SamplingConfig& cfg, std::uint64_t ray_key) {
  cfg.validate();
  RaySamples s{std::vector<double>(cfg.n_samples), std::vector<double>(cfg.n_samples)};
  sample_along(ray, cfg, ray_key, s.t, s.delta);
  return s;
}

namespace {

void check_composite_shapes(std::span<const double> sigma, std::span<const double> rgb,
                            std::span<const double> delta) {
  if (rgb.size() != sigma.size() * 3 || delta.size() != sigma.size()) {
    throw ContractError("composite: sigma/rgb/delta shapes disagree");
  }
}

}  // namespace

RenderResult composite(std::span<const double> sigma, std::span<const double> rgb,
                       std::span<const double> t, std::span<const double> delta,
                       bool white_background) {
  check_composite_shapes(sigma, rgb, delta);
  if (t.size() != sigma.size()) throw ContractError("composite: t shape disagrees");
  const std::size_t n = sigma.size();
  RenderResult out;
  out.weights.resize(n);
  double transmittance = 1.0;
  double weight_sum = 0.0;
  double depth_sum = 0.0;
  Vec3 color = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    if (!(sigma[i] >= 0.0)) {
      throw ContractError("composite: density at sample " + std::to_string(i) +
                          " is negative or NaN");
    }
    const double alpha = -std::expm1(-sigma[i] * delta[i]);
    const double w = transmittance * alpha;
    out.weights[i] = w;
    weight_sum += w;
    depth_sum += w * t[i];
    color += w * Vec3(rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]);
    transmittance *= 1.0 - alpha;
  }
  out.opacity = std::clamp(weight_sum, 0.0, 1.0);
  if (white_background) color += Vec3::Constant(1.0 - out.opacity);
  out.rgb = color;
  out.depth_valid = out.opacity >= kMinOpacity;
  out.depth = out.depth_valid ? depth_sum / std::max(weight_sum, kMinOpacity) : 0.0;
  return out;
}

// With T_{k+1} = T_k (1 - alpha_k) and S_k = sum_{i>k} w_i c_i:
//   dC/dsigma_k = delta_k (T_{k+1} c_k - S_k) - bg delta_k T_{n+1}
//   dC/dc_k     = w_k
void composite_backward(std::span<const double> sigma, std::span<const double> rgb,
                        std::span<const double> delta, bool white_background,
                        const double d_color[3], std::span<double> d_sigma,
                        std::span<double> d_rgb) {
  check_composite_shapes(sigma, rgb, delta);
  const std::size_t n = sigma.size();
  if (d_sigma.size() != n || d_rgb.size() != 3 * n) {
    throw ContractError("composite_backward: output shapes disagree");
  }
  thread_local std::vector<double> weights, trans_after;
  weights.resize(n);
  trans_after.resize(n);
  double transmittance = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double alpha = -std::expm1(-sigma[i] * delta[i]);
    weights[i] = transmittance * alpha;
    transmittance *= 1.0 - alpha;
    trans_after[i] = transmittance;
  }
  const double bg = white_background ? transmittance : 0.0;
  double suffix[3] = {0.0, 0.0, 0.0};
  for (std::size_t k = n; k-- > 0;) {
    double ds = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double ck = rgb[3 * k + c];
      ds += d_color[c] * delta[k] * (trans_after[k] * ck - suffix[c] - bg);
      d_rgb[3 * k + c] = d_color[c] * weights[k];
      suffix[c] += weights[k] * ck;
    }
    d_sigma[k] = ds;
  }
}

std::vector<RenderResult> render_rays(const FieldSource& field, std::span<const Ray> rays,
                                      std::span<const std::uint64_t> keys,
                                      const SamplingConfig& cfg, FieldScratch* scratch) {
  cfg.validate();
  if (keys.size() != rays.size()) throw ContractError("render_rays: one key per ray required");
  const std::size_t n = cfg.n_samples;
  const std::size_t total = rays.size() * n;
  std::vector<double> t(total), delta(total), pos(total * 3), dir(total * 3);
  for (std::size_t r = 0; r < rays.size(); ++r) {
    const Ray& ray = rays[r];
    std::span<double> tr(t.data() + r * n, n);
    sample_along(ray, cfg, keys[r], tr, std::span<double>(delta.data() + r * n, n));
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 p = ray.origin + tr[i] * ray.direction;
      const std::size_t s = (r * n + i) * 3;
      for (int c = 0; c < 3; ++c) {
        pos[s + c] = p[c];
        dir[s + c] = ray.direction[c];
      }
    }
  }
  std::vector<double> sigma(total), rgb(total * 3);
  field.evaluate(pos, dir, sigma, rgb, scratch);
  for (std::size_t i = 0; i < total; ++i) {
    if (!std::isfinite(sigma[i])) {
      throw NumericError("field returned a non-finite density at sample " + std::to_string(i));
    }
  }
  std::vector<RenderResult> out;
  out.reserve(rays.size());
  for (std::size_t r = 0; r < rays.size(); ++r) {
    out.push_back(composite(std::span<const double>(sigma).subspan(r * n, n),
                            std::span<const double>(rgb).subspan(r * n * 3, n * 3),
                            std::span<const double>(t).subspan(r * n, n),
                            std::span<const double>(delta).subspan(r * n, n),
                            cfg.white_background));
  }
  return out;
}

RenderedImage render_image(const FieldSource& field, const Camera& camera, DepthRange range,
                           const SamplingConfig& cfg, unsigned threads) {
  camera.validate();
  cfg.validate();
  constexpr std::size_t kTile = 256;
  const std::size_t w = camera.intrinsics.width;
  const std::size_t h = camera.intrinsics.height;
  const std::size_t count = w * h;
  RenderedImage out{Image(w, h, 3), Image(w, h, 1), Image(w, h, 1), range};
  const std::size_t tiles = (count + kTile - 1) / kTile;
  parallel_for(tiles, threads, [&](std::size_t tile) {
    const std::size_t begin = tile * kTile;
    const std::size_t end = std::min(count, begin + kTile);
    std::vector<std::size_t> pixels(end - begin);
    std::vector<std::uint64_t> keys(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      pixels[i - begin] = i;
      keys[i - begin] = i;
    }
    const auto rays = generate_rays(camera, range, pixels);
    auto scratch = field.make_scratch();
    const auto results = render_rays(field, rays, keys, cfg, scratch.get());
    for (std::size_t i = begin; i < end; ++i) {
      const RenderResult& r = results[i - begin];
      for (int c = 0; c < 3; ++c) out.rgb.pixels[i * 3 + c] = static_cast<float>(r.rgb[c]);
      out.depth.pixels[i] = static_cast<float>(r.depth);
      out.opacity.pixels[i] = static_cast<float>(r.opacity);
    }
  });
  return out;
}

}  // namespace nerfprune
