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
#include <filesystem>
#include <string>
#include <vector>

#include "nerfprune/field.hpp"
#include "nerfprune/image.hpp"
#include "nerfprune/renderer.hpp"

namespace nerfprune {

enum class ShapeKind : std::uint8_t { kSphere, kBox };

/// Constant-density solid. For spheres size.x() is the radius; for boxes
/// `size` holds the half extents.
struct Primitive {
  ShapeKind shape = ShapeKind::kSphere;
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Ones();
  Vec3 albedo = Vec3::Constant(0.5);
  double density = 1.0;

  bool contains(const Vec3& p) const;
};

/// Analytic scene used both as training data source and as ground truth.
/// Colour is the density-weighted albedo of the covering primitives, tinted
/// by the angle between the view ray and a fixed light direction.
class AnalyticScene : public FieldSource {
 public:
  std::vector<Primitive> primitives;
  double bounds_radius = 1.5;
  Vec3 light = Vec3(0.3, 0.5, 0.8).normalized();

  void validate() const;
  double density_at(const Vec3& p) const;
  Vec3 color_at(const Vec3& p, const Vec3& direction) const;

  void evaluate(std::span<const double> positions, std::span<const double> directions,
                std::span<double> sigma, std::span<double> rgb,
                FieldScratch* scratch) const override;

  /// Three spheres (one semi-transparent) and a box inside radius 1.5.
  static AnalyticScene benchmark();
  /// One opaque sphere at the origin.
  static AnalyticScene single_sphere(double radius, double density = 200.0);
};

enum class Split : std::uint8_t { kTrain, kTest };

struct View {
  std::string image;  // relative to the dataset root
  Split split = Split::kTrain;
  Camera camera;
};

/// Contents of `manifest.txt` plus the directory it was loaded from.
struct DatasetManifest {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  std::string dataset_id = "benchmark";
  std::uint64_t seed = 0;
  double range_padding = 1.1;
  std::size_t oracle_samples = 512;
  bool white_background = true;
  AnalyticScene scene;
  std::vector<View> views;
  std::filesystem::path root;

  DepthRange range_for(const View& view) const {
    return depth_range_for(view.camera, scene.bounds_radius, range_padding);
  }
  std::vector<const View*> split(Split s) const;
  /// Float ground truth for a view (lossless sidecar, falling back to the 8-bit file).
  Image load_target(const View& view) const;
};

struct DatasetOptions {
  std::string dataset_id = "benchmark";
  std::size_t n_train = 20;
  std::size_t n_test = 5;
  std::size_t resolution = 96;
  std::uint64_t seed = 0;
  double camera_radius = 4.0;
  double fov_degrees = 50.0;
  std::size_t base_samples = 64;
  std::size_t oracle_factor = 8;
  double range_padding = 1.1;
  unsigned threads = 1;
};

/// Seeded cameras on a sphere around the scene, every view rendered by the
/// analytic field at base_samples * oracle_factor samples per ray.
DatasetManifest generate_dataset(const AnalyticScene& scene, const DatasetOptions& options,
                                 const std::filesystem::path& out_dir);

/// Cameras for a dataset without rendering (shared with generate_dataset).
std::vector<Camera> dataset_cameras(const DatasetOptions& options);

/// Renders the ground truth for one camera the way generate_dataset does.
RenderedImage render_ground_truth(const AnalyticScene& scene, const Camera& camera,
                                  DepthRange range, std::size_t samples, bool white_background,
                                  unsigned threads);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Parses and validates a manifest (referenced images exist with declared
/// sizes, splits disjoint, poses orthonormal).
DatasetManifest load_manifest(const std::filesystem::path& path);

std::string to_string(Split split);

}  // namespace nerfprune
