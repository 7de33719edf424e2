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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "nerfprune/field.hpp"
#include "nerfprune/image.hpp"
#include "nerfprune/renderer.hpp"

namespace nerfprune {

/// Density samples at voxel centers of an axis-aligned box, x fastest.
struct DensityGrid {
  std::array<std::size_t, 3> resolution{2, 2, 2};
  Vec3 lo = Vec3::Constant(-1.0);
  Vec3 hi = Vec3::Constant(1.0);
  std::vector<double> values;

  Vec3 voxel_size() const;
  Vec3 center(std::size_t i, std::size_t j, std::size_t k) const;
  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return (k * resolution[1] + j) * resolution[0] + i;
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const { return values[index(i, j, k)]; }
};

inline constexpr double kDefaultIso = 25.0;

/// Queries sigma at every voxel center with one fixed direction. A
/// RadianceField only runs its density trunk.
DensityGrid sample_density_grid(const FieldSource& field, const Vec3& lo, const Vec3& hi,
                                std::array<std::size_t, 3> resolution, unsigned threads = 1,
                                const Vec3& direction = Vec3::UnitZ());

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
};

/// Marching cubes over the sigma = iso level set. A sample counts as inside
/// when its value exceeds iso; triangles face away from the dense side.
TriangleMesh extract_mesh(const DensityGrid& grid, double iso);

/// Wavefront-style text: "v x y z" lines then "f a b c" lines, 1-based.
void export_mesh(const TriangleMesh& mesh, const std::filesystem::path& path);

/// Raw depth (u32 width, u32 height, f32 row-major, little-endian) plus an
/// 8-bit PGM mapping [near, far] to [0, 255]; invalid pixels show as far.
void export_depth(const Image& depth, const Image& opacity, DepthRange range,
                  const std::filesystem::path& raw_path, const std::filesystem::path& viz_path);

/// Reads the raw depth format written by export_depth.
Image read_depth_raw(const std::filesystem::path& path);

namespace mc {

/// Per-configuration polygons as cube-edge loops; built once from the face
/// rules rather than transcribed.
struct CaseTable {
  // polygons[config] = list of loops, each a list of edge ids 0..11
  std::array<std::vector<std::vector<std::uint8_t>>, 256> polygons;
};

const CaseTable& case_table();

/// Corner c sits at offset (c & 1, (c >> 1) & 1, (c >> 2) & 1).
inline constexpr std::array<std::array<std::uint8_t, 2>, 12> kEdgeCorners = {{
    {0, 1}, {2, 3}, {4, 5}, {6, 7},  // along x
    {0, 2}, {1, 3}, {4, 6}, {5, 7},  // along y
    {0, 4}, {1, 5}, {2, 6}, {3, 7},  // along z
}};

}  // namespace mc

}  // namespace nerfprune
