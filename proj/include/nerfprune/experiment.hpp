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

#include "nerfprune/codec.hpp"
#include "nerfprune/geometry.hpp"
#include "nerfprune/metrics.hpp"
#include "nerfprune/scene.hpp"
#include "nerfprune/trainer.hpp"

namespace nerfprune {

inline constexpr const char* kToolVersion = "0.1.0";

/// Provenance record written before any long computation. Everything except
/// the timestamp is sufficient to replay the run.
struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  std::string config_json = "{}";  // serialized parameter snapshot
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;

  void write(const std::filesystem::path& path) const;
};

/// Training defaults for the desk-scale protocol: 256 rays per batch keeps
/// 3000 iterations at 96x96 within minutes on a single core.
inline TrainConfig desk_train_config() {
  TrainConfig t;
  t.rays_per_batch = 256;
  return t;
}

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::filesystem::path out = "run";
  DatasetOptions dataset;
  TrainConfig train = desk_train_config();
  std::vector<double> ratios = {0.3, 0.5, 0.7, 0.9};
  std::size_t mesh_resolution = 128;
  double iso = 25.0;
  std::size_t depth_view = 0;  // index into the test split
  unsigned threads = 1;

  void validate() const;
  std::string to_json() const;
};

struct ExperimentResult {
  std::vector<MetricsRecord> records;
  TrendCheck trend;
};

/// gen-scene -> train -> eval -> per ratio: prune -> eval -> retrain -> eval,
/// then models, meshes, depth maps, renders, results.csv and charts.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Scene bounds used for meshing the benchmark-style scenes.
struct MeshOptions {
  std::size_t resolution = 128;
  double iso = 25.0;
  double half_extent = 1.5;
  unsigned threads = 1;
};

TriangleMesh mesh_field(const RadianceField& field, const MeshOptions& opts);

/// Renders test view `view` and writes <stem>.f32 and <stem>.pgm.
void write_depth(const RadianceField& field, const DatasetManifest& data, std::size_t view,
                 const SamplingConfig& cfg, unsigned threads, const std::filesystem::path& stem);

/// Renders every test view of `data` into out_dir/view_####.ppm.
void write_renders(const RadianceField& field, const DatasetManifest& data,
                   const SamplingConfig& cfg, unsigned threads,
                   const std::filesystem::path& out_dir);

/// Deterministic evaluation sampling for a trained model.
SamplingConfig eval_sampling(const DatasetManifest& data, std::size_t samples);

}  // namespace nerfprune
