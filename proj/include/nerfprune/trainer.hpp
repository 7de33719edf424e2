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
#include <limits>
#include <span>
#include <vector>

#include "nerfprune/field.hpp"
#include "nerfprune/mlp.hpp"
#include "nerfprune/scene.hpp"

namespace nerfprune {

struct TrainConfig {
  std::size_t iterations = 3000;
  std::size_t rays_per_batch = 1024;
  std::size_t samples_per_ray = 64;
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::size_t eval_every = 1000;  // 0 disables intermediate checkpoints
  std::size_t retrain_iterations = 500;
  unsigned threads = 1;

  /// Throws ConfigError; `allow_zero_iterations` is set for retraining.
  void validate(bool allow_zero_iterations = false) const;
};

struct TrainLogEntry {
  std::size_t iteration = 0;
  double loss = 0.0;
  double test_psnr = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<TrainLogEntry> entries;

  /// CSV columns: iteration,loss,test_psnr,seconds
  void write_csv(const std::filesystem::path& path) const;
};

/// Mean of squared differences over all entries.
double photometric_loss(std::span<const double> pred, std::span<const double> target);

/// Train-split pixels flattened across views, with float targets.
class TrainingPixels {
 public:
  explicit TrainingPixels(const DatasetManifest& data);

  std::size_t size() const { return offsets_.back(); }
  Ray ray(std::size_t index) const;
  const float* target(std::size_t index) const;
  bool white_background() const { return white_background_; }

 private:
  struct Entry {
    Camera camera;
    DepthRange range;
    Image target;
  };
  std::pair<std::size_t, std::size_t> locate(std::size_t index) const;

  std::vector<Entry> views_;
  std::vector<std::size_t> offsets_;
  bool white_background_ = true;
};

enum class TrainPhase { kTrain, kRetrain };

/// One optimisation run over a field. Each iteration draws its ray batch
/// and stratified samples from counter-based streams keyed by the
/// iteration number, renders the batch in fixed-size chunks and reduces
/// chunk gradients in chunk order, so results do not depend on threads.
class Trainer {
 public:
  Trainer(RadianceField& field, const TrainingPixels& pixels, const TrainConfig& cfg,
          TrainPhase phase);

  /// Loss on the given iteration's batch without touching parameters.
  double batch_loss(std::size_t iteration);

  /// Runs iteration `iteration_ + 1`: loss, gradients, one Adam step.
  /// Returns the loss before the update.
  double step();

  std::size_t iteration() const { return iteration_; }

 private:
  struct Worker {
    FieldPass pass;
    std::vector<double> t, delta, pos, dir, d_sigma, d_rgb;
  };
  double run_batch(std::size_t iteration, bool with_grads);

  RadianceField& field_;
  const TrainingPixels& pixels_;
  TrainConfig cfg_;
  TrainPhase phase_;
  AdamState trunk_opt_;
  AdamState head_opt_;
  std::size_t iteration_ = 0;
  std::vector<Worker> workers_;
  std::vector<FieldGradients> chunk_grads_;
  std::vector<double> chunk_loss_;
};

/// Initial training: cfg.iterations steps from the field's current state.
TrainLog train(RadianceField& field, const DatasetManifest& data, const TrainConfig& cfg);

/// Post-pruning fine-tuning: cfg.retrain_iterations steps with fresh
/// optimizer moments. Requires at least one pruned weight; masks are not
/// modified.
TrainLog retrain(RadianceField& field, const DatasetManifest& data, const TrainConfig& cfg);

}  // namespace nerfprune
