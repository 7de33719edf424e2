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
#include <span>
#include <string>
#include <vector>

#include "nerfprune/field.hpp"
#include "nerfprune/mlp.hpp"

namespace nerfprune {

enum class PruneScope : std::uint8_t { kGlobal };
enum class TiePolicy : std::uint8_t { kStableIndex };

struct PruneConfig {
  double ratio = 0.0;  // fraction of weights removed, in [0, 1)
  PruneScope scope = PruneScope::kGlobal;
  TiePolicy tie_policy = TiePolicy::kStableIndex;

  void validate() const;
};

/// floor(ratio * total). Decimal ratios such as 0.3 are not exact in binary,
/// so a product within 1e-9 below an integer counts as that integer.
std::size_t prune_count(double ratio, std::size_t total);

struct LayerPruneCount {
  std::size_t network = 0;
  std::size_t layer = 0;
  std::size_t total = 0;
  std::size_t kept = 0;
  std::size_t pruned = 0;
};

struct PruneReport {
  double ratio = 0.0;
  std::size_t total_weights = 0;
  std::size_t pruned_count = 0;
  float threshold = 0.0f;  // largest pruned magnitude (0 when nothing is pruned)
  std::vector<LayerPruneCount> layers;
  double nominal_compression = 1.0;  // total / (total - pruned)

  std::string to_text() const;
  void write_text(const std::filesystem::path& path) const;
};

struct ThresholdResult {
  float threshold = 0.0f;
  std::size_t k = 0;
};

/// Weights are addressed in one flat order: networks in sequence, layers in
/// sequence, each matrix row-major. Ties on magnitude go to the lower index.
ThresholdResult global_threshold(std::span<const Mlp* const> nets, double ratio);

/// Flat indices of the weights removed at `ratio`, ascending. Already-pruned
/// positions are always selected first.
std::vector<std::size_t> select_pruned(std::span<const Mlp* const> nets, double ratio);

/// Clears mask bits and zeroes values for the selected weights. Biases are
/// never touched. Throws ContractError if more than floor(p*N) weights are
/// already pruned.
PruneReport apply_prune(std::span<Mlp* const> nets, const PruneConfig& cfg);
PruneReport apply_prune(RadianceField& field, const PruneConfig& cfg);

struct SparsityReport {
  double sparsity = 0.0;       // fraction of weights with a cleared mask bit
  std::size_t violations = 0;  // masked positions whose value is not +0.0
};

SparsityReport verify_sparsity(std::span<const Mlp* const> nets);
SparsityReport verify_sparsity(const RadianceField& field);

}  // namespace nerfprune
