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

#include "nerfprune/pruner.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "nerfprune/error.hpp"

namespace nerfprune {

void PruneConfig::validate() const {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw ConfigError("pruning ratio must be in [0, 1), got " + std::to_string(ratio));
  }
}

std::size_t prune_count(double ratio, std::size_t total) {
  PruneConfig{ratio}.validate();
  const double x = ratio * static_cast<double>(total);
  const auto k = static_cast<std::size_t>(std::floor(x + 1e-9));
  return std::min(k, total);
}

namespace {

struct Key {
  bool kept;  // false sorts first
  float magnitude;
  std::size_t index;

  bool operator<(const Key& o) const {
    if (kept != o.kept) return !kept;
    if (magnitude != o.magnitude) return magnitude < o.magnitude;
    return index < o.index;
  }
};

std::vector<Key> collect_keys(std::span<const Mlp* const> nets) {
  std::vector<Key> keys;
  std::size_t index = 0;
  for (const Mlp* net : nets) {
    for (const auto& layer : net->layers()) {
      const auto& w = layer.weight;
      for (std::size_t i = 0; i < w.size(); ++i, ++index) {
        keys.push_back({w.mask[i] != 0, std::abs(w.values[i]), index});
      }
    }
  }
  return keys;
}

std::vector<Key> smallest(std::span<const Mlp* const> nets, double ratio) {
  auto keys = collect_keys(nets);
  const std::size_t k = prune_count(ratio, keys.size());
  if (k < keys.size()) {
    std::nth_element(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(k), keys.end());
  }
  keys.resize(k);
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace

ThresholdResult global_threshold(std::span<const Mlp* const> nets, double ratio) {
  const auto keys = smallest(nets, ratio);
  ThresholdResult r;
  r.k = keys.size();
  if (!keys.empty()) r.threshold = keys.back().magnitude;
  return r;
}

std::vector<std::size_t> select_pruned(std::span<const Mlp* const> nets, double ratio) {
  std::vector<std::size_t> out;
  for (const auto& key : smallest(nets, ratio)) out.push_back(key.index);
  std::sort(out.begin(), out.end());
  return out;
}

PruneReport apply_prune(std::span<Mlp* const> nets, const PruneConfig& cfg) {
  cfg.validate();
  std::vector<const Mlp*> view(nets.begin(), nets.end());
  const auto keys = smallest(view, cfg.ratio);

  std::size_t already = 0;
  std::size_t total = 0;
  for (const Mlp* net : view) {
    for (const auto& layer : net->layers()) {
      total += layer.weight.size();
      already += layer.weight.size() - layer.weight.kept();
    }
  }
  if (already > keys.size()) {
    throw ContractError("network already has " + std::to_string(already) +
                        " pruned weights, more than the " + std::to_string(keys.size()) +
                        " requested at ratio " + std::to_string(cfg.ratio));
  }

  std::vector<std::size_t> selected;
  selected.reserve(keys.size());
  for (const auto& key : keys) selected.push_back(key.index);
  std::sort(selected.begin(), selected.end());

  PruneReport report;
  report.ratio = cfg.ratio;
  report.total_weights = total;
  report.pruned_count = selected.size();
  report.threshold = keys.empty() ? 0.0f : keys.back().magnitude;
  report.nominal_compression =
      static_cast<double>(total) / static_cast<double>(total - selected.size());

  auto next = selected.begin();
  std::size_t base = 0;
  for (std::size_t n = 0; n < nets.size(); ++n) {
    auto layers = nets[n]->layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& w = layers[l].weight;
      while (next != selected.end() && *next < base + w.size()) {
        const std::size_t i = *next - base;
        w.mask[i] = 0;
        w.values[i] = 0.0f;
        w.grads[i] = 0.0f;
        ++next;
      }
      const std::size_t kept = w.kept();
      report.layers.push_back({n, l, w.size(), kept, w.size() - kept});
      base += w.size();
    }
    nets[n]->touch();
  }
  return report;
}

PruneReport apply_prune(RadianceField& field, const PruneConfig& cfg) {
  Mlp* nets[] = {&field.trunk(), &field.head()};
  return apply_prune(nets, cfg);
}

SparsityReport verify_sparsity(std::span<const Mlp* const> nets) {
  std::size_t total = 0;
  std::size_t masked = 0;
  SparsityReport r;
  for (const Mlp* net : nets) {
    for (const auto& layer : net->layers()) {
      const auto& w = layer.weight;
      total += w.size();
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (w.mask[i] != 0) continue;
        ++masked;
        if (std::bit_cast<std::uint32_t>(w.values[i]) != 0u) ++r.violations;
      }
    }
  }
  r.sparsity = total == 0 ? 0.0 : static_cast<double>(masked) / static_cast<double>(total);
  return r;
}

SparsityReport verify_sparsity(const RadianceField& field) {
  const Mlp* nets[] = {&field.trunk(), &field.head()};
  return verify_sparsity(nets);
}

std::string PruneReport::to_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "ratio " << ratio << "\n";
  out << "total_weights " << total_weights << "\n";
  out << "pruned_count " << pruned_count << "\n";
  out << "threshold " << static_cast<double>(threshold) << "\n";
  out << "nominal_compression " << nominal_compression << "\n";
  out << "# network layer total kept pruned\n";
  for (const auto& l : layers) {
    out << "layer " << l.network << " " << l.layer << " " << l.total << " " << l.kept << " "
        << l.pruned << "\n";
  }
  return out.str();
}

void PruneReport::write_text(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_text();
}

}  // namespace nerfprune
