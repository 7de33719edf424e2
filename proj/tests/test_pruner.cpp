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

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "nerfprune/error.hpp"
#include "nerfprune/pruner.hpp"
#include "support/oracles.hpp"

using namespace nerfprune;

namespace {

std::vector<float> flat_weights(const RadianceField& f) {
  std::vector<float> out;
  for (const Mlp* net : {&f.trunk(), &f.head()}) {
    for (const auto& l : net->layers()) out.insert(out.end(), l.weight.values.begin(), l.weight.values.end());
  }
  return out;
}

std::vector<std::size_t> cleared_positions(const RadianceField& f) {
  std::vector<std::size_t> out;
  std::size_t base = 0;
  for (const Mlp* net : {&f.trunk(), &f.head()}) {
    for (const auto& l : net->layers()) {
      for (std::size_t i = 0; i < l.weight.size(); ++i) {
        if (!l.weight.mask[i]) out.push_back(base + i);
      }
      base += l.weight.size();
    }
  }
  return out;
}

// Quantises weights to a coarse grid so that equal magnitudes (ties) are common.
void quantise(RadianceField& f, float step) {
  for (Mlp* net : {&f.trunk(), &f.head()}) {
    for (auto& l : net->layers()) {
      for (float& v : l.weight.values) v = std::round(v / step) * step;
    }
    net->touch();
  }
}

constexpr std::size_t kNum[] = {3, 5, 7, 9};

}  // namespace

TEST_CASE("prune count is floor(p N)") {
  CHECK(prune_count(0.3, 24448) == 7334);
  CHECK(prune_count(0.5, 24448) == 12224);
  CHECK(prune_count(0.7, 24448) == 17113);
  CHECK(prune_count(0.9, 24448) == 22003);
  CHECK(prune_count(0.0, 10) == 0);
  // Representation error in p must not lose a weight: 0.7 * 10 is 6.999...
  CHECK(prune_count(0.7, 10) == 7);
  for (std::size_t n = 1; n < 2000; n += 7) {
    for (std::size_t num : kNum) CHECK(prune_count(num / 10.0, n) == num * n / 10);
  }
}

TEST_CASE("selection matches the full-sort oracle, ties included") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto field = RadianceField::create(FieldArchitecture{}, seed);
    if (seed == 3) quantise(field, 0.02f);
    const Mlp* nets[] = {&field.trunk(), &field.head()};
    const auto flat = flat_weights(field);
    for (std::size_t num : kNum) {
      const auto got = select_pruned(nets, num / 10.0);
      const auto want = oracle::pruning_selection(flat, num, 10);
      CHECK(got == want);
    }
  }
}

TEST_CASE("apply_prune clears exactly the selected weights and reports per layer") {
  auto field = RadianceField::create(FieldArchitecture{}, 4);
  const auto flat = flat_weights(field);
  PruneConfig cfg;
  cfg.ratio = 0.7;
  const auto report = apply_prune(field, cfg);
  const auto want = oracle::pruning_selection(flat, 7, 10);
  CHECK(cleared_positions(field) == want);
  CHECK(report.total_weights == 24448);
  CHECK(report.pruned_count == want.size());
  CHECK(report.nominal_compression == doctest::Approx(24448.0 / (24448 - 17113)));
  std::size_t pruned = 0;
  for (const auto& l : report.layers) {
    CHECK(l.kept + l.pruned == l.total);
    pruned += l.pruned;
  }
  CHECK(pruned == report.pruned_count);
  CHECK(report.layers.size() == field.trunk().layers().size() + field.head().layers().size());
  // Threshold: largest removed magnitude; every survivor is at least as large.
  float largest_removed = 0.0f;
  for (std::size_t i : want) largest_removed = std::max(largest_removed, std::abs(flat[i]));
  CHECK(report.threshold == largest_removed);
  const auto kept = flat_weights(field);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (!std::binary_search(want.begin(), want.end(), i)) CHECK(std::abs(kept[i]) >= largest_removed);
  }
  const auto sp = verify_sparsity(field);
  CHECK(sp.violations == 0);
  CHECK(sp.sparsity == doctest::Approx(17113.0 / 24448.0));
  // Removed weights are +0.0, not -0.0.
  for (std::size_t i : want) CHECK(std::signbit(kept[i]) == false);
}

TEST_CASE("successive pruning nests and equals one-shot pruning") {
  auto stepwise = RadianceField::create(FieldArchitecture{}, 6);
  quantise(stepwise, 0.01f);
  auto one_shot = stepwise;
  std::vector<std::size_t> previous;
  for (std::size_t num : kNum) {
    PruneConfig cfg;
    cfg.ratio = num / 10.0;
    apply_prune(stepwise, cfg);
    const auto now = cleared_positions(stepwise);
    CHECK(std::includes(now.begin(), now.end(), previous.begin(), previous.end()));
    auto fresh = one_shot;
    apply_prune(fresh, cfg);
    CHECK(cleared_positions(fresh) == now);
    previous = now;
  }
}

TEST_CASE("pruning below an existing sparsity is a contract violation") {
  auto field = RadianceField::create(FieldArchitecture{}, 2);
  PruneConfig cfg;
  cfg.ratio = 0.5;
  apply_prune(field, cfg);
  cfg.ratio = 0.3;
  CHECK_THROWS_AS(apply_prune(field, cfg), ContractError);
}

TEST_CASE("prune config validation") {
  PruneConfig cfg;
  for (double bad : {-0.1, 1.0, 1.5, std::nan("")}) {
    cfg.ratio = bad;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  cfg.ratio = 0.0;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("sparsity check detects a nonzero masked weight") {
  auto field = RadianceField::create(FieldArchitecture{}, 2);
  PruneConfig cfg;
  cfg.ratio = 0.5;
  apply_prune(field, cfg);
  auto& w = field.trunk().layers()[1].weight;
  const auto it = std::find(w.mask.begin(), w.mask.end(), 0);
  REQUIRE(it != w.mask.end());
  w.values[static_cast<std::size_t>(it - w.mask.begin())] = -0.0f;  // sign bit counts
  CHECK(verify_sparsity(field).violations == 1);
}

TEST_CASE("report text lists every layer") {
  auto field = RadianceField::create(FieldArchitecture{}, 2);
  PruneConfig cfg;
  cfg.ratio = 0.9;
  const auto report = apply_prune(field, cfg);
  const auto text = report.to_text();
  CHECK(text.find("pruned_count 22003\n") != std::string::npos);
  std::size_t lines = 0;
  for (std::size_t at = text.find("\nlayer "); at != std::string::npos; at = text.find("\nlayer ", at + 1)) ++lines;
  CHECK(lines == report.layers.size());
}
