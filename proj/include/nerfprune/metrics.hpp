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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nerfprune/image.hpp"
#include "nerfprune/renderer.hpp"
#include "nerfprune/scene.hpp"

namespace nerfprune {

/// Mean squared per-channel error. Throws ContractError on shape mismatch.
double mse(const Image& a, const Image& b);

/// -10 log10(mse) for unit-range signals; +infinity when mse == 0.
double psnr(double mse);

struct EvalResult {
  std::vector<double> view_mse;
  std::vector<double> view_psnr;
  double mean_mse = 0.0;
  double mean_psnr = 0.0;         // mean of per-view PSNR (primary)
  double psnr_of_mean_mse = 0.0;  // PSNR of the mean MSE (secondary)
};

/// Aggregates per-view MSE values into both PSNR conventions.
EvalResult aggregate_views(std::vector<double> view_mse);

/// Renders every test view (midpoint sampling, deterministic) and scores
/// it against the dataset's float ground truth.
EvalResult evaluate_model(const FieldSource& field, const DatasetManifest& data,
                          const SamplingConfig& cfg, unsigned threads = 1);

enum class Phase : std::uint8_t { kOriginal, kPruned, kRetrained };

std::string to_string(Phase phase);
Phase parse_phase(const std::string& text);

/// One row of the results ledger.
struct MetricsRecord {
  std::string dataset;
  std::uint64_t seed = 0;
  double ratio = 0.0;
  Phase phase = Phase::kOriginal;
  double psnr_mean_db = 0.0;
  double psnr_of_mean_mse_db = 0.0;
  double mse_mean = 0.0;
  double nominal_ratio = 1.0;
  double measured_ratio = 1.0;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

inline constexpr const char* kResultsHeader =
    "dataset,seed,ratio,phase,psnr_mean_db,psnr_of_mean_mse_db,mse_mean,nominal_ratio,"
    "measured_ratio";

void write_results_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> read_results_csv(const std::filesystem::path& path);

enum class ChartMetric { kPsnr, kMse };

/// Line chart of a metric against pruning ratio with a "pruned" and a
/// "retrained" polyline, both starting from the original model at p = 0.
std::string chart_svg(const std::vector<MetricsRecord>& records, ChartMetric metric);

/// Writes results.csv, psnr_vs_ratio.svg and mse_vs_ratio.svg into out_dir.
void emit_report(const std::vector<MetricsRecord>& records, const std::filesystem::path& out_dir);

/// Within each phase PSNR should not rise and MSE should not fall as the
/// ratio grows. A violation at the step into p = 0.3 is only a warning.
struct TrendCheck {
  std::vector<std::string> failures;
  std::vector<std::string> warnings;
  bool ok() const { return failures.empty(); }
};

TrendCheck check_trend(const std::vector<MetricsRecord>& records);

}  // namespace nerfprune
