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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <regex>
#include <string>

#include "doctest.h"
#include "nerfprune/error.hpp"
#include "nerfprune/metrics.hpp"

using namespace nerfprune;
namespace fs = std::filesystem;

namespace {

std::vector<MetricsRecord> sample_records(const double pruned[4], const double retrained[4]) {
  std::vector<MetricsRecord> out;
  auto rec = [&](double ratio, Phase phase, double psnr) {
    MetricsRecord r;
    r.dataset = "benchmark";
    r.seed = 1;
    r.ratio = ratio;
    r.phase = phase;
    r.psnr_mean_db = psnr;
    r.psnr_of_mean_mse_db = psnr - 0.1;
    r.mse_mean = std::pow(10.0, -psnr / 10.0);
    r.nominal_ratio = 1.0 / (1.0 - ratio);
    r.measured_ratio = r.nominal_ratio * 0.9;
    out.push_back(r);
  };
  rec(0.0, Phase::kOriginal, 26.0);
  const double ratios[] = {0.3, 0.5, 0.7, 0.9};
  for (int i = 0; i < 4; ++i) {
    rec(ratios[i], Phase::kPruned, pruned[i]);
    rec(ratios[i], Phase::kRetrained, retrained[i]);
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

}  // namespace

TEST_CASE("mse and psnr") {
  Image a(2, 1, 3), b(2, 1, 3);
  a.pixels = {0.0f, 0.5f, 1.0f, 0.25f, 0.25f, 0.25f};
  b.pixels = {0.5f, 0.5f, 0.0f, 0.25f, 0.75f, 0.25f};
  const double want = (0.25 + 0 + 1 + 0 + 0.25 + 0) / 6.0;
  CHECK(mse(a, b) == doctest::Approx(want));
  CHECK(mse(a, a) == 0.0);
  CHECK(psnr(want) == doctest::Approx(-10.0 * std::log10(want)));
  CHECK(psnr(0.01) == doctest::Approx(20.0));
  CHECK(std::isinf(psnr(0.0)));
  CHECK_THROWS_AS(psnr(-1.0), ContractError);
  CHECK_THROWS_AS(mse(a, Image(1, 2, 3)), ContractError);
}

TEST_CASE("view aggregation: mean of PSNR and PSNR of mean") {
  const auto r = aggregate_views({0.01, 0.001});
  CHECK(r.mean_mse == doctest::Approx(0.0055));
  CHECK(r.mean_psnr == doctest::Approx(25.0));
  CHECK(r.psnr_of_mean_mse == doctest::Approx(-10.0 * std::log10(0.0055)));
  // Jensen: the mean of PSNRs is at least the PSNR of the mean MSE.
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(1e-4, 1e-1);
  std::vector<double> v(7);
  for (auto& x : v) x = u(gen);
  const auto a = aggregate_views(v);
  CHECK(a.mean_psnr >= a.psnr_of_mean_mse);
  // Order independence, bit for bit.
  std::vector<double> rev(v.rbegin(), v.rend());
  const auto b = aggregate_views(rev);
  CHECK(a.mean_psnr == b.mean_psnr);
  CHECK(a.mean_mse == b.mean_mse);
}

TEST_CASE("evaluating the ground-truth scene on its own dataset") {
  const fs::path dir = fs::path(NERFPRUNE_TEST_TMP) / "data";
  fs::remove_all(dir);
  DatasetOptions o;
  o.n_train = 1;
  o.n_test = 2;
  o.resolution = 10;
  o.oracle_factor = 1;
  const auto data = generate_dataset(AnalyticScene::benchmark(), o, dir);
  SamplingConfig cfg;
  cfg.n_samples = 64;
  cfg.stratified = false;
  // Same sampling as the ground truth renderer: exact reproduction.
  const auto exact = evaluate_model(data.scene, data, cfg, 1);
  REQUIRE(exact.view_mse.size() == 2);
  CHECK(exact.mean_mse == 0.0);
  // Coarser sampling is merely close.
  cfg.n_samples = 16;
  const auto coarse = evaluate_model(data.scene, data, cfg, 2);
  CHECK(coarse.mean_mse > 0.0);
  CHECK(coarse.mean_psnr > 15.0);
}

TEST_CASE("results.csv round trip") {
  const double pruned[] = {25.0, 23.0, 20.0, 15.0};
  const double retrained[] = {25.5, 25.0, 24.0, 21.0};
  auto recs = sample_records(pruned, retrained);
  recs[1].psnr_mean_db = 1.0 / 3.0;  // needs all digits
  const fs::path dir = fs::path(NERFPRUNE_TEST_TMP);
  fs::create_directories(dir);
  write_results_csv(dir / "r.csv", recs);
  const auto text = slurp(dir / "r.csv");
  CHECK(text.rfind(std::string(kResultsHeader) + "\n", 0) == 0);
  CHECK(read_results_csv(dir / "r.csv") == recs);
  std::ofstream(dir / "bad.csv") << kResultsHeader << "\nbenchmark,1,0.3,pruned,abc,1,1,1,1\n";
  try {
    read_results_csv(dir / "bad.csv");
    FAIL("accepted");
  } catch (const DecodeError& e) {
    CHECK(e.kind() == DecodeErrorKind::kMalformed);
  }
  std::ofstream(dir / "bad.csv") << "wrong,header\n";
  CHECK_THROWS_AS(read_results_csv(dir / "bad.csv"), DecodeError);
  CHECK(parse_phase("retrained") == Phase::kRetrained);
  CHECK_THROWS(parse_phase("other"));
}

TEST_CASE("charts carry one polyline per phase starting at the original") {
  const double pruned[] = {25.0, 23.0, 20.0, 15.0};
  const double retrained[] = {25.5, 25.0, 24.0, 21.0};
  const auto recs = sample_records(pruned, retrained);
  for (ChartMetric m : {ChartMetric::kPsnr, ChartMetric::kMse}) {
    const auto svg = chart_svg(recs, m);
    CHECK(svg.rfind("<svg", 0) == 0);
    const std::regex line(R"re(<polyline class="series" data-series="(pruned|retrained)"[^>]*points="([^"]*)")re");
    int series = 0;
    for (std::sregex_iterator it(svg.begin(), svg.end(), line), end; it != end; ++it) {
      ++series;
      const std::string pts = (*it)[2];
      std::size_t count = 0;
      for (char c : pts) count += c == ',';
      CHECK(count == 5);  // original plus four ratios
    }
    CHECK(series == 2);
  }
  const fs::path dir = fs::path(NERFPRUNE_TEST_TMP) / "report";
  fs::remove_all(dir);
  emit_report(recs, dir);
  CHECK(fs::exists(dir / "results.csv"));
  CHECK(fs::exists(dir / "psnr_vs_ratio.svg"));
  CHECK(fs::exists(dir / "mse_vs_ratio.svg"));
}

TEST_CASE("trend check: one inversion into p=0.3 is tolerated") {
  {
    const double pruned[] = {25.0, 23.0, 20.0, 15.0};
    const double retrained[] = {25.5, 25.0, 24.0, 21.0};
    const auto c = check_trend(sample_records(pruned, retrained));
    CHECK(c.ok());
    CHECK(c.warnings.empty());
  }
  {
    const double pruned[] = {26.2, 23.0, 20.0, 15.0};  // above the original
    const double retrained[] = {25.5, 25.0, 24.0, 21.0};
    const auto c = check_trend(sample_records(pruned, retrained));
    CHECK(c.ok());
    CHECK(c.warnings.size() == 2);  // PSNR and MSE views of the same inversion
  }
  {
    const double pruned[] = {25.0, 23.0, 23.5, 15.0};
    const double retrained[] = {25.5, 25.0, 24.0, 21.0};
    const auto c = check_trend(sample_records(pruned, retrained));
    CHECK_FALSE(c.ok());
  }
}
