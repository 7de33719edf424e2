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

#include "nerfprune/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "nerfprune/error.hpp"

namespace nerfprune {

double mse(const Image& a, const Image& b) {
  if (!a.same_shape(b)) {
    throw ContractError("mse: image shapes differ (" + std::to_string(a.width) + "x" +
                        std::to_string(a.height) + "x" + std::to_string(a.channels) + " vs " +
                        std::to_string(b.width) + "x" + std::to_string(b.height) + "x" +
                        std::to_string(b.channels) + ")");
  }
  if (a.pixels.empty()) throw ContractError("mse: empty images");
  double s = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
    s += d * d;
  }
  return s / static_cast<double>(a.pixels.size());
}

double psnr(double mse_value) {
  if (!(mse_value >= 0.0)) throw ContractError("psnr: mse must be >= 0");
  if (mse_value == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse_value);
}

EvalResult aggregate_views(std::vector<double> view_mse) {
  if (view_mse.empty()) throw ContractError("no views to aggregate");
  EvalResult r;
  r.view_mse = std::move(view_mse);
  for (double m : r.view_mse) r.view_psnr.push_back(psnr(m));
  // Summing in sorted order makes the aggregates independent of view order.
  auto sorted_mean = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  r.mean_mse = sorted_mean(r.view_mse);
  r.mean_psnr = sorted_mean(r.view_psnr);
  r.psnr_of_mean_mse = psnr(r.mean_mse);
  return r;
}

EvalResult evaluate_model(const FieldSource& field, const DatasetManifest& data,
                          const SamplingConfig& cfg, unsigned threads) {
  const auto views = data.split(Split::kTest);
  if (views.empty()) throw ContractError("evaluate_model: dataset has no test views");
  std::vector<double> per_view;
  for (const View* v : views) {
    const auto rendered = render_image(field, v->camera, data.range_for(*v), cfg, threads);
    per_view.push_back(mse(rendered.rgb, data.load_target(*v)));
  }
  return aggregate_views(std::move(per_view));
}

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::kOriginal: return "original";
    case Phase::kPruned: return "pruned";
    case Phase::kRetrained: return "retrained";
  }
  return "unknown";
}

Phase parse_phase(const std::string& text) {
  if (text == "original") return Phase::kOriginal;
  if (text == "pruned") return Phase::kPruned;
  if (text == "retrained") return Phase::kRetrained;
  throw DecodeError(DecodeErrorKind::kMalformed, "unknown phase '" + text + "'");
}

namespace {

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double parse_num(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw DecodeError(DecodeErrorKind::kMalformed, where + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

void write_results_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << kResultsHeader << "\n";
  for (const auto& r : records) {
    out << r.dataset << "," << r.seed << "," << num(r.ratio) << "," << to_string(r.phase) << ","
        << num(r.psnr_mean_db) << "," << num(r.psnr_of_mean_mse_db) << "," << num(r.mse_mean)
        << "," << num(r.nominal_ratio) << "," << num(r.measured_ratio) << "\n";
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<MetricsRecord> read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) {
    throw DecodeError(DecodeErrorKind::kMalformed, path.string() + ": unexpected CSV header");
  }
  std::vector<MetricsRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (cells.size() != 9) {
      throw DecodeError(DecodeErrorKind::kMalformed, where + ": expected 9 columns");
    }
    MetricsRecord r;
    r.dataset = cells[0];
    const auto seed = std::from_chars(cells[1].data(), cells[1].data() + cells[1].size(), r.seed);
    if (seed.ec != std::errc() || seed.ptr != cells[1].data() + cells[1].size()) {
      throw DecodeError(DecodeErrorKind::kMalformed, where + ": bad seed '" + cells[1] + "'");
    }
    r.ratio = parse_num(cells[2], where);
    r.phase = parse_phase(cells[3]);
    r.psnr_mean_db = parse_num(cells[4], where);
    r.psnr_of_mean_mse_db = parse_num(cells[5], where);
    r.mse_mean = parse_num(cells[6], where);
    r.nominal_ratio = parse_num(cells[7], where);
    r.measured_ratio = parse_num(cells[8], where);
    records.push_back(r);
  }
  return records;
}

namespace {

struct Series {
  std::vector<std::pair<double, double>> points;
};

double metric_of(const MetricsRecord& r, ChartMetric m) {
  return m == ChartMetric::kPsnr ? r.psnr_mean_db : r.mse_mean;
}

// Original point (p = 0) followed by the phase's points sorted by ratio.
std::vector<std::pair<double, double>> phase_series(const std::vector<MetricsRecord>& records,
                                                    Phase phase, ChartMetric metric) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : records) {
    if (r.phase == Phase::kOriginal) pts.emplace_back(r.ratio, metric_of(r, metric));
  }
  std::vector<std::pair<double, double>> rest;
  for (const auto& r : records) {
    if (r.phase == phase) rest.emplace_back(r.ratio, metric_of(r, metric));
  }
  std::sort(rest.begin(), rest.end());
  pts.insert(pts.end(), rest.begin(), rest.end());
  return pts;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string chart_svg(const std::vector<MetricsRecord>& records, ChartMetric metric) {
  const auto pruned = phase_series(records, Phase::kPruned, metric);
  const auto retrained = phase_series(records, Phase::kRetrained, metric);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto* s : {&pruned, &retrained}) {
    for (const auto& [x, y] : *s) {
      if (std::isfinite(y)) {
        lo = std::min(lo, y);
        hi = std::max(hi, y);
      }
    }
  }
  if (!std::isfinite(lo)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.08 * (hi - lo);
  lo -= pad;
  hi += pad;

  constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
  auto sx = [&](double p) { return kLeft + p * (kW - kLeft - kRight); };
  auto sy = [&](double v) { return kTop + (hi - v) / (hi - lo) * (kH - kTop - kBottom); };
  const bool is_psnr = metric == ChartMetric::kPsnr;
  const int digits = is_psnr ? 2 : 4;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
         "viewBox=\"0 0 640 400\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  svg << "<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << (is_psnr ? "PSNR (dB)" : "MSE") << " vs pruning ratio</text>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight
      << "\" y2=\"" << kH - kBottom << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << kH - kBottom << "\" stroke=\"black\"/>\n";
  for (double p : {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}) {
    svg << "<text x=\"" << fixed(sx(p), 1) << "\" y=\"" << kH - kBottom + 18
        << "\" text-anchor=\"middle\">" << static_cast<int>(std::lround(p * 100)) << "%</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << fixed(sy(v) + 4, 1)
        << "\" text-anchor=\"end\">" << fixed(v, digits) << "</text>\n";
  }
  svg << "<text x=\"" << (kLeft + kW - kRight) / 2 << "\" y=\"" << kH - 10
      << "\" text-anchor=\"middle\">pruning ratio</text>\n";

  auto polyline = [&](const std::vector<std::pair<double, double>>& pts, const char* name,
                      const char* color) {
    svg << "<polyline class=\"series\" data-series=\"" << name << "\" fill=\"none\" stroke=\""
        << color << "\" stroke-width=\"2\" points=\"";
    bool first = true;
    for (const auto& [x, y] : pts) {
      if (!std::isfinite(y)) continue;
      svg << (first ? "" : " ") << fixed(sx(x), 2) << "," << fixed(sy(y), 2);
      first = false;
    }
    svg << "\"/>\n";
  };
  polyline(pruned, "pruned", "#d62728");
  polyline(retrained, "retrained", "#1f77b4");
  svg << "<text x=\"" << kW - kRight - 110 << "\" y=\"" << kTop + 10
      << "\" fill=\"#d62728\">pruned</text>\n";
  svg << "<text x=\"" << kW - kRight - 110 << "\" y=\"" << kTop + 26
      << "\" fill=\"#1f77b4\">pruned + retrained</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

void emit_report(const std::vector<MetricsRecord>& records, const std::filesystem::path& out_dir) {
  if (records.empty()) throw ContractError("emit_report: no records");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  write_results_csv(out_dir / "results.csv", records);
  for (const auto& [name, metric] : {std::pair{"psnr_vs_ratio.svg", ChartMetric::kPsnr},
                                     std::pair{"mse_vs_ratio.svg", ChartMetric::kMse}}) {
    std::ofstream out(out_dir / name, std::ios::trunc);
    if (!out) throw IoError("cannot write " + (out_dir / name).string());
    out << chart_svg(records, metric);
  }
}

TrendCheck check_trend(const std::vector<MetricsRecord>& records) {
  TrendCheck check;
  for (Phase phase : {Phase::kPruned, Phase::kRetrained}) {
    for (ChartMetric metric : {ChartMetric::kPsnr, ChartMetric::kMse}) {
      const auto pts = phase_series(records, phase, metric);
      for (std::size_t i = 1; i < pts.size(); ++i) {
        const double prev = pts[i - 1].second;
        const double cur = pts[i].second;
        const bool bad = metric == ChartMetric::kPsnr ? cur > prev : cur < prev;
        if (!bad) continue;
        const std::string msg = to_string(phase) + " " +
                                (metric == ChartMetric::kPsnr ? "PSNR rises" : "MSE falls") +
                                " from p=" + fixed(pts[i - 1].first, 2) + " to p=" +
                                fixed(pts[i].first, 2) + " (" + fixed(prev, 6) + " -> " +
                                fixed(cur, 6) + ")";
        if (std::abs(pts[i].first - 0.3) < 1e-9) {
          check.warnings.push_back(msg);
        } else {
          check.failures.push_back(msg);
        }
      }
    }
  }
  return check;
}

}  // namespace nerfprune
