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

#include "nerfprune/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "json.hpp"
#include "nerfprune/error.hpp"
#include "nerfprune/imageio.hpp"
#include "nerfprune/pruner.hpp"

namespace nerfprune {

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void make_dirs(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::string ratio_tag(double p) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d", static_cast<int>(std::lround(p * 100.0)));
  return buf;
}

}  // namespace

void RunManifest::write(const std::filesystem::path& path) const {
  nlohmann::ordered_json j;
  j["tool"] = "nerfprune";
  j["version"] = kToolVersion;
  j["command"] = command;
  j["seed"] = seed;
  j["started_at"] = utc_timestamp();
  j["config"] = nlohmann::ordered_json::parse(config_json);
  j["inputs"] = nlohmann::ordered_json::array();
  for (const auto& p : inputs) j["inputs"].push_back(p.string());
  j["outputs"] = nlohmann::ordered_json::array();
  for (const auto& p : outputs) j["outputs"].push_back(p.string());
  if (path.has_parent_path()) make_dirs(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed for " + path.string());
}

void ExperimentConfig::validate() const {
  train.validate(false);
  if (ratios.empty()) throw ConfigError("at least one pruning ratio is required");
  for (double p : ratios) {
    PruneConfig{p}.validate();
    if (!(p > 0.0)) throw ConfigError("experiment ratios must be > 0");
  }
  if (mesh_resolution < 2) throw ConfigError("mesh resolution must be >= 2");
  if (!(iso > 0.0)) throw ConfigError("iso must be > 0");
  if (dataset.resolution < 1) throw ConfigError("image resolution must be >= 1");
  if (depth_view >= dataset.n_test) throw ConfigError("depth view must index a test view");
}

std::string ExperimentConfig::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["out"] = out.string();
  j["dataset"] = {{"id", dataset.dataset_id},
                  {"n_train", dataset.n_train},
                  {"n_test", dataset.n_test},
                  {"resolution", dataset.resolution},
                  {"camera_radius", dataset.camera_radius},
                  {"fov_degrees", dataset.fov_degrees},
                  {"base_samples", dataset.base_samples},
                  {"oracle_factor", dataset.oracle_factor},
                  {"range_padding", dataset.range_padding}};
  j["train"] = {{"iterations", train.iterations},
                {"rays_per_batch", train.rays_per_batch},
                {"samples_per_ray", train.samples_per_ray},
                {"lr", train.adam.lr},
                {"beta1", train.adam.beta1},
                {"beta2", train.adam.beta2},
                {"eps", train.adam.eps},
                {"eval_every", train.eval_every},
                {"retrain_iterations", train.retrain_iterations}};
  j["ratios"] = ratios;
  j["mesh"] = {{"resolution", mesh_resolution}, {"iso", iso}, {"half_extent", 1.5}};
  j["depth_view"] = depth_view;
  j["threads"] = threads;
  return j.dump();
}

SamplingConfig eval_sampling(const DatasetManifest& data, std::size_t samples) {
  SamplingConfig cfg;
  cfg.n_samples = samples;
  cfg.stratified = false;
  cfg.white_background = data.white_background;
  return cfg;
}

TriangleMesh mesh_field(const RadianceField& field, const MeshOptions& opts) {
  if (!(opts.half_extent > 0.0)) throw ConfigError("mesh half extent must be > 0");
  const Vec3 lo = Vec3::Constant(-opts.half_extent);
  const Vec3 hi = Vec3::Constant(opts.half_extent);
  const std::size_t r = opts.resolution;
  const auto grid = sample_density_grid(field, lo, hi, {r, r, r}, opts.threads);
  return extract_mesh(grid, opts.iso);
}

void write_depth(const RadianceField& field, const DatasetManifest& data, std::size_t view,
                 const SamplingConfig& cfg, unsigned threads, const std::filesystem::path& stem) {
  const auto views = data.split(Split::kTest);
  if (view >= views.size()) {
    throw ConfigError("test view " + std::to_string(view) + " out of range (" +
                      std::to_string(views.size()) + " test views)");
  }
  const View& v = *views[view];
  const auto rendered = render_image(field, v.camera, data.range_for(v), cfg, threads);
  auto raw = stem;
  raw += ".f32";
  auto viz = stem;
  viz += ".pgm";
  export_depth(rendered.depth, rendered.opacity, rendered.range, raw, viz);
}

void write_renders(const RadianceField& field, const DatasetManifest& data,
                   const SamplingConfig& cfg, unsigned threads,
                   const std::filesystem::path& out_dir) {
  make_dirs(out_dir);
  std::size_t i = 0;
  for (const View* v : data.split(Split::kTest)) {
    const auto rendered = render_image(field, v->camera, data.range_for(*v), cfg, threads);
    char name[32];
    std::snprintf(name, sizeof(name), "view_%04zu.ppm", i++);
    write_image(out_dir / name, rendered.rgb);
  }
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& out = cfg.out;
  for (const char* sub : {"data", "models", "logs", "meshes", "depth", "renders"}) {
    make_dirs(out / sub);
  }
  RunManifest manifest;
  manifest.command = "experiment";
  manifest.seed = cfg.seed;
  manifest.config_json = cfg.to_json();
  manifest.outputs = {out / "results.csv", out / "psnr_vs_ratio.svg", out / "mse_vs_ratio.svg",
                      out / "models", out / "meshes", out / "depth", out / "renders"};
  manifest.write(out / "run_manifest.json");

  auto log = [](const std::string& msg) { std::fprintf(stderr, "[experiment] %s\n", msg.c_str()); };

  DatasetOptions dopt = cfg.dataset;
  dopt.seed = cfg.seed;
  dopt.threads = cfg.threads;
  log("generating dataset");
  const DatasetManifest data = generate_dataset(AnalyticScene::benchmark(), dopt, out / "data");

  TrainConfig tcfg = cfg.train;
  tcfg.seed = cfg.seed;
  tcfg.threads = cfg.threads;
  const SamplingConfig eval_cfg = eval_sampling(data, tcfg.samples_per_ray);
  MeshOptions mopt;
  mopt.resolution = cfg.mesh_resolution;
  mopt.iso = cfg.iso;
  mopt.threads = cfg.threads;

  ExperimentResult result;
  auto record = [&](const RadianceField& field, double ratio, Phase phase, double nominal,
                    double measured) {
    const auto ev = evaluate_model(field, data, eval_cfg, cfg.threads);
    MetricsRecord r;
    r.dataset = data.dataset_id;
    r.seed = cfg.seed;
    r.ratio = ratio;
    r.phase = phase;
    r.psnr_mean_db = ev.mean_psnr;
    r.psnr_of_mean_mse_db = ev.psnr_of_mean_mse;
    r.mse_mean = ev.mean_mse;
    r.nominal_ratio = nominal;
    r.measured_ratio = measured;
    result.records.push_back(r);
    char line[160];
    std::snprintf(line, sizeof(line), "%s p=%.2f: PSNR %.3f dB, MSE %.6g", to_string(phase).c_str(),
                  ratio, ev.mean_psnr, ev.mean_mse);
    log(line);
  };
  auto artifacts = [&](const RadianceField& field, const std::string& name) {
    const auto bytes = save_model(field, out / "models" / (name + ".nrfp"));
    export_mesh(mesh_field(field, mopt), out / "meshes" / (name + ".obj"));
    write_depth(field, data, cfg.depth_view, eval_cfg, cfg.threads, out / "depth" / name);
    write_renders(field, data, eval_cfg, cfg.threads, out / "renders" / name);
    return bytes;
  };

  log("training original model (" + std::to_string(tcfg.iterations) + " iterations)");
  RadianceField original = RadianceField::create(FieldArchitecture{}, cfg.seed);
  train(original, data, tcfg).write_csv(out / "logs" / "train_original.csv");
  const ByteReport original_bytes = artifacts(original, "original");
  record(original, 0.0, Phase::kOriginal, 1.0, original_bytes.measured_ratio);

  for (double p : cfg.ratios) {
    const std::string tag = ratio_tag(p);
    RadianceField pruned = original;
    const PruneReport report = apply_prune(pruned, PruneConfig{p});
    report.write_text(out / "models" / ("prune_" + tag + ".txt"));
    const ByteReport pruned_bytes = artifacts(pruned, "pruned_" + tag);
    const auto summary = compression_summary(report, pruned_bytes);
    record(pruned, p, Phase::kPruned, summary.nominal_ratio, summary.measured_ratio);

    log("retraining p=" + tag + " (" + std::to_string(tcfg.retrain_iterations) + " iterations)");
    RadianceField retrained = pruned;
    retrain(retrained, data, tcfg).write_csv(out / "logs" / ("retrain_" + tag + ".csv"));
    const ByteReport retrained_bytes = artifacts(retrained, "retrained_" + tag);
    const auto rsummary = compression_summary(report, retrained_bytes);
    record(retrained, p, Phase::kRetrained, rsummary.nominal_ratio, rsummary.measured_ratio);
  }

  emit_report(result.records, out);
  result.trend = check_trend(result.records);
  std::ofstream trend(out / "trend.txt", std::ios::trunc);
  trend << (result.trend.ok() ? "ok" : "fail") << "\n";
  for (const auto& w : result.trend.warnings) trend << "warning: " << w << "\n";
  for (const auto& f : result.trend.failures) trend << "failure: " << f << "\n";
  return result;
}

}  // namespace nerfprune
