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

#include "nerfprune/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "nerfprune/error.hpp"
#include "nerfprune/metrics.hpp"
#include "nerfprune/parallel.hpp"
#include "nerfprune/random.hpp"
#include "nerfprune/renderer.hpp"

namespace nerfprune {

namespace {
constexpr std::size_t kChunkRays = 128;
}

void TrainConfig::validate(bool allow_zero_iterations) const {
  if (!allow_zero_iterations && iterations < 1) throw ConfigError("iterations must be >= 1");
  if (rays_per_batch < 1) throw ConfigError("rays_per_batch must be >= 1");
  if (samples_per_ray < 2) throw ConfigError("samples_per_ray must be >= 2");
  adam.validate();
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iteration,loss,test_psnr,seconds\n";
  char buf[160];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.6f,%.3f\n", e.iteration, e.loss, e.test_psnr,
                  e.seconds);
    out << buf;
  }
  if (!out) throw IoError("write failed for " + path.string());
}

double photometric_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw ContractError("photometric_loss: shape mismatch");
  if (pred.empty()) throw ContractError("photometric_loss: empty batch");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

TrainingPixels::TrainingPixels(const DatasetManifest& data)
    : white_background_(data.white_background) {
  offsets_.push_back(0);
  for (const View* v : data.split(Split::kTrain)) {
    Entry e{v->camera, data.range_for(*v), data.load_target(*v)};
    if (e.target.width != v->camera.intrinsics.width || e.target.height != v->camera.intrinsics.height) {
      throw ContractError("training target " + v->image + " does not match its camera");
    }
    offsets_.push_back(offsets_.back() + v->camera.pixel_count());
    views_.push_back(std::move(e));
  }
  if (views_.empty()) throw ContractError("dataset has no train views");
}

std::pair<std::size_t, std::size_t> TrainingPixels::locate(std::size_t index) const {
  const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), index);
  const std::size_t view = static_cast<std::size_t>(it - offsets_.begin()) - 1;
  return {view, index - offsets_[view]};
}

Ray TrainingPixels::ray(std::size_t index) const {
  const auto [view, pixel] = locate(index);
  return pixel_ray(views_[view].camera, views_[view].range, pixel);
}

const float* TrainingPixels::target(std::size_t index) const {
  const auto [view, pixel] = locate(index);
  return views_[view].target.pixels.data() + pixel * 3;
}

Trainer::Trainer(RadianceField& field, const TrainingPixels& pixels, const TrainConfig& cfg,
                 TrainPhase phase)
    : field_(field),
      pixels_(pixels),
      cfg_(cfg),
      phase_(phase),
      trunk_opt_(field.trunk(), cfg.adam),
      head_opt_(field.head(), cfg.adam) {
  cfg_.validate(true);
  const std::size_t chunks = (cfg_.rays_per_batch + kChunkRays - 1) / kChunkRays;
  chunk_grads_.reserve(chunks);
  for (std::size_t c = 0; c < chunks; ++c) chunk_grads_.push_back(field_.make_gradients());
  chunk_loss_.assign(chunks, 0.0);
  workers_.resize(std::min<std::size_t>(std::max(1u, cfg_.threads), chunks));
}

double Trainer::run_batch(std::size_t iteration, bool with_grads) {
  const bool retraining = phase_ == TrainPhase::kRetrain;
  const std::uint64_t batch_key = counter_hash(
      cfg_.seed, retraining ? stream::kRetrainBatch : stream::kTrainBatch, iteration);
  SamplingConfig sampling;
  sampling.n_samples = cfg_.samples_per_ray;
  sampling.stratified = true;
  sampling.seed = counter_hash(cfg_.seed,
                               retraining ? stream::kRetrainSamples : stream::kTrainSamples,
                               iteration);
  sampling.white_background = pixels_.white_background();

  const std::size_t batch = cfg_.rays_per_batch;
  const std::size_t n = cfg_.samples_per_ray;
  const double pixel_count = static_cast<double>(pixels_.size());
  const double grad_scale = 2.0 / (3.0 * static_cast<double>(batch));

  parallel_for(chunk_grads_.size(), static_cast<unsigned>(workers_.size()),
               [&](std::size_t chunk, unsigned worker) {
    Worker& wk = workers_[worker];
    const std::size_t begin = chunk * kChunkRays;
    const std::size_t end = std::min(batch, begin + kChunkRays);
    const std::size_t rays = end - begin;
    wk.t.resize(rays * n);
    wk.delta.resize(rays * n);
    wk.pos.resize(rays * n * 3);
    wk.dir.resize(rays * n * 3);
    std::vector<const float*> targets(rays);
    for (std::size_t r = 0; r < rays; ++r) {
      const std::size_t j = begin + r;
      const auto idx = std::min(pixels_.size() - 1,
                                static_cast<std::size_t>(counter_uniform(batch_key, 0, j) * pixel_count));
      const Ray ray = pixels_.ray(idx);
      targets[r] = pixels_.target(idx);
      std::span<double> t(wk.t.data() + r * n, n);
      sample_along(ray, sampling, j, t, std::span<double>(wk.delta.data() + r * n, n));
      for (std::size_t i = 0; i < n; ++i) {
        const Vec3 p = ray.origin + t[i] * ray.direction;
        for (int c = 0; c < 3; ++c) {
          wk.pos[(r * n + i) * 3 + c] = p[c];
          wk.dir[(r * n + i) * 3 + c] = ray.direction[c];
        }
      }
    }
    field_.forward(wk.pos, wk.dir, wk.pass);
    // A diverged network shows up here first; report it as a non-finite loss.
    for (double s : wk.pass.sigma) {
      if (!std::isfinite(s)) {
        chunk_loss_[chunk] = std::numeric_limits<double>::quiet_NaN();
        return;
      }
    }

    if (with_grads) {
      wk.d_sigma.resize(rays * n);
      wk.d_rgb.resize(rays * n * 3);
    }
    double loss = 0.0;
    for (std::size_t r = 0; r < rays; ++r) {
      const std::span<const double> sigma(wk.pass.sigma.data() + r * n, n);
      const std::span<const double> rgb(wk.pass.rgb.data() + r * n * 3, n * 3);
      const std::span<const double> delta(wk.delta.data() + r * n, n);
      const RenderResult out = composite(sigma, rgb, std::span<const double>(wk.t.data() + r * n, n),
                                         delta, sampling.white_background);
      double d_color[3];
      for (int c = 0; c < 3; ++c) {
        const double err = out.rgb[c] - static_cast<double>(targets[r][c]);
        loss += err * err;
        d_color[c] = grad_scale * err;
      }
      if (with_grads) {
        composite_backward(sigma, rgb, delta, sampling.white_background, d_color,
                           std::span<double>(wk.d_sigma.data() + r * n, n),
                           std::span<double>(wk.d_rgb.data() + r * n * 3, n * 3));
      }
    }
    chunk_loss_[chunk] = loss;
    if (with_grads) {
      chunk_grads_[chunk].zero();
      field_.backward(wk.pass, wk.d_sigma, wk.d_rgb, chunk_grads_[chunk]);
    }
  });

  double total = 0.0;
  for (double l : chunk_loss_) total += l;
  const double loss = total / (3.0 * static_cast<double>(batch));
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "non-finite training loss at iteration " << iteration << ": " << loss;
    throw NumericError(msg.str());
  }
  if (with_grads) {
    field_.trunk().zero_grads();
    field_.head().zero_grads();
    for (const auto& g : chunk_grads_) field_.accumulate_grads(g);
  }
  return loss;
}

double Trainer::batch_loss(std::size_t iteration) { return run_batch(iteration, false); }

double Trainer::step() {
  ++iteration_;
  const double loss = run_batch(iteration_, true);
  optimizer_step(field_.trunk(), trunk_opt_);
  optimizer_step(field_.head(), head_opt_);
  return loss;
}

namespace {

TrainLog run_loop(RadianceField& field, const DatasetManifest& data, const TrainConfig& cfg,
                  TrainPhase phase, std::size_t iterations) {
  TrainLog log;
  if (iterations == 0) return log;
  const TrainingPixels pixels(data);
  const bool has_test = !data.split(Split::kTest).empty();
  SamplingConfig eval_cfg;
  eval_cfg.n_samples = cfg.samples_per_ray;
  eval_cfg.stratified = false;
  eval_cfg.white_background = data.white_background;

  Trainer trainer(field, pixels, cfg, phase);
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t it = 1; it <= iterations; ++it) {
    const double loss = trainer.step();
    const bool checkpoint =
        it == 1 || it == iterations || (cfg.eval_every > 0 && it % cfg.eval_every == 0);
    if (!checkpoint) continue;
    TrainLogEntry e;
    e.iteration = it;
    e.loss = loss;
    if (has_test) e.test_psnr = evaluate_model(field, data, eval_cfg, cfg.threads).mean_psnr;
    e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.entries.push_back(e);
  }
  return log;
}

}  // namespace

TrainLog train(RadianceField& field, const DatasetManifest& data, const TrainConfig& cfg) {
  cfg.validate();
  return run_loop(field, data, cfg, TrainPhase::kTrain, cfg.iterations);
}

TrainLog retrain(RadianceField& field, const DatasetManifest& data, const TrainConfig& cfg) {
  cfg.validate(true);
  std::size_t kept = 0;
  std::size_t total = 0;
  for (const Mlp* net : {&field.trunk(), &field.head()}) {
    for (const auto& layer : net->layers()) {
      kept += layer.weight.kept();
      total += layer.weight.size();
    }
  }
  if (kept == total) throw ContractError("retrain requires a pruned network (mask is all ones)");
  return run_loop(field, data, cfg, TrainPhase::kRetrain, cfg.retrain_iterations);
}

}  // namespace nerfprune
