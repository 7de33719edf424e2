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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Runs the full benchmark experiment, so expect minutes.
//
//   acceptance [--only N]...

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "nerfprune/codec.hpp"
#include "nerfprune/error.hpp"
#include "nerfprune/experiment.hpp"
#include "nerfprune/geometry.hpp"
#include "nerfprune/parallel.hpp"
#include "nerfprune/pruner.hpp"
#include "nerfprune/renderer.hpp"
#include "support/harness.hpp"
#include "support/oracles.hpp"

using namespace nerfprune;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = NERFPRUNE_TEST_TMP;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

// ---- 1: gradients -----------------------------------------------------------

Outcome gradient_check() {
  const auto field = RadianceField::create(FieldArchitecture{}, 1);
  const auto problem = harness::make_problem(2024, 4, 8);
  const auto r = harness::check_gradients(field, problem, 1e-3, 1e-4, 1e-6);
  std::size_t expected = field.trunk().weight_count() + field.head().weight_count();
  for (const Mlp* net : {&field.trunk(), &field.head()}) {
    for (const auto& l : net->layers()) expected += l.bias.size();
  }
  Outcome o;
  o.pass = r.failures == 0 && r.checked == expected;
  o.detail = fmt("%zu/%zu parameters checked (incl. skip inputs), %zu failures, %zu kink steps", r.checked,
                 expected, r.failures, r.kinks);
  if (r.failures) o.detail += "; first: " + r.first_failure;
  return o;
}

// ---- 2: pruning selection ---------------------------------------------------

std::vector<float> flat_weights(const RadianceField& f) {
  std::vector<float> out;
  for (const Mlp* net : {&f.trunk(), &f.head()}) {
    for (const auto& l : net->layers()) out.insert(out.end(), l.weight.values.begin(), l.weight.values.end());
  }
  return out;
}

std::vector<std::size_t> cleared(const RadianceField& f) {
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

constexpr std::size_t kTenths[] = {3, 5, 7, 9};

Outcome pruning_selection() {
  std::size_t bad_count = 0, bad_select = 0, bad_nest = 0, cases = 0;
  for (std::uint64_t seed = 101; seed < 106; ++seed) {
    auto field = RadianceField::create(FieldArchitecture{}, seed);
    const auto flat = flat_weights(field);
    const std::size_t n = flat.size();
    std::vector<std::size_t> previous;
    auto nested = field;
    for (std::size_t tenths : kTenths) {
      ++cases;
      auto fresh = field;
      const auto report = apply_prune(fresh, PruneConfig{tenths / 10.0});
      const auto got = cleared(fresh);
      if (got.size() != tenths * n / 10 || report.pruned_count != tenths * n / 10) ++bad_count;
      if (got != oracle::pruning_selection(flat, tenths, 10)) ++bad_select;
      apply_prune(nested, PruneConfig{tenths / 10.0});
      const auto now = cleared(nested);
      if (now != got || !std::includes(now.begin(), now.end(), previous.begin(), previous.end())) ++bad_nest;
      previous = now;
    }
  }
  Outcome o;
  o.pass = bad_count == 0 && bad_select == 0 && bad_nest == 0;
  o.detail = fmt("%zu nets x ratios: count mismatches %zu, oracle mismatches %zu, nesting breaks %zu",
                 cases, bad_count, bad_select, bad_nest);
  return o;
}

// ---- 3: nominal compression -------------------------------------------------

Outcome nominal_compression() {
  const double expect[] = {1.43, 2.00, 3.33, 10.00};
  Outcome o{true, ""};
  for (int i = 0; i < 4; ++i) {
    auto field = RadianceField::create(FieldArchitecture{}, 1);
    const auto report = apply_prune(field, PruneConfig{kTenths[i] / 10.0});
    const double shown = std::round(report.nominal_compression * 100.0) / 100.0;
    const double summary = std::round(compression_summary(report, encode_model(field).report).nominal_ratio * 100.0) / 100.0;
    const bool ok = std::abs(shown - expect[i]) < 1e-9 && std::abs(summary - expect[i]) < 1e-9;
    o.pass = o.pass && ok;
    o.detail += fmt("%sp=0.%zu x%.2f", i ? ", " : "", kTenths[i], shown);
  }
  return o;
}

// ---- 4: codec ---------------------------------------------------------------

using Bytes = std::vector<std::uint8_t>;

void put32(Bytes& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}
std::uint32_t get32(const Bytes& b, std::size_t at) {
  return b[at] | (b[at + 1] << 8) | (b[at + 2] << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}
void reseal(Bytes& b) { put32(b, b.size() - 4, oracle::crc32(b.data(), b.size() - 4)); }

bool raises(const Bytes& b, DecodeErrorKind kind) {
  try {
    decode_model(b);
  } catch (const DecodeError& e) {
    return e.kind() == kind;
  } catch (...) {
    return false;
  }
  return false;
}

Outcome codec_round_trip() {
  const fs::path dir = kRoot / "codec";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> ratio(0.0, 0.95);
  Intrinsics in;
  in.width = in.height = 16;
  in.cx = in.cy = 8.0;
  in.focal = 18.0;
  const auto cam = Camera::look_at(Vec3(2.5, -2.0, 1.5), Vec3::Zero(), Vec3::UnitZ(), in);
  const auto range = depth_range_for(cam, 1.5);
  SamplingConfig sampling;
  sampling.n_samples = 32;

  std::size_t byte_mismatch = 0, render_mismatch = 0, fixture_miss = 0, fixtures = 0;
  constexpr std::size_t kFirstLayer = 24 + 16 + 4 * 6;
  for (int m = 0; m < 20; ++m) {
    auto field = RadianceField::create(FieldArchitecture{}, 500 + m);
    // Perturb so that models are not just fresh initialisations.
    std::normal_distribution<float> noise(0.0f, 0.05f);
    for (Mlp* net : {&field.trunk(), &field.head()}) {
      for (auto& l : net->layers()) {
        for (float& b : l.bias.values) b = noise(gen);
      }
      net->touch();
    }
    const double p = m == 0 ? 0.9 : ratio(gen);
    apply_prune(field, PruneConfig{p});
    const fs::path a = dir / "a.nrfp", b = dir / "b.nrfp";
    save_model(field, a);
    const auto loaded = load_model(a);
    save_model(loaded, b);
    if (slurp(a) != slurp(b)) ++byte_mismatch;
    const auto ra = render_image(field, cam, range, sampling, 1);
    const auto rb = render_image(loaded, cam, range, sampling, 1);
    if (std::memcmp(ra.rgb.pixels.data(), rb.rgb.pixels.data(), 4 * ra.rgb.pixels.size()) != 0 ||
        std::memcmp(ra.depth.pixels.data(), rb.depth.pixels.data(), 4 * ra.depth.pixels.size()) != 0) {
      ++render_mismatch;
    }

    const std::string s = slurp(a);
    const Bytes good(s.begin(), s.end());
    std::vector<std::pair<Bytes, DecodeErrorKind>> cases;
    cases.push_back({Bytes(good.begin(), good.begin() + 2), DecodeErrorKind::kTruncated});
    Bytes cut(good.begin(), good.begin() + static_cast<long>(good.size() * 2 / 3));
    cut.resize(cut.size() + 4);
    reseal(cut);
    cases.push_back({cut, DecodeErrorKind::kTruncated});
    Bytes magic = good;
    magic[3] = 'Q';
    cases.push_back({magic, DecodeErrorKind::kBadMagic});
    Bytes version = good;
    version[4] = 9;
    cases.push_back({version, DecodeErrorKind::kUnsupportedVersion});
    Bytes flip = good;
    flip[good.size() / 3] ^= 0x40;
    cases.push_back({flip, DecodeErrorKind::kChecksumMismatch});
    if (good[kFirstLayer] == 1) {  // sparse first layer: corrupt its surviving count
      Bytes pop = good;
      const std::size_t at = kFirstLayer + 12 + (64 * 39) / 8;
      put32(pop, at, get32(pop, at) + 1);
      reseal(pop);
      cases.push_back({pop, DecodeErrorKind::kPopcountMismatch});
    }
    Bytes shape = good;
    put32(shape, kFirstLayer + 8, 40);
    reseal(shape);
    cases.push_back({shape, DecodeErrorKind::kMalformed});
    for (const auto& [bytes, kind] : cases) {
      ++fixtures;
      if (!raises(bytes, kind)) ++fixture_miss;
    }
  }
  Outcome o;
  o.pass = byte_mismatch == 0 && render_mismatch == 0 && fixture_miss == 0;
  o.detail = fmt("20 models: resave diffs %zu, render diffs %zu, fixtures %zu/%zu typed correctly",
                 byte_mismatch, render_mismatch, fixtures - fixture_miss, fixtures);
  return o;
}

// ---- 5: compositing invariants ----------------------------------------------

Outcome compositing() {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t sum_bad = 0, t_bad = 0, depth_bad = 0, oracle_bad = 0;
  double worst = 0.0;
  constexpr std::size_t kRays = 100000;
  for (std::size_t r = 0; r < kRays; ++r) {
    const std::size_t n = 2 + static_cast<std::size_t>(u(gen) * 95);
    Ray ray;
    ray.near = 0.1 + 3.0 * u(gen);
    ray.far = ray.near + 0.1 + 5.0 * u(gen);
    SamplingConfig cfg;
    cfg.n_samples = n;
    cfg.seed = r;
    const auto s = sample_along(ray, cfg, r);
    std::vector<double> sigma(n), rgb(3 * n);
    const double scale = std::pow(10.0, -2.0 + 6.0 * u(gen));  // 1e-2 .. 1e4
    for (std::size_t i = 0; i < n; ++i) {
      sigma[i] = u(gen) < 0.4 ? 0.0 : scale * u(gen);
      for (int c = 0; c < 3; ++c) rgb[3 * i + c] = u(gen);
    }
    const bool white = (r & 1) != 0;
    const auto got = composite(sigma, rgb, s.t, s.delta, white);
    const auto ref = oracle::composite(sigma, rgb, s.t, s.delta, white);
    double sum = 0.0, transmittance = 1.0;
    bool mono = true;
    for (std::size_t i = 0; i < n; ++i) {
      sum += got.weights[i];
      const double next = transmittance - got.weights[i];
      if (next > transmittance) mono = false;
      transmittance = next;
      worst = std::max(worst, std::abs(got.weights[i] - ref.weights[i]));
      worst = std::max(worst, std::abs(transmittance - ref.transmittance[i + 1]));
    }
    if (!(sum >= 0.0 && sum <= 1.0 + 1e-12)) ++sum_bad;
    if (!mono) ++t_bad;
    if (got.opacity > 1e-6 && !(got.depth >= ray.near && got.depth <= ray.far)) ++depth_bad;
    for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(got.rgb[c] - ref.rgb[c]));
    if (worst > 1e-10) ++oracle_bad;
  }
  Outcome o;
  o.pass = sum_bad == 0 && t_bad == 0 && depth_bad == 0 && oracle_bad == 0;
  o.detail = fmt("1e5 rays: sum(w) out of [0,1] %zu, T increases %zu, depth outside %zu, "
                 "max |diff| vs recurrence %.2e (tol 1e-10)",
                 sum_bad, t_bad, depth_bad, worst);
  return o;
}

// ---- 6: benchmark -----------------------------------------------------------

struct Benchmark {
  bool ran = false;
  fs::path out;
  std::map<std::string, double> psnr;  // "original", "pruned_30", ...
  double seconds = 0.0;
};

Benchmark& benchmark() {
  static Benchmark b;
  return b;
}

Outcome benchmark_quality() {
  auto& b = benchmark();
  ExperimentConfig cfg;
  cfg.seed = 1;
  cfg.out = kRoot / "benchmark";
  cfg.dataset.resolution = 96;
  cfg.dataset.n_train = 20;
  cfg.dataset.n_test = 5;
  cfg.train.iterations = 3000;
  cfg.train.retrain_iterations = 500;
  cfg.threads = default_threads();
  fs::remove_all(cfg.out);
  const auto t0 = Clock::now();
  const auto result = run_experiment(cfg);
  b.seconds = seconds_since(t0);
  b.ran = true;
  b.out = cfg.out;
  for (const auto& r : result.records) {
    const std::string key = r.phase == Phase::kOriginal
                                ? "original"
                                : to_string(r.phase) + "_" + fmt("%02d", int(std::lround(r.ratio * 100)));
    b.psnr[key] = r.psnr_mean_db;
  }
  const double orig = b.psnr["original"];
  const int tags[] = {30, 50, 70, 90};
  std::vector<double> pruned{orig}, retrained;
  for (int t : tags) {
    pruned.push_back(b.psnr[fmt("pruned_%02d", t)]);
    retrained.push_back(b.psnr[fmt("retrained_%02d", t)]);
  }
  // Non-increasing along original, 0.3, 0.5, 0.7, 0.9; only the step into 0.3 may rise.
  bool monotone = true;
  for (std::size_t i = 2; i < pruned.size(); ++i) monotone = monotone && pruned[i] <= pruned[i - 1];
  bool retrain_helps = true;
  for (int i = 0; i < 4; ++i) retrain_helps = retrain_helps && retrained[i] >= pruned[i + 1];
  const double drop = orig - pruned[4];
  const double recovered = drop > 0 ? (retrained[3] - pruned[4]) / drop : 0.0;
  Outcome o;
  o.pass = orig >= 24.0 && monotone && drop >= 3.0 && retrain_helps && recovered >= 0.4;
  o.detail = fmt("original %.2f dB; pruned %.2f/%.2f/%.2f/%.2f; retrained %.2f/%.2f/%.2f/%.2f; "
                 "drop@0.9 %.2f dB, recovered %.1f%% (need >= 40%%)",
                 orig, pruned[1], pruned[2], pruned[3], pruned[4], retrained[0], retrained[1],
                 retrained[2], retrained[3], drop, 100 * recovered);
  if (!monotone) o.detail += "; pruned PSNR not monotone";
  if (!retrain_helps) o.detail += "; retraining lost PSNR somewhere";
  return o;
}

// ---- 7: geometry ------------------------------------------------------------

double depth_mae(const RadianceField& field, const DatasetManifest& data) {
  double err = 0.0;
  std::size_t count = 0;
  SamplingConfig cfg = eval_sampling(data, 64);
  for (const View* v : data.split(Split::kTest)) {
    const auto range = data.range_for(*v);
    const auto img = render_image(field, v->camera, range, cfg, default_threads());
    for (std::size_t i = 0; i < v->camera.pixel_count(); ++i) {
      const auto hit = oracle::ray_hit(data.scene, pixel_ray(v->camera, range, i), 10.0);
      if (!hit) continue;
      err += std::abs(static_cast<double>(img.depth.pixels[i]) - *hit);
      ++count;
    }
  }
  return count ? err / static_cast<double>(count) : INFINITY;
}

Outcome geometry() {
  Outcome o;
  const double radius = 0.8;
  const auto sphere = AnalyticScene::single_sphere(radius);
  const std::size_t n = 64;
  const auto grid = sample_density_grid(sphere, Vec3::Constant(-1.5), Vec3::Constant(1.5), {n, n, n},
                                        default_threads());
  const auto mesh = extract_mesh(grid, kDefaultIso);
  const fs::path obj = kRoot / "sphere64.obj";
  export_mesh(mesh, obj);
  const auto parsed = oracle::parse_obj(obj);
  const long chi = oracle::euler_characteristic(parsed.faces, parsed.vertices.size());
  const bool closed = oracle::closed_and_oriented(parsed.faces);
  double worst = 0.0;
  for (const auto& v : parsed.vertices) worst = std::max(worst, std::abs(v.norm() - radius));
  const double voxel = 3.0 / n;
  o.pass = chi == 2 && closed && worst <= 1.5 * voxel;
  o.detail = fmt("sphere 64^3: chi=%ld, closed %s, max radius error %.2f voxels", chi,
                 closed ? "yes" : "no", worst / voxel);

  const auto& b = benchmark();
  if (!b.ran) {
    o.pass = false;
    o.detail += "; depth check needs the criterion 6 models";
    return o;
  }
  const auto data = load_manifest(b.out / "data" / "manifest.txt");
  const double base = depth_mae(load_model(b.out / "models" / "original.nrfp"), data);
  const double kept = depth_mae(load_model(b.out / "models" / "retrained_30.nrfp"), data);
  o.pass = o.pass && kept <= 1.5 * base;
  o.detail += fmt("; depth MAE original %.4f, retrained p=0.3 %.4f (ratio %.2f, limit 1.50)", base, kept,
                  kept / base);
  return o;
}

// ---- 8: determinism ---------------------------------------------------------

Outcome determinism() {
  const fs::path dir = kRoot / "determinism";
  fs::remove_all(dir);
  const std::string common =
      " experiment --seed 1 --resolution 24 --n-train 4 --n-test 2 --iterations 60"
      " --retrain-iterations 20 --rays 128 --samples 16 --mesh-resolution 32 --eval-every 0";
  std::vector<fs::path> outs;
  for (unsigned threads : {1u, 2u, 1u}) {
    const fs::path out = dir / fmt("run%zu_t%u", outs.size(), threads);
    const std::string cmd = std::string("\"") + NERFPRUNE_CLI_PATH + "\"" + common + " --threads " +
                            std::to_string(threads) + " --out \"" + out.string() + "\" > \"" +
                            out.string() + ".log\" 2>&1";
    fs::create_directories(dir);
    const int status = std::system(cmd.c_str());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      return {false, "experiment run failed: see " + out.string() + ".log"};
    }
    outs.push_back(out);
  }
  std::vector<fs::path> files{"results.csv"};
  for (const char* sub : {"models", "meshes"}) {
    for (const auto& e : fs::directory_iterator(outs[0] / sub)) {
      if (e.path().extension() != ".tmp") files.push_back(fs::path(sub) / e.path().filename());
    }
  }
  std::sort(files.begin(), files.end());
  std::size_t differing = 0;
  std::string first;
  for (const auto& f : files) {
    const auto ref = slurp(outs[0] / f);
    for (std::size_t i = 1; i < outs.size(); ++i) {
      if (!fs::exists(outs[i] / f) || slurp(outs[i] / f) != ref) {
        if (differing++ == 0) first = f.string();
      }
    }
  }
  Outcome o;
  o.pass = differing == 0 && files.size() > 10;
  o.detail = fmt("%zu files compared over threads 1/2/1: %zu differ", files.size(), differing);
  if (differing) o.detail += " (first: " + first + ")";
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0 = no time limit
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0) only.insert(std::atoi(argv[++i]));
  }
  fs::create_directories(kRoot);
  const std::vector<Criterion> criteria = {
      {1, "gradient check vs central differences", 60, gradient_check},
      {2, "global pruning count, selection, nesting", 30, pruning_selection},
      {3, "nominal compression", 0, nominal_compression},
      {4, "codec round trip and corruption", 60, codec_round_trip},
      {5, "compositing invariants", 60, compositing},
      {6, "benchmark PSNR: train, prune, retrain", 1200, benchmark_quality},
      {7, "geometry: sphere mesh and depth", 300, geometry},
      {8, "experiment determinism across threads", 0, determinism},
  };
  // Criterion 7 reads the models criterion 6 produced.
  if (only.contains(7)) only.insert(6);
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.contains(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = seconds_since(t0);
    // Criterion 7's budget covers its own work, not the shared benchmark run.
    const bool in_time = c.budget_s == 0 || s <= c.budget_s;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::printf("criterion %d %s: %s | %s | %.1f s%s\n", c.id, pass ? "PASS" : "FAIL", c.name,
                o.detail.c_str(), s,
                c.budget_s > 0 ? fmt(" (limit %.0f s%s)", c.budget_s, in_time ? "" : ", EXCEEDED").c_str()
                               : "");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
