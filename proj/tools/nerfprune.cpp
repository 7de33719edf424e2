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

// nerfprune: train, prune, retrain and inspect a small radiance field.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 I/O error,
// 4 corrupt or unreadable input file, 5 numerical failure, 6 internal
// contract violation, 1 anything else.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "nerfprune/codec.hpp"
#include "nerfprune/error.hpp"
#include "nerfprune/experiment.hpp"
#include "nerfprune/geometry.hpp"
#include "nerfprune/metrics.hpp"
#include "nerfprune/parallel.hpp"
#include "nerfprune/pruner.hpp"
#include "nerfprune/scene.hpp"
#include "nerfprune/trainer.hpp"

namespace {

using namespace nerfprune;
namespace fs = std::filesystem;

enum ExitCode : int {
  kOk = 0,
  kOther = 1,
  kUsage = 2,
  kIo = 3,
  kDecode = 4,
  kNumeric = 5,
  kContract = 6,
};

const CLI::Validator kUnitRatio(
    [](std::string& s) -> std::string {
      double p = 0.0;
      try {
        std::size_t used = 0;
        p = std::stod(s, &used);
        if (used != s.size()) return "not a number: " + s;
      } catch (const std::exception&) {
        return "not a number: " + s;
      }
      if (!(p >= 0.0 && p < 1.0)) return "ratio must be in [0, 1), got " + s;
      return {};
    },
    "in [0, 1)");

fs::path sidecar(const fs::path& file, const char* suffix) {
  auto p = file;
  p += suffix;
  return p;
}

struct Common {
  std::uint64_t seed = 1;
  unsigned threads = default_threads();
};

void add_threads(CLI::App* cmd, Common& c) {
  cmd->add_option("--threads", c.threads, "Worker threads; results do not depend on it")
      ->capture_default_str()
      ->check(CLI::Range(1u, 1024u));
}

void add_seed(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Seed for every random stream")->capture_default_str();
}

void add_train_flags(CLI::App* cmd, TrainConfig& t) {
  cmd->add_option("--rays", t.rays_per_batch, "Rays per optimisation batch")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{1}, std::size_t{1} << 20));
  cmd->add_option("--samples", t.samples_per_ray, "Samples per ray for training and evaluation")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{2}, std::size_t{4096}));
  cmd->add_option("--lr", t.adam.lr, "Adam learning rate")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--eval-every", t.eval_every, "Checkpoint period in iterations (0 = ends only)")
      ->capture_default_str();
}

void print_eval(const char* label, const EvalResult& r) {
  std::printf("%s psnr_mean_db=%.6f psnr_of_mean_mse_db=%.6f mse_mean=%.9g\n", label, r.mean_psnr,
              r.psnr_of_mean_mse, r.mean_mse);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radiance-field training, global magnitude pruning and sparse model storage"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  Common common;
  TrainConfig tcfg = desk_train_config();
  DatasetOptions dopt;
  fs::path out, data_dir, model_path;
  double ratio = 0.0;
  std::size_t mesh_res = 128;
  double iso = kDefaultIso;
  std::size_t view = 0;
  std::string scene_name = "benchmark";
  std::function<void()> action;

  // gen-scene
  auto* gen = app.add_subcommand("gen-scene", "Render the synthetic dataset with the analytic oracle");
  gen->add_option("--out", out, "Dataset directory to create")->required();
  add_seed(gen, common);
  gen->add_option("--resolution", dopt.resolution, "Image width and height in pixels")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{4}, std::size_t{4096}));
  gen->add_option("--n-train", dopt.n_train, "Training views")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{1}, std::size_t{10000}));
  gen->add_option("--n-test", dopt.n_test, "Test views")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{1}, std::size_t{10000}));
  gen->add_option("--scene", scene_name, "Scene: benchmark or sphere")
      ->capture_default_str()
      ->check(CLI::IsMember({"benchmark", "sphere"}));
  add_threads(gen, common);
  gen->callback([&] {
    action = [&] {
      dopt.seed = common.seed;
      dopt.threads = common.threads;
      dopt.dataset_id = scene_name;
      RunManifest m{"gen-scene", common.seed,
                    "{\"resolution\":" + std::to_string(dopt.resolution) +
                        ",\"n_train\":" + std::to_string(dopt.n_train) +
                        ",\"n_test\":" + std::to_string(dopt.n_test) + ",\"scene\":\"" +
                        scene_name + "\"}",
                    {}, {out / "manifest.txt", out / "images"}};
      m.write(out / "run_manifest.json");
      const auto scene = scene_name == "sphere" ? AnalyticScene::single_sphere(0.8)
                                                : AnalyticScene::benchmark();
      const auto d = generate_dataset(scene, dopt, out);
      std::printf("wrote %zu views to %s\n", d.views.size(), out.string().c_str());
    };
  });

  // train
  auto* tr = app.add_subcommand("train", "Train a radiance field from scratch");
  tr->add_option("--data", data_dir, "Dataset directory (from gen-scene)")
      ->required()
      ->check(CLI::ExistingDirectory);
  tr->add_option("--out", out, "Model file to write")->required();
  add_seed(tr, common);
  tr->add_option("--iterations", tcfg.iterations, "Optimisation steps")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{1}, std::size_t{10000000}));
  add_train_flags(tr, tcfg);
  add_threads(tr, common);
  tr->callback([&] {
    action = [&] {
      tcfg.seed = common.seed;
      tcfg.threads = common.threads;
      tcfg.validate();
      const auto data = load_manifest(data_dir / "manifest.txt");
      RunManifest m{"train", common.seed,
                    "{\"iterations\":" + std::to_string(tcfg.iterations) +
                        ",\"rays_per_batch\":" + std::to_string(tcfg.rays_per_batch) +
                        ",\"samples_per_ray\":" + std::to_string(tcfg.samples_per_ray) + "}",
                    {data_dir}, {out, sidecar(out, ".log.csv")}};
      m.write(sidecar(out, ".manifest.json"));
      auto field = RadianceField::create(FieldArchitecture{}, common.seed);
      train(field, data, tcfg).write_csv(sidecar(out, ".log.csv"));
      const auto bytes = save_model(field, out);
      std::printf("wrote %s (%zu bytes)\n", out.string().c_str(), bytes.encoded_bytes);
    };
  });

  // prune
  auto* pr = app.add_subcommand("prune", "Global one-shot magnitude pruning");
  pr->add_option("--model", model_path, "Input model")->required()->check(CLI::ExistingFile);
  pr->add_option("--ratio", ratio, "Fraction of weights to remove")->required()->check(kUnitRatio);
  pr->add_option("--out", out, "Pruned model file to write")->required();
  pr->callback([&] {
    action = [&] {
      auto field = load_model(model_path);
      const auto report = apply_prune(field, PruneConfig{ratio});
      const auto bytes = save_model(field, out);
      report.write_text(sidecar(out, ".prune.txt"));
      const auto summary = compression_summary(report, bytes);
      std::printf("pruned %zu of %zu weights, nominal x%.2f, measured x%.2f\n",
                  report.pruned_count, report.total_weights, summary.nominal_ratio,
                  summary.measured_ratio);
    };
  });

  // retrain
  auto* rt = app.add_subcommand("retrain", "Fine-tune a pruned model with its mask frozen");
  rt->add_option("--model", model_path, "Pruned input model")->required()->check(CLI::ExistingFile);
  rt->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  rt->add_option("--out", out, "Retrained model file to write")->required();
  add_seed(rt, common);
  rt->add_option("--retrain-iterations", tcfg.retrain_iterations, "Retraining steps")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{0}, std::size_t{10000000}));
  add_train_flags(rt, tcfg);
  add_threads(rt, common);
  rt->callback([&] {
    action = [&] {
      tcfg.seed = common.seed;
      tcfg.threads = common.threads;
      const auto data = load_manifest(data_dir / "manifest.txt");
      auto field = load_model(model_path);
      if (verify_sparsity(field).sparsity == 0.0) {
        throw ConfigError(model_path.string() + " has no pruned weights; run prune first");
      }
      RunManifest m{"retrain", common.seed,
                    "{\"retrain_iterations\":" + std::to_string(tcfg.retrain_iterations) +
                        ",\"rays_per_batch\":" + std::to_string(tcfg.rays_per_batch) +
                        ",\"samples_per_ray\":" + std::to_string(tcfg.samples_per_ray) + "}",
                    {model_path, data_dir}, {out, sidecar(out, ".log.csv")}};
      m.write(sidecar(out, ".manifest.json"));
      retrain(field, data, tcfg).write_csv(sidecar(out, ".log.csv"));
      save_model(field, out);
      std::printf("wrote %s\n", out.string().c_str());
    };
  });

  // render
  auto* rd = app.add_subcommand("render", "Render every test view of a dataset");
  rd->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  rd->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  rd->add_option("--out", out, "Directory for view_####.ppm")->required();
  rd->add_option("--samples", tcfg.samples_per_ray, "Samples per ray")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{2}, std::size_t{4096}));
  add_threads(rd, common);
  rd->callback([&] {
    action = [&] {
      const auto data = load_manifest(data_dir / "manifest.txt");
      const auto field = load_model(model_path);
      write_renders(field, data, eval_sampling(data, tcfg.samples_per_ray), common.threads, out);
      std::printf("wrote renders to %s\n", out.string().c_str());
    };
  });

  // mesh
  auto* ms = app.add_subcommand("mesh", "Extract a marching-cubes mesh of the density field");
  ms->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  ms->add_option("--out", out, "OBJ file to write")->required();
  ms->add_option("--resolution", mesh_res, "Grid samples per axis over [-1.5, 1.5]^3")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{2}, std::size_t{1024}));
  ms->add_option("--iso", iso, "Density level of the surface")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  add_threads(ms, common);
  ms->callback([&] {
    action = [&] {
      const auto field = load_model(model_path);
      const auto mesh = mesh_field(field, {mesh_res, iso, 1.5, common.threads});
      export_mesh(mesh, out);
      std::printf("wrote %zu vertices, %zu triangles to %s\n", mesh.vertices.size(),
                  mesh.triangles.size(), out.string().c_str());
    };
  });

  // depth
  auto* dp = app.add_subcommand("depth", "Export the expected-depth map of one test view");
  dp->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  dp->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  dp->add_option("--out", out, "Output stem; writes <stem>.f32 and <stem>.pgm")->required();
  dp->add_option("--view", view, "Index into the test views")->capture_default_str();
  dp->add_option("--samples", tcfg.samples_per_ray, "Samples per ray")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{2}, std::size_t{4096}));
  add_threads(dp, common);
  dp->callback([&] {
    action = [&] {
      const auto data = load_manifest(data_dir / "manifest.txt");
      const auto field = load_model(model_path);
      write_depth(field, data, view, eval_sampling(data, tcfg.samples_per_ray), common.threads, out);
      std::printf("wrote %s.f32 and %s.pgm\n", out.string().c_str(), out.string().c_str());
    };
  });

  // eval
  auto* ev = app.add_subcommand("eval", "Score a model on the test views (PSNR, MSE)");
  ev->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--samples", tcfg.samples_per_ray, "Samples per ray")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{2}, std::size_t{4096}));
  add_threads(ev, common);
  ev->callback([&] {
    action = [&] {
      const auto data = load_manifest(data_dir / "manifest.txt");
      const auto field = load_model(model_path);
      print_eval(model_path.string().c_str(),
                 evaluate_model(field, data, eval_sampling(data, tcfg.samples_per_ray),
                                common.threads));
    };
  });

  // experiment
  ExperimentConfig ecfg;
  ecfg.train.rays_per_batch = tcfg.rays_per_batch;
  auto* ex = app.add_subcommand("experiment", "Full protocol: train, prune at 30/50/70/90%, retrain, report");
  add_seed(ex, common);
  ex->add_option("--out", ecfg.out, "Output directory")->capture_default_str();
  ex->add_option("--iterations", ecfg.train.iterations, "Training steps for the original model")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{1}, std::size_t{10000000}));
  ex->add_option("--retrain-iterations", ecfg.train.retrain_iterations, "Retraining steps per ratio")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{0}, std::size_t{10000000}));
  ex->add_option("--resolution", ecfg.dataset.resolution, "Image width and height in pixels")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{4}, std::size_t{4096}));
  ex->add_option("--mesh-resolution", ecfg.mesh_resolution, "Mesh grid samples per axis")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{2}, std::size_t{1024}));
  ex->add_option("--iso", ecfg.iso, "Mesh density level")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  ex->add_option("--n-train", ecfg.dataset.n_train, "Training views")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{1}, std::size_t{10000}));
  ex->add_option("--n-test", ecfg.dataset.n_test, "Test views")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{1}, std::size_t{10000}));
  add_train_flags(ex, ecfg.train);
  add_threads(ex, common);
  ex->callback([&] {
    action = [&] {
      ecfg.seed = common.seed;
      ecfg.threads = common.threads;
      const auto result = run_experiment(ecfg);
      for (const auto& w : result.trend.warnings) std::fprintf(stderr, "trend warning: %s\n", w.c_str());
      for (const auto& f : result.trend.failures) std::fprintf(stderr, "trend failure: %s\n", f.c_str());
      std::printf("wrote %s\n", (ecfg.out / "results.csv").string().c_str());
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    action();
    return kOk;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIo;
  } catch (const DecodeError& e) {
    std::fprintf(stderr, "invalid input file: %s\n", e.what());
    return kDecode;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumeric;
  } catch (const ContractError& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kContract;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kOther;
  }
}
