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

#include "nerfprune/scene.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "nerfprune/error.hpp"
#include "nerfprune/imageio.hpp"
#include "nerfprune/parallel.hpp"
#include "nerfprune/random.hpp"

namespace nerfprune {

bool Primitive::contains(const Vec3& p) const {
  const Vec3 d = p - center;
  if (shape == ShapeKind::kSphere) return d.squaredNorm() <= size.x() * size.x();
  return std::abs(d.x()) <= size.x() && std::abs(d.y()) <= size.y() && std::abs(d.z()) <= size.z();
}

void AnalyticScene::validate() const {
  if (primitives.empty()) throw ConfigError("scene has no primitives");
  for (const auto& p : primitives) {
    if (!(p.density >= 0.0)) throw ConfigError("primitive density must be >= 0");
  }
  if (!(bounds_radius > 0.0)) throw ConfigError("scene bounds radius must be > 0");
}

double AnalyticScene::density_at(const Vec3& p) const {
  double s = 0.0;
  for (const auto& prim : primitives) {
    if (prim.contains(p)) s += prim.density;
  }
  return s;
}

Vec3 AnalyticScene::color_at(const Vec3& p, const Vec3& direction) const {
  Vec3 c = Vec3::Zero();
  double total = 0.0;
  for (const auto& prim : primitives) {
    if (prim.contains(p)) {
      c += prim.density * prim.albedo;
      total += prim.density;
    }
  }
  if (total <= 0.0) return Vec3::Zero();
  const double facing = std::max(0.0, -direction.dot(light));
  return (c / total * (0.75 + 0.25 * facing)).cwiseMin(1.0);
}

void AnalyticScene::evaluate(std::span<const double> positions, std::span<const double> directions,
                             std::span<double> sigma, std::span<double> rgb, FieldScratch*) const {
  const std::size_t n = positions.size() / 3;
  if (directions.size() != positions.size() || sigma.size() != n || rgb.size() != 3 * n) {
    throw ContractError("analytic evaluate: span sizes disagree");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 p(positions[3 * i], positions[3 * i + 1], positions[3 * i + 2]);
    const Vec3 d(directions[3 * i], directions[3 * i + 1], directions[3 * i + 2]);
    sigma[i] = density_at(p);
    const Vec3 c = color_at(p, d);
    for (int k = 0; k < 3; ++k) rgb[3 * i + k] = c[k];
  }
}

AnalyticScene AnalyticScene::benchmark() {
  AnalyticScene s;
  s.primitives = {
      {ShapeKind::kSphere, Vec3(-0.5, -0.35, 0.05), Vec3::Constant(0.5), Vec3(0.85, 0.2, 0.15), 60.0},
      {ShapeKind::kSphere, Vec3(0.55, 0.35, 0.0), Vec3::Constant(0.4), Vec3(0.2, 0.35, 0.85), 60.0},
      {ShapeKind::kSphere, Vec3(0.0, 0.45, 0.6), Vec3::Constant(0.35), Vec3(0.25, 0.8, 0.3), 3.0},
      {ShapeKind::kBox, Vec3(0.05, -0.05, -0.6), Vec3(0.8, 0.6, 0.15), Vec3(0.9, 0.75, 0.3), 60.0},
  };
  s.bounds_radius = 1.5;
  return s;
}

AnalyticScene AnalyticScene::single_sphere(double radius, double density) {
  AnalyticScene s;
  s.primitives = {{ShapeKind::kSphere, Vec3::Zero(), Vec3::Constant(radius), Vec3(0.8, 0.8, 0.8), density}};
  s.bounds_radius = std::max(1.5, radius * 1.2);
  return s;
}

std::vector<const View*> DatasetManifest::split(Split s) const {
  std::vector<const View*> out;
  for (const auto& v : views) {
    if (v.split == s) out.push_back(&v);
  }
  return out;
}

Image DatasetManifest::load_target(const View& view) const {
  auto pfm = root / view.image;
  pfm.replace_extension(".pfm");
  if (std::filesystem::exists(pfm)) return read_pfm(pfm);
  return read_image(root / view.image);
}

std::string to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }

std::vector<Camera> dataset_cameras(const DatasetOptions& o) {
  if (o.resolution == 0) throw ConfigError("resolution must be >= 1");
  if (!(o.fov_degrees > 0.0 && o.fov_degrees < 180.0)) throw ConfigError("fov must lie in (0, 180)");
  const double res = static_cast<double>(o.resolution);
  Intrinsics in;
  in.width = in.height = o.resolution;
  in.cx = in.cy = res / 2.0;
  in.focal = 0.5 * res / std::tan(0.5 * o.fov_degrees * std::numbers::pi / 180.0);
  std::vector<Camera> cams;
  const std::size_t total = o.n_train + o.n_test;
  for (std::size_t v = 0; v < total; ++v) {
    const double az = 2.0 * std::numbers::pi * counter_uniform(o.seed, stream::kCameras, 2 * v);
    const double el_deg = -15.0 + 75.0 * counter_uniform(o.seed, stream::kCameras, 2 * v + 1);
    const double el = el_deg * std::numbers::pi / 180.0;
    const Vec3 eye = o.camera_radius *
                     Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    cams.push_back(Camera::look_at(eye, Vec3::Zero(), Vec3::UnitZ(), in));
  }
  return cams;
}

RenderedImage render_ground_truth(const AnalyticScene& scene, const Camera& camera,
                                  DepthRange range, std::size_t samples, bool white_background,
                                  unsigned threads) {
  SamplingConfig cfg;
  cfg.n_samples = samples;
  cfg.stratified = false;
  cfg.white_background = white_background;
  return render_image(scene, camera, range, cfg, threads);
}

DatasetManifest generate_dataset(const AnalyticScene& scene, const DatasetOptions& o,
                                 const std::filesystem::path& out_dir) {
  scene.validate();
  if (o.n_train < 1 || o.n_test < 1) throw ConfigError("dataset needs at least one train and one test view");
  if (o.base_samples < 2 || o.oracle_factor < 1) throw ConfigError("invalid oracle sample count");

  DatasetManifest m;
  m.dataset_id = o.dataset_id;
  m.seed = o.seed;
  m.range_padding = o.range_padding;
  m.oracle_samples = o.base_samples * o.oracle_factor;
  m.scene = scene;
  m.root = out_dir;

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "images").string() + ": " + ec.message());

  const auto cams = dataset_cameras(o);
  for (std::size_t v = 0; v < cams.size(); ++v) {
    char name[32];
    std::snprintf(name, sizeof(name), "images/view_%04zu.ppm", v);
    m.views.push_back({name, v < o.n_train ? Split::kTrain : Split::kTest, cams[v]});
  }
  // Each view renders single-threaded; views are spread over the workers.
  parallel_for(m.views.size(), o.threads, [&](std::size_t v) {
    const View& view = m.views[v];
    const auto rendered = render_ground_truth(scene, view.camera, m.range_for(view),
                                              m.oracle_samples, m.white_background, 1);
    write_image(out_dir / view.image, rendered.rgb);
    auto pfm = out_dir / view.image;
    pfm.replace_extension(".pfm");
    write_pfm(pfm, rendered.rgb);
  });
  save_manifest(m, out_dir / "manifest.txt");
  return m;
}

namespace {

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string vec(const Vec3& v) { return num(v.x()) + " " + num(v.y()) + " " + num(v.z()); }

class LineReader {
 public:
  LineReader(std::vector<std::string> tokens, std::size_t line, const std::filesystem::path& path)
      : tokens_(std::move(tokens)), line_(line), path_(path) {}

  const std::string& key() const { return tokens_.front(); }
  std::size_t arity() const { return tokens_.size() - 1; }

  void expect_arity(std::size_t n) const {
    if (arity() != n) {
      fail("'" + key() + "' expects " + std::to_string(n) + " values, got " + std::to_string(arity()));
    }
  }
  const std::string& str(std::size_t i) const { return tokens_.at(i + 1); }
  double real(std::size_t i) const {
    double v = 0.0;
    const auto& s = str(i);
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail("bad number '" + s + "'");
    return v;
  }
  std::uint64_t integer(std::size_t i) const {
    std::uint64_t v = 0;
    const auto& s = str(i);
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail("bad integer '" + s + "'");
    return v;
  }
  Vec3 vec3(std::size_t i) const { return {real(i), real(i + 1), real(i + 2)}; }

  [[noreturn]] void fail(const std::string& what) const {
    throw DecodeError(DecodeErrorKind::kMalformed,
                      path_.string() + ":" + std::to_string(line_) + ": " + what);
  }

 private:
  std::vector<std::string> tokens_;
  std::size_t line_;
  std::filesystem::path path_;
};

}  // namespace

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "# nerfprune dataset manifest\n";
  out << "format_version " << m.format_version << "\n";
  out << "dataset_id " << m.dataset_id << "\n";
  out << "seed " << m.seed << "\n";
  out << "scene_radius " << num(m.scene.bounds_radius) << "\n";
  out << "range_padding " << num(m.range_padding) << "\n";
  out << "oracle_samples " << m.oracle_samples << "\n";
  out << "white_background " << (m.white_background ? 1 : 0) << "\n";
  out << "light " << vec(m.scene.light) << "\n";
  out << "primitive_count " << m.scene.primitives.size() << "\n";
  for (const auto& p : m.scene.primitives) {
    out << "primitive " << (p.shape == ShapeKind::kSphere ? "sphere" : "box") << " "
        << vec(p.center) << " " << vec(p.size) << " " << vec(p.albedo) << " " << num(p.density)
        << "\n";
  }
  out << "view_count " << m.views.size() << "\n";
  out << "# view index split file width height focal cx cy pose[3x4 row-major]\n";
  for (std::size_t i = 0; i < m.views.size(); ++i) {
    const auto& v = m.views[i];
    const auto& in = v.camera.intrinsics;
    out << "view " << i << " " << to_string(v.split) << " " << v.image << " " << in.width << " "
        << in.height << " " << num(in.focal) << " " << num(in.cx) << " " << num(in.cy);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) out << " " << num(v.camera.pose(r, c));
    }
    out << "\n";
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << out.str();
  if (!f) throw IoError("write failed for " + path.string());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open manifest " + path.string());
  DatasetManifest m;
  m.root = path.parent_path();
  m.scene.primitives.clear();
  std::set<std::string> seen_keys;
  std::size_t primitive_count = 0;
  std::size_t view_count = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> tokens;
    for (std::string tok; ls >> tok;) tokens.push_back(tok);
    if (tokens.empty() || tokens.front().starts_with("#")) continue;
    LineReader r(std::move(tokens), line_no, path);
    const std::string& key = r.key();
    if (key != "primitive" && key != "view" && !seen_keys.insert(key).second) {
      r.fail("duplicate key '" + key + "'");
    }
    if (key == "format_version") {
      r.expect_arity(1);
      m.format_version = static_cast<int>(r.integer(0));
      if (m.format_version != DatasetManifest::kFormatVersion) {
        throw DecodeError(DecodeErrorKind::kUnsupportedVersion,
                          path.string() + ": manifest format_version " +
                              std::to_string(m.format_version) + " is not supported");
      }
    } else if (key == "dataset_id") {
      r.expect_arity(1);
      m.dataset_id = r.str(0);
    } else if (key == "seed") {
      r.expect_arity(1);
      m.seed = r.integer(0);
    } else if (key == "scene_radius") {
      r.expect_arity(1);
      m.scene.bounds_radius = r.real(0);
    } else if (key == "range_padding") {
      r.expect_arity(1);
      m.range_padding = r.real(0);
    } else if (key == "oracle_samples") {
      r.expect_arity(1);
      m.oracle_samples = r.integer(0);
    } else if (key == "white_background") {
      r.expect_arity(1);
      m.white_background = r.integer(0) != 0;
    } else if (key == "light") {
      r.expect_arity(3);
      m.scene.light = r.vec3(0);
    } else if (key == "primitive_count") {
      r.expect_arity(1);
      primitive_count = r.integer(0);
    } else if (key == "primitive") {
      r.expect_arity(11);
      Primitive p;
      if (r.str(0) == "sphere") {
        p.shape = ShapeKind::kSphere;
      } else if (r.str(0) == "box") {
        p.shape = ShapeKind::kBox;
      } else {
        r.fail("unknown primitive shape '" + r.str(0) + "'");
      }
      p.center = r.vec3(1);
      p.size = r.vec3(4);
      p.albedo = r.vec3(7);
      p.density = r.real(10);
      m.scene.primitives.push_back(p);
    } else if (key == "view_count") {
      r.expect_arity(1);
      view_count = r.integer(0);
    } else if (key == "view") {
      r.expect_arity(20);
      if (r.integer(0) != m.views.size()) r.fail("views must be listed in index order");
      View v;
      if (r.str(1) == "train") {
        v.split = Split::kTrain;
      } else if (r.str(1) == "test") {
        v.split = Split::kTest;
      } else {
        r.fail("unknown split '" + r.str(1) + "'");
      }
      v.image = r.str(2);
      auto& in = v.camera.intrinsics;
      in.width = r.integer(3);
      in.height = r.integer(4);
      in.focal = r.real(5);
      in.cx = r.real(6);
      in.cy = r.real(7);
      for (int row = 0; row < 3; ++row) {
        for (int c = 0; c < 4; ++c) v.camera.pose(row, c) = r.real(8 + static_cast<std::size_t>(row * 4 + c));
      }
      m.views.push_back(std::move(v));
    } else {
      r.fail("unknown key '" + key + "'");
    }
  }
  if (!seen_keys.contains("format_version")) {
    throw DecodeError(DecodeErrorKind::kMalformed, path.string() + ": missing format_version");
  }
  if (primitive_count != m.scene.primitives.size() || view_count != m.views.size()) {
    throw DecodeError(DecodeErrorKind::kMalformed,
                      path.string() + ": declared primitive/view counts do not match entries");
  }
  try {
    m.scene.validate();
  } catch (const ConfigError& e) {
    throw DecodeError(DecodeErrorKind::kMalformed, path.string() + ": " + e.what());
  }
  std::set<std::string> files;
  for (const auto& v : m.views) {
    if (!files.insert(v.image).second) {
      throw DecodeError(DecodeErrorKind::kMalformed,
                        path.string() + ": image " + v.image + " listed twice");
    }
    try {
      v.camera.validate();
    } catch (const ContractError& e) {
      throw DecodeError(DecodeErrorKind::kMalformed, path.string() + ": " + v.image + ": " + e.what());
    }
    const auto [w, h] = read_image_size(m.root / v.image);
    if (w != v.camera.intrinsics.width || h != v.camera.intrinsics.height) {
      throw DecodeError(DecodeErrorKind::kMalformed,
                        (m.root / v.image).string() + ": size " + std::to_string(w) + "x" +
                            std::to_string(h) + " does not match manifest");
    }
  }
  return m;
}

}  // namespace nerfprune
