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

#include "support/oracles.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace oracle {

std::vector<double> gemm(bool transpose_a, const std::vector<float>& a, std::size_t a_rows,
                         std::size_t a_cols, const std::vector<float>& b, std::size_t b_cols) {
  const std::size_t m = transpose_a ? a_cols : a_rows;
  const std::size_t k = transpose_a ? a_rows : a_cols;
  std::vector<double> c(m * b_cols, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < b_cols; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = transpose_a ? a[p * a_cols + i] : a[i * a_cols + p];
        s += av * static_cast<double>(b[p * b_cols + j]);
      }
      c[i * b_cols + j] = s;
    }
  }
  return c;
}

std::vector<double> encode(const std::vector<double>& v, std::size_t l, bool identity) {
  std::vector<double> out;
  if (identity) out = v;
  for (std::size_t k = 0; k < l; ++k) {
    const double f = std::ldexp(std::numbers::pi, static_cast<int>(k));
    for (double x : v) out.push_back(std::sin(f * x));
    for (double x : v) out.push_back(std::cos(f * x));
  }
  return out;
}

Composite composite(const std::vector<double>& sigma, const std::vector<double>& rgb,
                    const std::vector<double>& t, const std::vector<double>& delta, bool white) {
  Composite c;
  const std::size_t n = sigma.size();
  c.transmittance.assign(n + 1, 1.0);
  double wsum = 0.0;
  double dsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 1.0 - std::exp(-sigma[i] * delta[i]);
    const double w = c.transmittance[i] * a;
    c.transmittance[i + 1] = c.transmittance[i] * std::exp(-sigma[i] * delta[i]);
    c.weights.push_back(w);
    c.rgb += w * Vec3(rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]);
    wsum += w;
    dsum += w * t[i];
  }
  c.opacity = wsum;
  if (white) c.rgb += Vec3::Constant(c.transmittance[n]);
  c.depth = wsum >= 1e-6 ? dsum / wsum : 0.0;
  return c;
}

// ---------------------------------------------------------------------------

std::size_t ShadowField::Net::fan_in(std::size_t l) const {
  return (skip && *skip == l) ? widths[l] + widths[0] : widths[l];
}

ShadowField::ShadowField(const nerfprune::RadianceField& field) : enc_(field.encoding()) {
  const nerfprune::Mlp* src[2] = {&field.trunk(), &field.head()};
  for (int n = 0; n < 2; ++n) {
    nets_[n].widths = src[n]->spec().layer_widths;
    nets_[n].skip = src[n]->spec().skip_input_at;
    for (const auto& layer : src[n]->layers()) {
      nets_[n].w.emplace_back(layer.weight.values.begin(), layer.weight.values.end());
      nets_[n].b.emplace_back(layer.bias.values.begin(), layer.bias.values.end());
    }
  }
}

namespace {

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// One point through one network.
std::vector<double> run(const ShadowField::Net& net, const std::vector<double>& x,
                        std::vector<std::uint8_t>* pattern) {
  std::vector<double> a = x;
  const std::size_t layers = net.widths.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t fan = net.fan_in(l);
    if (a.size() != fan) throw std::logic_error("shadow: width mismatch");
    const std::size_t out = net.widths[l + 1];
    std::vector<double> z(out);
    for (std::size_t o = 0; o < out; ++o) {
      double s = net.b[l][o];
      for (std::size_t p = 0; p < fan; ++p) s += net.w[l][o * fan + p] * a[p];
      z[o] = s;
    }
    if (l + 1 < layers) {
      for (double& v : z) {
        if (pattern) pattern->push_back(v > 0.0);
        v = std::max(v, 0.0);
      }
      if (net.skip && *net.skip == l + 1) z.insert(z.end(), x.begin(), x.end());
    }
    a = std::move(z);
  }
  return a;
}

}  // namespace

double ShadowField::loss_impl(const Problem& p, std::vector<std::uint8_t>* pattern) const {
  double total = 0.0;
  for (std::size_t r = 0; r < p.rays.size(); ++r) {
    const auto& ray = p.rays[r];
    const std::size_t n = p.t[r].size();
    std::vector<double> sigma(n), rgb(3 * n);
    const std::vector<double> d{ray.direction.x(), ray.direction.y(), ray.direction.z()};
    const auto dir_enc = encode(d, enc_.l_dir, enc_.include_identity);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 pos = ray.origin + p.t[r][i] * ray.direction;
      const auto x = encode({pos.x(), pos.y(), pos.z()}, enc_.l_pos, enc_.include_identity);
      const auto trunk_out = run(nets_[0], x, pattern);
      sigma[i] = softplus(trunk_out[0]);
      std::vector<double> h(trunk_out.begin() + 1, trunk_out.end());
      h.insert(h.end(), dir_enc.begin(), dir_enc.end());
      const auto head_out = run(nets_[1], h, pattern);
      for (int c = 0; c < 3; ++c) rgb[3 * i + c] = logistic(head_out[c]);
    }
    const auto comp = composite(sigma, rgb, p.t[r], p.delta[r], p.white);
    for (int c = 0; c < 3; ++c) {
      const double e = comp.rgb[c] - p.targets[r][c];
      total += e * e;
    }
  }
  return total / static_cast<double>(3 * p.rays.size());
}

double ShadowField::loss(const Problem& p) const { return loss_impl(p, nullptr); }

ShadowField::FdResult ShadowField::central_difference(const Problem& p, std::size_t net,
                                                      std::size_t layer, bool bias,
                                                      std::size_t index, double h) {
  double& param = bias ? nets_[net].b[layer][index] : nets_[net].w[layer][index];
  const double saved = param;
  FdResult r;
  for (int attempt = 0; attempt < 6; ++attempt, h *= 0.1) {
    std::vector<std::uint8_t> plus_pattern, minus_pattern;
    param = saved + h;
    const double lp = loss_impl(p, &plus_pattern);
    param = saved - h;
    const double lm = loss_impl(p, &minus_pattern);
    param = saved;
    r.value = (lp - lm) / (2.0 * h);
    if (plus_pattern == minus_pattern) return r;
    r.kink = true;
  }
  return r;
}

// ---------------------------------------------------------------------------

namespace {

std::optional<double> hit_sphere(const nerfprune::Primitive& s, const nerfprune::Ray& ray) {
  const Vec3 oc = ray.origin - s.center;
  const double b = oc.dot(ray.direction);
  const double c = oc.squaredNorm() - s.size.x() * s.size.x();
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double root = std::sqrt(disc);
  for (double t : {-b - root, -b + root}) {
    if (t >= ray.near && t <= ray.far) return t;
  }
  return std::nullopt;
}

std::optional<double> hit_box(const nerfprune::Primitive& box, const nerfprune::Ray& ray) {
  double t0 = ray.near;
  double t1 = ray.far;
  for (int a = 0; a < 3; ++a) {
    const double lo = box.center[a] - box.size[a];
    const double hi = box.center[a] + box.size[a];
    const double o = ray.origin[a];
    const double d = ray.direction[a];
    if (std::abs(d) < 1e-15) {
      if (o < lo || o > hi) return std::nullopt;
      continue;
    }
    double ta = (lo - o) / d;
    double tb = (hi - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  return t0;
}

}  // namespace

std::optional<double> ray_hit(const nerfprune::AnalyticScene& scene, const nerfprune::Ray& ray,
                              double min_density) {
  std::optional<double> best;
  for (const auto& prim : scene.primitives) {
    if (prim.density < min_density) continue;
    const auto t = prim.shape == nerfprune::ShapeKind::kSphere ? hit_sphere(prim, ray)
                                                               : hit_box(prim, ray);
    if (t && (!best || *t < *best)) best = t;
  }
  return best;
}

std::vector<std::size_t> pruning_selection(const std::vector<float>& flat, std::size_t num,
                                           std::size_t den) {
  std::vector<std::size_t> order(flat.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(flat[a]) < std::abs(flat[b]);
  });
  const std::size_t k = num * flat.size() / den;
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

ObjMesh parse_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  ObjMesh mesh;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      double x, y, z;
      ss >> x >> y >> z;
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::array<std::uint32_t, 3> f{};
      for (auto& v : f) {
        ss >> v;
        v -= 1;
      }
      mesh.faces.push_back(f);
    }
  }
  return mesh;
}

long euler_characteristic(const std::vector<std::array<std::uint32_t, 3>>& faces,
                          std::size_t vertex_count) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
  for (const auto& f : faces) {
    for (int e = 0; e < 3; ++e) {
      const auto a = f[e];
      const auto b = f[(e + 1) % 3];
      edges[{std::min(a, b), std::max(a, b)}]++;
    }
  }
  return static_cast<long>(vertex_count) - static_cast<long>(edges.size()) +
         static_cast<long>(faces.size());
}

bool closed_and_oriented(const std::vector<std::array<std::uint32_t, 3>>& faces) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
  for (const auto& f : faces) {
    for (int e = 0; e < 3; ++e) directed[{f[e], f[(e + 1) % 3]}]++;
  }
  for (const auto& [edge, count] : directed) {
    if (count != 1) return false;
    const auto twin = directed.find({edge.second, edge.first});
    if (twin == directed.end() || twin->second != 1) return false;
  }
  return true;
}

std::uint32_t crc32(const std::uint8_t* data, std::size_t size) {
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < size; ++i) {
    crc ^= data[i];
    for (int b = 0; b < 8; ++b) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
  }
  return ~crc;
}

}  // namespace oracle
