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

#include "nerfprune/geometry.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <bit>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <unordered_map>

#include "nerfprune/error.hpp"
#include "nerfprune/imageio.hpp"
#include "nerfprune/parallel.hpp"

namespace nerfprune {

Vec3 DensityGrid::voxel_size() const {
  return Vec3((hi.x() - lo.x()) / static_cast<double>(resolution[0]),
              (hi.y() - lo.y()) / static_cast<double>(resolution[1]),
              (hi.z() - lo.z()) / static_cast<double>(resolution[2]));
}

Vec3 DensityGrid::center(std::size_t i, std::size_t j, std::size_t k) const {
  const Vec3 h = voxel_size();
  return Vec3(lo.x() + (static_cast<double>(i) + 0.5) * h.x(),
              lo.y() + (static_cast<double>(j) + 0.5) * h.y(),
              lo.z() + (static_cast<double>(k) + 0.5) * h.z());
}

DensityGrid sample_density_grid(const FieldSource& field, const Vec3& lo, const Vec3& hi,
                                std::array<std::size_t, 3> resolution, unsigned threads,
                                const Vec3& direction) {
  for (std::size_t r : resolution) {
    if (r < 2) throw ConfigError("grid resolution must be >= 2 per axis");
  }
  if (!(lo.array() < hi.array()).all()) throw ConfigError("grid bounds must satisfy lo < hi");
  if (!(direction.norm() > 0.0)) throw ConfigError("query direction must be non-zero");

  DensityGrid grid;
  grid.resolution = resolution;
  grid.lo = lo;
  grid.hi = hi;
  grid.values.assign(resolution[0] * resolution[1] * resolution[2], 0.0);

  const auto* nerf = dynamic_cast<const RadianceField*>(&field);
  const unsigned workers = std::max(1u, threads);
  std::vector<std::unique_ptr<FieldScratch>> scratch(workers);
  for (auto& s : scratch) s = field.make_scratch();
  const std::size_t slice = resolution[0] * resolution[1];
  const Vec3 dir = direction.normalized();

  parallel_for(resolution[2], workers, [&](std::size_t k, unsigned w) {
    std::vector<double> pos(slice * 3);
    for (std::size_t j = 0; j < resolution[1]; ++j) {
      for (std::size_t i = 0; i < resolution[0]; ++i) {
        const Vec3 c = grid.center(i, j, k);
        const std::size_t n = j * resolution[0] + i;
        pos[3 * n] = c.x();
        pos[3 * n + 1] = c.y();
        pos[3 * n + 2] = c.z();
      }
    }
    double* out = grid.values.data() + k * slice;
    if (nerf != nullptr) {
      auto& pass = static_cast<FieldPass&>(*scratch[w]);
      nerf->density(pos, pass);
      std::copy(pass.sigma.begin(), pass.sigma.begin() + static_cast<std::ptrdiff_t>(slice), out);
    } else {
      std::vector<double> dirs(slice * 3);
      for (std::size_t n = 0; n < slice; ++n) {
        dirs[3 * n] = dir.x();
        dirs[3 * n + 1] = dir.y();
        dirs[3 * n + 2] = dir.z();
      }
      std::vector<double> rgb(slice * 3);
      field.evaluate(pos, dirs, std::span<double>(out, slice), rgb, scratch[w].get());
    }
  });
  return grid;
}

namespace mc {

namespace {

std::uint8_t edge_between(std::uint8_t a, std::uint8_t b) {
  for (std::uint8_t e = 0; e < 12; ++e) {
    const auto& c = kEdgeCorners[e];
    if ((c[0] == a && c[1] == b) || (c[0] == b && c[1] == a)) return e;
  }
  return 0xFF;
}

Vec3 corner_offset(std::uint8_t c) { return Vec3(c & 1, (c >> 1) & 1, (c >> 2) & 1); }

Vec3 edge_midpoint(std::uint8_t e) {
  return 0.5 * (corner_offset(kEdgeCorners[e][0]) + corner_offset(kEdgeCorners[e][1]));
}

// Corners of each face in counter-clockwise order seen from outside.
std::array<std::array<std::uint8_t, 4>, 6> face_loops() {
  std::array<std::array<std::uint8_t, 4>, 6> faces{};
  for (int a = 0; a < 3; ++a) {
    const int u = (a + 1) % 3;
    const int v = (a + 2) % 3;
    for (int s = 0; s < 2; ++s) {
      std::array<std::uint8_t, 4> f{};
      const int uv[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
      for (int q = 0; q < 4; ++q) {
        f[q] = static_cast<std::uint8_t>((s << a) | (uv[q][0] << u) | (uv[q][1] << v));
      }
      if (s == 0) std::reverse(f.begin(), f.end());
      faces[2 * a + s] = f;
    }
  }
  return faces;
}

std::vector<std::vector<std::uint8_t>> loops_for(unsigned config,
                                                 const std::array<std::array<std::uint8_t, 4>, 6>& faces) {
  // Each run of inside corners along a face boundary contributes one
  // segment from the edge where the run starts to the edge where it ends.
  // Diagonal inside corners are two runs, so they stay separated.
  std::array<int, 12> next;
  next.fill(-1);
  for (const auto& f : faces) {
    bool in[4];
    for (int q = 0; q < 4; ++q) in[q] = (config >> f[q]) & 1u;
    for (int q = 0; q < 4; ++q) {
      const int prev = (q + 3) % 4;
      if (!in[q] || in[prev]) continue;
      int end = q;
      while (in[(end + 1) % 4]) end = (end + 1) % 4;
      const std::uint8_t enter = edge_between(f[prev], f[q]);
      const std::uint8_t leave = edge_between(f[end], f[(end + 1) % 4]);
      next[enter] = leave;
    }
  }
  std::vector<std::vector<std::uint8_t>> loops;
  std::array<bool, 12> seen{};
  for (int start = 0; start < 12; ++start) {
    if (next[start] < 0 || seen[start]) continue;
    std::vector<std::uint8_t> loop;
    for (int e = start; !seen[e]; e = next[e]) {
      seen[e] = true;
      loop.push_back(static_cast<std::uint8_t>(e));
    }
    loops.push_back(std::move(loop));
  }
  return loops;
}

Vec3 newell_normal(const std::vector<std::uint8_t>& loop) {
  Vec3 n = Vec3::Zero();
  for (std::size_t i = 0; i < loop.size(); ++i) {
    n += edge_midpoint(loop[i]).cross(edge_midpoint(loop[(i + 1) % loop.size()]));
  }
  return n;
}

CaseTable build_table() {
  const auto faces = face_loops();
  CaseTable table;
  for (unsigned config = 0; config < 256; ++config) table.polygons[config] = loops_for(config, faces);
  // Orient so a lone inside corner 0 gets a normal pointing away from it.
  const bool flip = newell_normal(table.polygons[1].front()).dot(Vec3::Constant(1.0)) < 0.0;
  if (flip) {
    for (auto& loops : table.polygons) {
      for (auto& loop : loops) std::reverse(loop.begin(), loop.end());
    }
  }
  return table;
}

}  // namespace

const CaseTable& case_table() {
  static const CaseTable table = build_table();
  return table;
}

}  // namespace mc

namespace {

// True when two cube edges lie on a common face.
bool share_face(std::uint8_t e, std::uint8_t f) {
  const unsigned ae = e / 4, af = f / 4;
  const unsigned ce = mc::kEdgeCorners[e][0], cf = mc::kEdgeCorners[f][0];
  for (unsigned axis = 0; axis < 3; ++axis) {
    if (axis != ae && axis != af && ((ce >> axis) & 1) == ((cf >> axis) & 1)) return true;
  }
  return false;
}

// A fan diagonal between two vertices on one face would lie in that face,
// where the neighbouring cube may emit the same edge. Returns the first loop
// position whose diagonals all cross the cube interior, or loop.size().
std::size_t fan_apex(const std::vector<std::uint8_t>& loop) {
  const std::size_t n = loop.size();
  for (std::size_t a = 0; a < n; ++a) {
    bool ok = true;
    for (std::size_t q = 2; q + 1 < n && ok; ++q) ok = !share_face(loop[a], loop[(a + q) % n]);
    if (ok) return a;
  }
  return n;
}

}  // namespace

TriangleMesh extract_mesh(const DensityGrid& grid, double iso) {
  if (!(iso > 0.0)) throw ConfigError("iso level must be > 0");
  const auto& r = grid.resolution;
  if (grid.values.size() != r[0] * r[1] * r[2]) throw ContractError("grid value count mismatch");
  const auto& table = mc::case_table();

  TriangleMesh mesh;
  std::unordered_map<std::size_t, std::uint32_t> edge_vertex;
  auto vertex_on = [&](std::size_t i, std::size_t j, std::size_t k, std::uint8_t edge) {
    const auto a = mc::kEdgeCorners[edge][0];
    const auto b = mc::kEdgeCorners[edge][1];
    const std::size_t ai = i + (a & 1), aj = j + ((a >> 1) & 1), ak = k + ((a >> 2) & 1);
    const std::size_t bi = i + (b & 1), bj = j + ((b >> 1) & 1), bk = k + ((b >> 2) & 1);
    const std::size_t axis = edge / 4;
    const std::size_t key = grid.index(ai, aj, ak) * 3 + axis;
    const auto [it, fresh] = edge_vertex.try_emplace(key, 0);
    if (fresh) {
      const double va = grid.at(ai, aj, ak);
      const double vb = grid.at(bi, bj, bk);
      const double t = (iso - va) / (vb - va);
      const Vec3 pa = grid.center(ai, aj, ak);
      const Vec3 pb = grid.center(bi, bj, bk);
      it->second = static_cast<std::uint32_t>(mesh.vertices.size());
      mesh.vertices.push_back(pa + t * (pb - pa));
    }
    return it->second;
  };

  auto emit = [&](const std::array<std::uint32_t, 3>& tri) {
    const Vec3& p0 = mesh.vertices[tri[0]];
    const double area = 0.5 * (mesh.vertices[tri[1]] - p0).cross(mesh.vertices[tri[2]] - p0).norm();
    if (area > 1e-12) mesh.triangles.push_back(tri);
  };

  for (std::size_t k = 0; k + 1 < r[2]; ++k) {
    for (std::size_t j = 0; j + 1 < r[1]; ++j) {
      for (std::size_t i = 0; i + 1 < r[0]; ++i) {
        unsigned config = 0;
        for (unsigned c = 0; c < 8; ++c) {
          if (grid.at(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)) > iso) config |= 1u << c;
        }
        for (const auto& loop : table.polygons[config]) {
          std::vector<std::uint32_t> ids;
          for (auto e : loop) ids.push_back(vertex_on(i, j, k, e));
          const std::size_t n = ids.size();
          const std::size_t apex = fan_apex(loop);
          if (apex == n) {
            // No fan stays off the faces: fan around the loop centroid instead.
            Vec3 c = Vec3::Zero();
            for (auto id : ids) c += mesh.vertices[id];
            const auto centre = static_cast<std::uint32_t>(mesh.vertices.size());
            mesh.vertices.push_back(c / static_cast<double>(n));
            for (std::size_t q = 0; q < n; ++q) emit({centre, ids[q], ids[(q + 1) % n]});
            continue;
          }
          for (std::size_t q = 1; q + 1 < n; ++q) {
            emit({ids[apex], ids[(apex + q) % n], ids[(apex + q + 1) % n]});
          }
        }
      }
    }
  }

  // Drop vertices left unreferenced by degenerate triangles.
  std::vector<std::uint32_t> remap(mesh.vertices.size(), UINT32_MAX);
  std::vector<Vec3> kept;
  for (auto& tri : mesh.triangles) {
    for (auto& v : tri) {
      if (remap[v] == UINT32_MAX) {
        remap[v] = static_cast<std::uint32_t>(kept.size());
        kept.push_back(mesh.vertices[v]);
      }
      v = remap[v];
    }
  }
  mesh.vertices = std::move(kept);
  return mesh;
}

void export_mesh(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  char line[256];
  for (const auto& v : mesh.vertices) {
    std::snprintf(line, sizeof(line), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out << line;
  }
  for (const auto& t : mesh.triangles) {
    out << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
  }
  if (!out) throw IoError("write failed for " + path.string());
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
  return v;
}

}  // namespace

void export_depth(const Image& depth, const Image& opacity, DepthRange range,
                  const std::filesystem::path& raw_path, const std::filesystem::path& viz_path) {
  if (depth.channels != 1 || !depth.same_shape(opacity)) {
    throw ContractError("export_depth expects matching single-channel depth and opacity");
  }
  if (!(range.far > range.near)) throw ContractError("export_depth: far must exceed near");
  std::vector<std::uint8_t> raw;
  raw.reserve(8 + 4 * depth.pixels.size());
  put_u32(raw, static_cast<std::uint32_t>(depth.width));
  put_u32(raw, static_cast<std::uint32_t>(depth.height));
  for (float d : depth.pixels) put_u32(raw, std::bit_cast<std::uint32_t>(d));
  {
    std::ofstream out(raw_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + raw_path.string());
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("write failed for " + raw_path.string());
  }
  Image viz(depth.width, depth.height, 1);
  for (std::size_t i = 0; i < depth.pixels.size(); ++i) {
    const bool valid = opacity.pixels[i] >= kMinOpacity;
    const double d = valid ? depth.pixels[i] : range.far;
    viz.pixels[i] = static_cast<float>(
        std::clamp((d - range.near) / (range.far - range.near), 0.0, 1.0));
  }
  write_gray(viz_path, viz);
}

Image read_depth_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 8) throw DecodeError(DecodeErrorKind::kTruncated, path.string() + ": no header");
  const std::size_t w = get_u32(bytes, 0);
  const std::size_t h = get_u32(bytes, 4);
  if (bytes.size() != 8 + 4 * w * h) {
    throw DecodeError(DecodeErrorKind::kTruncated,
                      path.string() + ": expected " + std::to_string(8 + 4 * w * h) + " bytes");
  }
  Image depth(w, h, 1);
  for (std::size_t i = 0; i < w * h; ++i) {
    depth.pixels[i] = std::bit_cast<float>(get_u32(bytes, 8 + 4 * i));
  }
  return depth;
}

}  // namespace nerfprune
