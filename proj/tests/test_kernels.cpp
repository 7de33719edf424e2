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
#include <random>
#include <vector>

#include "doctest.h"
#include "nerfprune/kernels.hpp"
#include "support/oracles.hpp"

using namespace nerfprune::kernels;

namespace {

struct Case {
  std::size_t m, k, n;
  bool transpose_a;
};

std::vector<float> random_matrix(std::size_t count, std::mt19937& gen) {
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<float> v(count);
  for (auto& x : v) x = dist(gen);
  return v;
}

// Runs the active kernel on a padded output buffer (ld > n) and returns the
// m x n result; padding columns must come back untouched.
std::vector<float> run(const Case& c, const std::vector<float>& a, const std::vector<float>& b,
                       const std::vector<float>& c_init, bool accumulate) {
  const std::size_t ld = c.n + 3;
  std::vector<float> out(c.m * ld, 7.0f);
  for (std::size_t i = 0; i < c.m; ++i) {
    for (std::size_t j = 0; j < c.n; ++j) out[i * ld + j] = c_init[i * c.n + j];
  }
  const std::size_t a_rows = c.transpose_a ? c.k : c.m;
  const std::size_t a_cols = c.transpose_a ? c.m : c.k;
  gemm(c.transpose_a, {a.data(), a_rows, a_cols, a_cols}, {b.data(), c.k, c.n, c.n},
       {out.data(), c.m, c.n, ld}, accumulate);
  std::vector<float> result(c.m * c.n);
  for (std::size_t i = 0; i < c.m; ++i) {
    for (std::size_t j = 0; j < c.n; ++j) result[i * c.n + j] = out[i * ld + j];
    for (std::size_t j = c.n; j < ld; ++j) REQUIRE(out[i * ld + j] == 7.0f);
  }
  return result;
}

std::vector<Case> cases() {
  std::vector<Case> out;
  for (std::size_t m : {1, 5, 6, 7, 13, 64}) {
    for (std::size_t k : {1, 3, 39, 256, 300}) {
      for (std::size_t n : {1, 3, 15, 16, 17, 33, 65}) {
        out.push_back({m, k, n, false});
        out.push_back({m, k, n, true});
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("every supported kernel matches the double-precision triple loop") {
  std::mt19937 gen(11);
  for (Isa isa : {Isa::kScalar, Isa::kAvx2}) {
    if (!supported(isa)) continue;
    set_active(isa);
    for (const auto& c : cases()) {
      const std::size_t a_rows = c.transpose_a ? c.k : c.m;
      const std::size_t a_cols = c.transpose_a ? c.m : c.k;
      const auto a = random_matrix(a_rows * a_cols, gen);
      const auto b = random_matrix(c.k * c.n, gen);
      const auto init = random_matrix(c.m * c.n, gen);
      const auto ref = oracle::gemm(c.transpose_a, a, a_rows, a_cols, b, c.n);
      for (bool acc : {false, true}) {
        const auto got = run(c, a, b, init, acc);
        for (std::size_t i = 0; i < got.size(); ++i) {
          const double expect = ref[i] + (acc ? init[i] : 0.0);
          // float accumulation over k terms of magnitude <= 1
          const double tol = 4e-7 * static_cast<double>(c.k + 1) + 1e-6;
          INFO("isa=" << to_string(isa) << " m=" << c.m << " k=" << c.k << " n=" << c.n
                      << " tA=" << c.transpose_a << " acc=" << acc);
          REQUIRE(std::abs(got[i] - expect) <= tol);
        }
      }
    }
  }
  set_active(supported(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar);
}

TEST_CASE("AVX2 and scalar kernels agree within rounding") {
  if (!supported(Isa::kAvx2)) {
    MESSAGE("AVX2 not available on this machine; equivalence test skipped");
    return;
  }
  std::mt19937 gen(12);
  for (const auto& c : cases()) {
    const std::size_t a_rows = c.transpose_a ? c.k : c.m;
    const std::size_t a_cols = c.transpose_a ? c.m : c.k;
    const auto a = random_matrix(a_rows * a_cols, gen);
    const auto b = random_matrix(c.k * c.n, gen);
    const auto init = random_matrix(c.m * c.n, gen);
    set_active(Isa::kScalar);
    const auto s = run(c, a, b, init, true);
    set_active(Isa::kAvx2);
    const auto v = run(c, a, b, init, true);
    for (std::size_t i = 0; i < s.size(); ++i) {
      REQUIRE(std::abs(s[i] - v[i]) <= 4e-7 * static_cast<double>(c.k + 1) + 1e-6);
    }
  }
}

TEST_CASE("a row's result does not depend on how many rows share the call") {
  std::mt19937 gen(13);
  for (Isa isa : {Isa::kScalar, Isa::kAvx2}) {
    if (!supported(isa)) continue;
    set_active(isa);
    const std::size_t m = 23, k = 103, n = 65;
    const auto a = random_matrix(m * k, gen);
    const auto b = random_matrix(k * n, gen);
    std::vector<float> full(m * n);
    gemm(false, {a.data(), m, k, k}, {b.data(), k, n, n}, {full.data(), m, n, n}, false);
    for (std::size_t r = 0; r < m; ++r) {
      std::vector<float> one(n);
      gemm(false, {a.data() + r * k, 1, k, k}, {b.data(), k, n, n}, {one.data(), 1, n, n}, false);
      for (std::size_t j = 0; j < n; ++j) REQUIRE(one[j] == full[r * n + j]);
    }
  }
  set_active(supported(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar);
}

TEST_CASE("dispatch reports the selected instruction set") {
  CHECK(supported(Isa::kScalar));
  set_active(Isa::kScalar);
  CHECK(active().isa == Isa::kScalar);
  if (supported(Isa::kAvx2)) {
    set_active(Isa::kAvx2);
    CHECK(active().isa == Isa::kAvx2);
  }
}
