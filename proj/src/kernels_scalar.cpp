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

#include "nerfprune/kernels.hpp"

#include <algorithm>
#include <vector>

namespace nerfprune::kernels::detail {

namespace {
constexpr std::size_t kBlockK = 256;
}

// Reference: each output is a straight sum over k in ascending order,
// restarted per k-block exactly like the vector kernels.
void gemm_scalar(bool transpose_a, ConstMatrixRef a, ConstMatrixRef b, MatrixRef c,
                 bool accumulate) {
  const std::size_t m = c.rows;
  const std::size_t n = c.cols;
  const std::size_t k = transpose_a ? a.rows : a.cols;
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c.data + i * c.ld;
    if (!accumulate) std::fill(crow, crow + n, 0.0f);
  }
  if (k == 0) return;
  std::vector<float> acc(n);
  for (std::size_t k0 = 0; k0 < k; k0 += kBlockK) {
    const std::size_t k1 = std::min(k, k0 + kBlockK);
    for (std::size_t i = 0; i < m; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0f);
      for (std::size_t p = k0; p < k1; ++p) {
        const float av = transpose_a ? a.data[p * a.ld + i] : a.data[i * a.ld + p];
        const float* brow = b.data + p * b.ld;
        for (std::size_t j = 0; j < n; ++j) acc[j] += av * brow[j];
      }
      float* crow = c.data + i * c.ld;
      for (std::size_t j = 0; j < n; ++j) crow[j] += acc[j];
    }
  }
}

}  // namespace nerfprune::kernels::detail
