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

// Compiled with -mavx2 -mfma; only reached through the dispatch table
// after a runtime CPU check. Keep standard-library templates out of this
// translation unit so no AVX-encoded inline copies leak into shared code.

#include <immintrin.h>

#include "nerfprune/kernels.hpp"

namespace nerfprune::kernels::detail {

namespace {

constexpr std::size_t kBlockK = 256;
constexpr std::size_t kRowTile = 6;
constexpr std::size_t kColTile = 16;

constexpr std::size_t min_size(std::size_t a, std::size_t b) { return a < b ? a : b; }

inline __m256i lane_mask(std::size_t n) {
  alignas(32) static const int kTable[16] = {-1, -1, -1, -1, -1, -1, -1, -1,
                                             0,  0,  0,  0,  0,  0,  0,  0};
  return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(kTable + 8 - n));
}

// MR rows by up to 16 columns. The per-element operation sequence (fma in
// ascending k) does not depend on MR or on the column mask, so a row's
// result is the same whichever tile computes it.
template <std::size_t MR, bool kTransA>
inline void micro_tile(const float* a, std::size_t lda, const float* b, std::size_t ldb,
                       std::size_t kc, float* c, std::size_t ldc, std::size_t nc) {
  __m256 acc0[MR];
  __m256 acc1[MR];
  for (std::size_t r = 0; r < MR; ++r) {
    acc0[r] = _mm256_setzero_ps();
    acc1[r] = _mm256_setzero_ps();
  }
  const bool full = nc == kColTile;
  const std::size_t n0 = min_size(nc, 8);
  const std::size_t n1 = nc > 8 ? nc - 8 : 0;
  const __m256i m0 = lane_mask(n0);
  const __m256i m1 = lane_mask(n1);

  for (std::size_t p = 0; p < kc; ++p) {
    const float* brow = b + p * ldb;
    __m256 b0;
    __m256 b1;
    if (full) {
      b0 = _mm256_loadu_ps(brow);
      b1 = _mm256_loadu_ps(brow + 8);
    } else {
      b0 = _mm256_maskload_ps(brow, m0);
      b1 = n1 ? _mm256_maskload_ps(brow + 8, m1) : _mm256_setzero_ps();
    }
    for (std::size_t r = 0; r < MR; ++r) {
      const __m256 av = _mm256_broadcast_ss(kTransA ? a + p * lda + r : a + r * lda + p);
      acc0[r] = _mm256_fmadd_ps(av, b0, acc0[r]);
      acc1[r] = _mm256_fmadd_ps(av, b1, acc1[r]);
    }
  }

  for (std::size_t r = 0; r < MR; ++r) {
    float* crow = c + r * ldc;
    if (full) {
      _mm256_storeu_ps(crow, _mm256_add_ps(_mm256_loadu_ps(crow), acc0[r]));
      _mm256_storeu_ps(crow + 8, _mm256_add_ps(_mm256_loadu_ps(crow + 8), acc1[r]));
    } else {
      _mm256_maskstore_ps(crow, m0, _mm256_add_ps(_mm256_maskload_ps(crow, m0), acc0[r]));
      if (n1) {
        _mm256_maskstore_ps(crow + 8, m1,
                            _mm256_add_ps(_mm256_maskload_ps(crow + 8, m1), acc1[r]));
      }
    }
  }
}

template <bool kTransA>
void gemm_impl(ConstMatrixRef a, ConstMatrixRef b, MatrixRef c, bool accumulate) {
  const std::size_t m = c.rows;
  const std::size_t n = c.cols;
  const std::size_t k = kTransA ? a.rows : a.cols;
  if (!accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
      float* crow = c.data + i * c.ld;
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0f;
    }
  }
  for (std::size_t k0 = 0; k0 < k; k0 += kBlockK) {
    const std::size_t kc = min_size(kBlockK, k - k0);
    for (std::size_t i = 0; i < m; i += kRowTile) {
      const std::size_t mr = min_size(kRowTile, m - i);
      const float* ablk = kTransA ? a.data + k0 * a.ld + i : a.data + i * a.ld + k0;
      for (std::size_t j = 0; j < n; j += kColTile) {
        const std::size_t nc = min_size(kColTile, n - j);
        const float* bblk = b.data + k0 * b.ld + j;
        float* cblk = c.data + i * c.ld + j;
        switch (mr) {
          case 6: micro_tile<6, kTransA>(ablk, a.ld, bblk, b.ld, kc, cblk, c.ld, nc); break;
          case 5: micro_tile<5, kTransA>(ablk, a.ld, bblk, b.ld, kc, cblk, c.ld, nc); break;
          case 4: micro_tile<4, kTransA>(ablk, a.ld, bblk, b.ld, kc, cblk, c.ld, nc); break;
          case 3: micro_tile<3, kTransA>(ablk, a.ld, bblk, b.ld, kc, cblk, c.ld, nc); break;
          case 2: micro_tile<2, kTransA>(ablk, a.ld, bblk, b.ld, kc, cblk, c.ld, nc); break;
          default: micro_tile<1, kTransA>(ablk, a.ld, bblk, b.ld, kc, cblk, c.ld, nc); break;
        }
      }
    }
  }
}

}  // namespace

void gemm_avx2(bool transpose_a, ConstMatrixRef a, ConstMatrixRef b, MatrixRef c,
               bool accumulate) {
  if (transpose_a) {
    gemm_impl<true>(a, b, c, accumulate);
  } else {
    gemm_impl<false>(a, b, c, accumulate);
  }
}

}  // namespace nerfprune::kernels::detail
