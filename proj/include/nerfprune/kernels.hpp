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

#pragma once

#include <cstddef>
#include <string_view>

// Dense float kernels behind a runtime-selected dispatch table. Every
// kernel has a portable scalar reference; vectorized variants are picked
// at first use when the CPU supports them and must agree with the
// reference to rounding (see tests/kernels_test.cpp).

namespace nerfprune::kernels {

enum class Isa { kScalar, kAvx2 };

std::string_view to_string(Isa isa);

/// Row-major matrix operand. `ld` is the distance in floats between rows.
struct ConstMatrixRef {
  const float* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t ld = 0;
};

struct MatrixRef {
  float* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t ld = 0;
};

/// C = op(A) * B, or C += op(A) * B when `accumulate` is set.
/// op(A) is A or A^T depending on `transpose_a`.
using GemmFn = void (*)(bool transpose_a, ConstMatrixRef a, ConstMatrixRef b, MatrixRef c,
                        bool accumulate);

struct KernelTable {
  Isa isa;
  GemmFn gemm;
};

bool supported(Isa isa);

/// Table for a specific ISA. Throws ConfigError when the CPU lacks it.
const KernelTable& table(Isa isa);

/// Best supported table unless overridden with set_active().
const KernelTable& active();

/// Force a particular ISA (tests, benchmarks). Not thread-safe against
/// concurrent kernel calls.
void set_active(Isa isa);

/// Shape-checked front door to active().gemm.
void gemm(bool transpose_a, ConstMatrixRef a, ConstMatrixRef b, MatrixRef c, bool accumulate);

namespace detail {
void gemm_scalar(bool transpose_a, ConstMatrixRef a, ConstMatrixRef b, MatrixRef c,
                 bool accumulate);
#if defined(NERFPRUNE_HAVE_AVX2)
void gemm_avx2(bool transpose_a, ConstMatrixRef a, ConstMatrixRef b, MatrixRef c,
               bool accumulate);
#endif
}  // namespace detail

}  // namespace nerfprune::kernels
