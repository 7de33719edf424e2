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

#include <atomic>
#include <string>

#include "nerfprune/error.hpp"

namespace nerfprune::kernels {

namespace {

constexpr KernelTable kScalarTable{Isa::kScalar, &detail::gemm_scalar};
#if defined(NERFPRUNE_HAVE_AVX2)
constexpr KernelTable kAvx2Table{Isa::kAvx2, &detail::gemm_avx2};
#endif

const KernelTable* best_table() {
#if defined(NERFPRUNE_HAVE_AVX2)
  if (supported(Isa::kAvx2)) return &kAvx2Table;
#endif
  return &kScalarTable;
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{best_table()};
  return slot;
}

}  // namespace

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
  }
  return "unknown";
}

bool supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(NERFPRUNE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!supported(isa)) {
    throw ConfigError("kernel ISA not supported on this CPU: " + std::string(to_string(isa)));
  }
#if defined(NERFPRUNE_HAVE_AVX2)
  if (isa == Isa::kAvx2) return kAvx2Table;
#endif
  return kScalarTable;
}

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

void set_active(Isa isa) { active_slot().store(&table(isa), std::memory_order_release); }

void gemm(bool transpose_a, ConstMatrixRef a, ConstMatrixRef b, MatrixRef c, bool accumulate) {
  const std::size_t m = transpose_a ? a.cols : a.rows;
  const std::size_t k = transpose_a ? a.rows : a.cols;
  if (b.rows != k || c.rows != m || c.cols != b.cols) {
    throw ContractError("gemm: operand shapes do not agree");
  }
  if (a.ld < a.cols || b.ld < b.cols || c.ld < c.cols) {
    throw ContractError("gemm: leading dimension smaller than column count");
  }
  active().gemm(transpose_a, a, b, c, accumulate);
}

}  // namespace nerfprune::kernels
