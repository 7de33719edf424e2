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

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <type_traits>
#include <vector>

#if defined(__SSE2__) || defined(_M_X64)
#include <xmmintrin.h>
#define NERFPRUNE_HAVE_MXCSR 1
#endif

namespace nerfprune {

/// Flushes subnormal floats to zero on the current thread while alive.
/// Converged fields push empty-space densities far negative, and the
/// resulting subnormal gradients cost ~100x per operation on x86.
class FlushDenormalsScope {
 public:
  FlushDenormalsScope(const FlushDenormalsScope&) = delete;
  FlushDenormalsScope& operator=(const FlushDenormalsScope&) = delete;
#ifdef NERFPRUNE_HAVE_MXCSR
  FlushDenormalsScope() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | kFtz | kDaz); }
  ~FlushDenormalsScope() { _mm_setcsr(saved_); }

 private:
  static constexpr unsigned kFtz = 0x8000;
  static constexpr unsigned kDaz = 0x0040;
  unsigned saved_;
#else
  FlushDenormalsScope() = default;
#endif
};

/// Number of hardware threads, at least 1.
inline unsigned default_threads() {
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(task) or fn(task, worker) for task in [0, n_tasks) on up to
/// `threads` workers; `worker` < threads identifies per-worker scratch.
/// Tasks are claimed dynamically, so callers must make each task's output
/// depend only on its index; then results are scheduling-independent.
/// The first exception thrown by any task is rethrown on the caller.
/// Tasks run with subnormals flushed to zero.
template <typename Fn>
void parallel_for(std::size_t n_tasks, unsigned threads, Fn&& fn) {
  if (n_tasks == 0) return;
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n_tasks));
  auto call = [&fn](std::size_t task, unsigned worker) {
    if constexpr (std::is_invocable_v<Fn&, std::size_t, unsigned>) {
      fn(task, worker);
    } else {
      fn(task);
    }
  };
  if (workers == 1) {
    FlushDenormalsScope ftz;
    for (std::size_t t = 0; t < n_tasks; ++t) call(t, 0);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&](unsigned id) {
    FlushDenormalsScope ftz;
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= n_tasks) return;
      try {
        call(t, id);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n_tasks);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker, w);
  worker(0);
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace nerfprune
