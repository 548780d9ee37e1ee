#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace subspacekit::numkernel {

namespace detail {
inline std::atomic<std::size_t>& thread_override() {
  static std::atomic<std::size_t> value{0};
  return value;
}
}  // namespace detail

/// Worker count used by row-parallel kernels. Defaults to the hardware
/// concurrency, capped by SUBSPACEKIT_THREADS when that variable is set.
inline std::size_t thread_count() {
  if (auto forced = detail::thread_override().load(); forced > 0) return forced;
  std::size_t n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SUBSPACEKIT_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) n = std::min<std::size_t>(n, static_cast<std::size_t>(cap));
    } catch (...) {
    }
  }
  return n;
}

/// Overrides the worker count for the whole process; 0 restores the default.
inline void set_thread_count(std::size_t n) { detail::thread_override().store(n); }

/// Runs fn(lo, hi) over a partition of [0, n). Every index is owned by exactly
/// one call, so kernels that never reduce across indices stay bit-identical
/// for any worker count.
template <class Fn>
void parallel_for(std::size_t n, std::size_t work_per_index, Fn&& fn) {
  constexpr std::size_t kMinWorkPerThread = 1 << 15;
  std::size_t workers = thread_count();
  if (work_per_index > 0)
    workers = std::min(workers, std::max<std::size_t>(1, n * work_per_index / kMinWorkPerThread));
  workers = std::min(workers, n);
  if (workers <= 1) {
    if (n > 0) fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto guarded = [&](std::size_t lo, std::size_t hi) {
    try {
      fn(lo, hi);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(guarded, lo, hi);
  }
  guarded(std::size_t{0}, std::min(n, chunk));
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace subspacekit::numkernel
