#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace zerolab {

/// Worker cap shared by the heavy loops. 0 means hardware concurrency.
inline std::atomic<unsigned>& thread_cap() {
  static std::atomic<unsigned> cap{0};
  return cap;
}

inline unsigned worker_count(std::size_t jobs) {
  unsigned hw = thread_cap().load();
  if (hw == 0) hw = std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(hw, std::max<std::size_t>(jobs, 1)));
}

namespace detail {
inline bool& inside_parallel_region() {
  thread_local bool flag = false;
  return flag;
}
}  // namespace detail

/// Runs body(i) for i in [0, count). Work is handed out by an atomic
/// counter; callers write results into per-index slots so any reduction
/// done afterwards in index order is independent of the schedule.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
  const unsigned workers = detail::inside_parallel_region() ? 1u : worker_count(count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto run = [&] {
    detail::inside_parallel_region() = true;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) {
        detail::inside_parallel_region() = false;
        return;
      }
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(count);
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(run);
  run();
  pool.clear();
  if (first_error) std::rethrow_exception(first_error);
}

/// Kahan-compensated sum in index order.
template <class Range>
double ordered_sum(const Range& values) {
  double sum = 0.0, comp = 0.0;
  for (double v : values) {
    const double y = v - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

}  // namespace zerolab
