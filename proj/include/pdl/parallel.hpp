#ifndef PDL_PARALLEL_HPP_
#define PDL_PARALLEL_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace pdl {

/// Worker count from the PDL_THREADS environment variable (default 1).
inline unsigned thread_count() {
  const char* env = std::getenv("PDL_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  try {
    const long n = std::stol(env);
    if (n <= 0) return std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(n);
  } catch (const std::exception&) {
    return 1;
  }
}

/// Runs fn(i) for i in [0, n). Each index writes only its own output slot,
/// and callers reduce in index order, so results do not depend on the
/// number of workers. The first exception thrown by any index is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned workers = thread_count()) {
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace pdl

#endif  // PDL_PARALLEL_HPP_
