#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace frsf {

/// Execution policy for the data-parallel kernels. `serial` is the reference
/// path; `parallel` must produce bit-identical results (tests enforce this).
enum class Exec { serial, parallel };

/// Runs body(i) for i in [0, n). Iterations must be independent and write
/// only to their own slots; reductions happen afterwards in index order.
template <typename Body>
void for_each_index(std::size_t n, Exec exec, Body&& body) {
  if (exec == Exec::serial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
#ifdef _OPENMP
  // Exceptions may not leave an OpenMP region. Keep the one from the lowest
  // index so the reported failure matches the serial path.
  std::mutex guard;
  std::exception_ptr failure;
  std::size_t failed_at = n;
  const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(guard);
      if (static_cast<std::size_t>(i) < failed_at) {
        failed_at = static_cast<std::size_t>(i);
        failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
#else
  for (std::size_t i = 0; i < n; ++i) body(i);
#endif
}

inline void set_thread_count(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

}  // namespace frsf
