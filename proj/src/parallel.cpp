#include "tmm/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace tmm {

int resolve_threads(int requested) {
  if (requested >= 1) return requested;
  if (const char* env = std::getenv("TMM_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return 1;
}

void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const int workers =
      static_cast<int>(std::min<std::size_t>(n, static_cast<std::size_t>(resolve_threads(threads))));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const std::size_t chunk = (n + static_cast<std::size_t>(workers) - 1) / static_cast<std::size_t>(workers);
  for (int w = 0; w < workers; ++w) {
    const std::size_t lo = static_cast<std::size_t>(w) * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    pool.emplace_back([lo, hi, w, &fn, &errors] {
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

}  // namespace tmm
