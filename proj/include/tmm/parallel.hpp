#pragma once
/// @file parallel.hpp
/// @brief Deterministic task execution: fixed contiguous index partitioning
///        with disjoint output slots, so results never depend on the worker
///        count or scheduling order.

#include <cstddef>
#include <functional>

namespace tmm {

/// Resolves a requested worker count: values >= 1 pass through; anything
/// else falls back to the TMM_THREADS environment variable, then to 1.
int resolve_threads(int requested);

/// Runs fn(i) for every i in [0, n). With threads > 1 the index range is
/// split into contiguous chunks, one thread per chunk. fn must only write
/// state owned by index i; under that contract the result is identical for
/// any thread count. The first exception (lowest chunk) is rethrown after
/// all workers join.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace tmm
