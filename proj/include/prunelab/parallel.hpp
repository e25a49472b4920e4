#pragma once

#include <cstddef>
#include <functional>

namespace prunelab {

// Worker cap: PRUNELAB_THREADS if set, else hardware concurrency.
std::size_t worker_count();

// Splits [0,n) into contiguous ranges and runs fn(start,end) on worker
// threads. fn must only write to disjoint state per range.
void parallel_ranges(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace prunelab
