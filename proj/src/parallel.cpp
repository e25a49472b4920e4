#include "prunelab/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace prunelab {

std::size_t worker_count() {
    if (const char* env = std::getenv("PRUNELAB_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return std::size_t(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

void parallel_ranges(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers = std::min(worker_count(), n);
    if (workers == 1) {
        fn(0, n);
        return;
    }
    const std::size_t per = (n + workers - 1) / workers;
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t start = w * per;
        if (start >= n) break;
        const std::size_t end = std::min(start + per, n);
        threads.emplace_back([&fn, start, end] { fn(start, end); });
    }
    for (auto& t : threads) t.join();
}

}  // namespace prunelab
