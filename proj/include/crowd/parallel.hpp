#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace crowd {

/// Worker count: CROWD_THREADS if set and positive, otherwise hardware concurrency.
unsigned thread_count();

/// Stops glibc from returning freed grid-sized blocks to the OS, so per-step
/// field allocations are recycled instead of page-faulted in again. Idempotent.
void retain_heap();

/// Runs body(begin, end) over contiguous chunks of [0, n). Each index is owned by
/// exactly one chunk, so per-index outputs do not depend on the thread count.
template <class Body>
void parallel_for(int n, Body&& body) {
    const unsigned workers = std::min<unsigned>(thread_count(), static_cast<unsigned>(std::max(n / 8, 1)));
    if (workers <= 1) {
        body(0, n);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const int chunk = (n + static_cast<int>(workers) - 1) / static_cast<int>(workers);
    for (unsigned w = 0; w < workers; ++w) {
        const int begin = static_cast<int>(w) * chunk;
        const int end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&body, begin, end] { body(begin, end); });
    }
}

}  // namespace crowd
