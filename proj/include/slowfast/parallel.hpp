#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace slowfast {

// Thread count policy: the SLOWFAST_THREADS environment variable wins,
// otherwise run single threaded. Every parallel loop in the toolkit is
// written so that serial and parallel execution produce identical results
// (disjoint writes, no cross-iteration reductions).
inline int thread_count() {
    if (const char* env = std::getenv("SLOWFAST_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return 1;
}

// Runs fn(i) for i in [0, n). Work is handed out through an atomic counter
// so uneven iterations balance themselves.
inline void parallel_for(long n, const std::function<void(long)>& fn) {
    const int threads = thread_count();
    if (threads <= 1 || n <= 1) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<long> next{0};
    auto worker = [&] {
        for (;;) {
            long i = next.fetch_add(1);
            if (i >= n) break;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    const int spawn = static_cast<int>(std::min<long>(threads, n));
    pool.reserve(static_cast<size_t>(spawn));
    for (int t = 0; t < spawn; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

} // namespace slowfast
