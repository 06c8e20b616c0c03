#include "mfdelay/parallel.hpp"

#include <atomic>
#include <thread>
#include <vector>

namespace mfdelay {

namespace {
std::atomic<std::size_t> g_workers{1};
}

void set_worker_count(std::size_t n_threads) { g_workers = n_threads == 0 ? 1 : n_threads; }
std::size_t worker_count() { return g_workers; }

void parallel_for(std::size_t n, std::size_t n_threads,
                  const std::function<void(std::size_t)>& body) {
    if (n == 0) return;
    if (n_threads <= 1 || n < 2 * n_threads) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    const std::size_t chunk = (n + n_threads - 1) / n_threads;
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t w = 0; w < n_threads; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace mfdelay
