#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace parheat {

inline int hardware_threads() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

// Static contiguous partition; f(i) must only write state owned by index i, so the
// result is independent of the thread count.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    const std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::thread> pool;
    pool.reserve(nt);
    const std::size_t chunk = (n + nt - 1) / nt;
    for (std::size_t k = 0; k < nt; ++k) {
        const std::size_t lo = k * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &f] {
            for (std::size_t i = lo; i < hi; ++i) f(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace parheat
