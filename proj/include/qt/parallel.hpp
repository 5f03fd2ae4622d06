#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace qt {

// Static contiguous partition of [0, n); results must not depend on the partition.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
    const std::size_t t = static_cast<std::size_t>(std::max(1, threads));
    if (t == 1 || n < 2 * t) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(t);
    const std::size_t chunk = (n + t - 1) / t;
    for (std::size_t w = 0; w < t; ++w) {
        pool.emplace_back([&, w] {
            try {
                const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
                for (std::size_t i = lo; i < hi; ++i) f(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace qt
