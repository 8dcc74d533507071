#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace grbm {

/// Splits [0, n) into `workers` contiguous blocks and runs fn(worker, lo, hi)
/// on each. The first exception (by worker order) is rethrown after all
/// workers join.
template <class Fn>
void parallel_for(std::int64_t n, int workers, Fn&& fn) {
    workers = std::max(1, static_cast<int>(std::min<std::int64_t>(workers, std::max<std::int64_t>(1, n))));
    if (workers == 1) {
        fn(0, std::int64_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        const std::int64_t lo = n * w / workers;
        const std::int64_t hi = n * (w + 1) / workers;
        pool.emplace_back([&fn, &errors, w, lo, hi] {
            try {
                fn(w, lo, hi);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

/// Worker count used when a caller passes 0.
inline int default_workers() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace grbm
