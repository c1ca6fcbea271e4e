// Deterministic fan-out: static partition over worker threads, results land
// in index-addressed slots so the reduction order never depends on timing.
#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace geolab {

inline void parallel_for(int n, int threads, const std::function<void(int)>& body) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    const int nt = std::min(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (int w = 0; w < nt; ++w) {
        pool.emplace_back([&, w] {
            for (int i = w; i < n; i += nt) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace geolab
