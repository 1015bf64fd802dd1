#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace pairflow {

/// Split [0, n) into contiguous blocks, one worker thread per extra block.
/// Serial when threads <= 1, so single-threaded runs stay allocation-free
/// and bit-reproducible regardless of the thread setting (each index writes
/// only its own slot in every use below).
template <class F>
void parallel_for(std::size_t n, int threads, F&& body) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::size_t nt = std::min<std::size_t>(std::size_t(threads), n);
    std::vector<std::thread> pool;
    pool.reserve(nt - 1);
    auto run = [&body, n, nt](std::size_t t) {
        for (std::size_t i = t; i < n; i += nt) body(i);
    };
    for (std::size_t t = 1; t < nt; ++t) pool.emplace_back(run, t);
    run(0);
    for (auto& th : pool) th.join();
}

}  // namespace pairflow
