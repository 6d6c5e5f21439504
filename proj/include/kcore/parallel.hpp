#pragma once

#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace kcore {

// Static block partition of [begin, end) over `jobs` workers. fn(index,
// worker). Results are reproducible for any job count as long as callers
// key their rng substreams by index and merge commutatively (integer
// counters) or in worker order. A worker exception is rethrown on the
// calling thread after all workers have joined.
inline void parallel_for(std::int64_t begin, std::int64_t end, int jobs,
                         const std::function<void(std::int64_t, int)>& fn) {
    const std::int64_t total = end - begin;
    if (total <= 0) return;
    if (jobs < 1) jobs = 1;
    if (jobs == 1 || total == 1) {
        for (std::int64_t i = begin; i < end; ++i) fn(i, 0);
        return;
    }
    if (std::int64_t(jobs) > total) jobs = int(total);
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(jobs));
    const std::int64_t chunk = (total + jobs - 1) / jobs;
    std::mutex mtx;
    std::exception_ptr first_error;
    for (int w = 0; w < jobs; ++w) {
        const std::int64_t lo = begin + chunk * w;
        const std::int64_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, w, &fn, &mtx, &first_error] {
            try {
                for (std::int64_t i = lo; i < hi; ++i) fn(i, w);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mtx);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace kcore
