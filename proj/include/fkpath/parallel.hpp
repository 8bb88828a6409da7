#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <span>
#include <thread>
#include <vector>

namespace fkpath {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("FKPATH_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

// fn(worker, begin, end) on contiguous chunks. Results must be written to
// index-addressed storage; the reduction happens afterwards, in index order.
template <class Fn>
void parallel_chunks(std::size_t n, int threads, Fn&& fn) {
    const std::size_t w = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n));
    if (w == 1) {
        fn(std::size_t{0}, std::size_t{0}, n);
        return;
    }
    std::vector<std::exception_ptr> errs(w);
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (std::size_t k = 0; k < w; ++k) {
        const std::size_t b = n * k / w, e = n * (k + 1) / w;
        pool.emplace_back([&, k, b, e] {
            try {
                fn(k, b, e);
            } catch (...) {
                errs[k] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

// fixed tree: the split points depend only on the length
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t h = v.size() / 2;
    return pairwise_sum(v.subspan(0, h)) + pairwise_sum(v.subspan(h));
}

}  // namespace fkpath
