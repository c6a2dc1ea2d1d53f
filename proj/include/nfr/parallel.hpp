#pragma once
// Minimal deterministic batching. Work is split into exactly `threads` fixed
// contiguous batches and results are merged in batch order, so output is
// bit-identical for a fixed thread count (and trivially for threads == 1).

#include <cstddef>
#include <thread>
#include <vector>

namespace nfr {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// fn(batch_index, begin, end) over [0, total) split into `threads` batches.
template <class F>
inline void parallel_batches(std::size_t total, int threads, F&& fn) {
    std::size_t nb = static_cast<std::size_t>(threads < 1 ? 1 : threads);
    if (nb <= 1 || total < 2 * nb) {
        fn(std::size_t{0}, std::size_t{0}, total);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(nb);
    std::size_t chunk = (total + nb - 1) / nb;
    for (std::size_t b = 0; b < nb; ++b) {
        std::size_t lo = b * chunk, hi = std::min(total, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, b, lo, hi] { fn(b, lo, hi); });
    }
    for (auto& t : pool) t.join();
}

/// Batched sum with order-fixed merge.
template <class F>
inline double parallel_sum(std::size_t total, int threads, F&& term) {
    std::size_t nb = static_cast<std::size_t>(threads < 1 ? 1 : threads);
    std::vector<double> partial(nb, 0.0);
    parallel_batches(total, threads, [&](std::size_t b, std::size_t lo, std::size_t hi) {
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += term(i);
        partial[b] = s;
    });
    double s = 0.0;
    for (double p : partial) s += p;
    return s;
}

}  // namespace nfr
