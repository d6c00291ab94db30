#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace kips {

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

// Pairwise (tree) summation with a fixed association order. The result is a
// pure function of the input array, independent of scheduling.
inline double pairwise_sum(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n <= 32) {
        double s = 0.0;
        for (double t : v) s += t;
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

// Deterministic blocked reduction. Items are cut into fixed-size blocks; each
// block is accumulated serially by `body(lo, hi, partial)` into `n_acc` slots;
// block partials are combined by pairwise summation. Output is identical for
// every thread count since the block structure does not depend on it.
template <class Body>
void blocked_reduce(std::size_t n_items, std::size_t n_acc, double* out, Body&& body,
                    std::size_t block = 2048) {
    for (std::size_t a = 0; a < n_acc; ++a) out[a] = 0.0;
    if (n_items == 0) return;
    const std::size_t n_blocks = (n_items + block - 1) / block;
    std::vector<double> partials(n_blocks * n_acc, 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t b = 0; b < static_cast<std::int64_t>(n_blocks); ++b) {
        const std::size_t lo = static_cast<std::size_t>(b) * block;
        const std::size_t hi = std::min(n_items, lo + block);
        body(lo, hi, &partials[static_cast<std::size_t>(b) * n_acc]);
    }
    std::vector<double> col(n_blocks);
    for (std::size_t a = 0; a < n_acc; ++a) {
        for (std::size_t b = 0; b < n_blocks; ++b) col[b] = partials[b * n_acc + a];
        out[a] = pairwise_sum(col);
    }
}

}  // namespace kips
