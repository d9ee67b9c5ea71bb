#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace roughdyadic {

// Deterministic sample-parallel kernels. Work is split into fixed-size blocks
// (independent of the thread count); each block is accumulated serially and
// the block partials are combined in index order, so the result is bitwise
// identical for any number of threads. The *_serial variants are the
// reference implementations the tests compare against.

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("ROUGHDYADIC_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

constexpr std::size_t kReduceBlock = 1024;

/// Serial reference: the same block-fold-then-merge schedule as the OpenMP
/// kernel, executed on one thread. Results are bitwise identical to
/// sample_reduce at any thread count.
template <typename Acc, typename Fold, typename Combine>
Acc sample_reduce_serial(std::size_t n, Fold&& fn, Combine&& combine) {
    Acc total{};
    for (std::size_t lo = 0; lo < n; lo += kReduceBlock) {
        const std::size_t hi = std::min(n, lo + kReduceBlock);
        Acc acc{};
        for (std::size_t i = lo; i < hi; ++i) fn(acc, i);
        combine(total, acc);
    }
    return total;
}

/// OpenMP kernel with block-deterministic combination. combine(total, part)
/// must be associative over whole blocks; block partials are merged in block
/// order regardless of scheduling.
template <typename Acc, typename Fold, typename Combine>
Acc sample_reduce(std::size_t n, int threads, Fold&& fn, Combine&& combine) {
    const std::size_t nblocks = (n + kReduceBlock - 1) / kReduceBlock;
    if (nblocks <= 1) return sample_reduce_serial<Acc>(n, fn, combine);

    std::vector<Acc> partials(nblocks);
    const int nt = resolve_threads(threads);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(nt)
#endif
    for (long long b = 0; b < static_cast<long long>(nblocks); ++b) {
        const std::size_t lo = static_cast<std::size_t>(b) * kReduceBlock;
        const std::size_t hi = std::min(n, lo + kReduceBlock);
        Acc acc{};
        for (std::size_t i = lo; i < hi; ++i) fn(acc, i);
        partials[static_cast<std::size_t>(b)] = acc;
    }
    (void)nt;
    Acc total{};
    for (auto& p : partials) combine(total, p);
    return total;
}

/// Per-index parallel fill; slots are disjoint so the result is trivially
/// deterministic.
template <typename Fn>
void parallel_for_indexed(std::size_t n, int threads, Fn&& fn) {
    const int nt = resolve_threads(threads);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16) num_threads(nt)
#endif
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        fn(static_cast<std::size_t>(i));
    (void)nt;
}

template <typename Fn>
void parallel_for_indexed_serial(std::size_t n, Fn&& fn) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
}

/// Vector-of-doubles accumulator for the common moment-sum case.
struct SumAcc {
    std::vector<double> s;

    void ensure(std::size_t n) {
        if (s.size() < n) s.resize(n, 0.0);
    }
    void add(std::size_t i, double v) {
        ensure(i + 1);
        s[i] += v;
    }
    static void merge(SumAcc& a, const SumAcc& b) {
        a.ensure(b.s.size());
        for (std::size_t i = 0; i < b.s.size(); ++i) a.s[i] += b.s[i];
    }
};

}  // namespace roughdyadic
