// Timing comparison of the OpenMP sample kernels against their serial
// reference implementations. The deterministic blocked reduction must give
// bitwise-identical results at any thread count; this binary reports the
// speedups actually realized.

#include <chrono>
#include <cstdio>
#include <string>

#include "roughdyadic/malliavin.hpp"
#include "roughdyadic/parallel.hpp"
#include "roughdyadic/path.hpp"
#include "roughdyadic/rng.hpp"
#include "roughdyadic/variation.hpp"
#include "roughdyadic/verify.hpp"

using namespace roughdyadic;

namespace {

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

struct MomentAcc {
    double s = 0.0, s2 = 0.0;
};

void merge(MomentAcc& t, const MomentAcc& p) {
    t.s += p.s;
    t.s2 += p.s2;
}

void report(const char* name, double serial_s, double par_s, bool identical) {
    std::printf("%-28s serial %8.3fs   omp %8.3fs   speedup %5.2fx   identical %s\n", name,
                serial_s, par_s, serial_s / par_s, identical ? "yes" : "NO");
}

// rho of the consecutive-polygon pair, the lemma sweeps' inner statistic.
void bench_rho(std::size_t samples, int threads) {
    RhoParams par;
    par.n_max = 11;
    const int m = 9;
    auto fold = [&](MomentAcc& a, std::size_t i) {
        const auto path = DyadicBrownianPath::generate(2, m + 1, derive_key(7, i));
        const double v = rho_dyadic(2, path, m + 1, m, par);
        a.s += v;
        a.s2 += v * v;
    };
    double t0 = now_s();
    const MomentAcc ser = sample_reduce_serial<MomentAcc>(samples, fold, merge);
    double t1 = now_s();
    const MomentAcc omp = sample_reduce<MomentAcc>(samples, threads, fold, merge);
    double t2 = now_s();
    report("rho pair sweep (m=9)", t1 - t0, t2 - t1, ser.s == omp.s && ser.s2 == omp.s2);
}

void bench_dp(std::size_t samples, int threads) {
    const int m = 8;
    std::vector<double> out_serial(samples), out_par(samples);
    double t0 = now_s();
    parallel_for_indexed_serial(samples, [&](std::size_t i) {
        const auto path = DyadicBrownianPath::generate(2, m + 1, derive_key(11, i));
        out_serial[i] = d_p_dyadic_consecutive(path, m, 2.5);
    });
    double t1 = now_s();
    parallel_for_indexed(samples, threads, [&](std::size_t i) {
        const auto path = DyadicBrownianPath::generate(2, m + 1, derive_key(11, i));
        out_par[i] = d_p_dyadic_consecutive(path, m, 2.5);
    });
    double t2 = now_s();
    report("d_p DP sweep (m=8)", t1 - t0, t2 - t1, out_serial == out_par);
}

void bench_gradient(std::size_t samples, int threads) {
    RhoParams par;
    par.n_max = 9;
    const int m = 8;
    auto fold = [&](MomentAcc& a, std::size_t i) {
        const auto path = DyadicBrownianPath::generate(2, m + 1, derive_key(23, i));
        const RhoGrad rg = rho_pow_gradient(2, path, m + 1, m, par);
        const double v = rg.value + rg.grad_h_norm();
        a.s += v;
        a.s2 += v * v;
    };
    double t0 = now_s();
    const MomentAcc ser = sample_reduce_serial<MomentAcc>(samples, fold, merge);
    double t1 = now_s();
    const MomentAcc omp = sample_reduce<MomentAcc>(samples, threads, fold, merge);
    double t2 = now_s();
    report("rho gradient sweep (m=8)", t1 - t0, t2 - t1, ser.s == omp.s && ser.s2 == omp.s2);
}

}  // namespace

int main(int argc, char** argv) {
    std::size_t samples = 4096;
    int threads = 0;
    if (argc > 1) samples = std::stoul(argv[1]);
    if (argc > 2) threads = std::stoi(argv[2]);
    std::printf("samples %zu, threads %d (resolved %d)\n", samples, threads,
                resolve_threads(threads));
    bench_rho(samples, threads);
    bench_dp(samples / 4, threads);
    bench_gradient(samples / 4, threads);
    return 0;
}
