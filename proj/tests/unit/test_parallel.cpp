#include <doctest.h>

#include <cmath>

#include "roughdyadic/parallel.hpp"
#include "roughdyadic/rng.hpp"
#include "roughdyadic/variation.hpp"

using namespace roughdyadic;

namespace {

struct Acc {
    double s = 0.0, s2 = 0.0;
};

void fold_sample(Acc& a, std::size_t i) {
    const double v = normal_at(derive_key(42, i), 0);
    a.s += v;
    a.s2 += v * v;
}

void merge(Acc& t, const Acc& p) {
    t.s += p.s;
    t.s2 += p.s2;
}

}  // namespace

TEST_SUITE("parallel") {

TEST_CASE("blocked reduction is bitwise identical to the serial reference") {
    const std::size_t n = 50000;
    const Acc ser = sample_reduce_serial<Acc>(n, fold_sample, merge);
    for (int threads : {1, 2, 3, 8}) {
        const Acc par = sample_reduce<Acc>(n, threads, fold_sample, merge);
        CHECK(par.s == ser.s);
        CHECK(par.s2 == ser.s2);
    }
}

TEST_CASE("small inputs take the serial path") {
    const Acc a = sample_reduce<Acc>(100, 4, fold_sample, merge);
    const Acc b = sample_reduce_serial<Acc>(100, fold_sample, merge);
    CHECK(a.s == b.s);
}

TEST_CASE("indexed fill is order independent") {
    const std::size_t n = 4096;
    std::vector<double> serial(n), parallel(n);
    auto work = [](std::size_t i) {
        const auto p = DyadicBrownianPath::generate(1, 4, derive_key(9, i));
        return p.at(16, 0);
    };
    parallel_for_indexed_serial(n, [&](std::size_t i) { serial[i] = work(i); });
    parallel_for_indexed(n, 3, [&](std::size_t i) { parallel[i] = work(i); });
    CHECK(serial == parallel);
}

TEST_CASE("rho sweep kernel reduces identically across thread counts") {
    RhoParams par;
    par.n_max = 7;
    auto fold = [&](Acc& a, std::size_t i) {
        const auto path = DyadicBrownianPath::generate(2, 7, derive_key(5, i));
        const double v = rho_dyadic(1, path, 6, 5, par);
        a.s += v;
        a.s2 += v * v;
    };
    const Acc one = sample_reduce<Acc>(3000, 1, fold, merge);
    const Acc two = sample_reduce<Acc>(3000, 2, fold, merge);
    CHECK(one.s == two.s);
    CHECK(one.s2 == two.s2);
}

TEST_CASE("thread resolution honors explicit requests") {
    CHECK(resolve_threads(3) == 3);
    CHECK(resolve_threads(0) >= 1);
}

}  // TEST_SUITE
