#include <doctest.h>

#include <cmath>
#include <sstream>

#include "roughdyadic/parallel.hpp"
#include "roughdyadic/path.hpp"
#include "roughdyadic/rng.hpp"

using namespace roughdyadic;

TEST_SUITE("paths") {

TEST_CASE("base case M=0") {
    const auto p = DyadicBrownianPath::generate(3, 0, 42);
    CHECK(p.grid_points() == 2);
    for (int i = 0; i < 3; ++i) CHECK(p.at(0, i) == 0.0);
}

TEST_CASE("refinement consistency across resolutions") {
    const auto coarse = DyadicBrownianPath::generate(2, 5, 7);
    const auto fine = DyadicBrownianPath::generate(2, 8, 7);
    for (std::uint64_t k = 0; k <= (1ULL << 5); ++k)
        for (int i = 0; i < 2; ++i) CHECK(coarse.at(k, i) == fine.at(k << 3, i));
}

TEST_CASE("determinism for a fixed triple") {
    const auto a = DyadicBrownianPath::generate(2, 6, 99);
    const auto b = DyadicBrownianPath::generate(2, 6, 99);
    for (std::uint64_t k = 0; k <= (1ULL << 6); ++k)
        for (int i = 0; i < 2; ++i) CHECK(a.at(k, i) == b.at(k, i));
}

TEST_CASE("telescoping and dyadic additivity of increments") {
    const auto p = DyadicBrownianPath::generate(2, 7, 12);
    const int n = 5;
    Vec total(2, 0.0);
    for (std::uint64_t k = 1; k <= (1ULL << n); ++k) {
        const Vec xi = p.xi(n, k);
        for (int i = 0; i < 2; ++i) total[i] += xi[i];
        const Vec a = p.xi(n + 1, 2 * k - 1);
        const Vec b = p.xi(n + 1, 2 * k);
        for (int i = 0; i < 2; ++i) CHECK(xi[i] == doctest::Approx(a[i] + b[i]).epsilon(1e-14));
    }
    for (int i = 0; i < 2; ++i)
        CHECK(total[i] == doctest::Approx(p.at(1ULL << 7, i)).epsilon(1e-12));
}

TEST_CASE("increment indices are validated") {
    const auto p = DyadicBrownianPath::generate(1, 4, 3);
    CHECK_THROWS_AS(p.xi(5, 1), std::out_of_range);
    CHECK_THROWS_AS(p.xi(3, 0), std::out_of_range);
    CHECK_THROWS_AS(p.xi(3, 9), std::out_of_range);
}

TEST_CASE("endpoint variance matches the standard normal") {
    // 2e4 seeds at M=0: sample variance of w_1 within 5 standard errors.
    const long s = 20000;
    struct Acc {
        double sum = 0, sum2 = 0;
    };
    const Acc acc = sample_reduce<Acc>(
        s, 0,
        [&](Acc& a, std::size_t i) {
            const auto p = DyadicBrownianPath::generate(1, 0, derive_key(1234, i));
            const double v = p.at(1, 0);
            a.sum += v;
            a.sum2 += v * v;
        },
        [](Acc& t, const Acc& p) {
            t.sum += p.sum;
            t.sum2 += p.sum2;
        });
    const double var = acc.sum2 / s - (acc.sum / s) * (acc.sum / s);
    CHECK(std::abs(var - 1.0) < 5.0 * std::sqrt(2.0 / s));
}

TEST_CASE("increment covariance scales like interval length") {
    const long s = 20000;
    const int n = 4;
    struct Acc {
        double v0 = 0, v1 = 0, cross = 0, disjoint = 0;
    };
    const Acc acc = sample_reduce<Acc>(
        s, 0,
        [&](Acc& a, std::size_t i) {
            const auto p = DyadicBrownianPath::generate(2, 6, derive_key(77, i));
            const Vec x = p.xi(n, 3);
            const Vec y = p.xi(n, 7);
            a.v0 += x[0] * x[0];
            a.v1 += x[1] * x[1];
            a.cross += x[0] * x[1];
            a.disjoint += x[0] * y[0];
        },
        [](Acc& t, const Acc& p) {
            t.v0 += p.v0;
            t.v1 += p.v1;
            t.cross += p.cross;
            t.disjoint += p.disjoint;
        });
    const double scale = std::exp2(-n);
    const double se = 5.0 * scale * std::sqrt(2.0 / s);
    CHECK(std::abs(acc.v0 / s - scale) < se);
    CHECK(std::abs(acc.v1 / s - scale) < se);
    CHECK(std::abs(acc.cross / s) < se);
    CHECK(std::abs(acc.disjoint / s) < se);
}

TEST_CASE("parent index") {
    CHECK(parent_index(3, 5, 3) == 5);
    CHECK(parent_index(3, 5, 1) == 2);  // (4/8, 5/8] sits inside (1/2, 1]
    CHECK(parent_index(4, 1, 2) == 1);
    CHECK_THROWS_AS(parent_index(2, 1, 3), std::invalid_argument);
}

TEST_CASE("polygonal evaluation") {
    const auto p = DyadicBrownianPath::generate(2, 6, 5);
    const PolygonalPath poly = polygonal(p, 4);

    SUBCASE("vertices reproduce grid values") {
        for (std::uint64_t k = 0; k <= (1ULL << 4); ++k) {
            const Vec v = poly.eval(std::ldexp(static_cast<double>(k), -4));
            for (int i = 0; i < 2; ++i) CHECK(v[i] == p.at(k << 2, i));
        }
    }
    SUBCASE("segment midpoint is the endpoint average") {
        const Vec v = poly.eval((3.0 + 3.5) / 2.0 / 16.0);
        for (int i = 0; i < 2; ++i) {
            const double lo = p.at(3ULL << 2, i), hi = p.at(4ULL << 2, i);
            // midpoint of [3/16, 3.5/16] lies 1/4 into segment 3
            CHECK(v[i] == doctest::Approx(lo + 0.25 * (hi - lo)).epsilon(1e-14));
        }
    }
    SUBCASE("full-resolution projection is the identity on vertices") {
        const PolygonalPath full = polygonal(p, 6);
        for (std::uint64_t k = 0; k <= (1ULL << 6); ++k)
            CHECK(full.vertex(k)[0] == p.at(k, 0));
    }
    CHECK_THROWS_AS(polygonal(p, 7), std::invalid_argument);
}

TEST_CASE("csv round trip") {
    const auto p = DyadicBrownianPath::generate(2, 5, 31);
    std::stringstream ss;
    p.dump_csv(ss);
    const auto q = DyadicBrownianPath::load_csv(ss);
    CHECK(q.dim() == 2);
    CHECK(q.resolution() == 5);
    for (std::uint64_t k = 0; k <= (1ULL << 5); ++k)
        for (int i = 0; i < 2; ++i) CHECK(q.at(k, i) == p.at(k, i));
}

TEST_CASE("resolution bounds") {
    CHECK_THROWS_AS(DyadicBrownianPath::generate(1, 25, 0), std::invalid_argument);
    CHECK_THROWS_AS(DyadicBrownianPath::generate(0, 4, 0), std::invalid_argument);
}

}  // TEST_SUITE
