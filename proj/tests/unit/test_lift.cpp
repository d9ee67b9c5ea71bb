#include <doctest.h>

#include <cmath>

#include "roughdyadic/lift.hpp"
#include "roughdyadic/rng.hpp"

using namespace roughdyadic;

TEST_SUITE("lift") {

TEST_CASE("segment lift closed form") {
    CHECK(rel_gap(lift_segment(Vec{0.0, 0.0}), GroupTensor2::identity(2)) == 0.0);
    const GroupTensor2 g = lift_segment(Vec{2.0});
    CHECK(g.level1[0] == 2.0);
    CHECK(g.level2(0, 0) == 2.0);
    Rng rng(9);
    for (int it = 0; it < 20; ++it) {
        Vec delta = {rng.next_normal(), rng.next_normal(), rng.next_normal()};
        const GroupTensor2 s = lift_segment(delta);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                CHECK(s.level2(i, j) + s.level2(j, i) ==
                      doctest::Approx(delta[i] * delta[j]).epsilon(1e-14));
    }
}

TEST_CASE("chen identity for polygonal lifts") {
    const auto path = DyadicBrownianPath::generate(2, 8, 21);
    const PolygonalPath poly = polygonal(path, 6);
    Rng rng(4);
    for (int it = 0; it < 30; ++it) {
        const int n = 3 + static_cast<int>(rng.next_below(4));
        const std::uint64_t a = rng.next_below((1ULL << n) - 1);
        const std::uint64_t b = a + 1 + rng.next_below((1ULL << n) - a - 1);
        const std::uint64_t c = b + 1;
        const double s = std::ldexp(static_cast<double>(a), -n);
        const double u = std::ldexp(static_cast<double>(b), -n);
        const double t = std::ldexp(static_cast<double>(c), -n);
        const GroupTensor2 joined = chen_mul(lift_polygonal(poly, s, u), lift_polygonal(poly, u, t));
        CHECK(rel_gap(joined, lift_polygonal(poly, s, t)) < 1e-12);
    }
}

TEST_CASE("geometric condition of polygonal lifts") {
    const auto path = DyadicBrownianPath::generate(3, 6, 2);
    const PolygonalPath poly = polygonal(path, 5);
    const GroupTensor2 g = lift_polygonal(poly, 0.0, 1.0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(0.5 * (g.level2(i, j) + g.level2(j, i)) ==
                  doctest::Approx(0.5 * g.level1[i] * g.level1[j]).epsilon(1e-12));
}

TEST_CASE("levy area against the shoelace formula") {
    const auto path = DyadicBrownianPath::generate(2, 7, 13);
    const int m = 7;
    const GroupTensor2 g = lift_polygonal(polygonal(path, m), 0.0, 1.0);
    // Shoelace sum over the vertices; the chord closing back to the origin
    // contributes nothing because the path starts there.
    double shoelace = 0.0;
    const std::uint64_t n = 1ULL << m;
    for (std::uint64_t k = 0; k < n; ++k) {
        const double x0 = path.at(k, 0), y0 = path.at(k, 1);
        const double x1 = path.at(k + 1, 0), y1 = path.at(k + 1, 1);
        shoelace += 0.5 * (x0 * y1 - x1 * y0);
    }
    const Mat area = levy_area(g);
    CHECK(area(0, 1) == doctest::Approx(shoelace).epsilon(1e-10));
    CHECK(area(1, 0) == doctest::Approx(-shoelace).epsilon(1e-10));
}

TEST_CASE("closed forms match the generic lift") {
    for (int d : {1, 2, 3}) {
        const auto path = DyadicBrownianPath::generate(d, 7, 100 + d);
        for (int m = 1; m <= 6; ++m) {
            const PolygonalPath poly = polygonal(path, m);
            for (int n = 1; n <= 6; ++n) {
                const auto lifts = sweep_interval_lifts(poly, n);
                for (std::uint64_t k = 1; k <= (1ULL << n); ++k) {
                    const Vec l1 = dyadic_level1(path, m, n, k);
                    const Mat l2 = dyadic_level2(path, m, n, k);
                    const GroupTensor2& gen = lifts[k - 1];
                    for (int i = 0; i < d; ++i)
                        CHECK(rel_gap(l1[i], gen.level1[i]) < 1e-12);
                    for (std::size_t e = 0; e < l2.a.size(); ++e)
                        CHECK(rel_gap(l2.a[e], gen.level2.a[e]) < 1e-12);
                }
            }
        }
    }
}

TEST_CASE("difference closed forms match generic subtraction") {
    const int d = 2;
    const auto path = DyadicBrownianPath::generate(d, 8, 55);
    for (int m = 2; m <= 6; ++m) {
        const PolygonalPath fine = polygonal(path, m + 1);
        const PolygonalPath coarse = polygonal(path, m);
        for (int n = 1; n <= 7; ++n) {
            const auto lf = sweep_interval_lifts(fine, n);
            const auto lc = sweep_interval_lifts(coarse, n);
            for (std::uint64_t k = 1; k <= (1ULL << n); ++k) {
                const Vec d1 = dyadic_diff_level1(path, m, n, k);
                const Mat d2 = dyadic_diff_level2(path, m, n, k);
                for (int i = 0; i < d; ++i)
                    CHECK(rel_gap(d1[i], lf[k - 1].level1[i] - lc[k - 1].level1[i]) < 1e-12);
                for (std::size_t e = 0; e < d2.a.size(); ++e)
                    CHECK(rel_gap(d2.a[e], lf[k - 1].level2.a[e] - lc[k - 1].level2.a[e]) < 1e-12);
                if (n <= m) {
                    // First level cancels exactly; second level is a pure
                    // bracket sum, hence antisymmetric.
                    for (int i = 0; i < d; ++i) CHECK(d1[i] == 0.0);
                    for (int i = 0; i < d; ++i)
                        for (int j = 0; j < d; ++j)
                            CHECK(d2(i, j) == doctest::Approx(-d2(j, i)).epsilon(1e-14));
                }
            }
        }
    }
}

TEST_CASE("both level-1 branches agree at n=m") {
    const auto path = DyadicBrownianPath::generate(2, 6, 8);
    for (std::uint64_t k = 1; k <= (1ULL << 4); ++k) {
        const Vec a = dyadic_level1(path, 4, 4, k);
        const Vec xi = path.xi(4, k);
        for (int i = 0; i < 2; ++i) CHECK(a[i] == xi[i]);
    }
}

TEST_CASE("lift cache returns sweep values") {
    const auto path = DyadicBrownianPath::generate(2, 6, 3);
    const PolygonalLiftCache cache(polygonal(path, 5));
    const auto lifts = sweep_interval_lifts(polygonal(path, 5), 3);
    for (std::uint64_t k = 1; k <= 8; ++k)
        CHECK(rel_gap(cache.lift(3, k), lifts[k - 1]) == 0.0);
}

TEST_CASE("dilation of the driving path") {
    const auto path = DyadicBrownianPath::generate(2, 5, 19);
    const double lam = 2.25;
    std::vector<double> scaled;
    for (std::uint64_t k = 0; k <= (1ULL << 5); ++k)
        for (int i = 0; i < 2; ++i) scaled.push_back(lam * path.at(k, i));
    const auto spath = DyadicBrownianPath::from_values(2, 5, std::move(scaled));
    const GroupTensor2 g = lift_polygonal(polygonal(path, 4), 0.0, 1.0);
    const GroupTensor2 h = lift_polygonal(polygonal(spath, 4), 0.0, 1.0);
    for (int i = 0; i < 2; ++i) CHECK(h.level1[i] == doctest::Approx(lam * g.level1[i]));
    for (std::size_t e = 0; e < h.level2.a.size(); ++e)
        CHECK(h.level2.a[e] == doctest::Approx(lam * lam * g.level2.a[e]).epsilon(1e-12));
}

TEST_CASE("invalid intervals are rejected") {
    const auto path = DyadicBrownianPath::generate(1, 4, 1);
    const PolygonalPath poly = polygonal(path, 3);
    CHECK_THROWS_AS(lift_polygonal(poly, 0.5, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(lift_polygonal(poly, 0.75, 0.25), std::invalid_argument);
    CHECK_THROWS_AS(dyadic_level1(path, 2, 6, 1), std::out_of_range);
}

}  // TEST_SUITE
