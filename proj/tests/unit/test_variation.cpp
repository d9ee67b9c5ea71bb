#include <doctest.h>

#include <cmath>

#include "roughdyadic/lift.hpp"
#include "roughdyadic/rng.hpp"
#include "roughdyadic/variation.hpp"

using namespace roughdyadic;

namespace {

// Exhaustive subset maximum, summing increments left to right exactly like
// the dynamic program would along the chosen chain.
double brute_force_pvar(std::size_t n, const std::vector<double>& cost, double p, int j) {
    const double e = p / j;
    double best = -1.0;
    const std::size_t interior = n - 2;
    for (std::uint64_t mask = 0; mask < (1ULL << interior); ++mask) {
        std::vector<std::size_t> sel = {0};
        for (std::size_t b = 0; b < interior; ++b)
            if (mask & (1ULL << b)) sel.push_back(b + 1);
        sel.push_back(n - 1);
        double total = 0.0;
        for (std::size_t i = 1; i < sel.size(); ++i)
            total += std::pow(cost[sel[i - 1] * n + sel[i]], e);
        if (total > best) best = total;
    }
    return std::pow(best, static_cast<double>(j) / p);
}

GridLift random_grid_lift(Rng& rng, int d, std::size_t anchors) {
    std::vector<double> times(anchors), vertices(anchors * d);
    for (std::size_t i = 0; i < anchors; ++i)
        times[i] = static_cast<double>(i) / static_cast<double>(anchors - 1);
    for (std::size_t i = d; i < vertices.size(); ++i) vertices[i] = rng.next_normal();
    return GridLift::from_polyline(times, vertices, d, times);
}

}  // namespace

TEST_SUITE("variation") {

TEST_CASE("fast power decomposition") {
    const FastPow f54(1.25), f58(0.625), fgen(0.731);
    for (double s : {0.3, 1.0, 7.5, 1e-8}) {
        CHECK(f54(s) == doctest::Approx(std::pow(s, 1.25)).epsilon(1e-14));
        CHECK(f58(s) == doctest::Approx(std::pow(s, 0.625)).epsilon(1e-14));
        CHECK(fgen(s) == doctest::Approx(std::pow(s, 0.731)).epsilon(1e-14));
    }
}

TEST_CASE("p-variation of a monotone scalar path is the total increment") {
    // Single-interval partitions win by superadditivity of x^p.
    std::vector<double> vals = {0.0, 0.3, 0.5, 1.1, 1.6, 2.0};
    auto norm = [&](std::size_t l, std::size_t i) { return vals[i] - vals[l]; };
    const double v = p_variation_grid(vals.size(), norm, 2.5, 1);
    CHECK(v == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("p-variation of the zero path") {
    auto norm = [](std::size_t, std::size_t) { return 0.0; };
    CHECK(p_variation_grid(8, norm, 2.5, 1) == 0.0);
}

TEST_CASE("dynamic program equals exhaustive enumeration") {
    Rng rng(31);
    for (int rep = 0; rep < 60; ++rep) {
        const std::size_t n = 4 + rng.next_below(9);  // up to 12 anchors here
        std::vector<double> pts(n);
        for (auto& x : pts) x = rng.next_normal();
        std::vector<double> cost(n * n, 0.0);
        for (std::size_t l = 0; l < n; ++l)
            for (std::size_t i = l + 1; i < n; ++i) cost[l * n + i] = std::abs(pts[i] - pts[l]);
        auto norm = [&](std::size_t l, std::size_t i) { return cost[l * n + i]; };
        const double dp = p_variation_grid(n, norm, 2.5, 1);
        const double bf = brute_force_pvar(n, cost, 2.5, 1);
        CHECK(dp == bf);
    }
}

TEST_CASE("d_p metric axioms on random lifts") {
    Rng rng(8);
    const double p = 2.5;
    for (int rep = 0; rep < 40; ++rep) {
        const GridLift x = random_grid_lift(rng, 2, 9);
        const GridLift y = random_grid_lift(rng, 2, 9);
        const GridLift z = random_grid_lift(rng, 2, 9);
        CHECK(d_p_grid(x, x, p) == 0.0);
        const double xy = d_p_grid(x, y, p);
        CHECK(xy >= 0.0);
        CHECK(xy == d_p_grid(y, x, p));
        CHECK(d_p_grid(x, z, p) <= xy + d_p_grid(y, z, p) + 1e-10);
    }
}

TEST_CASE("le1 bracket") {
    CHECK(le1_bound(0, 0, 0, 0) == 0.0);
    CHECK(le1_bound(1, 0, 2, 2) == 4.0);
    CHECK(le1_bound(1, 5, 1, 1) == 5.0);
    CHECK_THROWS_AS(le1_bound(-1, 0, 0, 0), std::invalid_argument);
    // monotone in each argument
    CHECK(le1_bound(1.1, 0, 2, 2) >= le1_bound(1, 0, 2, 2));
    CHECK(le1_bound(1, 0.5, 2, 2) >= le1_bound(1, 0, 2, 2));
}

TEST_CASE("rho of the unit-speed ramp against the scalar series") {
    // Level-1 rho of w_t = t against the zero path: every level-n increment
    // is 2^-n, so the inner sum collapses to sum_n n^gamma 2^n 2^(-np).
    const int res = 10;
    std::vector<double> vals((1ULL << res) + 1);
    for (std::size_t k = 0; k < vals.size(); ++k)
        vals[k] = std::ldexp(static_cast<double>(k), -res);
    const auto ramp = DyadicBrownianPath::from_values(1, res, std::move(vals));

    RhoParams par;
    par.p = 2.5;
    par.gamma = 0.5;
    par.n_max = 60;
    par.tail = TailMode::truncate;

    double series = 0.0;
    for (int n = 1; n <= 60; ++n)
        series += std::pow(static_cast<double>(n), 0.5) * std::exp2(n * (1.0 - 2.5));
    const double expected = std::pow(series, 1.0 / 2.5);

    auto norm = [&](int n, std::uint64_t) { return std::exp2(-n); };
    CHECK(rho_generic(1, norm, par) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(rho_dyadic(1, ramp, res, -1, par) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("rho vanishes on identical inputs and grows with n_max") {
    const auto path = DyadicBrownianPath::generate(2, 8, 44);
    RhoParams par;
    par.tail = TailMode::truncate;
    par.n_max = 6;
    auto zero = [](int, std::uint64_t) { return 0.0; };
    CHECK(rho_generic(1, zero, par) == 0.0);
    const double v6 = rho_dyadic(1, path, 5, -1, par);
    par.n_max = 9;
    const double v9 = rho_dyadic(1, path, 5, -1, par);
    CHECK(v9 >= v6);
}

TEST_CASE("analytic tail is n_max independent past the polygon level") {
    const auto path = DyadicBrownianPath::generate(2, 8, 3);
    RhoParams par;
    par.tail = TailMode::analytic_tail;
    for (int j : {1, 2}) {
        par.n_max = 6;
        const double a = rho_dyadic(j, path, 6, -1, par);
        const double ad = rho_dyadic(j, path, 6, 5, par);
        par.n_max = 11;
        const double b = rho_dyadic(j, path, 6, -1, par);
        const double bd = rho_dyadic(j, path, 6, 5, par);
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
        CHECK(ad == doctest::Approx(bd).epsilon(1e-12));
    }
}

TEST_CASE("closed-form rho rows match the generic sums") {
    const auto path = DyadicBrownianPath::generate(2, 8, 91);
    RhoParams par;
    par.tail = TailMode::truncate;
    par.n_max = 8;
    const int m = 5;
    for (int j : {1, 2}) {
        const PolygonalLiftCache fine(polygonal(path, m + 1));
        const PolygonalLiftCache coarse(polygonal(path, m));
        auto norm = [&](int n, std::uint64_t k) {
            const GroupTensor2& a = fine.lift(n, k);
            const GroupTensor2& b = coarse.lift(n, k);
            if (j == 1) {
                double s = 0.0;
                for (int i = 0; i < 2; ++i)
                    s += (a.level1[i] - b.level1[i]) * (a.level1[i] - b.level1[i]);
                return std::sqrt(s);
            }
            double s = 0.0;
            for (std::size_t e = 0; e < a.level2.a.size(); ++e)
                s += (a.level2.a[e] - b.level2.a[e]) * (a.level2.a[e] - b.level2.a[e]);
            return std::sqrt(s);
        };
        const double generic = rho_generic(j, norm, par);
        const double closed = rho_dyadic(j, path, m + 1, m, par);
        CHECK(closed == doctest::Approx(generic).epsilon(1e-10));
    }
}

TEST_CASE("params are validated") {
    RhoParams par;
    par.p = 3.2;
    CHECK_THROWS_AS(par.validate(), std::invalid_argument);
    par.p = 2.5;
    par.gamma = 0.1;
    CHECK_THROWS_AS(par.validate(), std::invalid_argument);
    par.gamma = 0.5;
    par.n_max = 0;
    CHECK_THROWS_AS(par.validate(), std::invalid_argument);
}

TEST_CASE("d_p of consecutive polygons shrinks with the level") {
    const auto path = DyadicBrownianPath::generate(2, 9, 6);
    const double d4 = d_p_dyadic_consecutive(path, 4, 2.5);
    const double d8 = d_p_dyadic_consecutive(path, 8, 2.5);
    CHECK(d8 < d4);
    CHECK(d8 > 0.0);
}

}  // TEST_SUITE
