#include <doctest.h>

#include <cmath>

#include "roughdyadic/rng.hpp"
#include "roughdyadic/verify.hpp"
#include "roughdyadic/wong_zakai.hpp"

using namespace roughdyadic;

TEST_SUITE("wong_zakai") {

TEST_CASE("pure drift is integrated exactly") {
    VectorFieldSpec spec;
    spec.dim_in = 1;
    spec.dim_out = 2;
    spec.f = [](const double*, double* fy) { fy[0] = 0.0; fy[1] = 0.0; };
    spec.drift = [](const double*, double* f0) { f0[0] = 0.7; f0[1] = -0.3; };
    const auto path = DyadicBrownianPath::generate(1, 5, 9);
    const SolveResult r = solve_wz(spec, {1.0, 2.0}, polygonal(path, 5), 3);
    CHECK(r.state(1ULL << 5)[0] == doctest::Approx(1.7).epsilon(1e-13));
    CHECK(r.state(1ULL << 5)[1] == doctest::Approx(1.7).epsilon(1e-13));
    CHECK(r.state(0)[0] == 1.0);
}

TEST_CASE("exp_scalar endpoint is level independent") {
    // The polygonal solution at t=1 is y0 exp(w_1) for every level.
    const auto path = DyadicBrownianPath::generate(1, 10, 33);
    auto [spec, y0] = wz_case_spec(WzCase::exp_scalar);
    const double exact = std::exp(path.at(path.grid_points() - 1, 0));
    for (int m : {4, 7, 10}) {
        const SolveResult r = solve_wz(spec, y0, polygonal(path, m), 8);
        CHECK(r.state(1ULL << m)[0] == doctest::Approx(exact).epsilon(1e-10));
    }
}

TEST_CASE("commuting linear system matches its closed form") {
    const auto path = DyadicBrownianPath::generate(2, 9, 14);
    auto [spec, y0] = wz_case_spec(WzCase::commuting_linear);
    const SolveResult r = solve_wz(spec, y0, polygonal(path, 9), 8);
    const auto ref = stratonovich_reference(WzCase::commuting_linear, path);
    const std::size_t last = 1ULL << 9;
    for (int i = 0; i < 4; ++i)
        CHECK(r.y[last * 4 + i] == doctest::Approx(ref[last * 4 + i]).epsilon(1e-9));
}

TEST_CASE("rotation system tracks the driver and its area") {
    const auto path = DyadicBrownianPath::generate(2, 8, 5);
    auto [spec, y0] = wz_case_spec(WzCase::rotation_area);
    const int m = 8;
    const SolveResult r = solve_wz(spec, y0, polygonal(path, m), 6);
    const auto ref = stratonovich_reference(WzCase::rotation_area, path);
    const std::size_t last = 1ULL << m;
    // First two coordinates follow the driver exactly; the third is the
    // polygon's signed area, here at full resolution so the reference agrees.
    CHECK(r.y[last * 3 + 0] == doctest::Approx(path.at(last, 0)).epsilon(1e-12));
    CHECK(r.y[last * 3 + 1] == doctest::Approx(path.at(last, 1)).epsilon(1e-12));
    CHECK(r.y[last * 3 + 2] == doctest::Approx(ref[last * 3 + 2]).epsilon(1e-8));
}

TEST_CASE("flow property") {
    const auto path = DyadicBrownianPath::generate(2, 6, 81);
    auto [spec, y0] = wz_case_spec(WzCase::rotation_area);
    const PolygonalPath drv = polygonal(path, 6);
    const auto whole = solve_wz_range(spec, y0, drv, 0, 64, 4);
    const auto first = solve_wz_range(spec, y0, drv, 0, 32, 4);
    Vec mid(first.end() - 3, first.end());
    const auto second = solve_wz_range(spec, mid, drv, 32, 64, 4);
    for (int i = 0; i < 3; ++i)
        CHECK(std::abs(whole[64 * 3 + i] - second[32 * 3 + i]) < 1e-10);
}

TEST_CASE("rk4 substep error scales like the fourth power") {
    // Richardson check on a ramp driver with a known endpoint.
    std::vector<double> vals = {0.0, 1.5};
    const auto ramp = DyadicBrownianPath::from_values(1, 0, std::move(vals));
    auto [spec, y0] = wz_case_spec(WzCase::exp_scalar);
    const double exact = std::exp(1.5);
    std::vector<std::pair<double, double>> pts;
    for (int s : {1, 2, 4, 8, 16}) {
        const SolveResult r = solve_wz(spec, y0, polygonal(ramp, 0), s);
        pts.emplace_back(std::log2(static_cast<double>(s)), std::abs(r.y[1] - exact));
    }
    const SlopeFit f = fit_slope(pts);
    CHECK(f.slope == doctest::Approx(-4.0).epsilon(0.075));
}

TEST_CASE("segment error estimates shrink with substeps") {
    const auto path = DyadicBrownianPath::generate(1, 4, 2);
    auto [spec, y0] = wz_case_spec(WzCase::exp_scalar);
    const SolveResult coarse = solve_wz(spec, y0, polygonal(path, 4), 2);
    const SolveResult fine = solve_wz(spec, y0, polygonal(path, 4), 8);
    double cmax = 0.0, fmax = 0.0;
    for (double e : coarse.segment_err) cmax = std::max(cmax, e);
    for (double e : fine.segment_err) fmax = std::max(fmax, e);
    CHECK(fmax < cmax);
}

TEST_CASE("wz_sequence gaps vanish for a frozen system and shrink for a real one") {
    const auto path = DyadicBrownianPath::generate(2, 9, 63);
    VectorFieldSpec frozen;
    frozen.dim_in = 2;
    frozen.dim_out = 1;
    frozen.f = [](const double*, double* fy) { fy[0] = 0.0; fy[1] = 0.0; };
    const auto still = wz_sequence(frozen, {0.4}, path, 3, 6, 2);
    for (std::size_t i = 1; i < still.size(); ++i) {
        CHECK(still[i].d_p_gap == 0.0);
        CHECK(still[i].sup_gap == 0.0);
    }

    auto [spec, y0] = wz_case_spec(WzCase::rotation_area);
    const auto steps = wz_sequence(spec, y0, path, 3, 8, 4);
    CHECK(steps.back().d_p_gap < steps[1].d_p_gap);
    CHECK(steps.back().sup_gap < 0.5);
}

TEST_CASE("blow-up is reported with its time") {
    VectorFieldSpec spec;
    spec.dim_in = 1;
    spec.dim_out = 1;
    // Strongly superlinear field on a deterministic ramp: finite-time escape.
    spec.f = [](const double* y, double* fy) { fy[0] = y[0] * y[0] * y[0]; };
    std::vector<double> vals = {0.0, 40.0};
    const auto ramp = DyadicBrownianPath::from_values(1, 0, std::move(vals));
    CHECK_THROWS_AS(solve_wz(spec, {1.0}, polygonal(ramp, 0), 64), BlowUpError);
}

TEST_CASE("jacobian validation hook") {
    auto [spec, y0] = wz_case_spec(WzCase::rotation_area);
    spec.jac_f = [](const double*, double* jf) {
        // d f / d y for the area system: only the third row depends on y.
        std::fill(jf, jf + 3 * 2 * 3, 0.0);
        jf[(2 * 2 + 0) * 3 + 1] = -0.5;  // d f_{3,1} / d y2
        jf[(2 * 2 + 1) * 3 + 0] = 0.5;   // d f_{3,2} / d y1
    };
    Rng rng(6);
    std::vector<Vec> states;
    for (int i = 0; i < 5; ++i)
        states.push_back({rng.next_normal(), rng.next_normal(), rng.next_normal()});
    CHECK(spec.jacobian_fd_gap(states) < 1e-6);
}

TEST_CASE("unknown case name is rejected") {
    CHECK_THROWS_AS(wz_case_from_string("heat_equation"), std::invalid_argument);
    CHECK(wz_case_from_string("exp_scalar") == WzCase::exp_scalar);
}

}  // TEST_SUITE
