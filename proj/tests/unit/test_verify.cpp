#include <doctest.h>

#include <cmath>
#include <sstream>

#include "roughdyadic/report.hpp"
#include "roughdyadic/rng.hpp"
#include "roughdyadic/verify.hpp"

using namespace roughdyadic;

TEST_SUITE("verify") {

TEST_CASE("estimate_lq basics") {
    SUBCASE("zero functional") {
        const LqEstimate e = estimate_lq(1000, 0, 2.0, [](std::size_t) { return 0.0; });
        CHECK(e.estimate == 0.0);
        CHECK(e.se == 0.0);
    }
    SUBCASE("standard normal second moment") {
        const LqEstimate e = estimate_lq(20000, 0, 2.0, [](std::size_t i) {
            return std::abs(normal_at(derive_key(3, i), 0));
        });
        CHECK(std::abs(e.estimate - 1.0) < 3.0 * e.se);
        CHECK(e.se > 0.0);
    }
    SUBCASE("dyadic increment norm") {
        const int n = 5, d = 2;
        const LqEstimate e = estimate_lq(20000, 0, 2.0, [&](std::size_t i) {
            const auto p = DyadicBrownianPath::generate(d, n, derive_key(19, i));
            double s = 0.0;
            for (int c = 0; c < d; ++c) s += p.xi(n, 3)[c] * p.xi(n, 3)[c];
            return std::sqrt(s);
        });
        CHECK(std::abs(e.estimate - std::sqrt(d * std::exp2(-n))) < 3.0 * e.se);
    }
}

TEST_CASE("fit_slope") {
    SUBCASE("exact powers") {
        std::vector<std::pair<double, double>> pts;
        for (int m = 1; m <= 6; ++m) pts.emplace_back(m, std::exp2(-m));
        const SlopeFit f = fit_slope(pts);
        CHECK(f.slope == doctest::Approx(-1.0).epsilon(1e-12));
        CHECK(f.residual_rms == doctest::Approx(0.0));
    }
    SUBCASE("constant values") {
        std::vector<std::pair<double, double>> pts;
        for (int m = 1; m <= 5; ++m) pts.emplace_back(m, 3.7);
        CHECK(fit_slope(pts).slope == doctest::Approx(0.0));
    }
    SUBCASE("noisy power law") {
        Rng rng(77);
        std::vector<std::pair<double, double>> pts;
        for (int m = 1; m <= 12; ++m)
            pts.emplace_back(m, 3.0 * std::exp2(-0.5 * m) * (1.0 + 0.01 * rng.next_normal()));
        const SlopeFit f = fit_slope(pts);
        CHECK(std::abs(f.slope + 0.5) < 0.05);
    }
    SUBCASE("degenerate inputs are rejected") {
        CHECK_THROWS_AS(fit_slope({{1, 1.0}, {2, 2.0}}), std::invalid_argument);
        CHECK_THROWS_AS(fit_slope({{1, 1.0}, {2, -2.0}, {3, 1.0}}), std::invalid_argument);
    }
}

TEST_CASE("compute_c_theta") {
    CHECK(compute_c_theta(1.0, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(compute_c_theta(2.0, 0.0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(compute_c_theta(1.0, 0.5) < compute_c_theta(1.0, 0.2));  // decreasing in gamma
    CHECK_THROWS_AS(compute_c_theta(0.0, 0.5), std::invalid_argument);
}

TEST_CASE("union bound inclusion") {
    VerifyContext ctx;
    RateCheckSpec spec;
    spec.samples = 300;
    spec.seed = 5;
    spec.theta = 0.5;

    SUBCASE("vacuous for a huge lambda") {
        const UnionBoundReport r = union_bound_check(1, 4, 1e12, spec, ctx);
        CHECK(r.premise_fired == 0);
        CHECK(r.violations == 0);
    }
    SUBCASE("median lambda fires and never violates") {
        for (int j : {1, 2}) {
            const UnionBoundReport r = union_bound_check(j, 5, -1.0, spec, ctx);
            CHECK(r.premise_fired > 0);
            CHECK(r.violations == 0);
        }
    }
    SUBCASE("single-level concentration satisfies the implication") {
        // If the whole mass sits at one n, that n must exceed its share:
        // direct consequence of C_theta < 1 / (n^gamma 2^(-theta n)).
        const double c_theta = compute_c_theta(0.5, 0.5);
        const double lambda = 1.0;
        const int n = 3;
        const double row = lambda / std::pow(static_cast<double>(n), 0.5);
        CHECK(row > c_theta * lambda * std::exp2(-0.5 * n));
    }
}

TEST_CASE("rate spec validation") {
    RateCheckSpec spec;
    spec.validate();
    SUBCASE("th8 beta window") {
        spec.beta = 0.03;  // above (p-2)/(8p) = 0.025 at p = 2.5
        CHECK_THROWS_AS(spec.validate_for("th8", 2.5), std::invalid_argument);
        spec.beta = 0.01;
        spec.validate_for("th8", 2.5);
    }
    SUBCASE("j2.1 power constraint") {
        spec.n_tilde = 4;  // p/(p-2) = 5 at p = 2.5, so 4 is too small
        CHECK_THROWS_AS(spec.validate_for("j2.1", 2.5), std::invalid_argument);
        spec.n_tilde = 8;
        spec.beta = 0.02;
        spec.theta = 0.05;
        spec.validate_for("j2.1", 2.5);
    }
    SUBCASE("sample floor") {
        spec.samples = 10;
        CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    }
}

TEST_CASE("verify_lemma smoke runs are deterministic") {
    VerifyContext ctx;
    RateCheckSpec spec;
    spec.samples = 400;
    spec.seed = 21;
    spec.m_lo = 2;
    spec.m_hi = 5;
    spec.threads = 2;

    const LemmaReport a = verify_lemma("le4", spec, ctx);
    const LemmaReport b = verify_lemma("le4", spec, ctx);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].estimate == b.rows[i].estimate);
        CHECK(a.rows[i].se == b.rows[i].se);
    }
    CHECK(a.rows.size() == 2 * 4);  // two j values, four levels

    CHECK_THROWS_AS(verify_lemma("nope", spec, ctx), std::invalid_argument);
}

TEST_CASE("le2 at small scale") {
    VerifyContext ctx;
    RateCheckSpec spec;
    spec.samples = 2000;
    spec.seed = 3;
    const LemmaReport rep = verify_lemma("le2", spec, ctx);
    CHECK(rep.verdict == Verdict::pass);
}

TEST_CASE("union lemma wrapper") {
    VerifyContext ctx;
    RateCheckSpec spec;
    spec.samples = 200;
    spec.seed = 11;
    spec.m_lo = 2;
    spec.m_hi = 4;
    const LemmaReport rep = verify_lemma("4-22-a1", spec, ctx);
    CHECK(rep.verdict == Verdict::pass);
    for (const auto& row : rep.rows) CHECK(row.estimate == 0.0);  // no violations
}

TEST_CASE("csv writers are stable and parseable") {
    LemmaReport rep;
    rep.lemma_id = "le2";
    rep.anchor = lemma_anchor("le2");
    EstimateRow row;
    row.lemma_id = "le2";
    row.anchor = rep.anchor;
    row.m = 3;
    row.n = 16;
    row.q = 2;
    row.estimate = 1.25;
    row.se = 0.01;
    row.samples = 100;
    rep.rows.push_back(row);
    LemmaCheck c;
    c.name = "demo";
    c.verdict = Verdict::pass;
    rep.checks.push_back(c);
    rep.verdict = Verdict::pass;

    std::ostringstream rows_csv;
    write_rows_csv(rows_csv, rep.rows);
    CHECK(rows_csv.str().find("lemma_id,anchor,m,n,q,estimate,stderr,slope,samples,note") !=
          std::string::npos);
    CHECK(rows_csv.str().find("le2,t-t-5,3,16,2,1.25,0.01,,100,") != std::string::npos);

    std::ostringstream verd_csv;
    write_verdicts_csv(verd_csv, {rep});
    std::istringstream back(verd_csv.str());
    const auto parsed = read_verdicts_csv(back);
    REQUIRE(parsed.size() == 1);
    CHECK(parsed[0].first == "le2");
    CHECK(parsed[0].second == "pass");

    std::ostringstream svg;
    write_lemma_svg(svg, rep);
    CHECK(svg.str().find("<svg") != std::string::npos);
}

TEST_CASE("known lemma table is closed under anchors") {
    for (const auto& id : known_lemmas()) CHECK(!lemma_anchor(id).empty());
}

}  // TEST_SUITE
