#include <doctest.h>

#include <cmath>

#include "roughdyadic/malliavin.hpp"
#include "roughdyadic/rng.hpp"
#include "roughdyadic/verify.hpp"

using namespace roughdyadic;

namespace {

// Scalar coordinate functional xi_L^{k,i}.
class Coordinate final : public IncrementFunctional {
  public:
    Coordinate(int level, int d, std::uint64_t k, int i)
        : IncrementFunctional(level, d, 1), k_(k), i_(i) {}
    void eval(const double* xs, double* out) const override { out[0] = xs[k_ * dim() + i_]; }
    void partial(const double*, std::uint64_t k, int i, double* out) const override {
        out[0] = (k == k_ && i == i_) ? 1.0 : 0.0;
    }
    bool has_partial2() const override { return true; }
    void partial2(const double*, std::uint64_t, int, std::uint64_t, int,
                  double* out) const override {
        out[0] = 0.0;
    }

  private:
    std::uint64_t k_;
    int i_;
};

DyadicBrownianPath path_from_increments(const std::vector<double>& xs, int level, int d) {
    std::vector<double> vals((xs.size() / d + 1) * d, 0.0);
    for (std::size_t k = 0; k < xs.size() / d; ++k)
        for (int i = 0; i < d; ++i) vals[(k + 1) * d + i] = vals[k * d + i] + xs[k * d + i];
    return DyadicBrownianPath::from_values(d, level, std::move(vals));
}

double rho_value_of(int j, int m_a, int m_b, const RhoParams& par,
                    const std::vector<double>& xs, int level, int d, bool product) {
    const auto p = path_from_increments(xs, level, d);
    if (product) return rho_product_gradient(p, m_b, par).value;
    return rho_pow_gradient(j, p, m_a, m_b, par).value;
}

}  // namespace

TEST_SUITE("malliavin") {

TEST_CASE("coordinate functional has gradient 2^(-L/2)") {
    for (int L : {1, 3, 5}) {
        const Coordinate f(L, 2, 0, 1);
        const auto xs = sample_increments(L, 2, derive_key(4, L));
        CHECK(grad_h_norm(f, xs.data()) == doctest::Approx(std::exp2(-L / 2.0)).epsilon(1e-14));
        CHECK(hess_h_norm(f, xs.data()) == 0.0);
    }
}

TEST_CASE("y1 gradient closed form above the polygon level") {
    const int d = 2, m = 3, n = 6;
    const auto f = make_y1(d, m, n, 5);
    const auto xs = sample_increments(m, d, derive_key(9, 0));
    const double expected = std::exp2(m - n) * std::sqrt(d * std::exp2(-m));
    CHECK(grad_h_norm(*f, xs.data()) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("x2 gradient bound below the polygon level") {
    const int d = 2, m = 5, n = 2;
    const auto f = make_x2(d, m, n, 3);
    for (int rep = 0; rep < 20; ++rep) {
        const auto xs = sample_increments(m + 1, d, derive_key(100, rep));
        double sum_sq = 0.0;
        const std::uint64_t first = (3 - 1) * (1ULL << (m - n));
        for (std::uint64_t r = first; r < first + (1ULL << (m - n)); ++r)
            for (int i = 0; i < d; ++i) {
                sum_sq += xs[(2 * r) * d + i] * xs[(2 * r) * d + i];
                sum_sq += xs[(2 * r + 1) * d + i] * xs[(2 * r + 1) * d + i];
            }
        const double bound = std::sqrt(std::exp2(-(m + 1))) * std::sqrt(sum_sq);
        CHECK(grad_h_norm(*f, xs.data()) <= bound * (1.0 + 1e-12));
    }
}

TEST_CASE("squared coordinate block has the closed-form hessian") {
    // |xi_L^k|^2 has Hessian 2 I on one block: norm 2 sqrt(d) 2^-L.
    const int L = 4, d = 3;
    const auto f = make_pow(make_y1(d, L, L, 7), 1);
    const auto xs = sample_increments(L, d, derive_key(11, 1));
    CHECK(hess_h_norm(*f, xs.data()) ==
          doctest::Approx(2.0 * std::sqrt(3.0) * std::exp2(-L)).epsilon(1e-13));
}

TEST_CASE("x2 hessian is deterministic with the (m=n=2)-calibrated constant") {
    const int d = 2;
    const auto base = make_x2(d, 2, 2, 1);
    const auto xs0 = sample_increments(3, d, derive_key(2, 2));
    const double c = hess_h_norm(*base, xs0.data()) / std::sqrt(std::exp2(-4.0));
    for (const auto& [m, n] : std::vector<std::pair<int, int>>{{3, 1}, {4, 2}, {5, 3}, {6, 2}}) {
        const auto f = make_x2(d, m, n, 1);
        const auto xs = sample_increments(m + 1, d, derive_key(3, m * 10 + n));
        const double expected = c * std::sqrt(std::exp2(-(m + n)));
        CHECK(hess_h_norm(*f, xs.data()) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("analytic partials agree with finite differences") {
    const int d = 2;
    struct Config {
        IncFunPtr f;
        const char* name;
    };
    std::vector<Config> fs;
    fs.push_back({make_x1(d, 3, 5, 2), "x1"});
    fs.push_back({make_x2(d, 3, 2, 2), "x2 low"});
    fs.push_back({make_x2(d, 3, 5, 7), "x2 high"});
    fs.push_back({make_y1(d, 3, 2, 1), "y1 low"});
    fs.push_back({make_y1(d, 3, 5, 9), "y1 high"});
    fs.push_back({make_y2(d, 3, 2, 2), "y2 low"});
    fs.push_back({make_y2(d, 3, 5, 4), "y2 high"});
    fs.push_back({make_f_pow(1, d, 3, 5, 2, 2), "f_pow j1"});
    fs.push_back({make_f_pow(2, d, 3, 2, 1, 2), "f_pow j2"});
    fs.push_back({make_g_pow(1, d, 3, 2, 1, 3), "g_pow j1"});
    fs.push_back({make_g_pow(2, d, 3, 6, 11, 2), "g_pow j2"});
    for (const auto& cfg : fs) {
        CAPTURE(cfg.name);
        for (int rep = 0; rep < 25; ++rep) {
            const auto xs =
                sample_increments(cfg.f->generation_level(), d, derive_key(500, rep));
            CHECK(partial_fd_gap(*cfg.f, xs.data()) < 1e-6);
        }
    }
}

TEST_CASE("power derivative bounds hold pointwise") {
    const int d = 2;
    std::vector<IncFunPtr> bases = {make_x1(d, 3, 5, 2), make_x2(d, 3, 2, 2),
                                    make_y1(d, 3, 4, 3), make_y2(d, 3, 2, 1)};
    for (const auto& base : bases)
        for (int nt : {1, 3})
            for (int order : {1, 2})
                for (int rep = 0; rep < 40; ++rep) {
                    const auto xs =
                        sample_increments(base->generation_level(), d, derive_key(7000 + nt, rep));
                    const PowerBoundCheck c =
                        power_derivative_bound_check(*base, nt, order, xs.data());
                    CHECK(c.pass);
                }
}

TEST_CASE("degenerate first-level difference gives zero on both sides") {
    const int d = 2;
    const auto base = make_x1(d, 4, 3, 2);  // n <= m: identically zero
    const auto xs = sample_increments(5, d, derive_key(1, 1));
    const PowerBoundCheck c = power_derivative_bound_check(*base, 2, 1, xs.data());
    CHECK(c.lhs == 0.0);
    CHECK(c.rhs == 0.0);
    CHECK(c.pass);
}

TEST_CASE("monte carlo sobolev norms") {
    SUBCASE("zero functional") {
        const auto f = make_x1(2, 4, 2, 1);  // zero branch
        const SobolevEstimate e = sobolev_q1_norm_mc(*f, 2.0, 500, 12);
        CHECK(e.total == 0.0);
    }
    SUBCASE("first-level coordinate") {
        const Coordinate f(1, 1, 0, 0);
        const SobolevEstimate e = sobolev_q1_norm_mc(f, 2.0, 20000, 5);
        CHECK(std::abs(e.f_q - std::exp2(-0.5)) < 3.0 * e.f_se);
        // DF is constant, so the gradient term has no Monte Carlo error.
        CHECK(e.df_q == doctest::Approx(std::exp2(-0.5)).epsilon(1e-12));
    }
    SUBCASE("f_pow scaling in n") {
        std::vector<std::pair<double, double>> pts;
        for (int n = 3; n <= 6; ++n) {
            const auto f = make_f_pow(1, 2, 2, n, 1, 1);
            const SobolevEstimate e = sobolev_q1_norm_mc(*f, 2.0, 4000, 71, 1);
            pts.emplace_back(n, e.total);
        }
        const SlopeFit fit = fit_slope(pts);
        CHECK(fit.slope == doctest::Approx(-2.0).epsilon(0.1));
    }
}

TEST_CASE("rho gradients match finite differences and the direct values") {
    const int d = 2, m = 3;
    RhoParams par;
    par.n_max = 6;
    par.tail = TailMode::analytic_tail;
    const auto path = DyadicBrownianPath::generate(d, m + 1, 404);

    struct Case {
        int j, m_a, m_b;
        bool product;
    };
    for (const Case& c : {Case{1, m, -1, false}, Case{1, m + 1, m, false},
                          Case{2, m + 1, m, false}, Case{1, m + 1, m, true}}) {
        const RhoGrad rg = c.product ? rho_product_gradient(path, m, par)
                                     : rho_pow_gradient(c.j, path, c.m_a, c.m_b, par);
        std::vector<double> xs = increments_from_path(path, rg.level);
        const double h = 1e-6;
        for (std::size_t idx = 0; idx < xs.size(); idx += 7) {
            const double keep = xs[idx];
            xs[idx] = keep + h;
            const double up = rho_value_of(c.j, c.m_a, c.m_b, par, xs, rg.level, d, c.product);
            xs[idx] = keep - h;
            const double dn = rho_value_of(c.j, c.m_a, c.m_b, par, xs, rg.level, d, c.product);
            xs[idx] = keep;
            const double fd = (up - dn) / (2.0 * h);
            CHECK(rel_gap(fd, rg.grad[idx]) < 1e-5);
        }
    }

    // Values agree with the row/tail assembly route.
    const RhoGrad r1 = rho_pow_gradient(1, path, m + 1, m, par);
    const double direct = std::pow(rho_dyadic(1, path, m + 1, m, par), par.p);
    CHECK(r1.value == doctest::Approx(direct).epsilon(1e-12));
    const RhoGrad r2 = rho_pow_gradient(2, path, m + 1, m, par);
    const double direct2 = std::pow(rho_dyadic(2, path, m + 1, m, par), par.p / 2.0);
    CHECK(r2.value == doctest::Approx(direct2).epsilon(1e-12));
}

TEST_CASE("increment sampling matches the path law") {
    // Variance of one slot should be 2^-L per coordinate.
    const int L = 3, d = 2;
    double s2 = 0.0;
    const long reps = 20000;
    for (long r = 0; r < reps; ++r) {
        const auto xs = sample_increments(L, d, derive_key(808, r));
        s2 += xs[0] * xs[0];
    }
    CHECK(std::abs(s2 / reps - std::exp2(-L)) < 5.0 * std::exp2(-L) * std::sqrt(2.0 / reps));
}

}  // TEST_SUITE
