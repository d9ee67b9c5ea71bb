#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "roughdyadic/path.hpp"
#include "roughdyadic/tensor.hpp"

namespace roughdyadic {

enum class TailMode { truncate, analytic_tail };

/// Parameters of the dyadic rho functionals: exponent p in (2,3), weight
/// gamma > p/2 - 1, dyadic cutoff and tail policy.
struct RhoParams {
    double p = 2.5;
    double gamma = 0.5;
    int n_max = 12;
    TailMode tail = TailMode::analytic_tail;

    void validate() const {
        if (!(p > 2.0 && p < 3.0)) throw std::invalid_argument("RhoParams: p must lie in (2,3)");
        if (!(gamma > p / 2.0 - 1.0))
            throw std::invalid_argument("RhoParams: gamma must exceed p/2 - 1");
        if (n_max < 1) throw std::invalid_argument("RhoParams: n_max must be >= 1");
    }
};

/// x  ->  x^e evaluated on squared norms; exponents that are multiples of
/// 1/8 are decomposed into chained square roots, anything else falls back to
/// std::pow. The DP inner loops live on this.
class FastPow {
  public:
    explicit FastPow(double e) : e_(e) {
        const double q = e * 8.0;
        const long qi = std::lround(q);
        if (qi >= 1 && qi <= 32 && q == static_cast<double>(qi)) {
            q8_ = static_cast<int>(qi);
            fast_ = true;
        }
    }

    double operator()(double s) const {
        if (!fast_) return std::pow(s, e_);
        const double r4 = std::sqrt(s);    // s^(4/8)
        const double r2 = std::sqrt(r4);   // s^(2/8)
        const double r1 = std::sqrt(r2);   // s^(1/8)
        double out = 1.0;
        int q = q8_;
        while (q >= 8) {
            out *= s;
            q -= 8;
        }
        if (q & 4) out *= r4;
        if (q & 2) out *= r2;
        if (q & 1) out *= r1;
        return out;
    }

  private:
    double e_;
    int q8_ = 0;
    bool fast_ = false;
};

/// Grid-restricted p-variation: the maximum over anchor subsets (containing
/// both endpoints) of the sum of |increment|^(p/j), by the O(n^2) dynamic
/// program, reported to the power j/p. norm_fn(l, i) must return the norm of
/// the level-j increment between anchors l < i.
template <typename NormFn>
double p_variation_grid(std::size_t n_anchors, NormFn&& norm_fn, double p, int j) {
    if (n_anchors < 2) throw std::invalid_argument("p_variation_grid: need at least 2 anchors");
    if (p / j < 1.0) throw std::invalid_argument("p_variation_grid: requires p/j >= 1");
    const double e = p / j;
    std::vector<double> best(n_anchors, 0.0);
    for (std::size_t i = 1; i < n_anchors; ++i) {
        double v = -1.0;
        for (std::size_t l = 0; l < i; ++l) {
            const double cand = best[l] + std::pow(norm_fn(l, i), e);
            if (cand > v) v = cand;
        }
        best[i] = v;
    }
    return std::pow(best[n_anchors - 1], static_cast<double>(j) / p);
}

/// Level-1/level-2 running signature of a piecewise-linear path, tabulated
/// at a fixed anchor grid; the raw material for d_p evaluations.
struct GridLift {
    int dim = 0;
    std::vector<double> times;  // anchor times, increasing
    std::vector<double> p1;     // anchors x dim
    std::vector<double> p2;     // anchors x dim^2

    std::size_t size() const { return times.size(); }

    /// Lift increment between anchors l <= i.
    GroupTensor2 increment(std::size_t l, std::size_t i) const;

    /// From arbitrary vertices (nv x dim) at the given vertex times; anchors
    /// may subdivide or skip segments.
    static GridLift from_polyline(const std::vector<double>& vertex_times,
                                  const std::vector<double>& vertices, int dim,
                                  const std::vector<double>& anchors);

    /// From the level-m skeleton of a path, anchored on the level-L dyadics.
    static GridLift from_polygonal(const PolygonalPath& P, int anchor_level);
};

/// Grid-restricted d_p between two lifts on a common anchor set: the larger
/// of the level-1 and level-2 p-variation of the increment differences.
/// A lower bound for the continuum distance; pair with le1_bound for the
/// matching upper bound.
double d_p_grid(const GridLift& a, const GridLift& b, double p);

/// d_p_grid(w^(m+1), w^(m)) with the default anchor grid min(m+1, 12).
double d_p_dyadic_consecutive(const DyadicBrownianPath& path, int m, double p,
                              int anchor_level = -1);

/// Bracketed quantity of the domination bound, without its constant:
/// max{rho1_ab, rho2_ab, rho1_ab * (rho1_a + rho1_b)}.
double le1_bound(double rho1_ab, double rho2_ab, double rho1_a, double rho1_b);

/// Truncated rho over generic increment maps; norm_fn(n, k) is the norm of
/// the level-j increment difference over (t_n^{k-1}, t_n^k]. Tail policy is
/// necessarily truncate for opaque maps.
template <typename NormFn>
double rho_generic(int j, NormFn&& norm_fn, const RhoParams& par) {
    par.validate();
    if (j != 1 && j != 2) throw std::invalid_argument("rho: j must be 1 or 2");
    const double e = par.p / j;
    double total = 0.0;
    for (int n = 1; n <= par.n_max; ++n) {
        double row = 0.0;
        for (std::uint64_t k = 1; k <= (1ULL << n); ++k) row += std::pow(norm_fn(n, k), e);
        total += std::pow(static_cast<double>(n), par.gamma) * row;
    }
    return std::pow(total, static_cast<double>(j) / par.p);
}

/// Per-level row sums S_n = sum_k |Delta_j|^(p/j), n = 1..n_max, for the
/// dyadic pair (w^(m_a), w^(m_b)); m_b = -1 compares against the zero path.
/// Rows above the polygon level use the exact per-segment slice form.
std::vector<double> rho_rows_dyadic(int j, const DyadicBrownianPath& path, int m_a, int m_b,
                                    const RhoParams& par);

/// Exact tail sum_{n > n_max} n^gamma S_n for the same pair (zero when the
/// integrand is identically zero beyond n_max at level 1).
double rho_tail_dyadic(int j, const DyadicBrownianPath& path, int m_a, int m_b,
                       const RhoParams& par);

/// rho_j(w^(m_a), w^(m_b)) with the configured tail policy.
double rho_dyadic(int j, const DyadicBrownianPath& path, int m_a, int m_b, const RhoParams& par);

}  // namespace roughdyadic
