#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "roughdyadic/parallel.hpp"
#include "roughdyadic/rng.hpp"
#include "roughdyadic/variation.hpp"

namespace roughdyadic {

/// Configuration of one Monte Carlo rate/moment verification sweep.
struct RateCheckSpec {
    double q = 2.0;
    int n_tilde = 8;
    double beta = 0.01;
    double theta = 0.5;
    double delta = 1.0;
    double eps = 0.1;         // required decay rate where a lemma leaves it free
    int m_lo = 2, m_hi = 10;
    int n_lo = 1, n_hi = 10;
    long samples = 10000;
    std::uint64_t seed = 1;
    int threads = 0;

    void validate() const;
    /// Theorem-specific parameter constraints; throws with an actionable
    /// message when violated.
    void validate_for(const std::string& lemma_id, double p) const;
};

enum class Verdict { pass, fail, inconclusive };
const char* verdict_name(Verdict v);

struct EstimateRow {
    std::string lemma_id;
    std::string anchor;  // statement identifier carried into every CSV row
    int m = -1;
    int n = -1;
    double q = 0.0;
    double estimate = 0.0;
    double se = 0.0;
    long samples = 0;
    double slope = std::numeric_limits<double>::quiet_NaN();
    std::string note;
};

struct SlopeFit {
    double slope = 0.0, intercept = 0.0, residual_rms = 0.0, slope_se = 0.0;
    std::size_t points = 0;
};

/// Least squares of log2(value) against the integer scale.
SlopeFit fit_slope(const std::vector<std::pair<double, double>>& pts);

struct LqEstimate {
    double estimate = 0.0;
    double se = 0.0;
};

/// (E |F|^q)^(1/q) with a delta-method standard error; absf(i) must return
/// |F| for the i-th draw. Deterministic for fixed seed schedule and any
/// thread count.
template <typename Fn>
LqEstimate estimate_lq(long samples, int threads, double q, Fn&& absf) {
    if (samples < 100) throw std::invalid_argument("estimate_lq: needs >= 100 samples");
    if (q < 1.0) throw std::invalid_argument("estimate_lq: q must be >= 1");
    struct Acc {
        double s = 0.0, s2 = 0.0;
    };
    const Acc acc = sample_reduce<Acc>(
        static_cast<std::size_t>(samples), threads,
        [&](Acc& a, std::size_t i) {
            const double v = std::pow(absf(i), q);
            a.s += v;
            a.s2 += v * v;
        },
        [](Acc& t, const Acc& p) {
            t.s += p.s;
            t.s2 += p.s2;
        });
    const double mean = acc.s / samples;
    const double var = std::max(0.0, acc.s2 / samples - mean * mean) / samples;
    LqEstimate e;
    e.estimate = std::pow(mean, 1.0 / q);
    e.se = mean > 0.0 ? e.estimate / (q * mean) * std::sqrt(var) : 0.0;
    return e;
}

/// Normalizer 1 / sum_{n >= 1} n^gamma 2^(-n theta), summed until the
/// remainder bound falls below 1e-14 of the partial sum.
double compute_c_theta(double theta, double gamma);

struct LemmaCheck {
    std::string name;
    Verdict verdict = Verdict::inconclusive;
    std::string detail;
};

struct LemmaReport {
    std::string lemma_id;
    std::string anchor;
    Verdict verdict = Verdict::inconclusive;
    std::vector<EstimateRow> rows;
    std::vector<LemmaCheck> checks;
};

struct VerifyContext {
    int dim = 2;
    RhoParams rho;
};

/// Lemma identifiers accepted by verify_lemma.
std::vector<std::string> known_lemmas();
std::string lemma_anchor(const std::string& lemma_id);

/// Run one verification sweep. Every probability row is a surrogate: the
/// monotone link between probabilities and the capacity-style bounds is what
/// licenses checking decay of P instead of the original quantity.
LemmaReport verify_lemma(const std::string& lemma_id, const RateCheckSpec& spec,
                         const VerifyContext& ctx);

struct UnionBoundReport {
    long samples = 0;
    long premise_fired = 0;
    long violations = 0;
    double lambda = 0.0;
    int j = 0, m = 0;
};

/// Deterministic inclusion: whenever the truncated rho power exceeds lambda,
/// some dyadic level n must exceed its C_theta lambda 2^(-theta n) share.
/// lambda <= 0 requests the per-sweep empirical median.
UnionBoundReport union_bound_check(int j, int m, double lambda, const RateCheckSpec& spec,
                                   const VerifyContext& ctx);

}  // namespace roughdyadic
