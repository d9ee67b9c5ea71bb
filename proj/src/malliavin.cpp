#include "roughdyadic/malliavin.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "roughdyadic/parallel.hpp"
#include "roughdyadic/rng.hpp"

namespace roughdyadic {

void IncrementFunctional::partial2(const double*, std::uint64_t, int, std::uint64_t, int,
                                   double*) const {
    throw std::logic_error("IncrementFunctional: second partials not available");
}

namespace {

double ipow(double x, int e) {
    double out = 1.0;
    for (int i = 0; i < e; ++i) out *= x;
    return out;
}

std::uint64_t block_first(int coarse, int fine, std::uint64_t k) {
    return (k - 1) * (1ULL << (fine - coarse));  // zero-based first fine slot
}
std::uint64_t block_size(int coarse, int fine) { return 1ULL << (fine - coarse); }

// out_a = sum_t coef_t * xs[slot_t * d + a]  (component-diagonal linear form)
class LinearFunctional final : public IncrementFunctional {
  public:
    LinearFunctional(int level, int d, std::vector<std::pair<std::uint64_t, double>> terms)
        : IncrementFunctional(level, d, d), terms_(std::move(terms)) {}

    void eval(const double* xs, double* out) const override {
        const int d = dim();
        std::fill(out, out + d, 0.0);
        for (const auto& [slot, c] : terms_)
            for (int a = 0; a < d; ++a) out[a] += c * xs[slot * d + a];
    }
    void partial(const double*, std::uint64_t k, int i, double* out) const override {
        const int d = dim();
        std::fill(out, out + d, 0.0);
        for (const auto& [slot, c] : terms_)
            if (slot == k) out[i] += c;
    }
    bool has_partial2() const override { return true; }
    void partial2(const double*, std::uint64_t, int, std::uint64_t, int,
                  double* out) const override {
        std::fill(out, out + dim(), 0.0);
    }

  private:
    std::vector<std::pair<std::uint64_t, double>> terms_;
};

// X2 for n <= m: half the sum of sibling brackets over the block, at
// generation m+1.
class X2BracketFunctional final : public IncrementFunctional {
  public:
    X2BracketFunctional(int d, int m, int n, std::uint64_t k)
        : IncrementFunctional(m + 1, d, d * d),
          first_pair_(block_first(n, m, k)),  // zero-based level-m block start
          npairs_(block_size(n, m)) {}

    void eval(const double* xs, double* out) const override {
        const int d = dim();
        std::fill(out, out + d * d, 0.0);
        for (std::uint64_t r = 0; r < npairs_; ++r) {
            const double* a = xs + (2 * (first_pair_ + r)) * d;      // xi_{m+1}^{2r-1}
            const double* b = xs + (2 * (first_pair_ + r) + 1) * d;  // xi_{m+1}^{2r}
            for (int u = 0; u < d; ++u)
                for (int v = 0; v < d; ++v) out[u * d + v] += 0.5 * (a[u] * b[v] - b[u] * a[v]);
        }
    }
    void partial(const double* xs, std::uint64_t k, int i, double* out) const override {
        const int d = dim();
        std::fill(out, out + d * d, 0.0);
        const std::uint64_t pair = k / 2;
        if (pair < first_pair_ || pair >= first_pair_ + npairs_) return;
        const bool odd_slot = (k % 2) == 0;  // first of the sibling pair
        const double* other = xs + (odd_slot ? k + 1 : k - 1) * d;
        const double sgn = odd_slot ? 0.5 : -0.5;
        for (int v = 0; v < d; ++v) {
            out[i * d + v] += sgn * other[v];
            out[v * d + i] -= sgn * other[v];
        }
    }
    bool has_partial2() const override { return true; }
    void partial2(const double*, std::uint64_t k, int i, std::uint64_t l, int j,
                  double* out) const override {
        const int d = dim();
        std::fill(out, out + d * d, 0.0);
        if (k / 2 != l / 2 || k == l) return;
        const std::uint64_t pair = k / 2;
        if (pair < first_pair_ || pair >= first_pair_ + npairs_) return;
        const double sgn = (k % 2 == 0) ? 0.5 : -0.5;  // k is the odd sibling
        out[i * d + j] += sgn;
        out[j * d + i] -= sgn;
    }

  private:
    std::uint64_t first_pair_, npairs_;
};

// X2 for n > m: difference of two scaled tensor squares, at generation m+1.
class X2SquareDiffFunctional final : public IncrementFunctional {
  public:
    X2SquareDiffFunctional(int d, int m, int n, std::uint64_t k)
        : IncrementFunctional(m + 1, d, d * d),
          fine_slot_(parent_index(n, k, m + 1) - 1),
          coarse_left_(2 * (parent_index(n, k, m) - 1)),
          cf_(0.5 * std::exp2(2.0 * (m + 1 - n))),
          cc_(0.5 * std::exp2(2.0 * (m - n))) {}

    void eval(const double* xs, double* out) const override {
        const int d = dim();
        const double* a = xs + fine_slot_ * d;
        for (int u = 0; u < d; ++u)
            for (int v = 0; v < d; ++v) {
                const double su = xs[coarse_left_ * d + u] + xs[(coarse_left_ + 1) * d + u];
                const double sv = xs[coarse_left_ * d + v] + xs[(coarse_left_ + 1) * d + v];
                out[u * d + v] = cf_ * a[u] * a[v] - cc_ * su * sv;
            }
    }
    void partial(const double* xs, std::uint64_t k, int i, double* out) const override {
        const int d = dim();
        std::fill(out, out + d * d, 0.0);
        if (k == fine_slot_) {
            const double* a = xs + fine_slot_ * d;
            for (int v = 0; v < d; ++v) {
                out[i * d + v] += cf_ * a[v];
                out[v * d + i] += cf_ * a[v];
            }
        }
        if (k == coarse_left_ || k == coarse_left_ + 1) {
            for (int v = 0; v < d; ++v) {
                const double sv = xs[coarse_left_ * d + v] + xs[(coarse_left_ + 1) * d + v];
                out[i * d + v] -= cc_ * sv;
                out[v * d + i] -= cc_ * sv;
            }
        }
    }
    bool has_partial2() const override { return true; }
    void partial2(const double*, std::uint64_t k, int i, std::uint64_t l, int j,
                  double* out) const override {
        const int d = dim();
        std::fill(out, out + d * d, 0.0);
        if (k == fine_slot_ && l == fine_slot_) {
            out[i * d + j] += cf_;
            out[j * d + i] += cf_;
        }
        const bool k_in = (k == coarse_left_ || k == coarse_left_ + 1);
        const bool l_in = (l == coarse_left_ || l == coarse_left_ + 1);
        if (k_in && l_in) {
            out[i * d + j] -= cc_;
            out[j * d + i] -= cc_;
        }
    }

  private:
    std::uint64_t fine_slot_, coarse_left_;
    double cf_, cc_;
};

// Y2 for n < m: chord tensor square plus ordered bracket sum over the block,
// at generation m.
class Y2BlockFunctional final : public IncrementFunctional {
  public:
    Y2BlockFunctional(int d, int m, int n, std::uint64_t k)
        : IncrementFunctional(m, d, d * d),
          first_(block_first(n, m, k)),
          size_(block_size(n, m)) {}

    void eval(const double* xs, double* out) const override {
        const int d = dim();
        std::fill(out, out + d * d, 0.0);
        std::vector<double> eta(d, 0.0);
        for (std::uint64_t r = 0; r < size_; ++r) {
            const double* x = xs + (first_ + r) * d;
            for (int u = 0; u < d; ++u)
                for (int v = 0; v < d; ++v)
                    out[u * d + v] += 0.5 * (eta[u] * x[v] - x[u] * eta[v]);
            for (int u = 0; u < d; ++u) eta[u] += x[u];
        }
        // eta is now the chord.
        for (int u = 0; u < d; ++u)
            for (int v = 0; v < d; ++v) out[u * d + v] += 0.5 * eta[u] * eta[v];
    }
    void partial(const double* xs, std::uint64_t k, int i, double* out) const override {
        const int d = dim();
        std::fill(out, out + d * d, 0.0);
        if (k < first_ || k >= first_ + size_) return;
        std::vector<double> before(d, 0.0), after(d, 0.0), chord(d, 0.0);
        for (std::uint64_t r = 0; r < size_; ++r) {
            const double* x = xs + (first_ + r) * d;
            for (int u = 0; u < d; ++u) {
                chord[u] += x[u];
                if (first_ + r < k) before[u] += x[u];
                if (first_ + r > k) after[u] += x[u];
            }
        }
        for (int v = 0; v < d; ++v) {
            // chord part
            out[i * d + v] += 0.5 * chord[v];
            out[v * d + i] += 0.5 * chord[v];
            // bracket part: [e_i, after] + [before, e_i]
            out[i * d + v] += 0.5 * (after[v] - before[v]);
            out[v * d + i] -= 0.5 * (after[v] - before[v]);
        }
    }
    bool has_partial2() const override { return true; }
    void partial2(const double*, std::uint64_t k, int i, std::uint64_t l, int j,
                  double* out) const override {
        const int d = dim();
        std::fill(out, out + d * d, 0.0);
        const bool k_in = k >= first_ && k < first_ + size_;
        const bool l_in = l >= first_ && l < first_ + size_;
        if (!k_in || !l_in) return;
        out[i * d + j] += 0.5;
        out[j * d + i] += 0.5;
        if (k < l) {
            out[i * d + j] += 0.5;
            out[j * d + i] -= 0.5;
        } else if (k > l) {
            out[j * d + i] += 0.5;
            out[i * d + j] -= 0.5;
        }
    }

  private:
    std::uint64_t first_, size_;
};

// Y2 for n >= m: a single scaled tensor square at generation m.
class Y2SquareFunctional final : public IncrementFunctional {
  public:
    Y2SquareFunctional(int d, int m, int n, std::uint64_t k)
        : IncrementFunctional(m, d, d * d),
          slot_(parent_index(n, k, m) - 1),
          c_(0.5 * std::exp2(2.0 * (m - n))) {}

    void eval(const double* xs, double* out) const override {
        const int d = dim();
        const double* x = xs + slot_ * d;
        for (int u = 0; u < d; ++u)
            for (int v = 0; v < d; ++v) out[u * d + v] = c_ * x[u] * x[v];
    }
    void partial(const double* xs, std::uint64_t k, int i, double* out) const override {
        const int d = dim();
        std::fill(out, out + d * d, 0.0);
        if (k != slot_) return;
        const double* x = xs + slot_ * d;
        for (int v = 0; v < d; ++v) {
            out[i * d + v] += c_ * x[v];
            out[v * d + i] += c_ * x[v];
        }
    }
    bool has_partial2() const override { return true; }
    void partial2(const double*, std::uint64_t k, int i, std::uint64_t l, int j,
                  double* out) const override {
        const int d = dim();
        std::fill(out, out + d * d, 0.0);
        if (k != slot_ || l != slot_) return;
        out[i * d + j] += c_;
        out[j * d + i] += c_;
    }

  private:
    std::uint64_t slot_;
    double c_;
};

// |base|^{2 n_tilde} via S = sum of squared outputs.
class PowFunctional final : public IncrementFunctional {
  public:
    PowFunctional(IncFunPtr base, int n_tilde)
        : IncrementFunctional(base->generation_level(), base->dim(), 1),
          base_(std::move(base)),
          nt_(n_tilde) {
        if (nt_ < 1) throw std::invalid_argument("make_pow: n_tilde must be >= 1");
    }

    void eval(const double* xs, double* out) const override {
        out[0] = ipow(s_of(xs), nt_);
    }
    void partial(const double* xs, std::uint64_t k, int i, double* out) const override {
        const int od = base_->out_dim();
        std::vector<double> g(od), dg(od);
        base_->eval(xs, g.data());
        base_->partial(xs, k, i, dg.data());
        double s = 0.0, ds = 0.0;
        for (int o = 0; o < od; ++o) {
            s += g[o] * g[o];
            ds += 2.0 * g[o] * dg[o];
        }
        out[0] = nt_ * ipow(s, nt_ - 1) * ds;
    }
    bool has_partial2() const override { return base_->has_partial2(); }
    void partial2(const double* xs, std::uint64_t k, int i, std::uint64_t l, int j,
                  double* out) const override {
        const int od = base_->out_dim();
        std::vector<double> g(od), dgk(od), dgl(od), d2g(od);
        base_->eval(xs, g.data());
        base_->partial(xs, k, i, dgk.data());
        base_->partial(xs, l, j, dgl.data());
        base_->partial2(xs, k, i, l, j, d2g.data());
        double s = 0.0, dsk = 0.0, dsl = 0.0, d2s = 0.0;
        for (int o = 0; o < od; ++o) {
            s += g[o] * g[o];
            dsk += 2.0 * g[o] * dgk[o];
            dsl += 2.0 * g[o] * dgl[o];
            d2s += 2.0 * (dgk[o] * dgl[o] + g[o] * d2g[o]);
        }
        out[0] = (nt_ >= 2 ? nt_ * (nt_ - 1) * ipow(s, nt_ - 2) * dsk * dsl : 0.0) +
                 nt_ * ipow(s, nt_ - 1) * d2s;
    }

  private:
    double s_of(const double* xs) const {
        std::vector<double> g(base_->out_dim());
        base_->eval(xs, g.data());
        double s = 0.0;
        for (double v : g) s += v * v;
        return s;
    }

    IncFunPtr base_;
    int nt_;
};

void check_mnk(int m, int n, std::uint64_t k) {
    if (m < 0 || n < 1 || k < 1 || k > (1ULL << n))
        throw std::invalid_argument("built-in functional: bad (m, n, k)");
}

}  // namespace

IncFunPtr make_x1(int d, int m, int n, std::uint64_t k) {
    check_mnk(m, n, k);
    std::vector<std::pair<std::uint64_t, double>> terms;
    if (n > m) {
        const std::uint64_t fine = parent_index(n, k, m + 1) - 1;
        const std::uint64_t left = 2 * (parent_index(n, k, m) - 1);
        const double cf = std::exp2(static_cast<double>(m + 1 - n));
        const double cc = std::exp2(static_cast<double>(m - n));
        terms = {{fine, cf}, {left, -cc}, {left + 1, -cc}};
    }
    return std::make_shared<LinearFunctional>(m + 1, d, std::move(terms));
}

IncFunPtr make_x2(int d, int m, int n, std::uint64_t k) {
    check_mnk(m, n, k);
    if (n <= m) return std::make_shared<X2BracketFunctional>(d, m, n, k);
    return std::make_shared<X2SquareDiffFunctional>(d, m, n, k);
}

IncFunPtr make_y1(int d, int m, int n, std::uint64_t k) {
    check_mnk(m, n, k);
    std::vector<std::pair<std::uint64_t, double>> terms;
    if (n < m) {
        const std::uint64_t first = block_first(n, m, k);
        for (std::uint64_t r = 0; r < block_size(n, m); ++r) terms.emplace_back(first + r, 1.0);
    } else {
        terms.emplace_back(parent_index(n, k, m) - 1, std::exp2(static_cast<double>(m - n)));
    }
    return std::make_shared<LinearFunctional>(m, d, std::move(terms));
}

IncFunPtr make_y2(int d, int m, int n, std::uint64_t k) {
    check_mnk(m, n, k);
    if (n < m) return std::make_shared<Y2BlockFunctional>(d, m, n, k);
    return std::make_shared<Y2SquareFunctional>(d, m, n, k);
}

IncFunPtr make_pow(IncFunPtr base, int n_tilde) {
    return std::make_shared<PowFunctional>(std::move(base), n_tilde);
}

IncFunPtr make_f_pow(int j, int d, int m, int n, std::uint64_t k, int n_tilde) {
    return make_pow(j == 1 ? make_x1(d, m, n, k) : make_x2(d, m, n, k), n_tilde);
}

IncFunPtr make_g_pow(int j, int d, int m, int n, std::uint64_t k, int n_tilde) {
    return make_pow(j == 1 ? make_y1(d, m, n, k) : make_y2(d, m, n, k), n_tilde);
}

double grad_h_norm(const IncrementFunctional& f, const double* xs) {
    std::vector<double> out(f.out_dim());
    double s = 0.0;
    for (std::uint64_t k = 0; k < f.slots(); ++k)
        for (int i = 0; i < f.dim(); ++i) {
            f.partial(xs, k, i, out.data());
            for (double v : out) s += v * v;
        }
    return std::sqrt(s * std::exp2(-f.generation_level()));
}

double hess_h_norm(const IncrementFunctional& f, const double* xs) {
    std::vector<double> out(f.out_dim());
    double s = 0.0;
    for (std::uint64_t k = 0; k < f.slots(); ++k)
        for (int i = 0; i < f.dim(); ++i)
            for (std::uint64_t l = 0; l < f.slots(); ++l)
                for (int j = 0; j < f.dim(); ++j) {
                    f.partial2(xs, k, i, l, j, out.data());
                    for (double v : out) s += v * v;
                }
    return std::sqrt(s * std::exp2(-2.0 * f.generation_level()));
}

double partial_fd_gap(const IncrementFunctional& f, const double* xs, double h) {
    std::vector<double> x(xs, xs + f.coords());
    std::vector<double> an(f.out_dim()), fp(f.out_dim()), fm(f.out_dim());
    double worst = 0.0;
    for (std::uint64_t k = 0; k < f.slots(); ++k)
        for (int i = 0; i < f.dim(); ++i) {
            const std::size_t c = k * f.dim() + i;
            f.partial(x.data(), k, i, an.data());
            const double keep = x[c];
            x[c] = keep + h;
            f.eval(x.data(), fp.data());
            x[c] = keep - h;
            f.eval(x.data(), fm.data());
            x[c] = keep;
            for (int o = 0; o < f.out_dim(); ++o)
                worst = std::max(worst, rel_gap((fp[o] - fm[o]) / (2.0 * h), an[o]));
        }
    return worst;
}

std::vector<double> sample_increments(int generation_level, int dim, std::uint64_t key) {
    const std::uint64_t slots = 1ULL << generation_level;
    const double sd = std::sqrt(std::exp2(-generation_level));
    std::vector<double> xs(slots * dim);
    const int npairs = (dim + 1) / 2;
    for (std::uint64_t s = 0; s < slots; ++s)
        for (int p = 0; p < npairs; ++p) {
            const NormalPair z = normal_pair(key, s * npairs + p);
            xs[s * dim + 2 * p] = sd * z.z0;
            if (2 * p + 1 < dim) xs[s * dim + 2 * p + 1] = sd * z.z1;
        }
    return xs;
}

std::vector<double> increments_from_path(const DyadicBrownianPath& path, int generation_level) {
    const std::uint64_t slots = 1ULL << generation_level;
    std::vector<double> xs(slots * path.dim());
    for (std::uint64_t k = 1; k <= slots; ++k)
        path.xi_into(generation_level, k, xs.data() + (k - 1) * path.dim());
    return xs;
}

SobolevEstimate sobolev_q1_norm_mc(const IncrementFunctional& f, double q, long samples,
                                   std::uint64_t seed, int order, int threads) {
    if (q < 1.0) throw std::invalid_argument("sobolev_q1_norm_mc: q must be >= 1");
    struct Acc {
        double s_f = 0, s2_f = 0, s_df = 0, s2_df = 0, s_d2f = 0, s2_d2f = 0;
    };
    auto fold = [&](Acc& a, std::size_t i) {
        const std::vector<double> xs =
            sample_increments(f.generation_level(), f.dim(), derive_key(seed, i));
        std::vector<double> out(f.out_dim());
        f.eval(xs.data(), out.data());
        double s = 0.0;
        for (double v : out) s += v * v;
        const double av = std::pow(s, q / 2.0);
        a.s_f += av;
        a.s2_f += av * av;
        const double g = grad_h_norm(f, xs.data());
        const double gv = std::pow(g, q);
        a.s_df += gv;
        a.s2_df += gv * gv;
        if (order >= 2) {
            const double h2 = hess_h_norm(f, xs.data());
            const double hv = std::pow(h2, q);
            a.s_d2f += hv;
            a.s2_d2f += hv * hv;
        }
    };
    const Acc acc = sample_reduce<Acc>(static_cast<std::size_t>(samples), threads, fold,
                                       [](Acc& t, const Acc& p) {
                                           t.s_f += p.s_f;
                                           t.s2_f += p.s2_f;
                                           t.s_df += p.s_df;
                                           t.s2_df += p.s2_df;
                                           t.s_d2f += p.s_d2f;
                                           t.s2_d2f += p.s2_d2f;
                                       });

    auto finish = [&](double s, double s2, double& est, double& se) {
        const double mean = s / samples;
        const double var = std::max(0.0, s2 / samples - mean * mean) / samples;
        est = std::pow(mean, 1.0 / q);
        se = mean > 0.0 ? est / (q * mean) * std::sqrt(var) : 0.0;
    };
    SobolevEstimate e;
    e.samples = samples;
    finish(acc.s_f, acc.s2_f, e.f_q, e.f_se);
    finish(acc.s_df, acc.s2_df, e.df_q, e.df_se);
    if (order >= 2) finish(acc.s_d2f, acc.s2_d2f, e.d2f_q, e.d2f_se);
    e.total = e.f_q + e.df_q + (order >= 2 ? e.d2f_q : 0.0);
    return e;
}

PowerBoundCheck power_derivative_bound_check(const IncrementFunctional& base, int n_tilde,
                                             int order, const double* xs) {
    if (order != 1 && order != 2)
        throw std::invalid_argument("power_derivative_bound_check: order must be 1 or 2");
    IncFunPtr self(const_cast<IncrementFunctional*>(&base), [](IncrementFunctional*) {});
    const auto f = make_pow(self, n_tilde);

    std::vector<double> out(base.out_dim());
    base.eval(xs, out.data());
    double s = 0.0;
    for (double v : out) s += v * v;
    const double ax = std::sqrt(s);
    const double dx = grad_h_norm(base, xs);

    PowerBoundCheck c;
    if (order == 1) {
        c.lhs = grad_h_norm(*f, xs);
        c.rhs = 2.0 * n_tilde * ipow(ax, 2 * n_tilde - 1) * dx;
    } else {
        c.lhs = hess_h_norm(*f, xs);
        const double d2x = hess_h_norm(base, xs);
        c.rhs = (4.0 * n_tilde * (n_tilde - 1) + 2.0 * n_tilde) * ipow(ax, 2 * n_tilde - 2) * dx *
                    dx +
                2.0 * n_tilde * ipow(ax, 2 * n_tilde - 1) * d2x;
    }
    c.pass = c.lhs <= c.rhs + 1e-12 * std::max(1.0, c.rhs);
    return c;
}

double RhoGrad::grad_h_norm() const {
    double s = 0.0;
    for (double v : grad) s += v * v;
    return std::sqrt(s * std::exp2(-level));
}

namespace {

// Slice-regime coefficient sum_{n in (pivot, n_max]} n^gamma coef(n), plus
// the analytic continuation past n_max when requested. coef matches
// slice_row in variation.cpp.
double slice_coefficient(int j, int m_a, int m_b, const RhoParams& par) {
    const int pivot = m_b < 0 ? m_a : m_b;
    if (par.tail == TailMode::analytic_tail && par.n_max < pivot)
        throw std::invalid_argument("rho gradient: analytic tail needs n_max >= polygon level");
    auto coef = [&](int n) {
        if (m_b < 0) {
            const double base = std::exp2(-(n - m_a) * (par.p - 1.0));
            return j == 1 ? base : base * std::exp2(-par.p / 2.0);
        }
        return std::exp2(static_cast<double>(n - m_b - 1) - n * par.p);
    };
    double total = 0.0;
    for (int n = pivot + 1; n <= par.n_max; ++n)
        total += std::pow(static_cast<double>(n), par.gamma) * coef(n);
    if (par.tail == TailMode::analytic_tail) {
        for (int n = std::max(par.n_max, pivot) + 1;; ++n) {
            const double t = std::pow(static_cast<double>(n), par.gamma) * coef(n);
            total += t;
            const double r = std::pow((n + 1.0) / n, par.gamma) * std::exp2(-(par.p - 1.0));
            if (t * r / (1.0 - r) < 1e-14 * (total > 0.0 ? total : 1.0)) break;
        }
    }
    return total;
}

}  // namespace

RhoGrad rho_pow_gradient(int j, const DyadicBrownianPath& path, int m_a, int m_b,
                         const RhoParams& par) {
    par.validate();
    const int d = path.dim();
    RhoGrad rg;
    rg.level = m_a;  // generation level: m for the absolute case, m+1 for the pair
    rg.grad.assign((1ULL << rg.level) * d, 0.0);

    const FastPow pw_full(j == 1 ? par.p / 2.0 : par.p / 4.0);
    const FastPow pw_grad(j == 1 ? (par.p - 2.0) / 2.0 : (par.p - 4.0) / 4.0);

    if (m_b < 0 && j == 1) {
        // rho_1(w^(m))^p: explicit levels n <= m, slice family above.
        const int m = m_a;
        std::vector<double> ch(d);
        for (int n = 1; n <= std::min(par.n_max, m); ++n) {
            const double w = std::pow(static_cast<double>(n), par.gamma);
            const std::uint64_t bsize = 1ULL << (m - n);
            for (std::uint64_t k = 1; k <= (1ULL << n); ++k) {
                path.xi_into(n, k, ch.data());
                double s = 0.0;
                for (int c = 0; c < d; ++c) s += ch[c] * ch[c];
                rg.value += w * pw_full(s);
                if (s > 0.0) {
                    const double g = w * par.p * pw_grad(s);
                    const std::uint64_t first = (k - 1) * bsize;
                    for (std::uint64_t r = first; r < first + bsize; ++r)
                        for (int c = 0; c < d; ++c) rg.grad[r * d + c] += g * ch[c];
                }
            }
        }
        const double cs = slice_coefficient(1, m_a, m_b, par);
        std::vector<double> xi(d);
        for (std::uint64_t l = 0; l < (1ULL << m); ++l) {
            path.xi_into(m, l + 1, xi.data());
            double s = 0.0;
            for (int c = 0; c < d; ++c) s += xi[c] * xi[c];
            rg.value += cs * pw_full(s);
            if (s > 0.0) {
                const double g = cs * par.p * pw_grad(s);
                for (int c = 0; c < d; ++c) rg.grad[l * d + c] += g * xi[c];
            }
        }
        return rg;
    }

    if (m_b < 0) throw std::invalid_argument("rho_pow_gradient: absolute case supports j=1 only");
    if (m_a != m_b + 1) throw std::invalid_argument("rho_pow_gradient: pair must be (m+1, m)");
    const int m = m_b;

    if (j == 1) {
        // Only the slice family contributes; per fine segment a the slope
        // difference couples slot a and its sibling.
        const double cs = slice_coefficient(1, m_a, m_b, par);
        const double cf = std::exp2(static_cast<double>(m + 1));
        const double cc = std::exp2(static_cast<double>(m));
        std::vector<double> xa(d), xl(d), sg(d);
        for (std::uint64_t a = 0; a < (1ULL << (m + 1)); ++a) {
            path.xi_into(m + 1, a + 1, xa.data());
            path.xi_into(m, a / 2 + 1, xl.data());
            double s = 0.0;
            for (int c = 0; c < d; ++c) {
                sg[c] = cf * xa[c] - cc * xl[c];
                s += sg[c] * sg[c];
            }
            rg.value += cs * pw_full(s);
            if (s > 0.0) {
                const double g = cs * par.p * pw_grad(s);
                const std::uint64_t sib = a ^ 1ULL;
                for (int c = 0; c < d; ++c) {
                    rg.grad[a * d + c] += g * sg[c] * (cf - cc);
                    rg.grad[sib * d + c] += g * sg[c] * (-cc);
                }
            }
        }
        return rg;
    }

    // j = 2: bracket blocks for n <= m, tensor-square differences above.
    std::vector<double> x2(static_cast<std::size_t>(d) * d), xa(d), xb(d);
    for (int n = 1; n <= std::min(par.n_max, m); ++n) {
        const double w = std::pow(static_cast<double>(n), par.gamma);
        const std::uint64_t bsize = 1ULL << (m - n);
        for (std::uint64_t k = 1; k <= (1ULL << n); ++k) {
            std::fill(x2.begin(), x2.end(), 0.0);
            const std::uint64_t first = (k - 1) * bsize;
            for (std::uint64_t r = first; r < first + bsize; ++r) {
                path.xi_into(m + 1, 2 * r + 1, xa.data());
                path.xi_into(m + 1, 2 * r + 2, xb.data());
                for (int u = 0; u < d; ++u)
                    for (int v = 0; v < d; ++v)
                        x2[u * d + v] += 0.5 * (xa[u] * xb[v] - xb[u] * xa[v]);
            }
            double s = 0.0;
            for (double v : x2) s += v * v;
            rg.value += w * pw_full(s);
            if (s > 0.0) {
                const double g = w * (par.p / 2.0) * pw_grad(s);
                for (std::uint64_t r = first; r < first + bsize; ++r) {
                    path.xi_into(m + 1, 2 * r + 1, xa.data());
                    path.xi_into(m + 1, 2 * r + 2, xb.data());
                    for (int u = 0; u < d; ++u) {
                        double gu_odd = 0.0, gu_even = 0.0;
                        for (int v = 0; v < d; ++v) {
                            gu_odd += x2[u * d + v] * xb[v];    // (X2 xi^{2r})_u
                            gu_even += x2[u * d + v] * xa[v];   // (X2 xi^{2r-1})_u
                        }
                        rg.grad[(2 * r) * d + u] += g * gu_odd;
                        rg.grad[(2 * r + 1) * d + u] -= g * gu_even;
                    }
                }
            }
        }
    }
    const double cs = slice_coefficient(2, m_a, m_b, par);
    const double cf = std::exp2(static_cast<double>(m + 1));
    const double cc = std::exp2(static_cast<double>(m));
    std::vector<double> sp(d), sc(d), dmat(static_cast<std::size_t>(d) * d);
    for (std::uint64_t a = 0; a < (1ULL << (m + 1)); ++a) {
        path.xi_into(m + 1, a + 1, xa.data());
        path.xi_into(m, a / 2 + 1, xb.data());
        double s = 0.0;
        for (int c = 0; c < d; ++c) {
            sp[c] = cf * xa[c];
            sc[c] = cc * xb[c];
        }
        for (int u = 0; u < d; ++u)
            for (int v = 0; v < d; ++v) {
                dmat[u * d + v] = 0.5 * (sp[u] * sp[v] - sc[u] * sc[v]);
                s += dmat[u * d + v] * dmat[u * d + v];
            }
        rg.value += cs * pw_full(s);
        if (s > 0.0) {
            // D is symmetric, so contracting D against dD/dxi leaves
            // cf (D s')_u for the fine slot and -cc (D s)_u for both siblings.
            const double g = cs * (par.p / 2.0) * pw_grad(s);
            const std::uint64_t sib = a ^ 1ULL;
            for (int u = 0; u < d; ++u) {
                double dsp = 0.0, dsc = 0.0;
                for (int v = 0; v < d; ++v) {
                    dsp += dmat[u * d + v] * sp[v];
                    dsc += dmat[u * d + v] * sc[v];
                }
                rg.grad[a * d + u] += g * (cf * dsp - cc * dsc);
                rg.grad[sib * d + u] -= g * cc * dsc;
            }
        }
    }
    return rg;
}

RhoGrad rho_product_gradient(const DyadicBrownianPath& path, int m, const RhoParams& par) {
    const RhoGrad a = rho_pow_gradient(1, path, m, -1, par);       // generation m
    const RhoGrad b = rho_pow_gradient(1, path, m + 1, m, par);    // generation m+1
    RhoGrad out;
    out.level = m + 1;
    out.value = a.value * b.value;
    out.grad.assign(b.grad.size(), 0.0);
    const int d = path.dim();
    for (std::uint64_t s = 0; s < (1ULL << (m + 1)); ++s)
        for (int c = 0; c < d; ++c)
            out.grad[s * d + c] =
                a.value * b.grad[s * d + c] + b.value * a.grad[(s / 2) * d + c];
    return out;
}

}  // namespace roughdyadic
