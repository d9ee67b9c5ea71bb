#include "roughdyadic/variation.hpp"

#include <algorithm>
#include <cmath>

namespace roughdyadic {

GroupTensor2 GridLift::increment(std::size_t l, std::size_t i) const {
    GroupTensor2 g(dim);
    const double* a1 = p1.data() + l * dim;
    const double* b1 = p1.data() + i * dim;
    const double* a2 = p2.data() + l * dim * dim;
    const double* b2 = p2.data() + i * dim * dim;
    for (int c = 0; c < dim; ++c) g.level1[c] = b1[c] - a1[c];
    for (int u = 0; u < dim; ++u)
        for (int v = 0; v < dim; ++v)
            g.level2(u, v) = b2[u * dim + v] - a2[u * dim + v] - a1[u] * (b1[v] - a1[v]);
    return g;
}

namespace {

// Fold one straight piece into a running signature.
inline void push_piece(double* s1, double* s2, const double* delta, int d) {
    for (int u = 0; u < d; ++u)
        for (int v = 0; v < d; ++v)
            s2[u * d + v] += 0.5 * delta[u] * delta[v] + s1[u] * delta[v];
    for (int u = 0; u < d; ++u) s1[u] += delta[u];
}

}  // namespace

GridLift GridLift::from_polyline(const std::vector<double>& vertex_times,
                                 const std::vector<double>& vertices, int dim,
                                 const std::vector<double>& anchors) {
    const std::size_t nv = vertex_times.size();
    if (nv < 2 || vertices.size() != nv * static_cast<std::size_t>(dim))
        throw std::invalid_argument("GridLift: bad polyline");
    if (anchors.size() < 2) throw std::invalid_argument("GridLift: need at least 2 anchors");
    if (anchors.front() < vertex_times.front() || anchors.back() > vertex_times.back())
        throw std::invalid_argument("GridLift: anchors outside the polyline span");

    GridLift g;
    g.dim = dim;
    g.times = anchors;
    g.p1.assign(anchors.size() * dim, 0.0);
    g.p2.assign(anchors.size() * static_cast<std::size_t>(dim) * dim, 0.0);

    std::vector<double> s1(dim, 0.0), s2(static_cast<std::size_t>(dim) * dim, 0.0);
    std::vector<double> pos(dim), delta(dim);

    std::size_t vi = 0;
    while (vertex_times[vi + 1] <= anchors[0]) ++vi;
    double cur = anchors[0];
    auto eval_at = [&](double t, double* out) {
        const double span = vertex_times[vi + 1] - vertex_times[vi];
        const double frac = span > 0.0 ? (t - vertex_times[vi]) / span : 0.0;
        for (int c = 0; c < dim; ++c) {
            const double lo = vertices[vi * dim + c];
            const double hi = vertices[(vi + 1) * dim + c];
            out[c] = lo + frac * (hi - lo);
        }
    };
    eval_at(cur, pos.data());

    for (std::size_t ai = 1; ai < anchors.size(); ++ai) {
        const double target = anchors[ai];
        if (!(target > cur)) throw std::invalid_argument("GridLift: anchors must increase");
        while (vertex_times[vi + 1] < target) {
            for (int c = 0; c < dim; ++c) delta[c] = vertices[(vi + 1) * dim + c] - pos[c];
            push_piece(s1.data(), s2.data(), delta.data(), dim);
            for (int c = 0; c < dim; ++c) pos[c] = vertices[(vi + 1) * dim + c];
            cur = vertex_times[vi + 1];
            ++vi;
        }
        std::vector<double> next(dim);
        eval_at(target, next.data());
        for (int c = 0; c < dim; ++c) delta[c] = next[c] - pos[c];
        push_piece(s1.data(), s2.data(), delta.data(), dim);
        pos = next;
        cur = target;
        std::copy(s1.begin(), s1.end(), g.p1.begin() + static_cast<long>(ai * dim));
        std::copy(s2.begin(), s2.end(),
                  g.p2.begin() + static_cast<long>(ai * static_cast<std::size_t>(dim) * dim));
    }
    return g;
}

GridLift GridLift::from_polygonal(const PolygonalPath& P, int anchor_level) {
    const int m = P.level();
    const int d = P.dim();
    const int L = anchor_level;
    if (L < 1 || L > P.parent().resolution())
        throw std::invalid_argument("GridLift: anchor level out of range");
    const int fine = std::max(L, m);
    const std::uint64_t nfine = 1ULL << fine;
    const std::uint64_t per_anchor = 1ULL << (fine - L);

    GridLift g;
    g.dim = d;
    g.times.resize((1ULL << L) + 1);
    for (std::uint64_t a = 0; a < g.times.size(); ++a)
        g.times[a] = std::ldexp(static_cast<double>(a), -L);
    g.p1.assign(g.times.size() * d, 0.0);
    g.p2.assign(g.times.size() * static_cast<std::size_t>(d) * d, 0.0);

    std::vector<double> s1(d, 0.0), s2(static_cast<std::size_t>(d) * d, 0.0), piece(d);
    const double frac = std::ldexp(1.0, m - fine);
    std::size_t ai = 1;
    for (std::uint64_t j = 1; j <= nfine; ++j) {
        if (fine == m) {
            P.parent().xi_into(m, j, piece.data());
        } else {
            P.parent().xi_into(m, parent_index(fine, j, m), piece.data());
            for (int c = 0; c < d; ++c) piece[c] *= frac;
        }
        push_piece(s1.data(), s2.data(), piece.data(), d);
        if (j % per_anchor == 0) {
            std::copy(s1.begin(), s1.end(), g.p1.begin() + static_cast<long>(ai * d));
            std::copy(s2.begin(), s2.end(),
                      g.p2.begin() + static_cast<long>(ai * static_cast<std::size_t>(d) * d));
            ++ai;
        }
    }
    return g;
}

namespace {

// Level-1 DP on the premerged prefix difference (anchors x d).
template <int D>
double pvar_l1_kernel(const double* diff, std::size_t n, int dr, const FastPow& f) {
    const int d = D > 0 ? D : dr;
    std::vector<double> best(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
        const double* xi = diff + i * d;
        double v = 0.0;
        for (std::size_t l = 0; l < i; ++l) {
            const double* xl = diff + l * d;
            double s = 0.0;
            for (int c = 0; c < d; ++c) {
                const double t = xi[c] - xl[c];
                s += t * t;
            }
            const double cand = best[l] + f(s);
            if (cand > v) v = cand;
        }
        best[i] = v;
    }
    return best[n - 1];
}

// Level-2 DP; e2 is the premerged prefix difference of the second level,
// a1/b1 the separate level-1 prefixes (the cross term does not collapse).
template <int D>
double pvar_l2_kernel(const double* e2, const double* a1, const double* b1, std::size_t n,
                      int dr, const FastPow& f) {
    const int d = D > 0 ? D : dr;
    const int dd = d * d;
    std::vector<double> best(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
        const double* e2i = e2 + i * dd;
        const double* a1i = a1 + i * d;
        const double* b1i = b1 + i * d;
        double v = 0.0;
        for (std::size_t l = 0; l < i; ++l) {
            const double* e2l = e2 + l * dd;
            const double* a1l = a1 + l * d;
            const double* b1l = b1 + l * d;
            double s = 0.0;
            for (int u = 0; u < d; ++u)
                for (int w = 0; w < d; ++w) {
                    const double t = e2i[u * d + w] - e2l[u * d + w] -
                                     a1l[u] * (a1i[w] - a1l[w]) + b1l[u] * (b1i[w] - b1l[w]);
                    s += t * t;
                }
            const double cand = best[l] + f(s);
            if (cand > v) v = cand;
        }
        best[i] = v;
    }
    return best[n - 1];
}

template <int D>
double d_p_grid_impl(const GridLift& a, const GridLift& b, double p, int dr) {
    const std::size_t n = a.size();
    const int d = D > 0 ? D : dr;

    std::vector<double> diff(n * d);
    for (std::size_t i = 0; i < n * static_cast<std::size_t>(d); ++i)
        diff[i] = a.p1[i] - b.p1[i];
    const FastPow f1(p / 2.0);
    const double s1 = pvar_l1_kernel<D>(diff.data(), n, d, f1);

    std::vector<double> e2(n * static_cast<std::size_t>(d) * d);
    for (std::size_t i = 0; i < e2.size(); ++i) e2[i] = a.p2[i] - b.p2[i];
    const FastPow f2(p / 4.0);
    const double s2 = pvar_l2_kernel<D>(e2.data(), a.p1.data(), b.p1.data(), n, d, f2);

    return std::max(std::pow(s1, 1.0 / p), std::pow(s2, 2.0 / p));
}

}  // namespace

double d_p_grid(const GridLift& a, const GridLift& b, double p) {
    if (a.dim != b.dim || a.size() != b.size())
        throw std::invalid_argument("d_p_grid: lifts live on different grids");
    if (a.size() < 2) throw std::invalid_argument("d_p_grid: need at least 2 anchors");
    switch (a.dim) {
        case 1: return d_p_grid_impl<1>(a, b, p, 1);
        case 2: return d_p_grid_impl<2>(a, b, p, 2);
        case 3: return d_p_grid_impl<3>(a, b, p, 3);
        case 4: return d_p_grid_impl<4>(a, b, p, 4);
        default: return d_p_grid_impl<0>(a, b, p, a.dim);
    }
}

double d_p_dyadic_consecutive(const DyadicBrownianPath& path, int m, double p, int anchor_level) {
    const int L = anchor_level > 0 ? anchor_level : std::min(m + 1, 12);
    const GridLift fine = GridLift::from_polygonal(polygonal(path, m + 1), L);
    const GridLift coarse = GridLift::from_polygonal(polygonal(path, m), L);
    return d_p_grid(fine, coarse, p);
}

double le1_bound(double rho1_ab, double rho2_ab, double rho1_a, double rho1_b) {
    if (rho1_ab < 0 || rho2_ab < 0 || rho1_a < 0 || rho1_b < 0)
        throw std::invalid_argument("le1_bound: inputs must be nonnegative");
    return std::max({rho1_ab, rho2_ab, rho1_ab * (rho1_a + rho1_b)});
}

namespace {

struct SliceSums {
    double s1 = 0.0;  // sum over fine segments of |slope contribution|^p
    double s2 = 0.0;  // level-2 analogue
};

// Per-segment constants of the slice regime n > pivot. For the absolute
// lift both levels reduce to sum_l |xi_pivot^l|^p; for the difference pair
// the slope and tensor-square differences of the two polygons enter.
SliceSums slice_sums(int j, const DyadicBrownianPath& path, int m_a, int m_b, double p) {
    SliceSums out;
    const int d = path.dim();
    std::vector<double> xa(d), xb(d);
    if (m_b < 0) {
        const int m = m_a;
        for (std::uint64_t l = 1; l <= (1ULL << m); ++l) {
            path.xi_into(m, l, xa.data());
            double s = 0.0;
            for (int c = 0; c < d; ++c) s += xa[c] * xa[c];
            out.s1 += std::pow(s, p / 2.0);
        }
        out.s2 = out.s1;  // |xi (x) xi| = |xi|^2
        return out;
    }
    const int m = m_b;  // m_a == m + 1
    const double cf = std::ldexp(1.0, m + 1);
    const double cc = std::ldexp(1.0, m);
    std::vector<double> sf(d), sc(d);
    for (std::uint64_t a = 1; a <= (1ULL << (m + 1)); ++a) {
        path.xi_into(m + 1, a, xa.data());
        path.xi_into(m, (a + 1) / 2, xb.data());
        double s = 0.0;
        for (int c = 0; c < d; ++c) {
            sf[c] = cf * xa[c];
            sc[c] = cc * xb[c];
            const double t = sf[c] - sc[c];
            s += t * t;
        }
        if (j == 1) {
            out.s1 += std::pow(s, p / 2.0);
        } else {
            double q = 0.0;
            for (int u = 0; u < d; ++u)
                for (int v = 0; v < d; ++v) {
                    const double t = 0.5 * (sf[u] * sf[v] - sc[u] * sc[v]);
                    q += t * t;
                }
            out.s2 += std::pow(q, p / 4.0);
        }
    }
    return out;
}

// n^gamma-free row coefficient of the slice regime.
double slice_row(int j, int n, int m_a, int m_b, double p, const SliceSums& s) {
    if (m_b < 0) {
        const double base = std::exp2(-(n - m_a) * (p - 1.0));
        return j == 1 ? base * s.s1 : base * std::exp2(-p / 2.0) * s.s2;
    }
    const int m = m_b;
    const double base = std::exp2(static_cast<double>(n - m - 1) - n * p);
    return base * (j == 1 ? s.s1 : s.s2);
}

void validate_pair(const DyadicBrownianPath& path, int m_a, int m_b) {
    if (m_b >= 0 && m_a != m_b + 1)
        throw std::invalid_argument("rho_dyadic: pair must be (m+1, m) or (m, -1)");
    if (m_a > path.resolution() || m_a < 0)
        throw std::invalid_argument("rho_dyadic: level exceeds path resolution");
}

int pivot_level(int m_a, int m_b) { return m_b < 0 ? m_a : m_b; }

}  // namespace

std::vector<double> rho_rows_dyadic(int j, const DyadicBrownianPath& path, int m_a, int m_b,
                                    const RhoParams& par) {
    par.validate();
    if (j != 1 && j != 2) throw std::invalid_argument("rho_rows_dyadic: j must be 1 or 2");
    validate_pair(path, m_a, m_b);
    const int d = path.dim();
    const int pivot = pivot_level(m_a, m_b);
    const FastPow f(j == 1 ? par.p / 2.0 : par.p / 4.0);

    std::vector<double> rows(static_cast<std::size_t>(par.n_max) + 1, 0.0);
    SliceSums ss;
    bool have_ss = false;

    std::vector<double> chord(d), xi(d), eta(d), blockm(static_cast<std::size_t>(d) * d);
    for (int n = 1; n <= par.n_max; ++n) {
        if (n > pivot) {
            if (!have_ss) {
                ss = slice_sums(j, path, m_a, m_b, par.p);
                have_ss = true;
            }
            rows[n] = slice_row(j, n, m_a, m_b, par.p, ss);
            continue;
        }
        double row = 0.0;
        if (m_b < 0 && j == 1) {
            for (std::uint64_t k = 1; k <= (1ULL << n); ++k) {
                path.xi_into(n, k, chord.data());
                double s = 0.0;
                for (int c = 0; c < d; ++c) s += chord[c] * chord[c];
                row += f(s);
            }
        } else if (m_b < 0) {
            // Level 2 of the absolute lift below the polygon level.
            const int m = m_a;
            const std::uint64_t block = 1ULL << (m - n);
            for (std::uint64_t k = 1; k <= (1ULL << n); ++k) {
                path.xi_into(n, k, chord.data());
                std::fill(eta.begin(), eta.end(), 0.0);
                std::fill(blockm.begin(), blockm.end(), 0.0);
                const std::uint64_t first = block * (k - 1) + 1;
                for (std::uint64_t r = first; r < first + block; ++r) {
                    path.xi_into(m, r, xi.data());
                    for (int u = 0; u < d; ++u)
                        for (int v = 0; v < d; ++v)
                            blockm[u * d + v] += 0.5 * (eta[u] * xi[v] - xi[u] * eta[v]);
                    for (int c = 0; c < d; ++c) eta[c] += xi[c];
                }
                double s = 0.0;
                for (int u = 0; u < d; ++u)
                    for (int v = 0; v < d; ++v) {
                        const double t = blockm[u * d + v] + 0.5 * chord[u] * chord[v];
                        s += t * t;
                    }
                row += f(s);
            }
        } else if (j == 1) {
            row = 0.0;  // first-level difference vanishes up to the coarse level
        } else {
            const int m = m_b;
            const std::uint64_t block = 1ULL << (m - n);
            std::vector<double> xb(d);
            for (std::uint64_t k = 1; k <= (1ULL << n); ++k) {
                std::fill(blockm.begin(), blockm.end(), 0.0);
                const std::uint64_t first = block * (k - 1) + 1;
                for (std::uint64_t r = first; r < first + block; ++r) {
                    path.xi_into(m + 1, 2 * r - 1, xi.data());
                    path.xi_into(m + 1, 2 * r, xb.data());
                    for (int u = 0; u < d; ++u)
                        for (int v = 0; v < d; ++v)
                            blockm[u * d + v] += 0.5 * (xi[u] * xb[v] - xb[u] * xi[v]);
                }
                double s = 0.0;
                for (double t : blockm) s += t * t;
                row += f(s);
            }
        }
        rows[n] = row;
    }
    return rows;
}

double rho_tail_dyadic(int j, const DyadicBrownianPath& path, int m_a, int m_b,
                       const RhoParams& par) {
    par.validate();
    validate_pair(path, m_a, m_b);
    const int pivot = pivot_level(m_a, m_b);
    if (par.n_max < pivot)
        throw std::invalid_argument("rho_tail_dyadic: analytic tail needs n_max >= polygon level");

    const SliceSums ss = slice_sums(j, path, m_a, m_b, par.p);
    double tail = 0.0;
    for (int n = par.n_max + 1;; ++n) {
        const double t = std::pow(static_cast<double>(n), par.gamma) *
                         slice_row(j, n, m_a, m_b, par.p, ss);
        tail += t;
        // Terms decay at least geometrically with ratio r (gamma > 0, p > 2),
        // so t * r / (1 - r) dominates the remainder.
        const double r = std::pow((n + 1.0) / n, par.gamma) * std::exp2(-(par.p - 1.0));
        const double rem = t * r / (1.0 - r);
        if (rem < 1e-14 * (tail > 0.0 ? tail : 1.0)) break;
    }
    return tail;
}

double rho_dyadic(int j, const DyadicBrownianPath& path, int m_a, int m_b,
                  const RhoParams& par) {
    const std::vector<double> rows = rho_rows_dyadic(j, path, m_a, m_b, par);
    double total = 0.0;
    for (int n = 1; n <= par.n_max; ++n)
        total += std::pow(static_cast<double>(n), par.gamma) * rows[n];
    if (par.tail == TailMode::analytic_tail) total += rho_tail_dyadic(j, path, m_a, m_b, par);
    return std::pow(total, static_cast<double>(j) / par.p);
}

}  // namespace roughdyadic
