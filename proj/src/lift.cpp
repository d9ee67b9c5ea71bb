#include "roughdyadic/lift.hpp"

#include <cmath>
#include <stdexcept>

namespace roughdyadic {

GroupTensor2 lift_segment(const Vec& delta) {
    const int d = static_cast<int>(delta.size());
    GroupTensor2 g(d);
    g.level1 = delta;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) g.level2(i, j) = 0.5 * delta[i] * delta[j];
    return g;
}

GroupTensor2 lift_polygonal(const PolygonalPath& P, double s, double t) {
    if (!(s < t)) throw std::invalid_argument("lift_polygonal: requires s < t");
    if (s < 0.0 || t > 1.0) throw std::invalid_argument("lift_polygonal: interval outside [0,1]");
    const int d = P.dim();
    const int m = P.level();
    GroupTensor2 acc(d);
    double cur = s;
    Vec a = P.eval(cur);
    while (cur < t) {
        const double scaled = std::ldexp(cur, m);
        std::uint64_t seg = static_cast<std::uint64_t>(scaled);
        if (seg >= (1ULL << m)) seg = (1ULL << m) - 1;
        const double seg_end = std::ldexp(static_cast<double>(seg + 1), -m);
        const double nxt = seg_end < t ? seg_end : t;
        Vec b = P.eval(nxt);
        Vec delta(d);
        for (int i = 0; i < d; ++i) delta[i] = b[i] - a[i];
        acc = chen_mul(acc, lift_segment(delta));
        cur = nxt;
        a.swap(b);
    }
    return acc;
}

namespace {

void check_level_indices(const DyadicBrownianPath& path, int m, int n, std::uint64_t k) {
    if (m < 0 || m > path.resolution() || n < 1 || n > path.resolution())
        throw std::out_of_range("dyadic lift: level out of range");
    if (k < 1 || k > (1ULL << n)) throw std::out_of_range("dyadic lift: k out of range");
}

}  // namespace

Vec dyadic_level1(const DyadicBrownianPath& path, int m, int n, std::uint64_t k) {
    check_level_indices(path, m, n, k);
    if (n < m) return path.xi(n, k);
    Vec v = path.xi(m, parent_index(n, k, m));
    const double c = std::ldexp(1.0, m - n);
    for (double& x : v) x *= c;
    return v;
}

Mat dyadic_level2(const DyadicBrownianPath& path, int m, int n, std::uint64_t k) {
    check_level_indices(path, m, n, k);
    const int d = path.dim();
    if (n >= m) {
        Vec xi = path.xi(m, parent_index(n, k, m));
        Mat out(d);
        const double c = 0.5 * std::ldexp(1.0, 2 * (m - n));
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) out(i, j) = c * xi[i] * xi[j];
        return out;
    }
    // Chord square plus running bracket sum over the level-m block.
    Vec chord = path.xi(n, k);
    Mat out(d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) out(i, j) = 0.5 * chord[i] * chord[j];
    const std::uint64_t block = 1ULL << (m - n);
    const std::uint64_t first = block * (k - 1) + 1;
    Vec eta(d, 0.0), xi(d);
    for (std::uint64_t r = first; r < first + block; ++r) {
        path.xi_into(m, r, xi.data());
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                out(i, j) += 0.5 * (eta[i] * xi[j] - xi[i] * eta[j]);
        for (int i = 0; i < d; ++i) eta[i] += xi[i];
    }
    return out;
}

Vec dyadic_diff_level1(const DyadicBrownianPath& path, int m, int n, std::uint64_t k) {
    check_level_indices(path, m + 1, n, k);
    const int d = path.dim();
    if (n <= m) return Vec(d, 0.0);
    Vec fine = path.xi(m + 1, parent_index(n, k, m + 1));
    Vec coarse = path.xi(m, parent_index(n, k, m));
    const double cf = std::ldexp(1.0, m + 1 - n);
    const double cc = std::ldexp(1.0, m - n);
    for (int i = 0; i < d; ++i) fine[i] = cf * fine[i] - cc * coarse[i];
    return fine;
}

Mat dyadic_diff_level2(const DyadicBrownianPath& path, int m, int n, std::uint64_t k) {
    check_level_indices(path, m + 1, n, k);
    const int d = path.dim();
    Mat out(d);
    if (n <= m) {
        // Midpoint bracket sum: level-1 parts cancel and only the bridge
        // areas of the refined segments survive.
        const std::uint64_t block = 1ULL << (m - n);
        const std::uint64_t first = block * (k - 1) + 1;
        Vec a(d), b(d);
        for (std::uint64_t r = first; r < first + block; ++r) {
            path.xi_into(m + 1, 2 * r - 1, a.data());
            path.xi_into(m + 1, 2 * r, b.data());
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j)
                    out(i, j) += 0.5 * (a[i] * b[j] - b[i] * a[j]);
        }
        return out;
    }
    Vec fine = path.xi(m + 1, parent_index(n, k, m + 1));
    Vec coarse = path.xi(m, parent_index(n, k, m));
    const double cf = 0.5 * std::ldexp(1.0, 2 * (m + 1 - n));
    const double cc = 0.5 * std::ldexp(1.0, 2 * (m - n));
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            out(i, j) = cf * fine[i] * fine[j] - cc * coarse[i] * coarse[j];
    return out;
}

std::vector<GroupTensor2> sweep_interval_lifts(const PolygonalPath& P, int n) {
    const int m = P.level();
    const int d = P.dim();
    if (n < 1 || n > P.parent().resolution())
        throw std::out_of_range("sweep_interval_lifts: level out of range");
    const int fine = n > m ? n : m;
    const std::uint64_t per_bucket = 1ULL << (fine - n);
    std::vector<GroupTensor2> out;
    out.reserve(1ULL << n);
    GroupTensor2 acc(d);
    Vec piece(d);
    const double frac = std::ldexp(1.0, m - fine);  // slice of a level-m segment
    for (std::uint64_t j = 1; j <= (1ULL << fine); ++j) {
        if (fine == m) {
            P.parent().xi_into(m, j, piece.data());
        } else {
            // n > m: each fine interval is a proportional slice of its segment.
            P.parent().xi_into(m, parent_index(fine, j, m), piece.data());
            for (int i = 0; i < d; ++i) piece[i] *= frac;
        }
        acc = chen_mul(acc, lift_segment(piece));
        if (j % per_bucket == 0) {
            out.push_back(acc);
            acc = GroupTensor2(d);
        }
    }
    return out;
}

const GroupTensor2& PolygonalLiftCache::lift(int n, std::uint64_t k) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = rows_.find(n);
    if (it == rows_.end()) it = rows_.emplace(n, sweep_interval_lifts(path_, n)).first;
    return it->second.at(k - 1);
}

Mat levy_area(const GroupTensor2& g) {
    Mat out(g.dim);
    for (int i = 0; i < g.dim; ++i)
        for (int j = 0; j < g.dim; ++j)
            out(i, j) = 0.5 * (g.level2(i, j) - g.level2(j, i));
    return out;
}

}  // namespace roughdyadic
