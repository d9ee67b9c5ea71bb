#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace roughdyadic {

using Vec = std::vector<double>;

/// Dense row-major d x d matrix, flat storage.
struct Mat {
    int dim = 0;
    std::vector<double> a;

    Mat() = default;
    explicit Mat(int d) : dim(d), a(static_cast<std::size_t>(d) * d, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * dim + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * dim + j]; }
};

/// Element (1, a1, a2) of the degree-2 truncated tensor algebra over R^d.
/// Level 0 is implicitly the scalar 1; level1 is the increment, level2 the
/// iterated-integral block. Values are immutable by convention: operations
/// return fresh objects.
struct GroupTensor2 {
    int dim = 0;
    Vec level1;
    Mat level2;

    GroupTensor2() = default;
    explicit GroupTensor2(int d) : dim(d), level1(d, 0.0), level2(d) {}
    GroupTensor2(Vec l1, Mat l2)
        : dim(static_cast<int>(l1.size())), level1(std::move(l1)), level2(std::move(l2)) {
        if (level2.dim != dim) throw std::invalid_argument("GroupTensor2: level shapes disagree");
    }

    static GroupTensor2 identity(int d) { return GroupTensor2(d); }
};

inline void check_same_dim(int a, int b, const char* what) {
    if (a != b) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

/// Outer product x (x) y.
inline Mat outer(const Vec& x, const Vec& y) {
    check_same_dim(static_cast<int>(x.size()), static_cast<int>(y.size()), "outer");
    const int d = static_cast<int>(x.size());
    Mat m(d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = x[i] * y[j];
    return m;
}

/// [x, y] = x(x)y - y(x)x (antisymmetric bracket).
inline Mat lie_bracket(const Vec& x, const Vec& y) {
    check_same_dim(static_cast<int>(x.size()), static_cast<int>(y.size()), "lie_bracket");
    const int d = static_cast<int>(x.size());
    Mat m(d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = x[i] * y[j] - y[i] * x[j];
    return m;
}

/// {x, y} = x(x)y + y(x)x (symmetric bracket).
inline Mat anti_bracket(const Vec& x, const Vec& y) {
    check_same_dim(static_cast<int>(x.size()), static_cast<int>(y.size()), "anti_bracket");
    const int d = static_cast<int>(x.size());
    Mat m(d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = x[i] * y[j] + y[i] * x[j];
    return m;
}

/// Group product (1, a1+b1, a2+b2+a1(x)b1); the multiplicativity identity for
/// adjacent-interval increments holds with respect to this product.
inline GroupTensor2 chen_mul(const GroupTensor2& a, const GroupTensor2& b) {
    check_same_dim(a.dim, b.dim, "chen_mul");
    const int d = a.dim;
    GroupTensor2 r(d);
    for (int i = 0; i < d; ++i) r.level1[i] = a.level1[i] + b.level1[i];
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            r.level2(i, j) = a.level2(i, j) + b.level2(i, j) + a.level1[i] * b.level1[j];
    return r;
}

/// Group inverse: (1, -a1, -a2 + a1(x)a1).
inline GroupTensor2 chen_inv(const GroupTensor2& a) {
    const int d = a.dim;
    GroupTensor2 r(d);
    for (int i = 0; i < d; ++i) r.level1[i] = -a.level1[i];
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            r.level2(i, j) = -a.level2(i, j) + a.level1[i] * a.level1[j];
    return r;
}

inline double euclidean_norm(const Vec& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

inline double frobenius_norm(const Mat& m) {
    double s = 0.0;
    for (double v : m.a) s += v * v;
    return std::sqrt(s);
}

/// (|a1| Euclidean, |a2| Frobenius).
inline std::pair<double, double> level_norms(const GroupTensor2& a) {
    return {euclidean_norm(a.level1), frobenius_norm(a.level2)};
}

/// Mixed relative/absolute gap used throughout the test suites: the
/// difference scaled by max(1, magnitudes).
inline double rel_gap(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

inline double rel_gap(const GroupTensor2& a, const GroupTensor2& b) {
    check_same_dim(a.dim, b.dim, "rel_gap");
    double scale = 1.0, diff = 0.0;
    for (int i = 0; i < a.dim; ++i) {
        scale = std::max({scale, std::abs(a.level1[i]), std::abs(b.level1[i])});
        diff = std::max(diff, std::abs(a.level1[i] - b.level1[i]));
    }
    for (std::size_t i = 0; i < a.level2.a.size(); ++i) {
        scale = std::max({scale, std::abs(a.level2.a[i]), std::abs(b.level2.a[i])});
        diff = std::max(diff, std::abs(a.level2.a[i] - b.level2.a[i]));
    }
    return diff / scale;
}

}  // namespace roughdyadic
