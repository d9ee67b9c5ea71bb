#include "roughdyadic/rough_integral.hpp"

#include <cmath>

namespace roughdyadic {

double OneForm::derivative_fd_gap(const std::vector<Vec>& points, double h) const {
    const int d = dim_in, dt = dim_out;
    std::vector<double> an(static_cast<std::size_t>(dt) * d * d);
    std::vector<double> fp(static_cast<std::size_t>(dt) * d), fm(fp.size());
    double worst = 0.0;
    for (const Vec& x : points) {
        deriv(x.data(), an.data());
        Vec xp = x;
        for (int j = 0; j < d; ++j) {
            xp[j] = x[j] + h;
            eval(xp.data(), fp.data());
            xp[j] = x[j] - h;
            eval(xp.data(), fm.data());
            xp[j] = x[j];
            for (int a = 0; a < dt; ++a)
                for (int i = 0; i < d; ++i) {
                    const double fd = (fp[a * d + i] - fm[a * d + i]) / (2.0 * h);
                    const double ref = an[(a * d + i) * d + j];
                    worst = std::max(worst, rel_gap(fd, ref));
                }
        }
    }
    return worst;
}

OneForm identity_one_form(int d) {
    OneForm f;
    f.dim_in = f.dim_out = d;
    f.eval = [d](const double*, double* out) {
        for (int a = 0; a < d; ++a)
            for (int i = 0; i < d; ++i) out[a * d + i] = a == i ? 1.0 : 0.0;
    };
    f.deriv = [d](const double*, double* out) {
        std::fill(out, out + static_cast<std::size_t>(d) * d * d, 0.0);
    };
    return f;
}

OneForm constant_one_form(const Mat& a) {
    OneForm f;
    f.dim_in = a.dim;
    f.dim_out = a.dim;
    auto coeffs = a.a;
    f.eval = [coeffs](const double*, double* out) {
        std::copy(coeffs.begin(), coeffs.end(), out);
    };
    const std::size_t dsize = coeffs.size() * a.dim;
    f.deriv = [dsize](const double*, double* out) { std::fill(out, out + dsize, 0.0); };
    return f;
}

OneForm linear_one_form(int dim_in, int dim_out, const std::vector<double>& a0,
                        const std::vector<double>& b) {
    const std::size_t fsz = static_cast<std::size_t>(dim_out) * dim_in;
    if (a0.size() != fsz || b.size() != fsz * dim_in)
        throw std::invalid_argument("linear_one_form: coefficient shapes disagree");
    OneForm f;
    f.dim_in = dim_in;
    f.dim_out = dim_out;
    f.eval = [=](const double* x, double* out) {
        for (std::size_t ai = 0; ai < fsz; ++ai) {
            double v = a0[ai];
            for (int j = 0; j < dim_in; ++j) v += b[ai * dim_in + j] * x[j];
            out[ai] = v;
        }
    };
    f.deriv = [=](const double*, double* out) { std::copy(b.begin(), b.end(), out); };
    return f;
}

GroupTensor2 local_approx(const OneForm& f, const Vec& w_s, const GroupTensor2& inc) {
    const int d = f.dim_in, dt = f.dim_out;
    check_same_dim(d, inc.dim, "local_approx");
    check_same_dim(d, static_cast<int>(w_s.size()), "local_approx");

    std::vector<double> fv(static_cast<std::size_t>(dt) * d);
    std::vector<double> dfv(static_cast<std::size_t>(dt) * d * d);
    f.eval(w_s.data(), fv.data());
    f.deriv(w_s.data(), dfv.data());

    GroupTensor2 out(dt);
    for (int a = 0; a < dt; ++a) {
        double v = 0.0;
        for (int i = 0; i < d; ++i) v += fv[a * d + i] * inc.level1[i];
        // Compensation: pair the derivative against the second level, inner
        // integration index first.
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) v += dfv[(a * d + i) * d + j] * inc.level2(j, i);
        out.level1[a] = v;
    }
    for (int a = 0; a < dt; ++a)
        for (int b = 0; b < dt; ++b) {
            double v = 0.0;
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j)
                    v += fv[a * d + i] * fv[b * d + j] * inc.level2(i, j);
            out.level2(a, b) = v;
        }
    return out;
}

namespace {

GroupTensor2 product_over_level(const OneForm& f, const RoughDriver& driver, double s, double t,
                                int level) {
    const std::uint64_t pieces = 1ULL << level;
    const double len = t - s;
    GroupTensor2 acc(f.dim_out);
    for (std::uint64_t i = 0; i < pieces; ++i) {
        const double a = s + len * std::ldexp(static_cast<double>(i), -level);
        const double b = i + 1 == pieces ? t : s + len * std::ldexp(i + 1.0, -level);
        acc = chen_mul(acc, local_approx(f, driver.value(a), driver.increment(a, b)));
    }
    return acc;
}

double levelwise_gap(const GroupTensor2& a, const GroupTensor2& b) {
    double g = 0.0;
    for (int i = 0; i < a.dim; ++i) g = std::max(g, std::abs(a.level1[i] - b.level1[i]));
    for (std::size_t i = 0; i < a.level2.a.size(); ++i)
        g = std::max(g, std::abs(a.level2.a[i] - b.level2.a[i]));
    return g;
}

}  // namespace

GroupTensor2 integrate(const OneForm& f, const RoughDriver& driver, double s, double t,
                       IntegrateSchedule schedule) {
    if (!(s < t)) throw std::invalid_argument("integrate: requires s < t");
    check_same_dim(f.dim_in, driver.dim(), "integrate");

    int max_level = schedule.max_level;
    if (max_level < 0) {
        // Deep enough that pieces are finer than the driver's segments, plus
        // two refinements to witness stabilization.
        const double len = t - s;
        max_level = driver.natural_resolution() + 2 +
                    static_cast<int>(std::ceil(std::log2(std::max(len, 1e-12))));
        if (max_level < 2) max_level = 2;
    }

    GroupTensor2 prev = product_over_level(f, driver, s, t, 0);
    for (int level = 1; level <= max_level; ++level) {
        GroupTensor2 cur = product_over_level(f, driver, s, t, level);
        if (levelwise_gap(cur, prev) < schedule.tol) return cur;
        prev = std::move(cur);
    }
    GroupTensor2 last = product_over_level(f, driver, s, t, max_level + 1);
    if (levelwise_gap(last, prev) < schedule.tol) return last;
    throw ConvergenceError("integrate: refinement schedule exhausted before stabilization",
                           last, prev);
}

}  // namespace roughdyadic
