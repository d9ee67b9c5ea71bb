#include "roughdyadic/wong_zakai.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace roughdyadic {

double VectorFieldSpec::jacobian_fd_gap(const std::vector<Vec>& states, double h) const {
    if (!jac_f) throw std::invalid_argument("jacobian_fd_gap: no Jacobian supplied");
    const int di = dim_in, dy = dim_out;
    std::vector<double> an(static_cast<std::size_t>(dy) * di * dy);
    std::vector<double> fp(static_cast<std::size_t>(dy) * di), fm(fp.size());
    double worst = 0.0;
    for (const Vec& y : states) {
        jac_f(y.data(), an.data());
        Vec yp = y;
        for (int j = 0; j < dy; ++j) {
            yp[j] = y[j] + h;
            f(yp.data(), fp.data());
            yp[j] = y[j] - h;
            f(yp.data(), fm.data());
            yp[j] = y[j];
            for (std::size_t ai = 0; ai < fp.size(); ++ai) {
                const double fd = (fp[ai] - fm[ai]) / (2.0 * h);
                worst = std::max(worst, rel_gap(fd, an[ai * dy + j]));
            }
        }
    }
    return worst;
}

namespace {

// dy/dt = f(y) v + f0(y) with frozen segment velocity v.
struct SegmentField {
    const VectorFieldSpec& spec;
    const double* v;
    mutable std::vector<double> fy, f0;

    explicit SegmentField(const VectorFieldSpec& s, const double* vel)
        : spec(s), v(vel), fy(static_cast<std::size_t>(s.dim_out) * s.dim_in),
          f0(s.drift ? s.dim_out : 0) {}

    void operator()(const double* y, double* dy) const {
        spec.f(y, fy.data());
        for (int a = 0; a < spec.dim_out; ++a) {
            double s = 0.0;
            for (int i = 0; i < spec.dim_in; ++i) s += fy[a * spec.dim_in + i] * v[i];
            dy[a] = s;
        }
        if (spec.drift) {
            spec.drift(y, f0.data());
            for (int a = 0; a < spec.dim_out; ++a) dy[a] += f0[a];
        }
    }
};

void rk4_steps(const SegmentField& g, double h, int steps, double* y, int dim,
               std::vector<double>& work) {
    work.resize(static_cast<std::size_t>(5) * dim);
    double* k1 = work.data();
    double* k2 = k1 + dim;
    double* k3 = k2 + dim;
    double* k4 = k3 + dim;
    double* tmp = k4 + dim;
    for (int s = 0; s < steps; ++s) {
        g(y, k1);
        for (int i = 0; i < dim; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
        g(tmp, k2);
        for (int i = 0; i < dim; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
        g(tmp, k3);
        for (int i = 0; i < dim; ++i) tmp[i] = y[i] + h * k3[i];
        g(tmp, k4);
        for (int i = 0; i < dim; ++i)
            y[i] += h * (1.0 / 6.0) * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
    }
}

}  // namespace

std::vector<double> solve_wz_range(const VectorFieldSpec& spec, const Vec& y0,
                                   const PolygonalPath& driver, std::uint64_t k_lo,
                                   std::uint64_t k_hi, int substeps,
                                   std::vector<double>* segment_err) {
    if (substeps < 1) throw std::invalid_argument("solve_wz: substeps must be >= 1");
    if (static_cast<int>(y0.size()) != spec.dim_out)
        throw std::invalid_argument("solve_wz: initial state has wrong dimension");
    check_same_dim(spec.dim_in, driver.dim(), "solve_wz");

    const int m = driver.level();
    const int dim = spec.dim_out;
    const double seg_len = std::ldexp(1.0, -m);
    const double speed = std::ldexp(1.0, m);

    std::vector<double> traj((k_hi - k_lo + 1) * dim);
    std::copy(y0.begin(), y0.end(), traj.begin());
    if (segment_err) segment_err->assign(k_hi - k_lo, 0.0);

    std::vector<double> v(driver.dim()), work, coarse(dim);
    for (std::uint64_t k = k_lo; k < k_hi; ++k) {
        driver.parent().xi_into(m, k + 1, v.data());
        for (double& x : v) x *= speed;
        const SegmentField g(spec, v.data());

        double* y = traj.data() + (k - k_lo + 1) * dim;
        std::copy(traj.data() + (k - k_lo) * dim, traj.data() + (k - k_lo + 1) * dim, y);
        if (segment_err) std::copy(y, y + dim, coarse.data());

        rk4_steps(g, seg_len / substeps, substeps, y, dim, work);
        for (int i = 0; i < dim; ++i)
            if (!std::isfinite(y[i]))
                throw BlowUpError(std::ldexp(static_cast<double>(k + 1), -m));

        if (segment_err) {
            // Step-halving estimate: one coarse sweep at half the step count.
            const int half = substeps > 1 ? substeps / 2 : 1;
            rk4_steps(g, seg_len / half, half, coarse.data(), dim, work);
            double e = 0.0;
            for (int i = 0; i < dim; ++i) e = std::max(e, std::abs(coarse[i] - y[i]));
            (*segment_err)[k - k_lo] = e;
        }
    }
    return traj;
}

SolveResult solve_wz(const VectorFieldSpec& spec, const Vec& y0, const PolygonalPath& driver,
                     int substeps) {
    SolveResult res;
    res.level = driver.level();
    res.dim = spec.dim_out;
    res.y = solve_wz_range(spec, y0, driver, 0, 1ULL << driver.level(), substeps,
                           &res.segment_err);
    return res;
}

void SolveResult::dump_csv(std::ostream& os) const {
    os << "t";
    for (int i = 1; i <= dim; ++i) os << ",y" << i;
    os << "\n";
    char buf[32];
    const std::size_t npts = y.size() / dim;
    for (std::size_t k = 0; k < npts; ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", std::ldexp(static_cast<double>(k), -level));
        os << buf;
        for (int i = 0; i < dim; ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", y[k * dim + i]);
            os << ',' << buf;
        }
        os << "\n";
    }
}

namespace {

GridLift lift_trajectory(const SolveResult& r, int anchor_level) {
    std::vector<double> vt((1ULL << r.level) + 1);
    for (std::size_t k = 0; k < vt.size(); ++k)
        vt[k] = std::ldexp(static_cast<double>(k), -r.level);
    std::vector<double> anchors((1ULL << anchor_level) + 1);
    for (std::size_t k = 0; k < anchors.size(); ++k)
        anchors[k] = std::ldexp(static_cast<double>(k), -anchor_level);
    return GridLift::from_polyline(vt, r.y, r.dim, anchors);
}

}  // namespace

std::vector<WzStep> wz_sequence(const VectorFieldSpec& spec, const Vec& y0,
                                const DyadicBrownianPath& path, int m_lo, int m_hi,
                                int substeps, double p, int anchor_cap) {
    if (m_hi + 1 > path.resolution())
        throw std::invalid_argument("wz_sequence: needs resolution >= m_hi + 1");
    std::vector<WzStep> out;
    for (int m = m_lo; m <= m_hi; ++m) {
        WzStep step;
        step.m = m;
        step.result = solve_wz(spec, y0, polygonal(path, m), substeps);
        if (!out.empty()) {
            const SolveResult& prev = out.back().result;
            const int anchor_level = std::min(m, anchor_cap);
            step.d_p_gap = d_p_grid(lift_trajectory(step.result, anchor_level),
                                    lift_trajectory(prev, anchor_level), p);
            double sup = 0.0;
            const std::uint64_t coarse_pts = (1ULL << prev.level) + 1;
            for (std::uint64_t k = 0; k < coarse_pts; ++k)
                for (int i = 0; i < spec.dim_out; ++i)
                    sup = std::max(sup, std::abs(prev.y[k * spec.dim_out + i] -
                                                 step.result.y[(k << 1) * spec.dim_out + i]));
            step.sup_gap = sup;
        }
        out.push_back(std::move(step));
    }
    return out;
}

WzCase wz_case_from_string(const std::string& name) {
    if (name == "exp_scalar") return WzCase::exp_scalar;
    if (name == "commuting_linear") return WzCase::commuting_linear;
    if (name == "rotation_area") return WzCase::rotation_area;
    throw std::invalid_argument("unknown solve case: " + name);
}

std::string wz_case_name(WzCase c) {
    switch (c) {
        case WzCase::exp_scalar: return "exp_scalar";
        case WzCase::commuting_linear: return "commuting_linear";
        case WzCase::rotation_area: return "rotation_area";
    }
    return "?";
}

namespace {

// commuting_linear coefficients: a rotation generator and a commuting
// scale/rotation mix, acting on a flattened 2x2 state.
constexpr double kClScale = 0.3;
constexpr double kClMix = 0.5;

void apply_planar(double c00, double c01, const double* y, double* out) {
    // out = C Y for C = [[c00, c01], [-c01, c00]], Y a 2x2 matrix flattened
    // row-major.
    out[0] = c00 * y[0] + c01 * y[2];
    out[1] = c00 * y[1] + c01 * y[3];
    out[2] = -c01 * y[0] + c00 * y[2];
    out[3] = -c01 * y[1] + c00 * y[3];
}

}  // namespace

std::pair<VectorFieldSpec, Vec> wz_case_spec(WzCase c) {
    VectorFieldSpec spec;
    switch (c) {
        case WzCase::exp_scalar: {
            spec.dim_in = 1;
            spec.dim_out = 1;
            spec.f = [](const double* y, double* fy) { fy[0] = y[0]; };
            return {spec, Vec{1.0}};
        }
        case WzCase::commuting_linear: {
            spec.dim_in = 2;
            spec.dim_out = 4;
            spec.f = [](const double* y, double* fy) {
                double a1[4], a2[4];
                apply_planar(0.0, 1.0, y, a1);                  // A1 Y
                apply_planar(kClScale, kClMix, y, a2);          // A2 Y
                for (int r = 0; r < 4; ++r) {
                    fy[r * 2 + 0] = a1[r];
                    fy[r * 2 + 1] = a2[r];
                }
            };
            return {spec, Vec{1.0, 0.0, 0.0, 1.0}};
        }
        case WzCase::rotation_area: {
            spec.dim_in = 2;
            spec.dim_out = 3;
            spec.f = [](const double* y, double* fy) {
                // dy1 = dw1, dy2 = dw2, dy3 = (y1 dw2 - y2 dw1) / 2
                fy[0 * 2 + 0] = 1.0;
                fy[0 * 2 + 1] = 0.0;
                fy[1 * 2 + 0] = 0.0;
                fy[1 * 2 + 1] = 1.0;
                fy[2 * 2 + 0] = -0.5 * y[1];
                fy[2 * 2 + 1] = 0.5 * y[0];
            };
            return {spec, Vec{0.0, 0.0, 0.0}};
        }
    }
    throw std::invalid_argument("wz_case_spec: unknown case");
}

std::vector<double> stratonovich_reference(WzCase c, const DyadicBrownianPath& path) {
    const std::size_t npts = path.grid_points();
    switch (c) {
        case WzCase::exp_scalar: {
            if (path.dim() != 1)
                throw std::invalid_argument("exp_scalar reference needs a 1-d path");
            std::vector<double> out(npts);
            for (std::size_t k = 0; k < npts; ++k) out[k] = std::exp(path.at(k, 0));
            return out;
        }
        case WzCase::commuting_linear: {
            if (path.dim() != 2)
                throw std::invalid_argument("commuting_linear reference needs a 2-d path");
            std::vector<double> out(npts * 4);
            for (std::size_t k = 0; k < npts; ++k) {
                const double w1 = path.at(k, 0), w2 = path.at(k, 1);
                const double scale = std::exp(kClScale * w2);
                const double ang = w1 + kClMix * w2;
                const double co = scale * std::cos(ang), si = scale * std::sin(ang);
                out[k * 4 + 0] = co;
                out[k * 4 + 1] = si;
                out[k * 4 + 2] = -si;
                out[k * 4 + 3] = co;
            }
            return out;
        }
        case WzCase::rotation_area: {
            if (path.dim() != 2)
                throw std::invalid_argument("rotation_area reference needs a 2-d path");
            // Running signed area of the finest polygon, accumulated exactly.
            std::vector<double> out(npts * 3);
            double area = 0.0;
            out[0] = out[1] = out[2] = 0.0;
            for (std::size_t k = 1; k < npts; ++k) {
                const double x0 = path.at(k - 1, 0), y0 = path.at(k - 1, 1);
                const double x1 = path.at(k, 0), y1 = path.at(k, 1);
                area += 0.5 * (x0 * (y1 - y0) - y0 * (x1 - x0));
                out[k * 3 + 0] = x1;
                out[k * 3 + 1] = y1;
                out[k * 3 + 2] = area;
            }
            return out;
        }
    }
    throw std::invalid_argument("stratonovich_reference: unknown case");
}

}  // namespace roughdyadic
