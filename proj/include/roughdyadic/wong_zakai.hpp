#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "roughdyadic/path.hpp"
#include "roughdyadic/variation.hpp"

namespace roughdyadic {

/// Driving vector fields of dy = f(y) dw + f0(y) dt: f fills a dim_out x
/// dim_in block (column i is the field paired with dw^i), f0 the drift.
struct VectorFieldSpec {
    int dim_in = 0;
    int dim_out = 0;
    std::function<void(const double* y, double* fy)> f;
    std::function<void(const double* y, double* f0)> drift;  // nullable -> zero drift

    /// Mixed rel/abs gap between supplied Jacobians (dim_out x dim_out per
    /// block) and finite differences at the given states; validation only.
    std::function<void(const double* y, double* jf)> jac_f;  // optional
    double jacobian_fd_gap(const std::vector<Vec>& states, double h = 1e-6) const;
};

struct SolveResult {
    int level = 0;                     // driver level m
    int dim = 0;                       // state dimension
    std::vector<double> y;             // (2^m + 1) x dim, segment endpoints
    std::vector<double> segment_err;   // per-segment step-halving error estimate

    Vec state(std::uint64_t k) const {
        return Vec(y.begin() + static_cast<long>(k * dim),
                   y.begin() + static_cast<long>((k + 1) * dim));
    }
    void dump_csv(std::ostream& os) const;
};

class BlowUpError : public std::runtime_error {
  public:
    BlowUpError(double t) : std::runtime_error("solve_wz: state blew up"), time(t) {}
    double time;
};

/// Classical RK4 along the polygonal driver: on each dyadic segment the
/// velocity is the constant 2^m xi_m^k and the segment ODE is integrated
/// with `substeps` fixed steps.
SolveResult solve_wz(const VectorFieldSpec& spec, const Vec& y0, const PolygonalPath& driver,
                     int substeps = 4);

/// Same, over segments [k_lo, k_hi) only (flow-property checks).
std::vector<double> solve_wz_range(const VectorFieldSpec& spec, const Vec& y0,
                                   const PolygonalPath& driver, std::uint64_t k_lo,
                                   std::uint64_t k_hi, int substeps,
                                   std::vector<double>* segment_err = nullptr);

struct WzStep {
    int m = 0;
    SolveResult result;
    double d_p_gap = 0.0;    // vs the previous level's lifted solution
    double sup_gap = 0.0;    // max over shared dyadic times
};

/// Solve across a level range, lift each solution polygon and record
/// consecutive d_p and sup-norm gaps (the empirical Cauchy diagnostic).
std::vector<WzStep> wz_sequence(const VectorFieldSpec& spec, const Vec& y0,
                                const DyadicBrownianPath& path, int m_lo, int m_hi,
                                int substeps = 4, double p = 2.5, int anchor_cap = 12);

enum class WzCase { exp_scalar, commuting_linear, rotation_area };

WzCase wz_case_from_string(const std::string& name);
std::string wz_case_name(WzCase c);

/// The vector fields and initial data of a named benchmark system.
std::pair<VectorFieldSpec, Vec> wz_case_spec(WzCase c);

/// Exact solution of the named system driven by the path itself, sampled on
/// the full dyadic grid. exp_scalar: y0 e^{w_t}; commuting_linear: the
/// rotation/scaling closed form; rotation_area: the planar coordinates plus
/// the running signed area.
std::vector<double> stratonovich_reference(WzCase c, const DyadicBrownianPath& path);

}  // namespace roughdyadic
