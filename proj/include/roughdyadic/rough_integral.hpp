#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "roughdyadic/lift.hpp"
#include "roughdyadic/path.hpp"
#include "roughdyadic/tensor.hpp"

namespace roughdyadic {

/// 1-form f on R^d with values in L(R^d, R^dt), together with its derivative.
/// eval fills a dt x d row-major block; deriv fills dt x d x d with
/// [a][i][j] = d f_{a,i} / d x_j.
struct OneForm {
    int dim_in = 0;
    int dim_out = 0;
    std::function<void(const double* x, double* f)> eval;
    std::function<void(const double* x, double* df)> deriv;

    /// Largest mixed rel/abs gap between deriv and central differences of
    /// eval at the given points (step h); validation mode for caller-supplied
    /// analytic derivatives.
    double derivative_fd_gap(const std::vector<Vec>& points, double h = 1e-6) const;
};

OneForm identity_one_form(int d);
OneForm constant_one_form(const Mat& a);
/// f(x) = a0 + b(x), b given as dt x d x d with [a][i][j] = coefficient of
/// x_j in f_{a,i}.
OneForm linear_one_form(int dim_in, int dim_out, const std::vector<double>& a0,
                        const std::vector<double>& b);

/// Level-2 driver: positions plus lifted increments.
class RoughDriver {
  public:
    virtual ~RoughDriver() = default;
    virtual int dim() const = 0;
    virtual Vec value(double t) const = 0;
    virtual GroupTensor2 increment(double s, double t) const = 0;
    /// Dyadic depth at which the driver is piecewise linear (refinement
    /// schedules key off this).
    virtual int natural_resolution() const = 0;
};

class PolygonalDriver final : public RoughDriver {
  public:
    explicit PolygonalDriver(PolygonalPath path) : path_(std::move(path)) {}
    int dim() const override { return path_.dim(); }
    Vec value(double t) const override { return path_.eval(t); }
    GroupTensor2 increment(double s, double t) const override {
        return lift_polygonal(path_, s, t);
    }
    int natural_resolution() const override { return path_.level(); }

  private:
    PolygonalPath path_;
};

/// One-step compensated approximation over [s,t]:
///   y1 = f(w_s)(w1) + Df(w_s)(w2),   y2 = (f(w_s) (x) f(w_s))(w2).
GroupTensor2 local_approx(const OneForm& f, const Vec& w_s, const GroupTensor2& inc);

struct IntegrateSchedule {
    int max_level = -1;   // partition depth of [s,t]; -1 derives it from the driver
    double tol = 1e-10;   // level-wise stopping gap between refinements
};

/// Raised when the refinement schedule is exhausted before the products
/// settle; carries the last two iterates so callers can tell divergence from
/// slow convergence.
class ConvergenceError : public std::runtime_error {
  public:
    ConvergenceError(std::string msg, GroupTensor2 last, GroupTensor2 prev)
        : std::runtime_error(std::move(msg)), last(std::move(last)), prev(std::move(prev)) {}
    GroupTensor2 last, prev;
};

/// Tensor-level Riemann products of local approximations over dyadic
/// partitions of [s,t], refined until two consecutive levels differ by less
/// than tol in the level-wise norms.
GroupTensor2 integrate(const OneForm& f, const RoughDriver& driver, double s, double t,
                       IntegrateSchedule schedule = {});

}  // namespace roughdyadic
