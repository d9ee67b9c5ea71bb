#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "roughdyadic/path.hpp"
#include "roughdyadic/variation.hpp"

namespace roughdyadic {

/// Polynomial functional of the generation-level increments xi_L^1..xi_L^{2^L}
/// (each in R^d) with analytic partial derivatives. The increments span an
/// orthogonal family of Cameron-Martin directions with squared norm 2^-L, so
/// the H-norms of the derivative objects reduce to weighted coordinate sums
/// and are exact (no discretization error).
class IncrementFunctional {
  public:
    IncrementFunctional(int generation_level, int dim, int out_dim)
        : level_(generation_level), dim_(dim), out_(out_dim) {}
    virtual ~IncrementFunctional() = default;

    int generation_level() const { return level_; }
    int dim() const { return dim_; }
    int out_dim() const { return out_; }
    std::uint64_t slots() const { return 1ULL << level_; }
    std::size_t coords() const { return slots() * static_cast<std::size_t>(dim_); }

    virtual void eval(const double* xs, double* out) const = 0;
    /// dF/d xi^{k,i} (k zero-based slot), all output components.
    virtual void partial(const double* xs, std::uint64_t k, int i, double* out) const = 0;
    virtual bool has_partial2() const { return false; }
    virtual void partial2(const double* xs, std::uint64_t k, int i, std::uint64_t l, int j,
                          double* out) const;

  private:
    int level_, dim_, out_;
};

using IncFunPtr = std::shared_ptr<IncrementFunctional>;

/// Built-in functionals of the dyadic comparison: first/second-level
/// increments of the level-m polygon (Y) and of the consecutive-level
/// difference (X) over (t_n^{k-1}, t_n^k]. X lives at generation m+1,
/// Y at generation m (the minimal levels).
IncFunPtr make_x1(int d, int m, int n, std::uint64_t k);
IncFunPtr make_x2(int d, int m, int n, std::uint64_t k);
IncFunPtr make_y1(int d, int m, int n, std::uint64_t k);
IncFunPtr make_y2(int d, int m, int n, std::uint64_t k);

/// |base|^{2 n_tilde} (scalar), with partials by the chain rule.
IncFunPtr make_pow(IncFunPtr base, int n_tilde);
IncFunPtr make_f_pow(int j, int d, int m, int n, std::uint64_t k, int n_tilde);
IncFunPtr make_g_pow(int j, int d, int m, int n, std::uint64_t k, int n_tilde);

/// |DF|_H at the sample: sqrt( sum over outputs and coordinates of the
/// squared partials, weighted by 2^-L ).
double grad_h_norm(const IncrementFunctional& f, const double* xs);

/// |D^2 F|_{HxH}: the same with second partials and weight 2^-2L.
double hess_h_norm(const IncrementFunctional& f, const double* xs);

/// Largest mixed rel/abs gap between analytic partials and central finite
/// differences at the sample (validation mode).
double partial_fd_gap(const IncrementFunctional& f, const double* xs, double h = 1e-6);

/// iid N(0, 2^-L I_d) increments for one Monte Carlo draw.
std::vector<double> sample_increments(int generation_level, int dim, std::uint64_t key);

/// The level-L increments of an existing path (paired designs).
std::vector<double> increments_from_path(const DyadicBrownianPath& path, int generation_level);

struct SobolevEstimate {
    double total = 0.0;  // ||F||_q + ||DF||_q (+ ||D2F||_q when order 2)
    double f_q = 0.0, f_se = 0.0;
    double df_q = 0.0, df_se = 0.0;
    double d2f_q = 0.0, d2f_se = 0.0;
    long samples = 0;
};

/// Monte Carlo estimate of the order-1 (or order-2) Sobolev norm surrogate
/// with delta-method standard errors.
SobolevEstimate sobolev_q1_norm_mc(const IncrementFunctional& f, double q, long samples,
                                   std::uint64_t seed, int order = 1, int threads = 0);

struct PowerBoundCheck {
    double lhs = 0.0, rhs = 0.0;
    bool pass = false;
};

/// Pointwise chain-rule bounds for |X|^{2 n_tilde} at a sample:
///   order 1:  |D f| <= 2 Ntil |X|^{2 Ntil - 1} |DX|
///   order 2:  |D2 f| <= (4 Ntil(Ntil-1) + 2 Ntil)|X|^{2 Ntil-2}|DX|^2
///                      + 2 Ntil |X|^{2 Ntil - 1}|D2 X|
/// evaluated with exact partials on both sides (n_tilde = 1 gives the plain
/// square bounds).
PowerBoundCheck power_derivative_bound_check(const IncrementFunctional& base, int n_tilde,
                                             int order, const double* xs);

/// rho-type functionals with exact increment-space gradients, used by the
/// Sobolev-norm sweeps at production scale. value is rho_j(...)^{p/j}; grad
/// is indexed like the generation-level increments.
struct RhoGrad {
    double value = 0.0;
    int level = 0;
    std::vector<double> grad;

    double grad_h_norm() const;
};

/// (j=1, m_b=-1): rho_1(w^(m_a))^p at generation m_a.
/// (j, m_b=m, m_a=m+1): rho_j(w^(m+1), w^(m))^(p/j) at generation m+1.
RhoGrad rho_pow_gradient(int j, const DyadicBrownianPath& path, int m_a, int m_b,
                         const RhoParams& par);

/// rho_1(w^(m))^p * rho_1(w^(m+1), w^(m))^p with the product-rule gradient
/// at generation m+1.
RhoGrad rho_product_gradient(const DyadicBrownianPath& path, int m, const RhoParams& par);

}  // namespace roughdyadic
