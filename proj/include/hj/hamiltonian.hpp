#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hj/util.hpp"

namespace hj {

/**
 * A Hamiltonian H(x, t, p) on R^d x [0,T] x R^d, smooth and uniformly
 * convex in p, together with the derivative callbacks the scheme needs.
 *
 * Required structure:
 *  - hess_pp is symmetric positive definite everywhere (strict convexity),
 *  - grad_x is bounded by alpha() * (1 + |p|) in the max norm,
 *  - hp_bound(rho) dominates sup |H_p|_inf over all (x, t) and |p|_inf <= rho.
 *
 * The three optional extrema hooks let a model report closed-form values
 * used when assembling scheme constants; models without them are probed
 * numerically on a sample lattice and the result is flagged as sampled.
 */
class HamiltonianModel {
public:
    explicit HamiltonianModel(int dim);
    virtual ~HamiltonianModel() = default;

    int dim() const { return dim_; }
    virtual std::string name() const = 0;

    virtual double eval(std::span<const double> x, double t,
                        std::span<const double> p) const = 0;
    virtual void grad_p(std::span<const double> x, double t,
                        std::span<const double> p,
                        std::span<double> out) const = 0;
    /// Row-major d x d second derivative in p.
    virtual void hess_pp(std::span<const double> x, double t,
                         std::span<const double> p,
                         std::span<double> out) const = 0;
    virtual void grad_x(std::span<const double> x, double t,
                        std::span<const double> p,
                        std::span<double> out) const = 0;

    /// Constant alpha with |H_x|_inf <= alpha * (1 + |p|_inf).
    virtual double alpha() const = 0;

    /// Upper bound for sup_{x,t, |p|_inf <= radius} |H_p(x,t,p)|_inf.
    virtual double hp_bound(double radius) const = 0;

    /// True when H does not depend on (x, t); enables the closed-form
    /// reference solution.
    virtual bool space_time_independent() const { return false; }

    /// sup over (x,t) of H(x, t, 0); feeds the Lagrangian infimum
    /// because inf_xi L(x,t,xi) = -H(x,t,0).
    virtual std::optional<double> sup_h_at_zero() const { return {}; }

    /// max over (x,t) of |L(x, t, 0)| = |inf_p H(x, t, p)|.
    virtual std::optional<double> max_abs_lagrangian_at_zero() const {
        return {};
    }

    /// max over (x,t), i, j and |xi|_inf <= xi_radius of |L_{x^i x^j}|.
    virtual std::optional<double> max_abs_lagrangian_xx(
        double /*xi_radius*/) const {
        return {};
    }

private:
    int dim_;
};

/// Evaluates H with input validation and a finiteness check.
double eval_h(const HamiltonianModel& model, std::span<const double> x,
              double t, std::span<const double> p);

/**
 * Value and derivatives of the convex conjugate
 *   L(x, t, xi) = sup_p { p . xi - H(x, t, p) }.
 *
 * p_star is the maximizing momentum, so grad_xi == p_star and
 * grad_x == -H_x(x, t, p_star).
 */
struct LagrangianValue {
    double value = 0.0;
    Vec p_star;
    Vec grad_x;
    Vec grad_xi;
};

/// Computes the conjugate by solving H_p(x, t, p) = xi with a damped
/// Newton iteration (start p = 0, Armijo backtracking, at most 50 steps,
/// residual tolerance 1e-12 * (1 + |xi|_inf)).
LagrangianValue legendre(const HamiltonianModel& model,
                         std::span<const double> x, double t,
                         std::span<const double> xi);

/// Sample lattice used when a model supplies no closed-form extrema.
/// Only the first min(d, 2) axes are swept; the rest stay at x_lo.
struct ProbeConfig {
    double x_lo = 0.0;
    double x_hi = 1.0;
    int space_points = 64;
    int time_points = 16;
    int theta_space_points = 16;
    int theta_time_points = 8;
};

/**
 * The constant block derived from (model, T, r, R, h):
 *
 *   l_star      = min(0, inf L)
 *   alpha1      = T * max |L(.,.,0)| + R
 *   alpha2      = alpha * (alpha1 + R + (1 + 2|l_star|) T)
 *   deriv_bound = 1 + r + alpha2
 *   lambda1     = 1 / (d * hp_bound(deriv_bound))
 *   theta       = T * max |L_{x^i x^j}| over |xi|_inf <= 1/(d lambda1)
 *
 * r bounds the initial gradient, R the initial values, h is the constant
 * source term. "sampled" marks extrema estimated on a probe lattice.
 */
struct SchemeConstants {
    double r = 0.0;
    double R = 0.0;
    double T = 0.0;
    double h = 0.0;
    double l_star = 0.0;
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    double lambda1 = 0.0;
    double theta = 0.0;
    double deriv_bound = 0.0;
    bool sampled = false;
};

SchemeConstants scheme_constants(const HamiltonianModel& model, double T,
                                 double r, double R, double h,
                                 const ProbeConfig& probe = {});

/// Built-in models: "quadratic" (|p|^2/2), "quadratic+cosine"
/// (|p|^2/2 + sum_j cos(2 pi x^j)), "anisotropic-quadratic"
/// (p^T A p / 2 with positive diagonal A, from `diag`).
std::shared_ptr<const HamiltonianModel> make_model(
    const std::string& name, int dim, const std::vector<double>& diag = {});

} // namespace hj
