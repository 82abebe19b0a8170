#include "hj/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "hj/errors.hpp"

namespace hj {

namespace {

std::string point_str(std::span<const double> x, double t,
                      std::span<const double> p) {
    std::ostringstream os;
    os << "x=(";
    for (std::size_t j = 0; j < x.size(); ++j)
        os << (j ? "," : "") << x[j];
    os << "), t=" << t << ", p=(";
    for (std::size_t j = 0; j < p.size(); ++j)
        os << (j ? "," : "") << p[j];
    os << ")";
    return os.str();
}

} // namespace

HamiltonianModel::HamiltonianModel(int dim) : dim_(dim) {
    if (dim < 1) throw InputError("model dimension must be at least 1");
}

double eval_h(const HamiltonianModel& model, std::span<const double> x,
              double t, std::span<const double> p) {
    const auto d = static_cast<std::size_t>(model.dim());
    if (x.size() != d || p.size() != d)
        throw InputError("eval_h: argument dimension does not match model");
    const double v = model.eval(x, t, p);
    if (!std::isfinite(v))
        throw ModelEvalError("Hamiltonian returned a non-finite value at " +
                             point_str(x, t, p));
    return v;
}

LagrangianValue legendre(const HamiltonianModel& model,
                         std::span<const double> x, double t,
                         std::span<const double> xi) {
    const int d = model.dim();
    if (x.size() != static_cast<std::size_t>(d) ||
        xi.size() != static_cast<std::size_t>(d))
        throw InputError("legendre: argument dimension does not match model");

    const double tol = 1e-12 * (1.0 + norm_inf(xi));
    Vec p(d, 0.0), f(d), trial(d), ftrial(d);
    std::vector<double> hess(static_cast<std::size_t>(d) * d), step(d);

    auto residual = [&](const Vec& pt, Vec& out) {
        model.grad_p(x, t, pt, out);
        double sq = 0.0;
        for (int j = 0; j < d; ++j) {
            out[j] -= xi[j];
            if (!std::isfinite(out[j]))
                throw ModelEvalError(
                    "Hamiltonian momentum gradient non-finite at " +
                    point_str(x, t, pt));
            sq += out[j] * out[j];
        }
        return sq;
    };

    double fsq = residual(p, f);
    bool converged = norm_inf(f) <= tol;
    for (int iter = 0; iter < 50 && !converged; ++iter) {
        model.hess_pp(x, t, p, hess);
        for (int j = 0; j < d; ++j) step[j] = -f[j];
        if (!solve_spd(hess, step, d))
            throw ConjugationError(
                "momentum Hessian not positive definite at " +
                    point_str(x, t, p),
                std::sqrt(fsq));

        // Armijo backtracking on |H_p - xi|^2; the Newton direction is a
        // descent direction because the Hessian is positive definite.
        double s = 1.0;
        bool moved = false;
        for (int halving = 0; halving < 40; ++halving) {
            for (int j = 0; j < d; ++j) trial[j] = p[j] + s * step[j];
            const double fsq_trial = residual(trial, ftrial);
            if (fsq_trial <= fsq - 1e-4 * s * fsq || fsq_trial < fsq) {
                p = trial;
                f = ftrial;
                fsq = fsq_trial;
                moved = true;
                break;
            }
            s *= 0.5;
        }
        if (!moved) break;
        converged = norm_inf(f) <= tol;
    }
    if (!converged)
        throw ConjugationError("conjugate Newton solve stalled at " +
                                   point_str(x, t, p) + ", residual " +
                                   fmt_double(norm_inf(f)),
                               norm_inf(f));

    LagrangianValue out;
    out.p_star = p;
    out.grad_xi = p;
    double dot = 0.0;
    for (int j = 0; j < d; ++j) dot += p[j] * xi[j];
    out.value = dot - eval_h(model, x, t, p);
    out.grad_x.assign(d, 0.0);
    model.grad_x(x, t, p, out.grad_x);
    for (int j = 0; j < d; ++j) {
        out.grad_x[j] = -out.grad_x[j];
        if (!std::isfinite(out.grad_x[j]))
            throw ModelEvalError("Hamiltonian space gradient non-finite at " +
                                 point_str(x, t, p));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Built-in models
// ---------------------------------------------------------------------------

namespace {

class QuadraticModel final : public HamiltonianModel {
public:
    explicit QuadraticModel(int dim) : HamiltonianModel(dim) {}
    std::string name() const override { return "quadratic"; }

    double eval(std::span<const double>, double,
                std::span<const double> p) const override {
        double s = 0.0;
        for (double v : p) s += v * v;
        return 0.5 * s;
    }
    void grad_p(std::span<const double>, double, std::span<const double> p,
                std::span<double> out) const override {
        std::copy(p.begin(), p.end(), out.begin());
    }
    void hess_pp(std::span<const double>, double, std::span<const double>,
                 std::span<double> out) const override {
        std::fill(out.begin(), out.end(), 0.0);
        for (int j = 0; j < dim(); ++j) out[j * dim() + j] = 1.0;
    }
    void grad_x(std::span<const double>, double, std::span<const double>,
                std::span<double> out) const override {
        std::fill(out.begin(), out.end(), 0.0);
    }
    double alpha() const override { return 0.0; }
    double hp_bound(double radius) const override { return radius; }
    bool space_time_independent() const override { return true; }
    std::optional<double> sup_h_at_zero() const override { return 0.0; }
    std::optional<double> max_abs_lagrangian_at_zero() const override {
        return 0.0;
    }
    std::optional<double> max_abs_lagrangian_xx(double) const override {
        return 0.0;
    }
};

class QuadraticCosineModel final : public HamiltonianModel {
public:
    explicit QuadraticCosineModel(int dim) : HamiltonianModel(dim) {}
    std::string name() const override { return "quadratic+cosine"; }

    double eval(std::span<const double> x, double,
                std::span<const double> p) const override {
        double s = 0.0;
        for (double v : p) s += v * v;
        s *= 0.5;
        for (double xj : x) s += std::cos(2.0 * std::numbers::pi * xj);
        return s;
    }
    void grad_p(std::span<const double>, double, std::span<const double> p,
                std::span<double> out) const override {
        std::copy(p.begin(), p.end(), out.begin());
    }
    void hess_pp(std::span<const double>, double, std::span<const double>,
                 std::span<double> out) const override {
        std::fill(out.begin(), out.end(), 0.0);
        for (int j = 0; j < dim(); ++j) out[j * dim() + j] = 1.0;
    }
    void grad_x(std::span<const double> x, double, std::span<const double>,
                std::span<double> out) const override {
        const double w = 2.0 * std::numbers::pi;
        for (int j = 0; j < dim(); ++j) out[j] = -w * std::sin(w * x[j]);
    }
    double alpha() const override { return 2.0 * std::numbers::pi; }
    double hp_bound(double radius) const override { return radius; }
    std::optional<double> sup_h_at_zero() const override {
        return static_cast<double>(dim());
    }
    std::optional<double> max_abs_lagrangian_at_zero() const override {
        return static_cast<double>(dim());
    }
    std::optional<double> max_abs_lagrangian_xx(double) const override {
        return 4.0 * std::numbers::pi * std::numbers::pi;
    }
};

class AnisotropicQuadraticModel final : public HamiltonianModel {
public:
    AnisotropicQuadraticModel(int dim, std::vector<double> diag)
        : HamiltonianModel(dim), diag_(std::move(diag)) {
        if (diag_.empty()) {
            diag_.resize(dim);
            for (int j = 0; j < dim; ++j) diag_[j] = 1.0 + 0.5 * j;
        }
        if (static_cast<int>(diag_.size()) != dim)
            throw InputError(
                "anisotropic-quadratic: diag size does not match dimension");
        for (double a : diag_)
            if (!(a > 0.0))
                throw InputError(
                    "anisotropic-quadratic: diag entries must be positive");
    }
    std::string name() const override { return "anisotropic-quadratic"; }

    double eval(std::span<const double>, double,
                std::span<const double> p) const override {
        double s = 0.0;
        for (int j = 0; j < dim(); ++j) s += diag_[j] * p[j] * p[j];
        return 0.5 * s;
    }
    void grad_p(std::span<const double>, double, std::span<const double> p,
                std::span<double> out) const override {
        for (int j = 0; j < dim(); ++j) out[j] = diag_[j] * p[j];
    }
    void hess_pp(std::span<const double>, double, std::span<const double>,
                 std::span<double> out) const override {
        std::fill(out.begin(), out.end(), 0.0);
        for (int j = 0; j < dim(); ++j) out[j * dim() + j] = diag_[j];
    }
    void grad_x(std::span<const double>, double, std::span<const double>,
                std::span<double> out) const override {
        std::fill(out.begin(), out.end(), 0.0);
    }
    double alpha() const override { return 0.0; }
    double hp_bound(double radius) const override {
        return radius * *std::max_element(diag_.begin(), diag_.end());
    }
    bool space_time_independent() const override { return true; }
    std::optional<double> sup_h_at_zero() const override { return 0.0; }
    std::optional<double> max_abs_lagrangian_at_zero() const override {
        return 0.0;
    }
    std::optional<double> max_abs_lagrangian_xx(double) const override {
        return 0.0;
    }

private:
    std::vector<double> diag_;
};

/// Applies fn to every point of the probe lattice. Sweeps only the first
/// min(d, 2) axes; remaining coordinates stay at x_lo.
template <class F>
void for_each_probe_point(int dim, double x_lo, double x_hi, int nx, int nt,
                          double t_max, F&& fn) {
    const int swept = std::min(dim, 2);
    Vec x(dim, x_lo);
    const int total = swept == 2 ? nx * nx : nx;
    for (int i = 0; i < total; ++i) {
        const int i0 = swept == 2 ? i / nx : i;
        const int i1 = swept == 2 ? i % nx : 0;
        x[0] = x_lo + (x_hi - x_lo) * i0 / std::max(1, nx - 1);
        if (swept == 2)
            x[1] = x_lo + (x_hi - x_lo) * i1 / std::max(1, nx - 1);
        for (int it = 0; it < nt; ++it) {
            const double t = t_max * it / std::max(1, nt - 1);
            fn(std::span<const double>(x), t);
        }
    }
}

double probed_theta(const HamiltonianModel& model, double T,
                    double xi_radius, const ProbeConfig& probe) {
    const int d = model.dim();
    // Second x-derivatives of L by central differences of L_x, maximized
    // over a coarse (x, t) lattice and a small set of extreme controls.
    std::vector<Vec> xis;
    xis.emplace_back(d, 0.0);
    for (int j = 0; j < d; ++j)
        for (double s : {-1.0, 1.0}) {
            Vec xi(d, 0.0);
            xi[j] = s * xi_radius;
            xis.push_back(std::move(xi));
        }
    xis.emplace_back(d, xi_radius);
    xis.emplace_back(d, -xi_radius);

    double worst = 0.0;
    for_each_probe_point(
        d, probe.x_lo, probe.x_hi, probe.theta_space_points,
        probe.theta_time_points, T, [&](std::span<const double> x, double t) {
            Vec xp(x.begin(), x.end());
            for (const auto& xi : xis) {
                for (int j = 0; j < d; ++j) {
                    const double hstep = 1e-5 * std::max(1.0, std::abs(x[j]));
                    xp[j] = x[j] + hstep;
                    const Vec gp = legendre(model, xp, t, xi).grad_x;
                    xp[j] = x[j] - hstep;
                    const Vec gm = legendre(model, xp, t, xi).grad_x;
                    xp[j] = x[j];
                    for (int i = 0; i < d; ++i)
                        worst = std::max(
                            worst, std::abs(gp[i] - gm[i]) / (2.0 * hstep));
                }
            }
        });
    return T * worst;
}

} // namespace

SchemeConstants scheme_constants(const HamiltonianModel& model, double T,
                                 double r, double R, double h,
                                 const ProbeConfig& probe) {
    if (!(T > 0.0) || !(r >= 0.0) || !(R >= 0.0))
        throw InputError("scheme_constants: need T > 0, r >= 0, R >= 0");
    const int d = model.dim();
    SchemeConstants c;
    c.r = r;
    c.R = R;
    c.T = T;
    c.h = h;

    double sup_h0;
    if (auto v = model.sup_h_at_zero()) {
        sup_h0 = *v;
    } else {
        c.sampled = true;
        sup_h0 = -std::numeric_limits<double>::infinity();
        Vec zero(d, 0.0);
        for_each_probe_point(d, probe.x_lo, probe.x_hi, probe.space_points,
                             probe.time_points, T,
                             [&](std::span<const double> x, double t) {
                                 sup_h0 =
                                     std::max(sup_h0, eval_h(model, x, t, zero));
                             });
    }
    c.l_star = std::min(0.0, -sup_h0);

    double max_l0;
    if (auto v = model.max_abs_lagrangian_at_zero()) {
        max_l0 = *v;
    } else {
        c.sampled = true;
        max_l0 = 0.0;
        Vec zero(d, 0.0);
        for_each_probe_point(
            d, probe.x_lo, probe.x_hi, probe.space_points, probe.time_points,
            T, [&](std::span<const double> x, double t) {
                max_l0 =
                    std::max(max_l0, std::abs(legendre(model, x, t, zero).value));
            });
    }

    c.alpha1 = T * max_l0 + R;
    c.alpha2 =
        model.alpha() * (c.alpha1 + R + (1.0 + 2.0 * std::abs(c.l_star)) * T);
    c.deriv_bound = 1.0 + r + c.alpha2;

    const double hp = model.hp_bound(c.deriv_bound);
    if (!(hp > 0.0) || !std::isfinite(hp))
        throw ConstantsError("momentum gradient bound must be positive, got " +
                             fmt_double(hp));
    c.lambda1 = 1.0 / (d * hp);

    const double xi_radius = 1.0 / (d * c.lambda1);
    if (auto v = model.max_abs_lagrangian_xx(xi_radius)) {
        c.theta = T * *v;
    } else {
        c.sampled = true;
        c.theta = probed_theta(model, T, xi_radius, probe);
    }

    for (double v : {c.l_star, c.alpha1, c.alpha2, c.lambda1, c.theta,
                     c.deriv_bound})
        if (!std::isfinite(v))
            throw ConstantsError("scheme constants came out non-finite");
    return c;
}

std::shared_ptr<const HamiltonianModel> make_model(
    const std::string& name, int dim, const std::vector<double>& diag) {
    if (name == "quadratic") return std::make_shared<QuadraticModel>(dim);
    if (name == "quadratic+cosine")
        return std::make_shared<QuadraticCosineModel>(dim);
    if (name == "anisotropic-quadratic")
        return std::make_shared<AnisotropicQuadraticModel>(dim, diag);
    throw InputError("unknown model name: " + name);
}

} // namespace hj
