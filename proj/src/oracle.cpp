#include "hj/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hj/errors.hpp"

namespace hj {

namespace {

/// Greedy compass descent: try +/- step on each axis in order, move on
/// first improvement, halve the step when a full sweep fails. Handles the
/// piecewise-smooth objectives that initial-data kinks produce, and is
/// fully deterministic.
template <class F>
double compass_minimize(F&& f, Vec& y, double step, double tol,
                        std::span<const double> lo,
                        std::span<const double> hi) {
    const int d = static_cast<int>(y.size());
    for (int j = 0; j < d; ++j)
        y[j] = std::clamp(y[j], lo[j], hi[j]);
    double best = f(y);
    Vec trial = y;
    while (step > tol) {
        bool improved = false;
        for (int j = 0; j < d && !improved; ++j) {
            for (double sgn : {1.0, -1.0}) {
                const double cand =
                    std::clamp(y[j] + sgn * step, lo[j], hi[j]);
                if (cand == y[j]) continue;
                trial[j] = cand;
                const double val = f(trial);
                if (val < best) {
                    best = val;
                    y[j] = cand;
                    improved = true;
                    break;
                }
                trial[j] = y[j];
            }
        }
        if (!improved) step *= 0.5;
    }
    return best;
}

} // namespace

HopfLaxOracle::HopfLaxOracle(std::shared_ptr<const HamiltonianModel> model,
                             InitialData v0, double h, double lambda1,
                             OracleOptions options)
    : model_(std::move(model)),
      v0_(std::move(v0)),
      h_(h),
      speed_(0.0),
      opts_(options) {
    if (!model_) throw InputError("oracle: missing model");
    if (!v0_) throw InputError("oracle: missing initial data");
    if (!model_->space_time_independent())
        throw OracleError(
            "reference solution requires a Hamiltonian independent of x and "
            "t; model '" +
            model_->name() + "' is not");
    if (!(lambda1 > 0.0))
        throw InputError("oracle: stability threshold must be positive");
    speed_ = 1.0 / (model_->dim() * lambda1);
}

OracleEntry HopfLaxOracle::query(std::span<const double> x, double t) const {
    return query(x, t, {});
}

OracleEntry HopfLaxOracle::query(std::span<const double> x, double t,
                                 std::span<const double> hint_gradient) const {
    const int d = model_->dim();
    if (static_cast<int>(x.size()) != d)
        throw InputError("oracle: point rank does not match model");
    if (t < 0.0) throw InputError("oracle: time must be non-negative");

    OracleEntry entry;
    if (t == 0.0) {
        entry.value = v0_(x);
        entry.minimizer.assign(x.begin(), x.end());
        entry.minimizers.push_back(entry.minimizer);
        entry.regular = false;
        return entry;
    }

    const double radius = speed_ * t * opts_.radius_pad;
    Vec lo(d), hi(d);
    for (int j = 0; j < d; ++j) {
        lo[j] = x[j] - radius;
        hi[j] = x[j] + radius;
    }

    Vec xi(d);
    auto objective = [&](const Vec& y) {
        for (int j = 0; j < d; ++j) xi[j] = (x[j] - y[j]) / t;
        return t * legendre(*model_, x, t, xi).value + v0_(y);
    };

    // 3-per-axis multistart lattice over the speed box plus the
    // straight-characteristic guess from the caller's gradient estimate.
    std::vector<Vec> starts;
    {
        std::vector<int> q(d, 0);
        while (true) {
            Vec y(d);
            for (int j = 0; j < d; ++j)
                y[j] = x[j] + (q[j] - 1) * radius;
            starts.push_back(std::move(y));
            int j = d - 1;
            while (j >= 0 && ++q[j] == 3) q[j--] = 0;
            if (j < 0) break;
        }
    }
    if (static_cast<int>(hint_gradient.size()) == d) {
        Vec hp(d);
        model_->grad_p(x, t, hint_gradient, hp);
        Vec y(d);
        for (int j = 0; j < d; ++j) y[j] = x[j] - t * hp[j];
        starts.push_back(std::move(y));
    }

    const double tol = opts_.position_tol * std::max(1.0, radius);
    std::vector<std::pair<double, Vec>> found;
    for (auto& start : starts) {
        Vec y = start;
        const double val =
            compass_minimize(objective, y, radius * 0.5, tol, lo, hi);
        found.emplace_back(val, std::move(y));
    }

    double best = found.front().first;
    for (const auto& [val, y] : found) best = std::min(best, val);

    const double window = opts_.value_window * (1.0 + std::abs(best));
    for (auto& [val, y] : found) {
        if (val > best + window) continue;
        bool duplicate = false;
        for (const auto& kept : entry.minimizers) {
            double dist = 0.0;
            for (int j = 0; j < d; ++j)
                dist = std::max(dist, std::abs(kept[j] - y[j]));
            if (dist <= opts_.cluster_tol) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) entry.minimizers.push_back(y);
    }

    entry.value = best + h_ * t;
    entry.minimizer = entry.minimizers.front();
    for (const auto& y : entry.minimizers) {
        for (int j = 0; j < d; ++j) xi[j] = (x[j] - y[j]) / t;
        entry.gradient_candidates.push_back(
            legendre(*model_, x, t, xi).grad_xi);
    }
    entry.regular = true;
    for (const auto& g : entry.gradient_candidates)
        for (int j = 0; j < d; ++j)
            if (std::abs(g[j] - entry.gradient_candidates.front()[j]) >
                opts_.gradient_tol)
                entry.regular = false;
    if (entry.regular) entry.gradient = entry.gradient_candidates.front();
    return entry;
}

OneStepMin one_step_min(const HamiltonianModel& model,
                        std::span<const double> x, double t,
                        std::span<const double> neighbors, double dx,
                        double dt, double h) {
    const int d = model.dim();
    if (static_cast<int>(neighbors.size()) != 2 * d)
        throw InputError("one_step_min: need 2d neighbor values");
    if (!(dx > 0.0) || !(dt > 0.0))
        throw InputError("one_step_min: need dx > 0 and dt > 0");
    const double lambda = dt / dx;
    const double bound = 1.0 / (d * lambda);

    auto phi = [&](const Vec& xi) {
        double s = dt * legendre(model, x, t, xi).value + h * dt;
        for (int j = 0; j < d; ++j) {
            const double rho_p = 1.0 / (2.0 * d) - 0.5 * lambda * xi[j];
            const double rho_m = 1.0 / (2.0 * d) + 0.5 * lambda * xi[j];
            s += rho_p * neighbors[2 * j] + rho_m * neighbors[2 * j + 1];
        }
        return s;
    };
    Vec g(d);
    for (int j = 0; j < d; ++j)
        g[j] = (neighbors[2 * j] - neighbors[2 * j + 1]) / (2.0 * dx);

    Vec xi(d, 0.0), grad(d), next(d);
    double val = phi(xi);

    // Projected gradient with Armijo backtracking.
    double tau = 1.0;
    for (int iter = 0; iter < 400; ++iter) {
        const Vec p_star = legendre(model, x, t, xi).grad_xi;
        for (int j = 0; j < d; ++j) grad[j] = dt * (p_star[j] - g[j]);
        bool accepted = false;
        for (int bt = 0; bt < 60 && !accepted; ++bt) {
            double decrease = 0.0;
            for (int j = 0; j < d; ++j) {
                next[j] = std::clamp(xi[j] - tau * grad[j], -bound, bound);
                decrease += grad[j] * (xi[j] - next[j]);
            }
            const double val_next = phi(next);
            if (val_next <= val - 1e-4 * decrease) {
                accepted = true;
                double move = 0.0;
                for (int j = 0; j < d; ++j)
                    move = std::max(move, std::abs(next[j] - xi[j]));
                xi = next;
                val = val_next;
                tau *= 1.3;
                if (move <= 1e-13 * (1.0 + bound)) iter = 400;
            } else {
                tau *= 0.5;
            }
        }
        if (!accepted) break;
    }

    // Newton polish while the iterate is strictly interior: the stationary
    // condition is L_xi(xi) = g, with Jacobian inverse H_pp(p*).
    std::vector<double> hess(static_cast<std::size_t>(d) * d);
    for (int iter = 0; iter < 40; ++iter) {
        bool interior = true;
        for (int j = 0; j < d; ++j)
            if (std::abs(xi[j]) >= bound * (1.0 - 1e-9)) interior = false;
        if (!interior) break;
        const LagrangianValue lag = legendre(model, x, t, xi);
        double res = 0.0;
        for (int j = 0; j < d; ++j)
            res = std::max(res, std::abs(lag.p_star[j] - g[j]));
        if (res <= 1e-13 * (1.0 + norm_inf(g))) break;
        model.hess_pp(x, t, lag.p_star, hess);
        for (int j = 0; j < d; ++j) {
            double delta = 0.0;
            for (int i = 0; i < d; ++i)
                delta += hess[j * d + i] * (g[i] - lag.p_star[i]);
            next[j] = std::clamp(xi[j] + delta, -bound, bound);
        }
        xi = next;
    }
    val = phi(xi);

    OneStepMin out;
    out.value = val;
    out.argmin = xi;
    return out;
}

Vec CharacteristicLine::eval(double s) const {
    const int d = static_cast<int>(y0.size());
    Vec p(d);
    const double w = std::clamp(s / t, 0.0, 1.0);
    for (int j = 0; j < d; ++j) p[j] = y0[j] + w * (x[j] - y0[j]);
    return p;
}

CharacteristicLine exact_characteristic(const OracleEntry& entry,
                                        std::span<const double> x,
                                        double t) {
    if (!(t > 0.0))
        throw InputError("exact_characteristic: time must be positive");
    if (!entry.regular) {
        std::ostringstream os;
        os << "backward characteristic not unique; minimizers:";
        for (const auto& y : entry.minimizers) {
            os << " (";
            for (std::size_t j = 0; j < y.size(); ++j)
                os << (j ? "," : "") << y[j];
            os << ")";
        }
        throw AmbiguousCharacteristicError(os.str());
    }
    CharacteristicLine line;
    line.y0 = entry.minimizer;
    line.x.assign(x.begin(), x.end());
    line.t = t;
    return line;
}

} // namespace hj
