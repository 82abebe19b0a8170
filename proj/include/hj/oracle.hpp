#pragma once

#include <memory>
#include <span>
#include <vector>

#include "hj/hamiltonian.hpp"
#include "hj/scheme.hpp"
#include "hj/util.hpp"

namespace hj {

/// Result of one reference-solution query.
struct OracleEntry {
    double value = 0.0;
    Vec minimizer;
    std::vector<Vec> minimizers;
    std::vector<Vec> gradient_candidates;
    bool regular = false;
    Vec gradient;
};

struct OracleOptions {
    double radius_pad = 1.05;
    double position_tol = 1e-10;
    double value_window = 1e-9;
    double cluster_tol = 1e-6;
    double gradient_tol = 1e-6;
};

/**
 * Closed-form reference solution for Hamiltonians independent of (x, t):
 *
 *   v(x, t) = inf_y { t L((x - y) / t) + v0(y) } + h t.
 *
 * The infimum is searched inside the box |y - x|_inf <= t / (d lambda1)
 * (no minimizing velocity can exceed that speed) with a 3-per-axis
 * multistart lattice plus an optional caller hint, each refined by a
 * deterministic compass descent to position tolerance 1e-10.
 *
 * Every query reports all distinct global minimizers found and the
 * conjugate gradient L_xi((x - y*) / t) of each; the point is regular
 * when those candidates agree to gradient_tol, and only then is a
 * gradient claimed.
 */
class HopfLaxOracle {
public:
    HopfLaxOracle(std::shared_ptr<const HamiltonianModel> model,
                  InitialData v0, double h, double lambda1,
                  OracleOptions options = {});

    OracleEntry query(std::span<const double> x, double t) const;
    OracleEntry query(std::span<const double> x, double t,
                      std::span<const double> hint_gradient) const;

    double speed_bound() const { return speed_; }

private:
    std::shared_ptr<const HamiltonianModel> model_;
    InitialData v0_;
    double h_;
    double speed_;
    OracleOptions opts_;
};

/// Value and argmin of the one-step functional
///   xi -> L(x, t, xi) dt + sum_w rho_w(xi) v_w + h dt
/// over the admissible box |xi|_inf <= 1 / (d lambda), minimized
/// numerically by projected gradient descent with a Newton polish.
/// Neighbor values arrive in axis-major order (+e1, -e1, +e2, -e2, ...).
struct OneStepMin {
    double value = 0.0;
    Vec argmin;
};

OneStepMin one_step_min(const HamiltonianModel& model,
                        std::span<const double> x, double t,
                        std::span<const double> neighbors, double dx,
                        double dt, double h);

/// Straight segment s -> y0 + (s / t)(x - y0) on [0, t]: the unique
/// backward characteristic through a regular point.
struct CharacteristicLine {
    Vec y0;
    Vec x;
    double t = 0.0;
    Vec eval(double s) const;
};

/// Requires a regular oracle entry; lists the competing minimizers
/// otherwise.
CharacteristicLine exact_characteristic(const OracleEntry& entry,
                                        std::span<const double> x, double t);

} // namespace hj
