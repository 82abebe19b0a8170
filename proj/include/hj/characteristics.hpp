#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hj/lattice.hpp"
#include "hj/oracle.hpp"
#include "hj/scheme.hpp"
#include "hj/util.hpp"
#include "hj/walks.hpp"

namespace hj {

/// Piecewise-linear curve with equally spaced breakpoints in time,
/// starting at t0. Evaluation clamps outside [t0, t_end].
struct PiecewisePath {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<Vec> points;

    double t_end() const;
    Vec eval(double s) const;
};

/// Sup over s in [lo, hi] (sampled at `samples` equispaced points) of the
/// max-norm distance between the discrete path and the straight
/// characteristic.
double sup_distance(const PiecewisePath& path, const CharacteristicLine& line,
                    double lo, double hi, int samples = 257);

/// Discrete solution read at an off-grid point through the space-time
/// cell decoding: the value at the solution node whose cell contains
/// (x, t).
double interp_value(const SolveResult& result, std::span<const double> x,
                    double t);

/// Same lookup against the gradient-parity class, returning the centered
/// difference stored there.
Vec interp_gradient(const SolveResult& result, std::span<const double> x,
                    double t);

enum class CharacteristicMode { Mean, Sample, Ensemble };

/**
 * Backward characteristic approximations through (x, t): the walk starts
 * at the solution node of the containing cell, runs to level 0 under the
 * minimizing control harvested from the solve, and is reported as the
 * exact mean path (occupancy average) plus, in the sampling modes,
 * individual lattice paths with their densities.
 */
struct CharacteristicExtraction {
    NodeIndex apex;
    CharacteristicMode mode = CharacteristicMode::Mean;
    PiecewisePath mean;
    std::vector<PiecewisePath> members;
    std::vector<double> densities;
    WalkEnsemble ensemble;
};

CharacteristicExtraction extract_characteristic(const SolveResult& result,
                                                std::span<const double> x,
                                                double t,
                                                CharacteristicMode mode,
                                                std::size_t n = 1,
                                                std::uint64_t seed = 0);

/**
 * Two-sided bound for one component of a discrete gradient, from walks
 * started at the two neighboring solution nodes:
 *
 *   E_+ [ sum_k L_{x^j} dt + (D_{x^j} v)^0 at gamma^0 - e_j ] - theta dx
 *     <= (D_{x^j} v)^level_m <=
 *   E_- [ sum_k L_{x^j} dt + (D_{x^j} v)^0 at gamma^0 + e_j ] + theta dx,
 *
 * where E_+/E_- average over the walks from m + e_j and m - e_j under
 * their minimizing controls. Exact enumeration gives zero standard
 * errors; sampling reports them.
 */
struct DerivativeSandwich {
    int axis = 0;
    double value = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double lower_se = 0.0;
    double upper_se = 0.0;
};

DerivativeSandwich derivative_sandwich(const SolveResult& result,
                                       std::span<const std::int64_t> m,
                                       int level, int axis, bool exact,
                                       std::size_t n = std::size_t{1} << 14,
                                       std::uint64_t seed = 0);

/// One-dimensional entropy diagnostic at a time level: the largest
/// forward difference quotient of the discrete gradient,
///   max_m ((D_x v)^k_{m+2} - (D_x v)^k_m) / (2 dx).
double one_sided_lipschitz_quotient(const SolveResult& result, int level);

} // namespace hj
