#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "hj/util.hpp"

namespace hj {

/// A space-time grid point: spatial multi-index m and time level k.
struct NodeIndex {
    std::vector<std::int64_t> m;
    int level = 0;
    bool operator==(const NodeIndex&) const = default;
};

/// Torus domain; period is in index units and even per axis, so wrapping
/// preserves the coordinate-sum parity that the staggering relies on.
struct PeriodicDomain {
    std::vector<std::int64_t> period;
};

/// Domain of dependence of a box of top-level nodes (a single node when
/// lo == hi). The active index box grows by one ring per level toward
/// level 0, which is exactly what the backward stencil consumes.
struct ConeDomain {
    std::vector<std::int64_t> apex_lo;
    std::vector<std::int64_t> apex_hi;
    int apex_level = 0;
};

/**
 * Staggered space-time lattice with spacing dx and step dt = lambda * dx.
 *
 * Nodes split by coordinate-sum parity: solution values live where
 * sum(m) + k is odd (level 0 data sits on odd-parity indices) and
 * discrete gradients live on the complementary set, so each scheme update
 * reads the 2d odd neighbors of an even node and vice versa.
 */
class Lattice {
public:
    static Lattice periodic(int dim, double dx, double lambda,
                            int horizon_steps,
                            std::vector<std::int64_t> period);
    static Lattice cone(int dim, double dx, double lambda, NodeIndex apex);
    static Lattice cone_box(int dim, double dx, double lambda, IndexBox apex,
                            int apex_level);

    int dim() const { return dim_; }
    double dx() const { return dx_; }
    double dt() const { return dt_; }
    double lambda() const { return lambda_; }
    /// Top stored level; for horizon T this is k(T) + 1 with
    /// T in [k(T) dt, k(T) dt + dt).
    int horizon_steps() const { return horizon_steps_; }
    bool is_periodic() const;
    const PeriodicDomain* periodic_domain() const;
    const ConeDomain* cone_domain() const;

    double coord(std::int64_t mj) const { return dx_ * mj; }
    void coords(std::span<const std::int64_t> m, std::span<double> out) const;
    double time(int k) const { return dt_ * k; }
    /// Largest k with t >= k * dt, robust to the exact-multiple case.
    int level_of_time(double t) const;

    bool is_value_node(std::span<const std::int64_t> m, int k) const;
    bool is_gradient_node(std::span<const std::int64_t> m, int k) const;

    /// Storage box at level k: the full period box, or the apex box
    /// expanded by (apex_level - k) rings.
    IndexBox level_box(int k) const;

    /// Canonical index for lookups: periodic wrap, identity otherwise.
    void canonical(std::span<const std::int64_t> m,
                   std::span<std::int64_t> out) const;

private:
    Lattice() = default;
    int dim_ = 0;
    double dx_ = 0.0;
    double dt_ = 0.0;
    double lambda_ = 0.0;
    int horizon_steps_ = 0;
    std::variant<PeriodicDomain, ConeDomain> domain_;
};

/**
 * Reachable node set of a backward walk started at (n, level_top), at a
 * lower level: solution nodes within sup-norm distance
 * (level_top - level) * dx of the start. Rows are unwrapped indices in
 * ascending lexicographic order; periodic lattices reduce modulo the
 * period and deduplicate.
 */
std::vector<std::vector<std::int64_t>> reachable_set(
    const Lattice& lat, std::span<const std::int64_t> n, int level_top,
    int level);

/// Nodes a backward walk can actually occupy: 1-norm distance at most
/// level_top - level with matching step parity. A subset of
/// reachable_set for d >= 2, equal to it for d = 1; closed under taking
/// the 2d neighbors of the level above.
std::vector<std::vector<std::int64_t>> walk_support(
    const Lattice& lat, std::span<const std::int64_t> n, int level_top,
    int level);

/// Solution node whose space-time cell contains (x, t): time level k with
/// t in [t_k, t_{k+1}), spatial index the nearest solution-parity index
/// in the 1-norm, ties resolved upward starting from the lowest axis.
/// In one dimension this is exactly the half-open interval
/// [x_{m-1}, x_{m+1}) around each solution node.
NodeIndex locate_solution_cell(const Lattice& lat, std::span<const double> x,
                               double t);

/// Same lookup against the gradient-parity class.
NodeIndex locate_gradient_cell(const Lattice& lat, std::span<const double> x,
                               double t);

/// Same spatial decoding at an explicit time level (no horizon check):
/// the nearest index of the solution or gradient parity class there.
NodeIndex locate_parity_node(const Lattice& lat, std::span<const double> x,
                             int level, bool solution_parity);

} // namespace hj
