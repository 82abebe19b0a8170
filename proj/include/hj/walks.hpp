#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hj/lattice.hpp"
#include "hj/scheme.hpp"
#include "hj/util.hpp"

namespace hj {

inline constexpr std::size_t kDefaultEnumCap = std::size_t{1} << 20;

/**
 * Transition kernel of the backward walk driven by a control xi:
 *
 *   rho(+e_j) = 1/(2d) - (lambda/2) xi_j,
 *   rho(-e_j) = 1/(2d) + (lambda/2) xi_j,
 *
 * in axis-major order (+e1, -e1, +e2, -e2, ...). Admissible controls
 * (|xi|_inf <= 1/(d lambda)) give probabilities in [0, 1] that sum to 1
 * with exact pairwise cancellation; anything outside raises
 * ProbabilityError. The kernel's mean displacement is -lambda xi per
 * axis, which is what ties the walk to the characteristic velocity.
 */
std::vector<double> transition_probs(std::span<const double> xi,
                                     double lambda);

/**
 * A control attached to the cone of a walk apex: for each level
 * k in [bottom+1, top] it stores a vector xi^k_m at the solution nodes
 * within sup-norm distance (top - k) of the apex. Values are validated
 * against the admissibility bound on assignment; reading an unset node
 * is an error rather than a silent zero.
 */
class ControlField {
public:
    ControlField(int dim, NodeIndex apex, int bottom_level, double xi_bound);

    int dim() const { return dim_; }
    const NodeIndex& apex() const { return apex_; }
    int top() const { return apex_.level; }
    int bottom() const { return bottom_; }
    double xi_bound() const { return bound_; }

    const IndexBox& level_box(int level) const;
    void set(int level, std::span<const std::int64_t> m,
             std::span<const double> xi);
    std::span<const double> at(int level,
                               std::span<const std::int64_t> m) const;
    bool defined(int level, std::span<const std::int64_t> m) const;

private:
    std::size_t slot(int level, std::span<const std::int64_t> m) const;
    int dim_ = 0;
    NodeIndex apex_;
    int bottom_ = 0;
    double bound_ = 0.0;
    std::vector<IndexBox> boxes_;
    std::vector<std::vector<double>> data_;
    std::vector<std::vector<char>> set_;
};

/// One backward path. Arrays are level-major ascending from `bottom`;
/// node(k) is the lattice index at level k, eta(k) the companion point
/// moved by the control instead of the lattice jump. omegas[k - bottom]
/// is the B-index of the jump taken from level k+1 down to k.
struct WalkPath {
    std::vector<std::int64_t> nodes;
    std::vector<double> eta;
    std::vector<std::uint8_t> omegas;
    double density = 0.0;
    double weight = 0.0;
};

struct WalkEnsemble {
    enum class Kind { Exact, Sampled };
    Kind kind = Kind::Exact;
    int dim = 0;
    int bottom = 0;
    NodeIndex apex;
    double dx = 0.0;
    double dt = 0.0;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    std::vector<WalkPath> paths;

    std::span<const std::int64_t> node(const WalkPath& p, int level) const;
    std::span<const double> eta_at(const WalkPath& p, int level) const;
};

/// All (2d)^(top-bottom) backward paths with their densities; refuses
/// counts above `cap`. Path order is the depth-first sweep taking B
/// directions in axis-major order at every level, starting at the top.
WalkEnsemble enumerate_walks(const Lattice& lat, const NodeIndex& apex,
                             int bottom, const ControlField& xi,
                             std::size_t cap = kDefaultEnumCap);

/// n paths sampled under the kernel; path i draws from an independent
/// stream derived from (seed, i), so the ensemble does not depend on
/// scheduling and any path can be regenerated in isolation.
WalkEnsemble sample_walks(const Lattice& lat, const NodeIndex& apex,
                          int bottom, const ControlField& xi, std::size_t n,
                          std::uint64_t seed);

/**
 * The control functional
 *
 *   E(xi) = E[ sum_k L(gamma^k, t_{k-1}, xi^k) dt + v(gamma^bottom) ]
 *         + h (t_top - t_bottom),
 *
 * where the sum runs over levels bottom < k <= top, the control is read
 * at the node the path occupies, and the terminal value comes from the
 * supplied layer. Evaluated exactly over the path tree (shared prefixes
 * are evaluated once), or by Monte Carlo with a standard-error estimate.
 */
double expected_action_exact(const Lattice& lat, const NodeIndex& apex,
                             const ControlField& xi, const Layer& terminal,
                             const HamiltonianModel& model, double h,
                             std::size_t cap = kDefaultEnumCap);

struct McEstimate {
    double mean = 0.0;
    double se = 0.0;
};

McEstimate expected_action_mc(const Lattice& lat, const NodeIndex& apex,
                              const ControlField& xi, const Layer& terminal,
                              const HamiltonianModel& model, double h,
                              std::size_t n, std::uint64_t seed);

/// The optimal control harvested from a finished solve:
/// xi^{k+1}_m = H_p(x_m, t_k, D_x v^k_m) on the cone of `apex`.
ControlField minimizing_control(const SolveResult& result,
                                const NodeIndex& apex);

/// The same vector at every node of the cone.
ControlField constant_control(const Lattice& lat, const NodeIndex& apex,
                              int bottom, std::span<const double> xi);

/// Independent uniforms over the admissible box, drawn per node from
/// (seed, level, slot) so the field does not depend on traversal order.
ControlField random_control(const Lattice& lat, const NodeIndex& apex,
                            int bottom, std::uint64_t seed);

/// Node-occupancy probabilities of the walk, per level (exact forward
/// push of the kernel, no enumeration).
struct Occupancy {
    int bottom = 0;
    int top = 0;
    std::vector<IndexBox> boxes;
    std::vector<std::vector<double>> mass;

    const IndexBox& box(int level) const;
    const std::vector<double>& at(int level) const;
};

Occupancy propagate_occupancy(const Lattice& lat, const NodeIndex& apex,
                              int bottom, const ControlField& xi);

/// Mean path: gamma_bar^top is the apex and
/// gamma_bar^{k} = gamma_bar^{k+1} - E[xi^{k+1}] dt, with the control
/// average taken under the occupancy at level k+1. Positions ascend from
/// `bottom`. Exact, and equal to the enumeration average.
std::vector<Vec> averaged_path(const Lattice& lat, const NodeIndex& apex,
                               int bottom, const ControlField& xi);

/// Componentwise second and first absolute moments of eta - gamma per
/// level and axis (level-major ascending from bottom; the top level is
/// identically zero). Standard errors are zero for exact ensembles.
struct WalkStats {
    int bottom = 0;
    int top = 0;
    int dim = 0;
    bool sampled = false;
    std::vector<double> sigma;
    std::vector<double> delta;
    std::vector<double> sigma_se;
    std::vector<double> delta_se;

    double sigma_at(int level, int axis) const;
    double delta_at(int level, int axis) const;
};

WalkStats walk_stats(const WalkEnsemble& ensemble);

/// Streaming Monte Carlo version for cones too large to enumerate or
/// store; deterministic for fixed (seed, n) by block-ordered reduction.
WalkStats sample_walk_stats(const Lattice& lat, const NodeIndex& apex,
                            int bottom, const ControlField& xi,
                            std::size_t n, std::uint64_t seed);

/// Exact second moments by occupancy: each step adds
/// dx^2 E[1/d - (lambda xi_i)^2], which is how the variance bound
/// (t_top - t_k) dx / lambda arises.
std::vector<double> sigma_tilde_occupancy(const Lattice& lat,
                                          const NodeIndex& apex, int bottom,
                                          const ControlField& xi);

/// Residual of the dynamic-programming split at `split_level`: the full
/// expectation against the tower of sub-cone expectations over the paths
/// truncated at the split. Both sides are enumerated independently.
double dp_identity_check(const Lattice& lat, const NodeIndex& apex,
                         const ControlField& xi, int split_level,
                         const Layer& terminal, const HamiltonianModel& model,
                         double h, std::size_t cap = kDefaultEnumCap);

/// Ensemble average of sum_k f(k, node, eta) + g(terminal node); the
/// workhorse behind the derivative comparison bounds.
McEstimate expect_over_paths(
    const WalkEnsemble& ensemble,
    const std::function<double(int, std::span<const std::int64_t>,
                               std::span<const double>)>& per_level,
    const std::function<double(std::span<const std::int64_t>)>& terminal);

} // namespace hj
