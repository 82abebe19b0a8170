#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "hj/hamiltonian.hpp"
#include "hj/lattice.hpp"
#include "hj/util.hpp"

namespace hj {

enum class InitMode { Pointwise, CellAverage };

using InitialData = std::function<double(std::span<const double>)>;

/**
 * One time level of the solve. Values are stored densely over the level's
 * index box; only slots of solution parity are meaningful. When present,
 * grad holds the d components of the centered difference at the
 * complementary (gradient-parity) slots of the same level.
 */
struct Layer {
    int level = 0;
    IndexBox box;
    std::vector<double> values;
    std::vector<double> grad;
    double max_grad_inf = 0.0;

    bool has_grad() const { return !grad.empty(); }
    double value_at_slot(std::int64_t slot) const { return values[slot]; }
};

struct SolveOptions {
    bool keep_gradients = true;
    int cell_average_subdiv = 8;
};

/// Stability report: the scheme requires lambda < lambda1 strictly; the
/// separate dx * theta <= 1 condition only degrades one error constant,
/// so it is reported but not enforced.
struct CflReport {
    double lambda = 0.0;
    double lambda1 = 0.0;
    double margin = 0.0;
    bool pass = false;
    double dx_theta = 0.0;
    bool dx_theta_ok = true;
};

CflReport check_cfl(const SchemeConstants& consts, const Lattice& lat);

/// Projects v0 onto the level-0 solution nodes, either by point values or
/// by the average over the surrounding cell [-dx, dx]^d (composite
/// midpoint rule with subdiv points per axis).
Layer discretize_initial(const InitialData& v0, const Lattice& lat,
                         InitMode mode, int subdiv = 8);

/// Centered difference (v_{m+e_j} - v_{m-e_j}) / (2 dx) at a
/// gradient-parity index m of the layer's level.
Vec discrete_gradient(const Layer& layer, const Lattice& lat,
                      std::span<const std::int64_t> m);

/// Advances one level:
///   v^{k+1}_m = (1/2d) sum_w v^k_{m+w} - dt * H(x_m, t_k, D_x v^k_m) + h dt.
/// Raises StabilityError as soon as any centered difference leaves the
/// a priori bound (|g|_inf > deriv_bound + 1e-8) and ConfigError when the
/// grid ratio fails the stability threshold, before touching any values.
Layer step(const Layer& prev, const Lattice& lat,
           const HamiltonianModel& model, const SchemeConstants& consts);

class SolveResult {
public:
    SolveResult(Lattice lat, std::shared_ptr<const HamiltonianModel> model,
                SchemeConstants consts, InitMode init_mode,
                std::vector<Layer> layers);

    const Lattice& lattice() const { return lat_; }
    const HamiltonianModel& model() const { return *model_; }
    std::shared_ptr<const HamiltonianModel> model_ptr() const {
        return model_;
    }
    const SchemeConstants& constants() const { return consts_; }
    InitMode init_mode() const { return init_mode_; }
    const std::vector<Layer>& layers() const { return layers_; }
    const Layer& layer(int k) const;

    /// Value at a solution node (periodic indices wrap).
    double value_at(std::span<const std::int64_t> m, int level) const;

    /// Centered difference at a gradient node, from storage if the layer
    /// kept it, otherwise recomputed from the values.
    Vec gradient_at(std::span<const std::int64_t> m, int level) const;

    /// Largest |D_x v|_inf observed across all levels.
    double max_grad_inf() const;

    /// Largest relative defect of the update identity across all stored
    /// consecutive layer pairs.
    double residual_max() const;

private:
    Lattice lat_;
    std::shared_ptr<const HamiltonianModel> model_;
    SchemeConstants consts_;
    InitMode init_mode_;
    std::vector<Layer> layers_;
};

SolveResult solve(const InitialData& v0, const Lattice& lat,
                  std::shared_ptr<const HamiltonianModel> model,
                  const SchemeConstants& consts, InitMode init_mode,
                  const SolveOptions& options = {});

} // namespace hj
