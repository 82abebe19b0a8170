#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hj/hamiltonian.hpp"
#include "hj/initial_data.hpp"
#include "hj/lattice.hpp"
#include "hj/scheme.hpp"
#include "hj/util.hpp"

namespace hj {

struct ModelSpec {
    std::string name = "quadratic";
    int dim = 1;
    std::vector<double> diag;
};

/// Slab solves cover the query box K with a dependence-cone lattice
/// (the stored box shrinks one ring per level toward the top, so every
/// query in K x [0, T] is decodable); periodic solves wrap on a torus
/// whose physical period must be an even index multiple of each dx.
struct DomainSpec {
    enum class Type { Slab, Periodic };
    Type type = Type::Slab;
    std::vector<double> k_lo;
    std::vector<double> k_hi;
    std::vector<double> period;
};

struct Budgets {
    std::size_t enum_cap = std::size_t{1} << 20;
    std::size_t mc_paths = 100000;
    int queries_per_axis = 33;
    int time_slices = 9;
    int contraction_levels = 10;
};

struct ProblemConfig {
    ModelSpec model;
    InitialDataSpec v0;
    InitialDataSpec v0_b;
    bool has_v0_b = false;
    DomainSpec domain;
    double T = 1.0;
    double h = 0.0;
    double lambda_safety = 0.9;
    std::vector<double> dx;
    InitMode init_mode = InitMode::Pointwise;
    std::uint64_t seed = 1;
    double r_override = -1.0;
    double R_override = -1.0;
    Budgets budgets;
};

/**
 * Everything a refinement ladder shares: the model, the constant block,
 * and the grid ratio lambda = lambda_safety * lambda1, computed once so
 * it is bitwise identical at every dx. The data bounds r and R come from
 * the initial data unless the config pins them; for slab domains R is
 * stabilized over the domain of dependence of K.
 */
struct LadderSetup {
    std::shared_ptr<const HamiltonianModel> model;
    SchemeConstants constants;
    double lambda = 0.0;
    double r = 0.0;
    double R = 0.0;
};

LadderSetup ladder_setup(const ProblemConfig& cfg);

/// One solve of the configured problem at spacing dx, with the supplied
/// initial data (contraction runs pass each of the two).
SolveResult solve_problem(const ProblemConfig& cfg, double dx,
                          const LadderSetup& setup,
                          const InitialDataSpec& data, bool keep_gradients);

struct ConvergenceRow {
    double dx = 0.0;
    double dt = 0.0;
    double lambda = 0.0;
    double sup_error = 0.0;
    Vec grad_l1;
    std::size_t grad_skipped = 0;
    double max_grad_inf = 0.0;
    double wall_seconds = 0.0;
};

struct ConvergenceReport {
    std::vector<ConvergenceRow> rows;
    double rate = 0.0;
    double beta_hat = 0.0;
    bool rate_fitted = false;
    bool exact = false;
    double lambda = 0.0;
    std::vector<double> k_lo;
    std::vector<double> k_hi;
    int queries_per_axis = 0;
    int time_slices = 0;
};

/// Solves the ladder at fixed lambda, compares against the closed-form
/// reference on a query lattice in K x (0, T], and fits
/// error ~ beta_hat * dx^rate by least squares on the log-log points.
/// Ladders whose errors all sit at rounding level are flagged exact and
/// left unfitted.
ConvergenceReport run_convergence(const ProblemConfig& cfg);

struct GradientL1Row {
    double dx = 0.0;
    Vec err;
    std::size_t skipped = 0;
};

struct GradientL1Report {
    double t = 0.0;
    std::vector<GradientL1Row> rows;
    bool decreasing = false;
    double end_ratio = 0.0;
};

/// Riemann-sum L1 distance per axis between the decoded discrete
/// gradient and the reference gradient over K at time T, per rung.
/// Requires cell-average initial data; query points where the reference
/// has no unique gradient are skipped and counted.
GradientL1Report run_gradient_l1(const ProblemConfig& cfg);

struct ContractionReport {
    int levels = 0;
    std::vector<IndexBox> boxes;
    std::vector<double> sums;
    bool monotone = false;
};

/// Solves the config's two initial data on one periodic lattice and sums
/// |gradient difference| over the nested node sets grown one ring per
/// backward level from the top-level nodes inside K. Raises
/// ContractionError naming the offending level if any sum increases
/// toward the top.
ContractionReport run_contraction(const ProblemConfig& cfg);

struct VarianceRow {
    double dx = 0.0;
    std::string control;
    bool exact = false;
    int level = 0;
    int axis = 0;
    double sigma = 0.0;
    double delta = 0.0;
    double bound = 0.0;
    double sigma_se = 0.0;
    double delta_se = 0.0;
    bool sigma_ok = false;
    bool delta_ok = false;
};

struct VarianceReport {
    std::vector<VarianceRow> rows;
    bool all_ok = true;
};

/// For each dx and each control family (minimizing, zero, admissibility
/// corner, random), the walk moments per level and axis against the
/// bound (t_top - t_k) dx / lambda; enumerated exactly when the cone
/// fits the budget, sampled with a 4-standard-error allowance otherwise.
VarianceReport run_variance_sweep(const ProblemConfig& cfg);

struct CheckItem {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct CheckReport {
    std::vector<CheckItem> items;
    bool all_pass = true;
};

/// Desk-scale sweep of every checkable identity and bound on the
/// configured problem: stability margin, kernel normalization, update
/// residual, one-step variational identity, representation, dynamic
/// programming split, walk-moment bounds, and (on periodic two-data
/// configs) the contraction property.
CheckReport run_check(const ProblemConfig& cfg);

} // namespace hj
