// Acceptance gate: one pass/fail line per criterion, exit code equal to
// the number of failures. Tolerances are pinned here on purpose; loosen
// nothing without revisiting the claims they guard.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hj/characteristics.hpp"
#include "hj/errors.hpp"
#include "hj/hamiltonian.hpp"
#include "hj/harness.hpp"
#include "hj/initial_data.hpp"
#include "hj/lattice.hpp"
#include "hj/oracle.hpp"
#include "hj/scheme.hpp"
#include "hj/util.hpp"
#include "hj/walks.hpp"

namespace {

using hj::Vec;

struct CheckFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw CheckFailure(what);
}

std::string num(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

Vec grad_p_vec(const hj::HamiltonianModel& model, std::span<const double> x,
               double t, std::span<const double> p) {
    Vec out(static_cast<std::size_t>(model.dim()));
    model.grad_p(x, t, p, out);
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
    return s;
}

hj::ProblemConfig slab_config(const std::string& model, int d,
                              const std::string& data, double half_width,
                              double horizon) {
    hj::ProblemConfig cfg;
    cfg.model.name = model;
    cfg.model.dim = d;
    cfg.v0.name = data;
    cfg.domain.type = hj::DomainSpec::Type::Slab;
    cfg.domain.k_lo.assign(static_cast<std::size_t>(d), -half_width);
    cfg.domain.k_hi.assign(static_cast<std::size_t>(d), half_width);
    cfg.T = horizon;
    return cfg;
}

// --- criterion 1 -----------------------------------------------------

void criterion_kernel() {
    auto rng = hj::make_stream(2026, 1);
    int draws = 0;
    for (int d : {1, 2, 3}) {
        const double lambda = 0.3 / d;
        const double bound = 1.0 / (d * lambda);
        std::uniform_real_distribution<double> u(-bound, bound);
        for (int trial = 0; trial < 3334; ++trial) {
            Vec xi(static_cast<std::size_t>(d));
            for (double& c : xi) c = u(rng);
            const std::vector<double> rho = hj::transition_probs(xi, lambda);
            require(rho.size() == static_cast<std::size_t>(2 * d),
                    "kernel has wrong arity");
            double sum = 0.0;
            for (double p : rho) {
                require(p >= 0.0 && p <= 1.0,
                        "probability outside [0,1]: " + num(p));
                sum += p;
            }
            require(std::abs(sum - 1.0) <= 1e-15,
                    "kernel mass " + num(sum) + " at d=" + std::to_string(d));
            ++draws;
        }
    }
    require(draws >= 10000, "fewer than 10^4 admissible draws");
}

// --- criterion 2 -----------------------------------------------------

void criterion_one_step() {
    auto rng = hj::make_stream(2026, 2);
    struct Case {
        std::string model;
        int d;
        std::vector<double> diag;
    };
    const std::vector<Case> cases = {{"quadratic", 1, {}},
                                     {"anisotropic-quadratic", 2, {1.0, 1.7}}};
    for (const Case& c : cases) {
        const auto model = hj::make_model(c.model, c.d, c.diag);
        const hj::SchemeConstants consts =
            hj::scheme_constants(*model, 0.2, 1.3, 5.0, 0.1);
        const double lambda = 0.8 * consts.lambda1;
        const double dx = 0.2;
        hj::NodeIndex apex;
        apex.m.assign(static_cast<std::size_t>(c.d), 0);
        apex.level = 1;
        const hj::Lattice lat = hj::Lattice::cone(c.d, dx, lambda, apex);
        const hj::IndexBox box0 = lat.level_box(0);
        const hj::IndexBox box1 = lat.level_box(1);
        std::uniform_real_distribution<double> slope(-1.1, 1.1);
        std::uniform_real_distribution<double> jitter(-0.05 * dx, 0.05 * dx);
        std::uniform_real_distribution<double> shift(-1.0, 1.0);

        for (int trial = 0; trial < 100; ++trial) {
            Vec a(static_cast<std::size_t>(c.d));
            for (double& aj : a) aj = slope(rng);
            const double b = shift(rng);

            hj::Layer l0;
            l0.level = 0;
            l0.box = box0;
            l0.values.assign(box0.size(),
                             std::numeric_limits<double>::quiet_NaN());
            std::vector<std::int64_t> m(static_cast<std::size_t>(c.d));
            Vec x(static_cast<std::size_t>(c.d));
            for (std::size_t flat = 0; flat < box0.size(); ++flat) {
                box0.unflatten(flat, m);
                if (!lat.is_value_node(m, 0)) continue;
                double v = b;
                for (int j = 0; j < c.d; ++j)
                    v += a[static_cast<std::size_t>(j)] *
                         lat.coord(m[static_cast<std::size_t>(j)]);
                l0.values[flat] = v + jitter(rng);
            }

            const hj::Layer l1 = hj::step(l0, lat, *model, consts);
            const double scheme_value = l1.values[box1.flatten(apex.m)];

            std::vector<double> neighbors(static_cast<std::size_t>(2 * c.d));
            for (int j = 0; j < c.d; ++j) {
                auto plus = apex.m;
                auto minus = apex.m;
                plus[static_cast<std::size_t>(j)] += 1;
                minus[static_cast<std::size_t>(j)] -= 1;
                neighbors[static_cast<std::size_t>(2 * j)] =
                    l0.values[box0.flatten(plus)];
                neighbors[static_cast<std::size_t>(2 * j + 1)] =
                    l0.values[box0.flatten(minus)];
            }
            lat.coords(apex.m, x);
            const hj::OneStepMin osm = hj::one_step_min(
                *model, x, 0.0, neighbors, dx, lat.dt(), consts.h);
            require(std::abs(osm.value - scheme_value) <= 1e-8,
                    "one-step minimum " + num(osm.value) +
                        " vs scheme update " + num(scheme_value));

            const Vec grad = hj::discrete_gradient(l0, lat, apex.m);
            const Vec xi_ref = grad_p_vec(*model, x, 0.0, grad);
            for (int j = 0; j < c.d; ++j)
                require(std::abs(osm.argmin[static_cast<std::size_t>(j)] -
                                 xi_ref[static_cast<std::size_t>(j)]) <= 1e-8,
                        "argmin component " + num(osm.argmin[j]) +
                            " vs characteristic velocity " + num(xi_ref[j]));
        }
    }
}

// --- criterion 3 -----------------------------------------------------

void criterion_dp() {
    auto rng = hj::make_stream(2026, 3);
    struct Case {
        int d;
        int top;
    };
    for (const Case c : {Case{1, 11}, Case{2, 5}}) {
        const auto model = hj::make_model("quadratic", c.d);
        const double dx = 0.1;
        const double lambda = 0.4 / c.d;
        hj::NodeIndex apex;
        apex.m.assign(static_cast<std::size_t>(c.d), 0);
        apex.level = c.top;
        const hj::Lattice lat = hj::Lattice::cone(c.d, dx, lambda, apex);
        const hj::InitialData v0 = [](std::span<const double> x) {
            double s = 0.0;
            for (double xj : x) s -= std::abs(xj);
            return s;
        };
        const hj::Layer terminal =
            hj::discretize_initial(v0, lat, hj::InitMode::Pointwise);
        std::uniform_int_distribution<int> usplit(0, c.top);
        for (int trial = 0; trial < 20; ++trial) {
            const hj::ControlField xi = hj::random_control(
                lat, apex, 0, 1000 + static_cast<std::uint64_t>(trial));
            const int split = usplit(rng);
            const double resid = hj::dp_identity_check(lat, apex, xi, split,
                                                       terminal, *model, 0.15);
            require(resid <= 1e-12,
                    "tower residual " + num(resid) + " at split " +
                        std::to_string(split) + ", d=" + std::to_string(c.d));
        }
    }
}

// --- criterion 4 -----------------------------------------------------

void criterion_variational() {
    for (int d : {1, 2}) {
        hj::ProblemConfig cfg =
            slab_config("quadratic", d, "neg_l1_norm", 1.5,
                        d == 1 ? 1.0 : 0.25);
        cfg.dx = {0.25};
        const hj::LadderSetup setup = hj::ladder_setup(cfg);
        const hj::SolveResult result =
            hj::solve_problem(cfg, 0.25, setup, cfg.v0, true);
        const hj::Lattice& lat = result.lattice();
        const int top = lat.horizon_steps();

        auto rng = hj::make_stream(2026, 40 + static_cast<std::uint64_t>(d));
        std::uniform_real_distribution<double> pos(-0.75, 0.75);
        std::uniform_int_distribution<int> ulev(1, top);

        hj::NodeIndex apex0;
        double rep0 = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            Vec x(static_cast<std::size_t>(d));
            for (double& c : x) c = pos(rng);
            const hj::NodeIndex apex =
                hj::locate_parity_node(lat, x, ulev(rng), true);
            const double direct = result.value_at(apex.m, apex.level);
            const hj::ControlField xi = hj::minimizing_control(result, apex);
            const double rep = hj::expected_action_exact(
                lat, apex, xi, result.layer(0), result.model(), cfg.h);
            require(std::abs(rep - direct) <= 1e-10,
                    "control representation " + num(rep) +
                        " vs solver value " + num(direct) + " at level " +
                        std::to_string(apex.level));
            if (trial == 0) {
                apex0 = apex;
                rep0 = rep;
            }
        }

        const hj::ControlField best = hj::minimizing_control(result, apex0);
        const double bound = best.xi_bound();
        std::uniform_real_distribution<double> du(-0.3, 0.3);
        std::vector<std::int64_t> m(static_cast<std::size_t>(d));
        for (int i = 0; i < 50; ++i) {
            hj::ControlField pert(d, apex0, 0, bound);
            for (int level = 1; level <= apex0.level; ++level) {
                const hj::IndexBox& box = best.level_box(level);
                for (std::size_t flat = 0; flat < box.size(); ++flat) {
                    box.unflatten(flat, m);
                    if (!best.defined(level, m)) continue;
                    const auto cur = best.at(level, m);
                    Vec moved(cur.begin(), cur.end());
                    for (double& c : moved)
                        c = std::clamp(c + du(rng), -bound * (1.0 - 1e-12),
                                       bound * (1.0 - 1e-12));
                    pert.set(level, m, moved);
                }
            }
            const double e = hj::expected_action_exact(
                lat, apex0, pert, result.layer(0), result.model(), cfg.h);
            require(e >= rep0 - 1e-10, "perturbed control undercuts the "
                                       "minimizer by " +
                                           num(rep0 - e));
        }
    }
}

// --- criterion 5 -----------------------------------------------------

void criterion_moments() {
    int zero_equalities = 0;
    for (int d : {1, 2}) {
        hj::ProblemConfig cfg =
            slab_config("quadratic", d, "neg_l1_norm", 1.0,
                        d == 1 ? 1.0 : 0.25);
        cfg.dx = d == 1 ? std::vector<double>{0.2, 0.1}
                        : std::vector<double>{0.25, 0.1};
        cfg.seed = 2026;
        cfg.budgets.enum_cap = std::size_t{1} << 18;
        cfg.budgets.mc_paths = 100000;
        const hj::VarianceReport rep = hj::run_variance_sweep(cfg);
        require(!rep.rows.empty(), "variance sweep produced no rows");
        for (const hj::VarianceRow& row : rep.rows) {
            require(row.sigma_ok, "spread bound failed: sigma=" +
                                      num(row.sigma) + " bound=" +
                                      num(row.bound) + " control=" +
                                      row.control + " dx=" + num(row.dx));
            require(row.delta_ok, "mean-square bound failed: delta=" +
                                      num(row.delta) + " sigma=" +
                                      num(row.sigma) + " control=" +
                                      row.control + " dx=" + num(row.dx));
            if (d == 1 && row.exact && row.control == "zero") {
                require(std::abs(row.sigma - row.bound) <=
                            1e-12 * (1.0 + row.bound),
                        "driftless spread " + num(row.sigma) +
                            " does not attain the bound " + num(row.bound));
                ++zero_equalities;
            }
        }
        require(rep.all_ok, "variance sweep reported a failing row");
    }
    require(zero_equalities > 0,
            "no exact driftless rows exercised the equality case");
}

// --- criterion 6 -----------------------------------------------------

void criterion_gradient_bound() {
    struct Case {
        std::string model;
        int d;
        std::string data;
        double half_width;
        double horizon;
        std::vector<double> ladder;
    };
    const std::vector<Case> cases = {
        {"quadratic", 1, "neg_l1_norm", 2.0, 1.0, {0.1, 0.05}},
        {"quadratic", 2, "neg_l1_norm", 1.0, 0.25, {0.1}},
        {"quadratic+cosine", 1, "cosine", 0.5, 0.25, {0.1, 0.05}},
        {"quadratic+cosine", 2, "cosine", 0.5, 0.25, {0.1}},
    };
    for (const Case& c : cases) {
        hj::ProblemConfig cfg =
            slab_config(c.model, c.d, c.data, c.half_width, c.horizon);
        cfg.dx = c.ladder;
        const hj::LadderSetup setup = hj::ladder_setup(cfg);
        const double bound = setup.constants.deriv_bound;
        require(std::abs(bound - (1.0 + setup.r + setup.constants.alpha2)) <=
                    1e-12 * bound,
                "a priori bound is not 1 + r + alpha2");
        for (double dx : c.ladder) {
            const hj::SolveResult result =
                hj::solve_problem(cfg, dx, setup, cfg.v0, false);
            require(result.max_grad_inf() <= bound + 1e-8,
                    c.model + " d=" + std::to_string(c.d) + " dx=" + num(dx) +
                        ": max gradient " + num(result.max_grad_inf()) +
                        " above bound " + num(bound));
        }
    }
}

// --- criterion 7 -----------------------------------------------------

void criterion_affine() {
    struct Case {
        std::string model;
        int d;
        std::vector<double> diag;
        Vec a;
        std::vector<double> ladder;
    };
    const std::vector<Case> cases = {
        {"quadratic", 1, {}, {0.7}, {0.2, 0.1, 0.05}},
        {"anisotropic-quadratic", 2, {1.0, 2.0}, {0.4, -0.3}, {0.2, 0.1}},
    };
    for (const Case& c : cases) {
        hj::ProblemConfig cfg = slab_config(c.model, c.d, "affine", 1.0, 0.5);
        cfg.model.diag = c.diag;
        cfg.v0.a = c.a;
        cfg.v0.b = 0.2;
        cfg.h = 0.3;
        cfg.dx = c.ladder;
        const hj::LadderSetup setup = hj::ladder_setup(cfg);
        const Vec origin(static_cast<std::size_t>(c.d), 0.0);
        const double drift = setup.model->eval(origin, 0.0, c.a);

        for (double dx : c.ladder) {
            const hj::SolveResult result =
                hj::solve_problem(cfg, dx, setup, cfg.v0, false);
            const hj::Lattice& lat = result.lattice();
            double worst = 0.0;
            std::vector<std::int64_t> m(static_cast<std::size_t>(c.d));
            for (const hj::Layer& layer : result.layers()) {
                const double t = lat.time(layer.level);
                for (std::size_t flat = 0; flat < layer.box.size(); ++flat) {
                    layer.box.unflatten(flat, m);
                    if (!lat.is_value_node(m, layer.level)) continue;
                    double exact = cfg.v0.b - t * drift + cfg.h * t;
                    for (int j = 0; j < c.d; ++j)
                        exact += c.a[static_cast<std::size_t>(j)] *
                                 lat.coord(m[static_cast<std::size_t>(j)]);
                    worst = std::max(
                        worst, std::abs(layer.values[flat] - exact));
                }
            }
            require(worst <= 1e-12, c.model + " dx=" + num(dx) +
                                        ": affine drift error " + num(worst));
        }
    }
}

// --- criterion 8 -----------------------------------------------------

void check_decreasing_rate(const hj::ConvergenceReport& rep,
                           std::size_t rungs, const std::string& label) {
    require(rep.rows.size() == rungs, label + ": wrong ladder length");
    for (std::size_t i = 0; i + 1 < rep.rows.size(); ++i)
        require(rep.rows[i + 1].sup_error < rep.rows[i].sup_error,
                label + ": sup error stalled between dx=" +
                    num(rep.rows[i].dx) + " (" + num(rep.rows[i].sup_error) +
                    ") and dx=" + num(rep.rows[i + 1].dx) + " (" +
                    num(rep.rows[i + 1].sup_error) + ")");
    require(!rep.exact, label + ": kink data should not be resolved exactly");
    require(rep.rate_fitted, label + ": no fitted rate");
    require(rep.rate >= 0.45,
            label + ": fitted rate " + num(rep.rate) + " below 0.45");
}

void criterion_convergence() {
    hj::ProblemConfig c1 = slab_config("quadratic", 1, "neg_l1_norm", 2.0, 0.5);
    c1.dx = {0.04, 0.02, 0.01, 0.005};
    check_decreasing_rate(hj::run_convergence(c1), 4, "d=1");

    hj::ProblemConfig c2 = slab_config("quadratic", 2, "neg_l1_norm", 2.0, 0.5);
    c2.dx = {0.08, 0.04, 0.02};
    check_decreasing_rate(hj::run_convergence(c2), 3, "d=2");
}

// --- criterion 9 -----------------------------------------------------

void criterion_gradient_l1() {
    hj::ProblemConfig cfg =
        slab_config("quadratic", 1, "neg_l1_norm", 2.0, 0.5);
    cfg.dx = {0.04, 0.02, 0.01, 0.005};
    cfg.init_mode = hj::InitMode::CellAverage;
    // The gradient jump sits in a layer a few dx wide, so the quadrature
    // spacing must drop below the finest dx for the L1 norm to see it.
    cfg.budgets.queries_per_axis = 513;
    const hj::GradientL1Report rep = hj::run_gradient_l1(cfg);
    require(rep.rows.size() == 4, "wrong ladder length");
    require(rep.decreasing, "gradient L1 error is not decreasing");
    for (const hj::GradientL1Row& row : rep.rows)
        require(row.err.size() == 1 && row.err.front() > 0.0,
                "missing gradient error entry");
    require(rep.end_ratio >= 2.0, "end-to-end gradient L1 ratio " +
                                      num(rep.end_ratio) + " below 2");
}

// --- criterion 10 ----------------------------------------------------

void criterion_characteristics() {
    const Vec query_x{1.0};
    const double query_t = 0.5;
    hj::ProblemConfig cfg =
        slab_config("quadratic", 1, "neg_l1_norm", 2.0, 0.5);
    cfg.dx = {0.04, 0.02, 0.01};
    const hj::LadderSetup setup = hj::ladder_setup(cfg);
    const hj::HopfLaxOracle oracle(setup.model,
                                   hj::make_initial_data(cfg.v0, 1), cfg.h,
                                   setup.constants.lambda1);
    const hj::OracleEntry entry = oracle.query(query_x, query_t);
    require(entry.regular, "reference point is not regular");
    const hj::CharacteristicLine line =
        hj::exact_characteristic(entry, query_x, query_t);

    std::vector<double> mean_dist;
    std::vector<double> fraction;
    for (double dx : cfg.dx) {
        const hj::SolveResult result =
            hj::solve_problem(cfg, dx, setup, cfg.v0, true);
        const hj::CharacteristicExtraction mean = hj::extract_characteristic(
            result, query_x, query_t, hj::CharacteristicMode::Mean);
        const double t_apex = result.lattice().time(mean.apex.level);
        mean_dist.push_back(hj::sup_distance(mean.mean, line, 0.0, t_apex));

        const hj::CharacteristicExtraction ens = hj::extract_characteristic(
            result, query_x, query_t, hj::CharacteristicMode::Ensemble, 1000,
            2026);
        require(ens.members.size() == 1000, "ensemble size mismatch");
        std::size_t inside = 0;
        for (const hj::PiecewisePath& member : ens.members)
            if (hj::sup_distance(member, line, 0.0, t_apex) <= 0.1) ++inside;
        fraction.push_back(static_cast<double>(inside) /
                           static_cast<double>(ens.members.size()));
    }

    for (std::size_t i = 0; i + 1 < mean_dist.size(); ++i)
        require(mean_dist[i + 1] < mean_dist[i],
                "mean path distance stalled: " + num(mean_dist[i]) + " -> " +
                    num(mean_dist[i + 1]));
    for (std::size_t i = 0; i + 1 < fraction.size(); ++i)
        require(fraction[i + 1] >= fraction[i],
                "ensemble capture fraction dropped: " + num(fraction[i]) +
                    " -> " + num(fraction[i + 1]));
    require(fraction.back() > fraction.front(),
            "ensemble capture fraction did not improve: " +
                num(fraction.front()) + " -> " + num(fraction.back()));
}

// --- criterion 11 ----------------------------------------------------

void criterion_contraction() {
    hj::ProblemConfig cfg;
    cfg.model.name = "quadratic";
    cfg.model.dim = 2;
    cfg.v0.name = "random_lipschitz";
    cfg.v0.lip = 1.0;
    cfg.v0.period = 2.0;
    cfg.v0.coarse = 4;
    cfg.v0.seed = 3;
    cfg.v0_b = cfg.v0;
    cfg.v0_b.seed = 4;
    cfg.has_v0_b = true;
    cfg.domain.type = hj::DomainSpec::Type::Periodic;
    cfg.domain.k_lo = {0.9, 0.9};
    cfg.domain.k_hi = {1.1, 1.1};
    cfg.domain.period = {2.0, 2.0};
    cfg.T = 0.2;
    cfg.dx = {0.05};
    cfg.budgets.contraction_levels = 10;

    const hj::ContractionReport rep = hj::run_contraction(cfg);
    require(rep.monotone, "contraction report is not monotone");
    require(rep.sums.size() == 11, "expected 11 levels of sums");
    for (std::size_t k = 0; k + 1 < rep.sums.size(); ++k)
        require(rep.sums[k + 1] <= rep.sums[k] * (1.0 + 1e-12) + 1e-15,
                "gradient-difference sum grew at level " + std::to_string(k) +
                    ": " + num(rep.sums[k]) + " -> " + num(rep.sums[k + 1]));
    require(rep.sums.front() > 0.0, "distinct data produced a zero sum");
}

// --- criterion 12 ----------------------------------------------------

void criterion_legendre() {
    auto rng = hj::make_stream(2026, 12);
    struct Case {
        std::string model;
        int d;
        std::vector<double> diag;
    };
    const std::vector<Case> cases = {{"quadratic", 1, {}},
                                     {"quadratic", 2, {}},
                                     {"quadratic+cosine", 1, {}},
                                     {"quadratic+cosine", 2, {}},
                                     {"anisotropic-quadratic", 2, {1.0, 2.0}}};
    std::uniform_real_distribution<double> up(-2.0, 2.0);
    std::uniform_real_distribution<double> ux(-1.0, 1.0);
    for (const Case& c : cases) {
        const auto model = hj::make_model(c.model, c.d, c.diag);
        for (int trial = 0; trial < 40; ++trial) {
            Vec p(static_cast<std::size_t>(c.d));
            Vec x(static_cast<std::size_t>(c.d));
            for (double& v : p) v = up(rng);
            for (double& v : x) v = ux(rng);
            const double t = 0.4;

            const double h_at_p = model->eval(x, t, p);
            const Vec xi = grad_p_vec(*model, x, t, p);
            const hj::LagrangianValue lv = hj::legendre(*model, x, t, xi);

            require(std::abs(dot(p, xi) - lv.value - h_at_p) <= 1e-8,
                    c.model + ": biconjugation residual " +
                        num(dot(p, xi) - lv.value - h_at_p));
            for (int j = 0; j < c.d; ++j)
                require(std::abs(lv.grad_xi[static_cast<std::size_t>(j)] -
                                 p[static_cast<std::size_t>(j)]) <= 1e-10,
                        c.model + ": slope of the conjugate drifted from p");

            const double h_at_star = model->eval(x, t, lv.p_star);
            require(std::abs(lv.value - (dot(lv.p_star, xi) - h_at_star)) <=
                        1e-10,
                    c.model + ": conjugate value disagrees with its "
                              "maximizer");
            for (int j = 0; j < c.d; ++j)
                require(lv.grad_xi[static_cast<std::size_t>(j)] ==
                            lv.p_star[static_cast<std::size_t>(j)],
                        c.model + ": grad_xi is not exactly p_star");
        }
    }
}

} // namespace

int main() {
    struct Entry {
        int id;
        const char* label;
        void (*fn)();
    };
    const std::vector<Entry> entries = {
        {1, "transition kernel normalization", criterion_kernel},
        {2, "one-step variational identity", criterion_one_step},
        {3, "dynamic programming splits", criterion_dp},
        {4, "minimizing control representation", criterion_variational},
        {5, "walk moment bounds", criterion_moments},
        {6, "a priori gradient bound", criterion_gradient_bound},
        {7, "affine exactness", criterion_affine},
        {8, "sup-norm convergence", criterion_convergence},
        {9, "gradient L1 convergence", criterion_gradient_l1},
        {10, "characteristic tracking", criterion_characteristics},
        {11, "gradient-difference contraction", criterion_contraction},
        {12, "convex conjugate round-trip", criterion_legendre},
    };

    int failures = 0;
    for (const Entry& e : entries) {
        const auto start = std::chrono::steady_clock::now();
        bool pass = true;
        std::string detail;
        try {
            e.fn();
        } catch (const std::exception& ex) {
            pass = false;
            detail = ex.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          start)
                .count();
        std::printf("[%s] criterion %d: %s (%.2fs)\n", pass ? "PASS" : "FAIL",
                    e.id, e.label, secs);
        if (!pass) {
            std::printf("       %s\n", detail.c_str());
            ++failures;
        }
        std::fflush(stdout);
    }
    return failures;
}
