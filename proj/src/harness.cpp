#include "hj/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hj/errors.hpp"
#include "hj/oracle.hpp"
#include "hj/walks.hpp"

namespace hj {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void validate_config(const ProblemConfig& cfg) {
    const int d = cfg.model.dim;
    if (d < 1) throw ConfigError("model dimension must be at least 1");
    if (!(cfg.T > 0.0)) throw ConfigError("horizon T must be positive");
    if (!std::isfinite(cfg.h)) throw ConfigError("source term h must be finite");
    if (!(cfg.lambda_safety > 0.0) || !(cfg.lambda_safety < 1.0))
        throw ConfigError("lambda_safety must lie strictly between 0 and 1");
    if (cfg.dx.empty()) throw ConfigError("the dx ladder is empty");
    for (std::size_t i = 0; i < cfg.dx.size(); ++i) {
        if (!(cfg.dx[i] > 0.0)) throw ConfigError("every dx must be positive");
        if (i > 0 && !(cfg.dx[i] < cfg.dx[i - 1]))
            throw ConfigError("the dx ladder must be strictly decreasing");
    }
    const DomainSpec& dom = cfg.domain;
    const bool has_k = !dom.k_lo.empty() || !dom.k_hi.empty();
    if (has_k) {
        if (static_cast<int>(dom.k_lo.size()) != d ||
            static_cast<int>(dom.k_hi.size()) != d)
            throw ConfigError(
                "the query box needs k_lo and k_hi entries for every axis");
        for (int j = 0; j < d; ++j)
            if (!(dom.k_lo[j] < dom.k_hi[j]))
                throw ConfigError(
                    "the query box must have positive extent on every axis");
    }
    if (dom.type == DomainSpec::Type::Periodic) {
        if (static_cast<int>(dom.period.size()) != d)
            throw ConfigError("a periodic domain needs one period per axis");
        for (double p : dom.period)
            if (!(p > 0.0)) throw ConfigError("periods must be positive");
    } else if (!has_k) {
        throw ConfigError("a slab domain needs the query box (k_lo, k_hi)");
    }
}

std::pair<Vec, Vec> query_box(const ProblemConfig& cfg) {
    if (!cfg.domain.k_lo.empty()) return {cfg.domain.k_lo, cfg.domain.k_hi};
    Vec lo(cfg.model.dim, 0.0);
    return {lo, cfg.domain.period};
}

std::vector<std::int64_t> periodic_index_period(const DomainSpec& dom, int d,
                                                double dx) {
    std::vector<std::int64_t> p(d);
    for (int j = 0; j < d; ++j) {
        const double per = dom.period[j];
        const std::int64_t half = std::llround(per / (2.0 * dx));
        if (half < 1 ||
            std::abs(static_cast<double>(2 * half) * dx - per) >
                1e-6 * std::max(1.0, per))
            throw ConfigError(
                "dx must split each period into an even number of cells");
        p[j] = 2 * half;
    }
    return p;
}

int horizon_levels(double T, double dt) {
    int k = static_cast<int>(std::floor(T / dt));
    if (static_cast<double>(k + 1) * dt <= T) ++k;
    return k + 1;
}

std::int64_t rect_dist1(std::span<const std::int64_t> n, const IndexBox& cube) {
    std::int64_t s = 0;
    for (int j = 0; j < cube.dim(); ++j) {
        if (n[j] < cube.lo[j])
            s += cube.lo[j] - n[j];
        else if (n[j] > cube.hi[j])
            s += n[j] - cube.hi[j];
    }
    return s;
}

bool can_enumerate(int dim, int steps, std::size_t cap) {
    long double count = 1.0L;
    for (int i = 0; i < steps; ++i) {
        count *= 2.0L * dim;
        if (count > static_cast<long double>(cap)) return false;
    }
    return true;
}

/// Query points over the box K: the first min(d, 2) axes carry
/// queries_per_axis equispaced points (endpoints included, trapezoid
/// weights for the L1 sums), the remaining axes sit at the box center.
struct QueryGrid {
    int swept = 0;
    int per_axis = 0;
    std::vector<Vec> points;
    std::vector<double> weights;
};

QueryGrid make_query_grid(const ProblemConfig& cfg) {
    const auto [lo, hi] = query_box(cfg);
    const int d = cfg.model.dim;
    const int q = cfg.budgets.queries_per_axis;
    if (q < 2) throw ConfigError("queries_per_axis must be at least 2");
    QueryGrid grid;
    grid.swept = std::min(d, 2);
    grid.per_axis = q;
    std::int64_t count = 1;
    for (int j = 0; j < grid.swept; ++j) count *= q;
    grid.points.reserve(count);
    grid.weights.reserve(count);
    std::vector<int> idx(grid.swept, 0);
    for (std::int64_t flat = 0; flat < count; ++flat) {
        std::int64_t rem = flat;
        for (int j = grid.swept - 1; j >= 0; --j) {
            idx[j] = static_cast<int>(rem % q);
            rem /= q;
        }
        Vec x(d);
        double w = 1.0;
        for (int j = 0; j < d; ++j) {
            if (j < grid.swept) {
                const double len = hi[j] - lo[j];
                x[j] = lo[j] + len * idx[j] / (q - 1);
                w *= (idx[j] == 0 || idx[j] == q - 1 ? 0.5 : 1.0) * len /
                     (q - 1);
            } else {
                x[j] = 0.5 * (lo[j] + hi[j]);
            }
        }
        grid.points.push_back(std::move(x));
        grid.weights.push_back(w);
    }
    return grid;
}

void fit_loglog(const std::vector<double>& dxs, const std::vector<double>& errs,
                double& rate, double& beta) {
    const double n = static_cast<double>(dxs.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < dxs.size(); ++i) {
        const double x = std::log(dxs[i]);
        const double y = std::log(std::max(errs[i], 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = n * sxx - sx * sx;
    rate = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
    beta = std::exp((sy - rate * sx) / n);
}

/// Per-axis L1 distance between the discrete gradient and the reference
/// gradient, sampled at the gradient node of each query point's cell and
/// weighted by the query cell volume. Points where the reference gradient
/// is not unique (or that decode to the data level) are skipped.
void gradient_l1_at(const SolveResult& result, const HopfLaxOracle& oracle,
                    const QueryGrid& grid, double t, Vec& err,
                    std::size_t& skipped) {
    const Lattice& lat = result.lattice();
    const int d = lat.dim();
    const std::int64_t npts = static_cast<std::int64_t>(grid.points.size());
    std::vector<Vec> gnum(npts), gref(npts);
    std::vector<char> ok(npts, 0);
    parallel_for(npts, [&](std::int64_t b, std::int64_t e) {
        Vec xn(d);
        for (std::int64_t p = b; p < e; ++p) {
            NodeIndex node = locate_gradient_cell(lat, grid.points[p], t);
            if (node.level == 0 && t > lat.dt()) continue;
            lat.coords(node.m, xn);
            const double tn = lat.time(node.level);
            if (!(tn > 0.0)) continue;
            OracleEntry entry = oracle.query(xn, tn);
            if (!entry.regular) continue;
            ok[p] = 1;
            gnum[p] = result.gradient_at(node.m, node.level);
            gref[p] = entry.gradient;
        }
    });
    err.assign(d, 0.0);
    skipped = 0;
    for (std::int64_t p = 0; p < npts; ++p) {
        if (!ok[p]) {
            ++skipped;
            continue;
        }
        for (int j = 0; j < d; ++j)
            err[j] += grid.weights[p] * std::abs(gnum[p][j] - gref[p][j]);
    }
}

std::vector<std::vector<std::int64_t>> sample_value_nodes(const Lattice& lat,
                                                          int level, int want,
                                                          std::uint64_t seed) {
    const IndexBox box = lat.level_box(level);
    std::vector<std::vector<std::int64_t>> out;
    auto rng = make_stream(seed, 17);
    std::vector<std::int64_t> m(lat.dim());
    const std::uint64_t total = static_cast<std::uint64_t>(box.size());
    for (int tries = 0; tries < want * 64 && static_cast<int>(out.size()) < want;
         ++tries) {
        box.unflatten(static_cast<std::int64_t>(rng() % total), m);
        if (!lat.is_value_node(m, level)) continue;
        out.push_back(m);
    }
    return out;
}

} // namespace

LadderSetup ladder_setup(const ProblemConfig& cfg) {
    validate_config(cfg);
    const int d = cfg.model.dim;
    LadderSetup setup;
    setup.model = make_model(cfg.model.name, d, cfg.model.diag);

    double r = cfg.r_override;
    if (r < 0.0) {
        r = lipschitz_bound(cfg.v0, d);
        if (cfg.has_v0_b) r = std::max(r, lipschitz_bound(cfg.v0_b, d));
    }
    const auto bound_at = [&](double radius) {
        double R = value_bound(cfg.v0, d, radius);
        if (cfg.has_v0_b) R = std::max(R, value_bound(cfg.v0_b, d, radius));
        return R;
    };

    if (cfg.R_override >= 0.0) {
        setup.constants =
            scheme_constants(*setup.model, cfg.T, r, cfg.R_override, cfg.h);
    } else if (cfg.domain.type == DomainSpec::Type::Periodic) {
        double radius = 0.0;
        for (double p : cfg.domain.period) radius = std::max(radius, p);
        setup.constants =
            scheme_constants(*setup.model, cfg.T, r, bound_at(radius), cfg.h);
    } else {
        double radius0 = 0.0;
        for (int j = 0; j < d; ++j)
            radius0 = std::max({radius0, std::abs(cfg.domain.k_lo[j]),
                                std::abs(cfg.domain.k_hi[j])});
        double radius = radius0;
        bool settled = false;
        for (int it = 0; it < 8 && !settled; ++it) {
            setup.constants =
                scheme_constants(*setup.model, cfg.T, r, bound_at(radius), cfg.h);
            const double grown =
                radius0 + 1.05 * cfg.T / (d * setup.constants.lambda1);
            settled = grown <= radius * (1.0 + 1e-9) + 1e-12;
            radius = std::max(radius, grown);
        }
        if (!settled)
            throw ConstantsError(
                "the dependence-cone radius did not stabilize against the "
                "value bound; set R explicitly");
    }
    setup.r = r;
    setup.R = setup.constants.R;
    setup.lambda = cfg.lambda_safety * setup.constants.lambda1;
    return setup;
}

SolveResult solve_problem(const ProblemConfig& cfg, double dx,
                          const LadderSetup& setup,
                          const InitialDataSpec& data, bool keep_gradients) {
    const int d = cfg.model.dim;
    if (!(dx > 0.0)) throw ConfigError("dx must be positive");
    const double lambda = setup.lambda;
    const int horizon = horizon_levels(cfg.T, lambda * dx);

    Lattice lat = [&] {
        if (cfg.domain.type == DomainSpec::Type::Periodic)
            return Lattice::periodic(d, dx, lambda, horizon,
                                     periodic_index_period(cfg.domain, d, dx));
        IndexBox apex;
        apex.lo.resize(d);
        apex.hi.resize(d);
        for (int j = 0; j < d; ++j) {
            apex.lo[j] =
                static_cast<std::int64_t>(std::floor(cfg.domain.k_lo[j] / dx)) -
                1;
            apex.hi[j] =
                static_cast<std::int64_t>(std::ceil(cfg.domain.k_hi[j] / dx)) +
                1;
        }
        return Lattice::cone_box(d, dx, lambda, apex, horizon);
    }();

    SolveOptions options;
    options.keep_gradients = keep_gradients;
    return solve(make_initial_data(data, d), lat, setup.model, setup.constants,
                 cfg.init_mode, options);
}

ConvergenceReport run_convergence(const ProblemConfig& cfg) {
    LadderSetup setup = ladder_setup(cfg);
    if (!setup.model->space_time_independent())
        throw ConfigError(
            "the convergence study compares against the variational reference, "
            "which needs a Hamiltonian independent of (x, t)");
    const int d = cfg.model.dim;
    const int slices = cfg.budgets.time_slices;
    if (slices < 1) throw ConfigError("time_slices must be at least 1");
    const QueryGrid grid = make_query_grid(cfg);
    const std::int64_t npts = static_cast<std::int64_t>(grid.points.size());
    std::vector<double> times(slices);
    for (int i = 0; i < slices; ++i) times[i] = cfg.T * (i + 1) / slices;

    const InitialData v0 = make_initial_data(cfg.v0, d);
    const HopfLaxOracle oracle(setup.model, v0, cfg.h,
                               setup.constants.lambda1);

    ConvergenceReport rep;
    rep.lambda = setup.lambda;
    const auto [klo, khi] = query_box(cfg);
    rep.k_lo = klo;
    rep.k_hi = khi;
    rep.queries_per_axis = grid.per_axis;
    rep.time_slices = slices;

    for (double dx : cfg.dx) {
        const auto t0 = Clock::now();
        SolveResult result = solve_problem(cfg, dx, setup, cfg.v0, false);
        ConvergenceRow row;
        row.dx = dx;
        row.dt = setup.lambda * dx;
        row.lambda = setup.lambda;
        row.wall_seconds = seconds_since(t0);
        row.max_grad_inf = result.max_grad_inf();

        const Lattice& lat = result.lattice();
        std::vector<double> errs(static_cast<std::size_t>(slices) * npts, 0.0);
        parallel_for(slices * npts, [&](std::int64_t b, std::int64_t e) {
            Vec xn(d);
            for (std::int64_t q = b; q < e; ++q) {
                const int slice = static_cast<int>(q / npts);
                const std::int64_t p = q % npts;
                const NodeIndex node =
                    locate_solution_cell(lat, grid.points[p], times[slice]);
                lat.coords(node.m, xn);
                const double tn = lat.time(node.level);
                const double ref =
                    tn > 0.0 ? oracle.query(xn, tn).value : v0(xn);
                errs[q] = std::abs(result.value_at(node.m, node.level) - ref);
            }
        });
        row.sup_error = 0.0;
        for (double e : errs) row.sup_error = std::max(row.sup_error, e);

        gradient_l1_at(result, oracle, grid, cfg.T, row.grad_l1,
                       row.grad_skipped);
        rep.rows.push_back(std::move(row));
    }

    rep.exact = true;
    for (const auto& row : rep.rows)
        rep.exact = rep.exact && row.sup_error < 1e-10;
    if (!rep.exact && rep.rows.size() >= 2) {
        std::vector<double> xs, ys;
        for (const auto& row : rep.rows) {
            xs.push_back(row.dx);
            ys.push_back(row.sup_error);
        }
        fit_loglog(xs, ys, rep.rate, rep.beta_hat);
        rep.rate_fitted = true;
    }
    return rep;
}

GradientL1Report run_gradient_l1(const ProblemConfig& cfg) {
    if (cfg.init_mode != InitMode::CellAverage)
        throw ConfigError(
            "the gradient study requires cell_average initialization");
    LadderSetup setup = ladder_setup(cfg);
    if (!setup.model->space_time_independent())
        throw ConfigError(
            "the gradient study compares against the variational reference, "
            "which needs a Hamiltonian independent of (x, t)");
    const int d = cfg.model.dim;
    const QueryGrid grid = make_query_grid(cfg);
    const HopfLaxOracle oracle(setup.model, make_initial_data(cfg.v0, d),
                               cfg.h, setup.constants.lambda1);

    GradientL1Report rep;
    rep.t = cfg.T;
    for (double dx : cfg.dx) {
        SolveResult result = solve_problem(cfg, dx, setup, cfg.v0, false);
        GradientL1Row row;
        row.dx = dx;
        gradient_l1_at(result, oracle, grid, cfg.T, row.err, row.skipped);
        rep.rows.push_back(std::move(row));
    }

    std::vector<double> totals;
    for (const auto& row : rep.rows) {
        double s = 0.0;
        for (double e : row.err) s += e;
        totals.push_back(s);
    }
    rep.decreasing = true;
    for (std::size_t i = 0; i + 1 < totals.size(); ++i)
        if (totals[i + 1] > totals[i] * 1.02 + 1e-15) rep.decreasing = false;
    rep.end_ratio =
        totals.empty() ? 0.0
                       : totals.front() / std::max(totals.back(), 1e-300);
    return rep;
}

ContractionReport run_contraction(const ProblemConfig& cfg) {
    if (cfg.domain.type != DomainSpec::Type::Periodic)
        throw ConfigError("the contraction study runs on a periodic domain");
    if (!cfg.has_v0_b)
        throw ConfigError(
            "the contraction study compares two initial data; provide v0_b");
    LadderSetup setup = ladder_setup(cfg);
    if (cfg.domain.k_lo.empty())
        throw ConfigError(
            "the contraction study needs the box K to seed the nested node "
            "sets");
    const int d = cfg.model.dim;
    const double dx = cfg.dx.front();
    const double lambda = setup.lambda;
    const int top = cfg.budgets.contraction_levels;
    if (top < 1) throw ConfigError("contraction_levels must be at least 1");
    if (static_cast<double>(top) * lambda * dx > cfg.T * (1.0 + 1e-12))
        throw ConfigError("contraction_levels reach past the horizon T");

    const auto period = periodic_index_period(cfg.domain, d, dx);
    const Lattice lat = Lattice::periodic(d, dx, lambda, top, period);

    IndexBox cube;
    cube.lo.resize(d);
    cube.hi.resize(d);
    for (int j = 0; j < d; ++j) {
        cube.lo[j] =
            static_cast<std::int64_t>(std::ceil(cfg.domain.k_lo[j] / dx - 1e-9));
        cube.hi[j] = static_cast<std::int64_t>(
            std::floor(cfg.domain.k_hi[j] / dx + 1e-9));
        if (cube.lo[j] > cube.hi[j])
            throw ConfigError("K contains no lattice nodes at this spacing");
        if (cube.extent(j) + 2 * top > period[j])
            throw ConfigError(
                "the grown node sets would wrap around the torus; enlarge the "
                "period or lower contraction_levels");
    }

    SolveOptions options;
    options.keep_gradients = true;
    SolveResult a = solve(make_initial_data(cfg.v0, d), lat, setup.model,
                          setup.constants, cfg.init_mode, options);
    SolveResult b = solve(make_initial_data(cfg.v0_b, d), lat, setup.model,
                          setup.constants, cfg.init_mode, options);

    ContractionReport rep;
    rep.levels = top;
    rep.boxes.resize(top + 1);
    rep.sums.assign(top + 1, 0.0);
    std::vector<std::int64_t> n(d);
    for (int k = 0; k <= top; ++k) {
        const std::int64_t rings = top - k;
        IndexBox box = cube.expanded(rings);
        double sum = 0.0;
        for (std::int64_t flat = 0; flat < box.size(); ++flat) {
            box.unflatten(flat, n);
            if (rect_dist1(n, cube) > rings) continue;
            if (!lat.is_gradient_node(n, k)) continue;
            const Vec ga = a.gradient_at(n, k);
            const Vec gb = b.gradient_at(n, k);
            for (int j = 0; j < d; ++j) sum += std::abs(ga[j] - gb[j]);
        }
        rep.boxes[k] = std::move(box);
        rep.sums[k] = sum;
    }
    for (int k = 0; k + 1 <= top; ++k) {
        if (rep.sums[k + 1] > rep.sums[k] + 1e-10 * (1.0 + rep.sums[k]))
            throw ContractionError(
                "gradient-difference sum increased from level " +
                std::to_string(k) + " to level " + std::to_string(k + 1) +
                ": " + fmt_double(rep.sums[k]) + " -> " +
                fmt_double(rep.sums[k + 1]));
    }
    rep.monotone = true;
    return rep;
}

VarianceReport run_variance_sweep(const ProblemConfig& cfg) {
    LadderSetup setup = ladder_setup(cfg);
    const int d = cfg.model.dim;
    const auto [klo, khi] = query_box(cfg);
    Vec center(d);
    for (int j = 0; j < d; ++j) center[j] = 0.5 * (klo[j] + khi[j]);

    VarianceReport rep;
    std::uint64_t salt = 0;
    for (std::size_t rung = 0; rung < cfg.dx.size(); ++rung) {
        const double dx = cfg.dx[rung];
        SolveResult result = solve_problem(cfg, dx, setup, cfg.v0, true);
        const Lattice& lat = result.lattice();
        const int top = lat.horizon_steps();
        const NodeIndex apex = locate_parity_node(lat, center, top, true);
        const double xi_corner = 1.0 / (d * lat.lambda());

        std::vector<std::pair<std::string, ControlField>> controls;
        controls.emplace_back("minimizing", minimizing_control(result, apex));
        controls.emplace_back("zero",
                              constant_control(lat, apex, 0, Vec(d, 0.0)));
        Vec corner(d, 0.0);
        corner[0] = xi_corner;
        controls.emplace_back("corner", constant_control(lat, apex, 0, corner));
        controls.emplace_back("random",
                              random_control(lat, apex, 0, cfg.seed + rung));

        const bool exact = can_enumerate(d, top, cfg.budgets.enum_cap);
        for (const auto& [name, xi] : controls) {
            const WalkStats stats =
                exact ? walk_stats(enumerate_walks(lat, apex, 0, xi,
                                                   cfg.budgets.enum_cap))
                      : sample_walk_stats(lat, apex, 0, xi,
                                          cfg.budgets.mc_paths,
                                          splitmix64(cfg.seed + 0x5eedULL +
                                                     salt));
            ++salt;
            for (int level = 0; level <= top; ++level) {
                const double bound =
                    (lat.time(top) - lat.time(level)) * dx / lat.lambda();
                for (int axis = 0; axis < d; ++axis) {
                    VarianceRow row;
                    row.dx = dx;
                    row.control = name;
                    row.exact = !stats.sampled;
                    row.level = level;
                    row.axis = axis;
                    row.sigma = stats.sigma_at(level, axis);
                    row.delta = stats.delta_at(level, axis);
                    row.bound = bound;
                    const std::size_t off =
                        static_cast<std::size_t>(level - stats.bottom) * d +
                        axis;
                    row.sigma_se =
                        stats.sigma_se.empty() ? 0.0 : stats.sigma_se[off];
                    row.delta_se =
                        stats.delta_se.empty() ? 0.0 : stats.delta_se[off];
                    if (row.exact) {
                        row.sigma_ok =
                            row.sigma <= row.bound + 1e-12 * (1.0 + row.bound);
                        row.delta_ok = row.delta * row.delta <=
                                       row.sigma + 1e-12 * (1.0 + row.sigma);
                    } else {
                        row.sigma_ok = row.sigma <=
                                       row.bound + 4.0 * row.sigma_se + 1e-12;
                        row.delta_ok =
                            row.delta * row.delta <=
                            row.sigma +
                                4.0 * (row.sigma_se +
                                       2.0 * std::abs(row.delta) *
                                           row.delta_se) +
                                1e-12;
                    }
                    rep.all_ok = rep.all_ok && row.sigma_ok && row.delta_ok;
                    rep.rows.push_back(std::move(row));
                }
            }
        }
    }
    return rep;
}

CheckReport run_check(const ProblemConfig& cfg) {
    CheckReport rep;
    const LadderSetup setup = ladder_setup(cfg);
    const int d = cfg.model.dim;
    const auto add = [&rep](CheckItem item) {
        rep.all_pass = rep.all_pass && item.pass;
        rep.items.push_back(std::move(item));
    };

    std::optional<SolveResult> base;
    {
        CheckItem item;
        item.name = "solve";
        try {
            base.emplace(
                solve_problem(cfg, cfg.dx.front(), setup, cfg.v0, true));
            item.pass = true;
            item.detail =
                std::to_string(base->lattice().horizon_steps()) +
                " levels, max |Dv| = " + fmt_double(base->max_grad_inf());
        } catch (const Error& e) {
            item.pass = false;
            item.detail = e.what();
        }
        add(std::move(item));
    }
    if (!base) return rep;
    const Lattice& lat = base->lattice();

    {
        CheckItem item;
        item.name = "stability margin";
        try {
            const CflReport c = check_cfl(setup.constants, lat);
            item.pass = c.pass;
            item.detail = "lambda = " + fmt_double(c.lambda) +
                          ", threshold = " + fmt_double(c.lambda1) +
                          ", dx*theta = " + fmt_double(c.dx_theta);
        } catch (const Error& e) {
            item.pass = false;
            item.detail = e.what();
        }
        add(std::move(item));
    }

    {
        CheckItem item;
        item.name = "kernel normalization";
        try {
            auto rng = make_stream(cfg.seed, 1234);
            const double bound_xi = 1.0 / (d * lat.lambda());
            double worst = 0.0;
            Vec xi(d);
            for (int i = 0; i < 1000; ++i) {
                for (int j = 0; j < d; ++j) {
                    const double u = (rng() >> 11) * 0x1.0p-53;
                    xi[j] = bound_xi * (2.0 * u - 1.0);
                }
                const auto rho = transition_probs(xi, lat.lambda());
                double s = 0.0;
                for (double p : rho) s += p;
                worst = std::max(worst, std::abs(s - 1.0));
            }
            item.pass = worst <= 1e-14;
            item.detail = "max |sum - 1| = " + fmt_double(worst);
        } catch (const Error& e) {
            item.pass = false;
            item.detail = e.what();
        }
        add(std::move(item));
    }

    {
        CheckItem item;
        item.name = "update residual";
        try {
            const double resid = base->residual_max();
            item.pass = resid <= 1e-12;
            item.detail = "max relative defect = " + fmt_double(resid);
        } catch (const Error& e) {
            item.pass = false;
            item.detail = e.what();
        }
        add(std::move(item));
    }

    {
        CheckItem item;
        item.name = "gradient bound";
        try {
            const double got = base->max_grad_inf();
            item.pass = got <= setup.constants.deriv_bound + 1e-8;
            item.detail = fmt_double(got) + " <= " +
                          fmt_double(setup.constants.deriv_bound);
        } catch (const Error& e) {
            item.pass = false;
            item.detail = e.what();
        }
        add(std::move(item));
    }

    {
        CheckItem item;
        item.name = "one-step minimization";
        try {
            const auto nodes = sample_value_nodes(lat, 1, 8, cfg.seed);
            double worst_v = 0.0, worst_a = 0.0;
            Vec x(d), nb(2 * d), xi(d);
            std::vector<std::int64_t> mm(d);
            for (const auto& m : nodes) {
                lat.coords(m, x);
                for (int j = 0; j < d; ++j) {
                    mm = m;
                    mm[j] += 1;
                    nb[2 * j] = base->value_at(mm, 0);
                    mm[j] -= 2;
                    nb[2 * j + 1] = base->value_at(mm, 0);
                }
                const OneStepMin om =
                    one_step_min(base->model(), x, lat.time(0), nb, lat.dx(),
                                 lat.dt(), setup.constants.h);
                worst_v = std::max(
                    worst_v, std::abs(base->value_at(m, 1) - om.value));
                const Vec g = base->gradient_at(m, 0);
                base->model().grad_p(x, lat.time(0), g, xi);
                for (int j = 0; j < d; ++j)
                    worst_a =
                        std::max(worst_a, std::abs(om.argmin[j] - xi[j]));
            }
            item.pass = worst_v <= 1e-8 && worst_a <= 1e-8;
            item.detail = "max value gap " + fmt_double(worst_v) +
                          ", max argmin gap " + fmt_double(worst_a);
        } catch (const Error& e) {
            item.pass = false;
            item.detail = e.what();
        }
        add(std::move(item));
    }

    const auto [klo, khi] = query_box(cfg);
    Vec center(d);
    for (int j = 0; j < d; ++j) center[j] = 0.5 * (klo[j] + khi[j]);
    int small_top = 0;
    {
        long double cnt = 1.0L;
        while (small_top < lat.horizon_steps() &&
               cnt * (2.0L * d) <= 4096.0L) {
            cnt *= 2.0L * d;
            ++small_top;
        }
        small_top = std::max(1, small_top);
    }
    const NodeIndex apex = locate_parity_node(lat, center, small_top, true);

    {
        CheckItem item;
        item.name = "variational representation";
        try {
            const ControlField xi = minimizing_control(*base, apex);
            const double expect = expected_action_exact(
                lat, apex, xi, base->layer(0), base->model(),
                setup.constants.h, cfg.budgets.enum_cap);
            const double v = base->value_at(apex.m, apex.level);
            const double gap = std::abs(expect - v);
            item.pass = gap <= 1e-9 * (1.0 + std::abs(v));
            item.detail = "|E - v| = " + fmt_double(gap);
        } catch (const Error& e) {
            item.pass = false;
            item.detail = e.what();
        }
        add(std::move(item));
    }

    {
        CheckItem item;
        item.name = "dynamic programming";
        try {
            const ControlField xi = random_control(lat, apex, 0, cfg.seed + 5);
            const double resid = dp_identity_check(
                lat, apex, xi, apex.level / 2, base->layer(0), base->model(),
                setup.constants.h, cfg.budgets.enum_cap);
            item.pass = resid <= 1e-12;
            item.detail = "split residual = " + fmt_double(resid);
        } catch (const Error& e) {
            item.pass = false;
            item.detail = e.what();
        }
        add(std::move(item));
    }

    {
        CheckItem item;
        item.name = "path densities";
        try {
            const ControlField xi = random_control(lat, apex, 0, cfg.seed + 6);
            const WalkEnsemble ens =
                enumerate_walks(lat, apex, 0, xi, cfg.budgets.enum_cap);
            double s = 0.0;
            for (const auto& p : ens.paths) s += p.density;
            item.pass = std::abs(s - 1.0) <= 1e-12;
            item.detail = std::to_string(ens.paths.size()) +
                          " paths, |sum - 1| = " + fmt_double(std::abs(s - 1.0));
        } catch (const Error& e) {
            item.pass = false;
            item.detail = e.what();
        }
        add(std::move(item));
    }

    {
        CheckItem item;
        item.name = "walk moments";
        try {
            ProblemConfig quick = cfg;
            quick.dx.assign(1, cfg.dx.front());
            quick.budgets.mc_paths =
                std::min<std::size_t>(quick.budgets.mc_paths, 20000);
            const VarianceReport v = run_variance_sweep(quick);
            item.pass = v.all_ok;
            item.detail = std::to_string(v.rows.size()) + " rows checked";
        } catch (const Error& e) {
            item.pass = false;
            item.detail = e.what();
        }
        add(std::move(item));
    }

    if (cfg.domain.type == DomainSpec::Type::Periodic && cfg.has_v0_b &&
        !cfg.domain.k_lo.empty()) {
        CheckItem item;
        item.name = "contraction";
        try {
            const ContractionReport c = run_contraction(cfg);
            item.pass = c.monotone;
            item.detail = "sums " + fmt_double(c.sums.front()) + " .. " +
                          fmt_double(c.sums.back()) + " over " +
                          std::to_string(c.levels + 1) + " levels";
        } catch (const Error& e) {
            item.pass = false;
            item.detail = e.what();
        }
        add(std::move(item));
    }

    return rep;
}

} // namespace hj
