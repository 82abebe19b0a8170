#include "hj/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

#include "hj/errors.hpp"
#include "hj/hamiltonian.hpp"

namespace hj {

namespace {

constexpr std::uint64_t kBranchSalt = 0x517cc1b727220a95ull;

PiecewisePath path_from_nodes(const WalkEnsemble& ens, const WalkPath& p) {
    const int levels = ens.apex.level - ens.bottom + 1;
    PiecewisePath path;
    path.t0 = ens.dt * ens.bottom;
    path.dt = ens.dt;
    path.points.resize(static_cast<std::size_t>(levels),
                       Vec(static_cast<std::size_t>(ens.dim), 0.0));
    for (int l = 0; l < levels; ++l)
        for (int j = 0; j < ens.dim; ++j)
            path.points[l][j] =
                ens.dx *
                static_cast<double>(
                    p.nodes[static_cast<std::size_t>(l) * ens.dim + j]);
    return path;
}

} // namespace

double PiecewisePath::t_end() const {
    if (points.empty()) throw InputError("path has no breakpoints");
    return t0 + dt * static_cast<double>(points.size() - 1);
}

Vec PiecewisePath::eval(double s) const {
    if (points.empty()) throw InputError("path has no breakpoints");
    if (points.size() == 1 || !(dt > 0.0)) return points.front();
    const double rel = (s - t0) / dt;
    const double clamped =
        std::clamp(rel, 0.0, static_cast<double>(points.size() - 1));
    auto idx = static_cast<std::size_t>(std::floor(clamped));
    if (idx >= points.size() - 1) idx = points.size() - 2;
    const double frac = clamped - static_cast<double>(idx);
    const Vec& a = points[idx];
    const Vec& b = points[idx + 1];
    Vec out(a.size());
    for (std::size_t j = 0; j < a.size(); ++j)
        out[j] = a[j] + frac * (b[j] - a[j]);
    return out;
}

double sup_distance(const PiecewisePath& path, const CharacteristicLine& line,
                    double lo, double hi, int samples) {
    if (samples < 2) throw InputError("sup_distance: need at least 2 samples");
    if (!(hi >= lo)) throw InputError("sup_distance: empty interval");
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double s =
            lo + (hi - lo) * static_cast<double>(i) / (samples - 1);
        const Vec a = path.eval(s);
        const Vec b = line.eval(s);
        for (std::size_t j = 0; j < a.size(); ++j)
            worst = std::max(worst, std::abs(a[j] - b[j]));
    }
    return worst;
}

double interp_value(const SolveResult& result, std::span<const double> x,
                    double t) {
    const NodeIndex node = locate_solution_cell(result.lattice(), x, t);
    return result.value_at(node.m, node.level);
}

Vec interp_gradient(const SolveResult& result, std::span<const double> x,
                    double t) {
    const NodeIndex node = locate_gradient_cell(result.lattice(), x, t);
    return result.gradient_at(node.m, node.level);
}

CharacteristicExtraction extract_characteristic(const SolveResult& result,
                                                std::span<const double> x,
                                                double t,
                                                CharacteristicMode mode,
                                                std::size_t n,
                                                std::uint64_t seed) {
    const Lattice& lat = result.lattice();
    const int d = lat.dim();

    CharacteristicExtraction out;
    out.mode = mode;
    out.apex = locate_solution_cell(lat, x, t);

    const double bound = 1.0 / (d * lat.lambda());
    const ControlField xi =
        out.apex.level >= 1 ? minimizing_control(result, out.apex)
                            : ControlField(d, out.apex, 0, bound);

    const std::vector<Vec> mean_pts = averaged_path(lat, out.apex, 0, xi);
    out.mean.t0 = 0.0;
    out.mean.dt = lat.dt();
    out.mean.points = mean_pts;

    if (mode == CharacteristicMode::Mean) return out;

    const std::size_t count = mode == CharacteristicMode::Sample ? 1 : n;
    if (count == 0)
        throw InputError("characteristic ensemble: need at least one path");
    out.ensemble = sample_walks(lat, out.apex, 0, xi, count, seed);
    out.members.reserve(count);
    out.densities.reserve(count);
    for (const WalkPath& p : out.ensemble.paths) {
        out.members.push_back(path_from_nodes(out.ensemble, p));
        out.densities.push_back(p.density);
    }
    return out;
}

DerivativeSandwich derivative_sandwich(const SolveResult& result,
                                       std::span<const std::int64_t> m,
                                       int level, int axis, bool exact,
                                       std::size_t n, std::uint64_t seed) {
    const Lattice& lat = result.lattice();
    const int d = lat.dim();
    if (static_cast<int>(m.size()) != d)
        throw InputError("derivative_sandwich: node dimension mismatch");
    if (axis < 0 || axis >= d)
        throw InputError("derivative_sandwich: axis out of range");
    if (level < 0 || level > lat.horizon_steps())
        throw InputError("derivative_sandwich: level out of range");
    if (!lat.is_gradient_node(m, level))
        throw InputError(
            "derivative_sandwich: node is not of gradient parity");

    DerivativeSandwich res;
    res.axis = axis;
    res.value = result.gradient_at(m, level)[axis];

    const double pad = result.constants().theta * lat.dx();
    if (level == 0) {
        res.lower = res.value - pad;
        res.upper = res.value + pad;
        return res;
    }

    const HamiltonianModel& model = result.model();
    const double dt = lat.dt();

    const auto branch = [&](std::int64_t shift,
                            std::uint64_t branch_seed) -> McEstimate {
        NodeIndex apex;
        apex.m.assign(m.begin(), m.end());
        apex.m[axis] += shift;
        apex.level = level;
        const ControlField xi = minimizing_control(result, apex);
        const WalkEnsemble ens =
            exact ? enumerate_walks(lat, apex, 0, xi, n)
                  : sample_walks(lat, apex, 0, xi, n, branch_seed);
        Vec x(static_cast<std::size_t>(d));
        std::vector<std::int64_t> g_node(static_cast<std::size_t>(d));
        return expect_over_paths(
            ens,
            [&](int k, std::span<const std::int64_t> node,
                std::span<const double>) {
                lat.coords(node, x);
                const auto xiv = xi.at(k, node);
                return legendre(model, x, lat.time(k - 1), xiv)
                           .grad_x[axis] *
                       dt;
            },
            [&](std::span<const std::int64_t> node) {
                std::copy(node.begin(), node.end(), g_node.begin());
                g_node[axis] -= shift;
                return result.gradient_at(g_node, 0)[axis];
            });
    };

    const McEstimate plus = branch(+1, seed);
    const McEstimate minus = branch(-1, seed ^ kBranchSalt);
    res.lower = plus.mean - pad;
    res.lower_se = plus.se;
    res.upper = minus.mean + pad;
    res.upper_se = minus.se;
    return res;
}

double one_sided_lipschitz_quotient(const SolveResult& result, int level) {
    const Lattice& lat = result.lattice();
    if (lat.dim() != 1)
        throw InputError(
            "one_sided_lipschitz_quotient is a one-dimensional diagnostic");
    if (level < 0 || level > lat.horizon_steps())
        throw InputError("one_sided_lipschitz_quotient: level out of range");

    const IndexBox box = lat.level_box(level);
    const bool periodic = lat.is_periodic();
    double best = -std::numeric_limits<double>::infinity();
    std::size_t pairs = 0;
    std::vector<std::int64_t> idx(1);
    for (std::int64_t m = box.lo[0]; m <= box.hi[0]; ++m) {
        idx[0] = m;
        if (!lat.is_gradient_node(idx, level)) continue;
        if (!periodic && (m - 1 < box.lo[0] || m + 3 > box.hi[0])) continue;
        const double g1 = result.gradient_at(idx, level)[0];
        idx[0] = m + 2;
        const double g2 = result.gradient_at(idx, level)[0];
        best = std::max(best, (g2 - g1) / (2.0 * lat.dx()));
        ++pairs;
    }
    if (pairs == 0)
        throw InputError(
            "one_sided_lipschitz_quotient: no gradient pairs at level " +
            std::to_string(level));
    return best;
}

} // namespace hj
