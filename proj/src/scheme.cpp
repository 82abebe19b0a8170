#include "hj/scheme.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>

#include "hj/errors.hpp"

namespace hj {

namespace {

constexpr double kGradSlack = 1e-8;

std::string node_str(std::span<const std::int64_t> m, int level) {
    std::ostringstream os;
    os << "(";
    for (std::size_t j = 0; j < m.size(); ++j) os << (j ? "," : "") << m[j];
    os << "), level " << level;
    return os.str();
}

/// Value lookup inside a step kernel: indices are canonicalized for
/// periodic lattices and assumed inside the box for cones (the box at
/// level k is one ring wider than at k+1 by construction).
double fetch(const Layer& prev, const Lattice& lat,
             std::span<const std::int64_t> m,
             std::span<std::int64_t> scratch) {
    lat.canonical(m, scratch);
    return prev.values[prev.box.flatten(scratch)];
}

struct ChunkError {
    std::int64_t slot = std::numeric_limits<std::int64_t>::max();
    std::exception_ptr err;
};

} // namespace

CflReport check_cfl(const SchemeConstants& consts, const Lattice& lat) {
    CflReport rep;
    rep.lambda = lat.lambda();
    rep.lambda1 = consts.lambda1;
    rep.margin = consts.lambda1 - lat.lambda();
    rep.pass = lat.lambda() < consts.lambda1;
    rep.dx_theta = lat.dx() * consts.theta;
    rep.dx_theta_ok = rep.dx_theta <= 1.0;
    return rep;
}

Layer discretize_initial(const InitialData& v0, const Lattice& lat,
                         InitMode mode, int subdiv) {
    if (!v0) throw InputError("discretize_initial: empty initial data");
    if (subdiv < 1)
        throw InputError("discretize_initial: subdiv must be >= 1");
    Layer layer;
    layer.level = 0;
    layer.box = lat.level_box(0);
    layer.values.assign(layer.box.size(),
                        std::numeric_limits<double>::quiet_NaN());

    const int d = lat.dim();
    std::int64_t cells = 1;
    for (int q = 0; q < d; ++q) cells *= subdiv;

    std::mutex merge;
    ChunkError first;
    parallel_for(layer.box.size(), [&](std::int64_t b, std::int64_t e) {
        std::vector<std::int64_t> m(d), q(d, 0);
        Vec x(d), y(d);
        try {
            for (std::int64_t slot = b; slot < e; ++slot) {
                layer.box.unflatten(slot, m);
                if ((parity_of(m) + layer.level) % 2 != 1) continue;
                lat.coords(m, x);
                double v;
                if (mode == InitMode::Pointwise) {
                    v = v0(x);
                } else {
                    // Composite midpoint average over [-dx, dx]^d.
                    std::fill(q.begin(), q.end(), 0);
                    double sum = 0.0;
                    for (std::int64_t c = 0; c < cells; ++c) {
                        for (int j = 0; j < d; ++j)
                            y[j] = x[j] - lat.dx() +
                                   2.0 * lat.dx() * (q[j] + 0.5) / subdiv;
                        sum += v0(y);
                        int j = d - 1;
                        while (j >= 0 && ++q[j] == subdiv) q[j--] = 0;
                    }
                    v = sum / static_cast<double>(cells);
                }
                if (!std::isfinite(v))
                    throw InputError("initial data non-finite at node " +
                                     node_str(m, 0));
                layer.values[slot] = v;
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(merge);
            if (b < first.slot) first = {b, std::current_exception()};
        }
    });
    if (first.err) std::rethrow_exception(first.err);
    return layer;
}

Vec discrete_gradient(const Layer& layer, const Lattice& lat,
                      std::span<const std::int64_t> m) {
    const int d = lat.dim();
    if (static_cast<int>(m.size()) != d)
        throw InputError("discrete_gradient: index rank mismatch");
    if ((parity_of(m) + layer.level) % 2 != 0)
        throw InputError("discrete_gradient: not a gradient node at " +
                         node_str(m, layer.level));
    Vec g(d);
    std::vector<std::int64_t> nb(m.begin(), m.end()), w(d);
    for (int j = 0; j < d; ++j) {
        nb[j] = m[j] + 1;
        lat.canonical(nb, w);
        if (!layer.box.contains(w))
            throw OutOfDomainError("discrete_gradient: neighbor " +
                                   node_str(w, layer.level) +
                                   " outside the stored box");
        const double vp = layer.values[layer.box.flatten(w)];
        nb[j] = m[j] - 1;
        lat.canonical(nb, w);
        if (!layer.box.contains(w))
            throw OutOfDomainError("discrete_gradient: neighbor " +
                                   node_str(w, layer.level) +
                                   " outside the stored box");
        const double vm = layer.values[layer.box.flatten(w)];
        nb[j] = m[j];
        if (std::isnan(vp) || std::isnan(vm))
            throw InputError("discrete_gradient: neighbor value missing at " +
                             node_str(m, layer.level));
        g[j] = (vp - vm) / (2.0 * lat.dx());
    }
    return g;
}

namespace {

/// Shared stepping kernel. Writes the next layer; when grad_out is given
/// it must be sized d * prev.box.size() and receives the centered
/// differences at the gradient slots of the previous level.
Layer step_impl(const Layer& prev, const Lattice& lat,
                const HamiltonianModel& model, const SchemeConstants& consts,
                std::vector<double>* grad_out, double* max_grad) {
    const int d = lat.dim();
    const int k = prev.level;
    const double t_k = lat.time(k);
    const double bound = consts.deriv_bound + kGradSlack;
    const double inv2d = 1.0 / (2.0 * d);

    Layer next;
    next.level = k + 1;
    next.box = lat.level_box(k + 1);
    next.values.assign(next.box.size(),
                       std::numeric_limits<double>::quiet_NaN());

    std::mutex merge;
    ChunkError first;
    double grad_peak = 0.0;

    parallel_for(next.box.size(), [&](std::int64_t b, std::int64_t e) {
        std::vector<std::int64_t> m(d), nb(d), w(d);
        Vec x(d), g(d);
        double local_peak = 0.0;
        try {
            for (std::int64_t slot = b; slot < e; ++slot) {
                next.box.unflatten(slot, m);
                if ((parity_of(m) + k + 1) % 2 != 1) continue;
                std::copy(m.begin(), m.end(), nb.begin());
                double avg = 0.0;
                for (int j = 0; j < d; ++j) {
                    nb[j] = m[j] + 1;
                    const double vp = fetch(prev, lat, nb, w);
                    nb[j] = m[j] - 1;
                    const double vm = fetch(prev, lat, nb, w);
                    nb[j] = m[j];
                    avg += vp + vm;
                    g[j] = (vp - vm) / (2.0 * lat.dx());
                }
                const double gmax = norm_inf(g);
                if (!(gmax <= bound))
                    throw StabilityError(
                        "discrete gradient " + fmt_double(gmax) +
                        " exceeds the a priori bound " +
                        fmt_double(consts.deriv_bound) + " at node " +
                        node_str(m, k));
                local_peak = std::max(local_peak, gmax);
                lat.coords(m, x);
                const double hval = model.eval(x, t_k, g);
                if (!std::isfinite(hval))
                    throw ModelEvalError(
                        "Hamiltonian returned a non-finite value at node " +
                        node_str(m, k));
                next.values[slot] =
                    avg * inv2d - lat.dt() * hval + consts.h * lat.dt();
                if (grad_out) {
                    // The gradient belongs to (m, k); in periodic mode the
                    // slot in the level-k box coincides with this slot.
                    lat.canonical(m, w);
                    const std::int64_t gslot = prev.box.flatten(w);
                    for (int j = 0; j < d; ++j)
                        (*grad_out)[gslot * d + j] = g[j];
                }
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(merge);
            if (b < first.slot) first = {b, std::current_exception()};
        }
        std::lock_guard<std::mutex> lock(merge);
        grad_peak = std::max(grad_peak, local_peak);
    });
    if (first.err) std::rethrow_exception(first.err);
    if (max_grad) *max_grad = grad_peak;
    return next;
}

} // namespace

Layer step(const Layer& prev, const Lattice& lat,
           const HamiltonianModel& model, const SchemeConstants& consts) {
    const CflReport cfl = check_cfl(consts, lat);
    if (!cfl.pass)
        throw ConfigError("grid ratio " + fmt_double(cfl.lambda) +
                          " is not below the stability threshold " +
                          fmt_double(cfl.lambda1));
    double peak = 0.0;
    return step_impl(prev, lat, model, consts, nullptr, &peak);
}

SolveResult::SolveResult(Lattice lat,
                         std::shared_ptr<const HamiltonianModel> model,
                         SchemeConstants consts, InitMode init_mode,
                         std::vector<Layer> layers)
    : lat_(std::move(lat)),
      model_(std::move(model)),
      consts_(consts),
      init_mode_(init_mode),
      layers_(std::move(layers)) {}

const Layer& SolveResult::layer(int k) const {
    if (k < 0 || k >= static_cast<int>(layers_.size()))
        throw OutOfDomainError("layer " + std::to_string(k) +
                               " outside stored range [0, " +
                               std::to_string(layers_.size() - 1) + "]");
    return layers_[k];
}

double SolveResult::value_at(std::span<const std::int64_t> m,
                             int level) const {
    const Layer& lay = layer(level);
    if (!lat_.is_value_node(m, level))
        throw InputError("value_at: not a solution node at " +
                         node_str(m, level));
    std::vector<std::int64_t> w(m.size());
    lat_.canonical(m, w);
    if (!lay.box.contains(w))
        throw OutOfDomainError("value_at: node " + node_str(w, level) +
                               " outside the stored box");
    return lay.values[lay.box.flatten(w)];
}

Vec SolveResult::gradient_at(std::span<const std::int64_t> m,
                             int level) const {
    const Layer& lay = layer(level);
    if (!lat_.is_gradient_node(m, level))
        throw InputError("gradient_at: not a gradient node at " +
                         node_str(m, level));
    std::vector<std::int64_t> w(m.size());
    lat_.canonical(m, w);
    if (lay.has_grad() && lay.box.contains(w)) {
        const std::int64_t slot = lay.box.flatten(w);
        Vec g(lat_.dim());
        bool stored = true;
        for (int j = 0; j < lat_.dim(); ++j) {
            g[j] = lay.grad[slot * lat_.dim() + j];
            if (std::isnan(g[j])) stored = false;
        }
        if (stored) return g;
    }
    return discrete_gradient(lay, lat_, w);
}

double SolveResult::max_grad_inf() const {
    double m = 0.0;
    for (const auto& lay : layers_) m = std::max(m, lay.max_grad_inf);
    return m;
}

double SolveResult::residual_max() const {
    double worst = 0.0;
    for (std::size_t k = 0; k + 1 < layers_.size(); ++k) {
        const Layer recomputed =
            step(layers_[k], lat_, *model_, consts_);
        const Layer& stored = layers_[k + 1];
        for (std::int64_t slot = 0; slot < stored.box.size(); ++slot) {
            const double a = stored.values[slot];
            const double b = recomputed.values[slot];
            if (std::isnan(a) && std::isnan(b)) continue;
            const double denom =
                std::max({1.0, std::abs(a), std::abs(b)});
            worst = std::max(worst, std::abs(a - b) / denom);
        }
    }
    return worst;
}

SolveResult solve(const InitialData& v0, const Lattice& lat,
                  std::shared_ptr<const HamiltonianModel> model,
                  const SchemeConstants& consts, InitMode init_mode,
                  const SolveOptions& options) {
    if (!model) throw InputError("solve: missing model");
    if (model->dim() != lat.dim())
        throw InputError("solve: model and lattice dimension mismatch");
    const CflReport cfl = check_cfl(consts, lat);
    if (!cfl.pass)
        throw ConfigError("grid ratio " + fmt_double(cfl.lambda) +
                          " is not below the stability threshold " +
                          fmt_double(cfl.lambda1));

    std::vector<Layer> layers;
    layers.reserve(lat.horizon_steps() + 1);
    layers.push_back(discretize_initial(v0, lat, init_mode,
                                        options.cell_average_subdiv));
    for (int k = 0; k < lat.horizon_steps(); ++k) {
        Layer& prev = layers.back();
        if (options.keep_gradients)
            prev.grad.assign(prev.box.size() * lat.dim(),
                             std::numeric_limits<double>::quiet_NaN());
        double peak = 0.0;
        Layer next = step_impl(prev, lat, *model, consts,
                               options.keep_gradients ? &prev.grad : nullptr,
                               &peak);
        prev.max_grad_inf = peak;
        layers.push_back(std::move(next));
    }
    return SolveResult(lat, std::move(model), consts, init_mode,
                       std::move(layers));
}

} // namespace hj
