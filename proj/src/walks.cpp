#include "hj/walks.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>

#include "hj/errors.hpp"
#include "hj/hamiltonian.hpp"

namespace hj {

namespace {

constexpr double kProbSlack = 1e-15;
constexpr std::int64_t kMcBlock = 4096;

std::string node_str(std::span<const std::int64_t> m) {
    std::string s = "(";
    for (std::size_t j = 0; j < m.size(); ++j) {
        if (j > 0) s += ",";
        s += std::to_string(m[j]);
    }
    s += ")";
    return s;
}

void validate_walk(const Lattice& lat, const NodeIndex& apex, int bottom,
                   const ControlField& xi) {
    const int d = lat.dim();
    if (static_cast<int>(apex.m.size()) != d)
        throw InputError("walk apex has dimension " +
                         std::to_string(apex.m.size()) + ", lattice has " +
                         std::to_string(d));
    if (xi.dim() != d)
        throw InputError("control field dimension does not match the lattice");
    if (bottom < 0 || bottom > apex.level)
        throw InputError("walk levels out of order: bottom " +
                         std::to_string(bottom) + ", top " +
                         std::to_string(apex.level));
    if (apex.level > lat.horizon_steps())
        throw InputError("walk apex level " + std::to_string(apex.level) +
                         " beyond the stored horizon " +
                         std::to_string(lat.horizon_steps()));
    if (!lat.is_value_node(apex.m, apex.level))
        throw InputError("walk apex " + node_str(apex.m) + " at level " +
                         std::to_string(apex.level) +
                         " is not a solution node");
    if (apex.level == bottom) return;
    if (xi.bottom() > bottom || xi.top() < apex.level)
        throw InputError("control field covers levels [" +
                         std::to_string(xi.bottom() + 1) + ", " +
                         std::to_string(xi.top()) +
                         "], walk needs [" + std::to_string(bottom + 1) +
                         ", " + std::to_string(apex.level) + "]");
    std::int64_t dist = 0;
    for (int j = 0; j < d; ++j) {
        const std::int64_t a = apex.m[j];
        const std::int64_t b = xi.apex().m[j];
        dist = std::max(dist, a >= b ? a - b : b - a);
    }
    if (dist > static_cast<std::int64_t>(xi.top() - apex.level))
        throw InputError("walk cone from " + node_str(apex.m) +
                         " leaves the control field");
}

/// Value of a layer at a (possibly unwrapped) solution index.
double layer_value(const Lattice& lat, const Layer& layer,
                   std::span<const std::int64_t> m,
                   std::vector<std::int64_t>& scratch) {
    scratch.resize(m.size());
    lat.canonical(m, scratch);
    if (!layer.box.contains(scratch))
        throw OutOfDomainError("terminal layer does not cover node " +
                               node_str(scratch));
    const double v = layer.values[layer.box.flatten(scratch)];
    if (std::isnan(v))
        throw OutOfDomainError("terminal layer holds no value at node " +
                               node_str(scratch));
    return v;
}

std::size_t checked_path_count(int dim, int steps, std::size_t cap) {
    const std::size_t branch = 2 * static_cast<std::size_t>(dim);
    std::size_t count = 1;
    for (int s = 0; s < steps; ++s) {
        if (count > cap / branch)
            throw EnumerationCapError(
                "exhaustive enumeration needs more than " +
                std::to_string(cap) + " paths (" + std::to_string(steps) +
                " steps in dimension " + std::to_string(dim) +
                "); use Monte Carlo sampling instead");
        count *= branch;
    }
    return count;
}

double draw_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Walks one sampled path from the apex down to `bottom`, filling the
/// level-major node/eta/omega buffers; returns the path density.
double sample_one_path(const Lattice& lat, const NodeIndex& apex, int bottom,
                       const ControlField& xi, std::mt19937_64& rng,
                       std::vector<std::int64_t>& nodes,
                       std::vector<double>& eta,
                       std::vector<std::uint8_t>& omegas) {
    const int d = lat.dim();
    const int top = apex.level;
    const int steps = top - bottom;
    nodes.resize(static_cast<std::size_t>(steps + 1) * d);
    eta.resize(nodes.size());
    omegas.resize(static_cast<std::size_t>(steps));
    const std::size_t off_top = static_cast<std::size_t>(steps) * d;
    for (int j = 0; j < d; ++j) {
        nodes[off_top + j] = apex.m[j];
        eta[off_top + j] = lat.coord(apex.m[j]);
    }
    double density = 1.0;
    for (int level = top; level > bottom; --level) {
        const std::size_t off = static_cast<std::size_t>(level - bottom) * d;
        const std::size_t offn = off - d;
        const std::span<const std::int64_t> m(nodes.data() + off, d);
        const auto xiv = xi.at(level, m);
        const auto rho = transition_probs(xiv, lat.lambda());
        const double u = draw_unit(rng);
        double acc = 0.0;
        int pick = -1;
        for (int w = 0; w < 2 * d; ++w) {
            acc += rho[w];
            if (u < acc) {
                pick = w;
                break;
            }
        }
        if (pick < 0) {
            for (int w = 2 * d - 1; w >= 0; --w) {
                if (rho[w] > 0.0) {
                    pick = w;
                    break;
                }
            }
        }
        if (pick < 0)
            throw ProbabilityError("transition kernel has no positive mass");
        density *= rho[pick];
        const int axis = pick / 2;
        const std::int64_t stp = (pick % 2 == 0) ? 1 : -1;
        for (int j = 0; j < d; ++j) {
            nodes[offn + j] = nodes[off + j];
            eta[offn + j] = eta[off + j] - xiv[j] * lat.dt();
        }
        nodes[offn + axis] += stp;
        omegas[level - 1 - bottom] = static_cast<std::uint8_t>(pick);
    }
    return density;
}

} // namespace

std::vector<double> transition_probs(std::span<const double> xi,
                                     double lambda) {
    const int d = static_cast<int>(xi.size());
    if (d == 0) throw InputError("transition kernel: empty control vector");
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw InputError("transition kernel: grid ratio must be positive");
    const double base = 1.0 / (2.0 * d);
    std::vector<double> rho(2 * static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
        if (!std::isfinite(xi[j]))
            throw ProbabilityError(
                "transition kernel: control component " + std::to_string(j) +
                " is not finite");
        const double drift = 0.5 * lambda * xi[j];
        const double up = base - drift;
        const double dn = base + drift;
        if (up < -kProbSlack || dn < -kProbSlack) {
            std::ostringstream os;
            os << "transition kernel: control " << fmt_double(xi[j])
               << " on axis " << j << " exceeds the admissible bound "
               << fmt_double(1.0 / (d * lambda));
            throw ProbabilityError(os.str());
        }
        rho[2 * j] = std::clamp(up, 0.0, 1.0);
        rho[2 * j + 1] = std::clamp(dn, 0.0, 1.0);
    }
    return rho;
}

ControlField::ControlField(int dim, NodeIndex apex, int bottom_level,
                           double xi_bound)
    : dim_(dim), apex_(std::move(apex)), bottom_(bottom_level),
      bound_(xi_bound) {
    if (dim_ <= 0) throw InputError("control field: dimension must be >= 1");
    if (static_cast<int>(apex_.m.size()) != dim_)
        throw InputError("control field: apex dimension mismatch");
    if (bottom_ < 0 || bottom_ > apex_.level)
        throw InputError("control field: levels out of order");
    if (!(bound_ > 0.0) || !std::isfinite(bound_))
        throw InputError("control field: admissibility bound must be positive");
    const int levels = apex_.level - bottom_;
    boxes_.reserve(levels);
    data_.resize(levels);
    set_.resize(levels);
    for (int level = bottom_ + 1; level <= apex_.level; ++level) {
        const std::int64_t radius = apex_.level - level;
        IndexBox box;
        box.lo.resize(dim_);
        box.hi.resize(dim_);
        for (int j = 0; j < dim_; ++j) {
            box.lo[j] = apex_.m[j] - radius;
            box.hi[j] = apex_.m[j] + radius;
        }
        const std::size_t idx = static_cast<std::size_t>(level - bottom_ - 1);
        data_[idx].assign(
            static_cast<std::size_t>(box.size()) * dim_,
            std::numeric_limits<double>::quiet_NaN());
        set_[idx].assign(static_cast<std::size_t>(box.size()), 0);
        boxes_.push_back(std::move(box));
    }
}

const IndexBox& ControlField::level_box(int level) const {
    if (level <= bottom_ || level > apex_.level)
        throw InputError("control field: level " + std::to_string(level) +
                         " outside [" + std::to_string(bottom_ + 1) + ", " +
                         std::to_string(apex_.level) + "]");
    return boxes_[static_cast<std::size_t>(level - bottom_ - 1)];
}

std::size_t ControlField::slot(int level,
                               std::span<const std::int64_t> m) const {
    const IndexBox& box = level_box(level);
    if (static_cast<int>(m.size()) != dim_)
        throw InputError("control field: node dimension mismatch");
    if (!box.contains(m))
        throw OutOfDomainError("control field: node " + node_str(m) +
                               " outside the level-" + std::to_string(level) +
                               " box");
    if ((parity_of(m) + level) % 2 != 1)
        throw InputError("control field: node " + node_str(m) + " at level " +
                         std::to_string(level) + " is not a solution node");
    return static_cast<std::size_t>(box.flatten(m));
}

void ControlField::set(int level, std::span<const std::int64_t> m,
                       std::span<const double> xi) {
    if (static_cast<int>(xi.size()) != dim_)
        throw InputError("control field: control dimension mismatch");
    const std::size_t s = slot(level, m);
    for (int j = 0; j < dim_; ++j) {
        if (!std::isfinite(xi[j]) ||
            std::abs(xi[j]) > bound_ * (1.0 + 1e-12))
            throw ProbabilityError(
                "control field: component " + fmt_double(xi[j]) +
                " at node " + node_str(m) + " violates the bound " +
                fmt_double(bound_));
    }
    const std::size_t idx = static_cast<std::size_t>(level - bottom_ - 1);
    std::copy(xi.begin(), xi.end(), data_[idx].begin() + s * dim_);
    set_[idx][s] = 1;
}

std::span<const double> ControlField::at(
    int level, std::span<const std::int64_t> m) const {
    const std::size_t s = slot(level, m);
    const std::size_t idx = static_cast<std::size_t>(level - bottom_ - 1);
    if (!set_[idx][s])
        throw OutOfDomainError("control field: no control assigned at level " +
                               std::to_string(level) + " node " + node_str(m));
    return {data_[idx].data() + s * dim_, static_cast<std::size_t>(dim_)};
}

bool ControlField::defined(int level, std::span<const std::int64_t> m) const {
    if (level <= bottom_ || level > apex_.level) return false;
    if (static_cast<int>(m.size()) != dim_) return false;
    const std::size_t idx = static_cast<std::size_t>(level - bottom_ - 1);
    if (!boxes_[idx].contains(m)) return false;
    if ((parity_of(m) + level) % 2 != 1) return false;
    return set_[idx][static_cast<std::size_t>(boxes_[idx].flatten(m))] != 0;
}

std::span<const std::int64_t> WalkEnsemble::node(const WalkPath& p,
                                                 int level) const {
    if (level < bottom || level > apex.level)
        throw InputError("path level " + std::to_string(level) +
                         " outside [" + std::to_string(bottom) + ", " +
                         std::to_string(apex.level) + "]");
    return {p.nodes.data() + static_cast<std::size_t>(level - bottom) * dim,
            static_cast<std::size_t>(dim)};
}

std::span<const double> WalkEnsemble::eta_at(const WalkPath& p,
                                             int level) const {
    if (level < bottom || level > apex.level)
        throw InputError("path level " + std::to_string(level) +
                         " outside [" + std::to_string(bottom) + ", " +
                         std::to_string(apex.level) + "]");
    return {p.eta.data() + static_cast<std::size_t>(level - bottom) * dim,
            static_cast<std::size_t>(dim)};
}

namespace {

/// Depth-first sweep of the whole path tree, B directions in axis-major
/// order at every level. The visitor sees the filled level-major buffers
/// and the path density.
template <class Visit>
class PathTree {
public:
    PathTree(const Lattice& lat, const NodeIndex& apex, int bottom,
             const ControlField& xi, Visit visit)
        : lat_(lat), xi_(xi), visit_(std::move(visit)), d_(lat.dim()),
          bottom_(bottom), top_(apex.level) {
        const int steps = top_ - bottom_;
        nodes_.resize(static_cast<std::size_t>(steps + 1) * d_);
        eta_.resize(nodes_.size());
        omegas_.resize(static_cast<std::size_t>(steps));
        const std::size_t off = static_cast<std::size_t>(steps) * d_;
        for (int j = 0; j < d_; ++j) {
            nodes_[off + j] = apex.m[j];
            eta_[off + j] = lat_.coord(apex.m[j]);
        }
    }

    void run() { descend(top_, 1.0); }

private:
    void descend(int level, double density) {
        if (level == bottom_) {
            visit_(std::span<const std::int64_t>(nodes_),
                   std::span<const double>(eta_),
                   std::span<const std::uint8_t>(omegas_), density);
            return;
        }
        const std::size_t off = static_cast<std::size_t>(level - bottom_) * d_;
        const std::size_t offn = off - d_;
        const std::span<const std::int64_t> m(nodes_.data() + off, d_);
        const auto xiv = xi_.at(level, m);
        const auto rho = transition_probs(xiv, lat_.lambda());
        for (int j = 0; j < d_; ++j)
            eta_[offn + j] = eta_[off + j] - xiv[j] * lat_.dt();
        for (int w = 0; w < 2 * d_; ++w) {
            const int axis = w / 2;
            const std::int64_t stp = (w % 2 == 0) ? 1 : -1;
            for (int j = 0; j < d_; ++j) nodes_[offn + j] = nodes_[off + j];
            nodes_[offn + axis] += stp;
            omegas_[level - 1 - bottom_] = static_cast<std::uint8_t>(w);
            descend(level - 1, density * rho[w]);
        }
    }

    const Lattice& lat_;
    const ControlField& xi_;
    Visit visit_;
    int d_;
    int bottom_;
    int top_;
    std::vector<std::int64_t> nodes_;
    std::vector<double> eta_;
    std::vector<std::uint8_t> omegas_;
};

} // namespace

WalkEnsemble enumerate_walks(const Lattice& lat, const NodeIndex& apex,
                             int bottom, const ControlField& xi,
                             std::size_t cap) {
    validate_walk(lat, apex, bottom, xi);
    const int steps = apex.level - bottom;
    const std::size_t count = checked_path_count(lat.dim(), steps, cap);

    WalkEnsemble ens;
    ens.kind = WalkEnsemble::Kind::Exact;
    ens.dim = lat.dim();
    ens.bottom = bottom;
    ens.apex = apex;
    ens.dx = lat.dx();
    ens.dt = lat.dt();
    ens.lambda = lat.lambda();
    ens.paths.reserve(count);

    PathTree tree(lat, apex, bottom, xi,
                  [&](std::span<const std::int64_t> nodes,
                      std::span<const double> eta,
                      std::span<const std::uint8_t> omegas, double density) {
                      WalkPath p;
                      p.nodes.assign(nodes.begin(), nodes.end());
                      p.eta.assign(eta.begin(), eta.end());
                      p.omegas.assign(omegas.begin(), omegas.end());
                      p.density = density;
                      p.weight = density;
                      ens.paths.push_back(std::move(p));
                  });
    tree.run();
    return ens;
}

WalkEnsemble sample_walks(const Lattice& lat, const NodeIndex& apex,
                          int bottom, const ControlField& xi, std::size_t n,
                          std::uint64_t seed) {
    validate_walk(lat, apex, bottom, xi);
    if (n == 0) throw InputError("sample_walks: need at least one path");

    WalkEnsemble ens;
    ens.kind = WalkEnsemble::Kind::Sampled;
    ens.dim = lat.dim();
    ens.bottom = bottom;
    ens.apex = apex;
    ens.dx = lat.dx();
    ens.dt = lat.dt();
    ens.lambda = lat.lambda();
    ens.seed = seed;
    ens.paths.resize(n);
    const double w = 1.0 / static_cast<double>(n);

    parallel_for(static_cast<std::int64_t>(n),
                 [&](std::int64_t b, std::int64_t e) {
                     for (std::int64_t i = b; i < e; ++i) {
                         auto rng = make_stream(seed,
                                                static_cast<std::uint64_t>(i));
                         WalkPath& p = ens.paths[static_cast<std::size_t>(i)];
                         p.density = sample_one_path(lat, apex, bottom, xi,
                                                     rng, p.nodes, p.eta,
                                                     p.omegas);
                         p.weight = w;
                     }
                 });
    return ens;
}

namespace {

/// Shared tree recursion for the exact control functional: one Lagrangian
/// evaluation per tree node rather than per path, terminating either at
/// the walk bottom (against the terminal layer) or at a split level
/// (handing density and accumulated action to `leaf`).
class ActionTree {
public:
    ActionTree(const Lattice& lat, const ControlField& xi,
               const HamiltonianModel& model)
        : lat_(lat), xi_(xi), model_(model), d_(lat.dim()) {
        node_.resize(d_);
        x_.resize(d_);
    }

    template <class Leaf>
    void run(const NodeIndex& apex, int stop_level, Leaf&& leaf) {
        std::copy(apex.m.begin(), apex.m.end(), node_.begin());
        descend(apex.level, stop_level, 1.0, 0.0, leaf);
    }

private:
    template <class Leaf>
    void descend(int level, int stop, double density, double action,
                 Leaf& leaf) {
        if (level == stop) {
            leaf(std::span<const std::int64_t>(node_), density, action);
            return;
        }
        const std::span<const std::int64_t> m(node_);
        const auto xiv = xi_.at(level, m);
        lat_.coords(m, x_);
        const double lag =
            legendre(model_, x_, lat_.time(level - 1), xiv).value;
        action += lag * lat_.dt();
        const auto rho = transition_probs(xiv, lat_.lambda());
        for (int w = 0; w < 2 * d_; ++w) {
            if (rho[w] == 0.0) continue;
            const int axis = w / 2;
            const std::int64_t stp = (w % 2 == 0) ? 1 : -1;
            node_[axis] += stp;
            descend(level - 1, stop, density * rho[w], action, leaf);
            node_[axis] -= stp;
        }
    }

    const Lattice& lat_;
    const ControlField& xi_;
    const HamiltonianModel& model_;
    int d_;
    std::vector<std::int64_t> node_;
    std::vector<double> x_;
};

} // namespace

double expected_action_exact(const Lattice& lat, const NodeIndex& apex,
                             const ControlField& xi, const Layer& terminal,
                             const HamiltonianModel& model, double h,
                             std::size_t cap) {
    const int bottom = terminal.level;
    validate_walk(lat, apex, bottom, xi);
    if (model.dim() != lat.dim())
        throw InputError("expected_action: model dimension mismatch");
    checked_path_count(lat.dim(), apex.level - bottom, cap);

    std::vector<std::int64_t> scratch;
    double total = 0.0;
    ActionTree tree(lat, xi, model);
    tree.run(apex, bottom,
             [&](std::span<const std::int64_t> m, double density,
                 double action) {
                 total +=
                     density * (action + layer_value(lat, terminal, m,
                                                     scratch));
             });
    return total + h * (lat.time(apex.level) - lat.time(bottom));
}

McEstimate expected_action_mc(const Lattice& lat, const NodeIndex& apex,
                              const ControlField& xi, const Layer& terminal,
                              const HamiltonianModel& model, double h,
                              std::size_t n, std::uint64_t seed) {
    const int bottom = terminal.level;
    validate_walk(lat, apex, bottom, xi);
    if (model.dim() != lat.dim())
        throw InputError("expected_action: model dimension mismatch");
    if (n < 2) throw InputError("expected_action: need at least two samples");

    const int d = lat.dim();
    const std::int64_t blocks =
        (static_cast<std::int64_t>(n) + kMcBlock - 1) / kMcBlock;
    std::vector<double> bsum(static_cast<std::size_t>(blocks), 0.0);
    std::vector<double> bsum2(static_cast<std::size_t>(blocks), 0.0);

    parallel_for(blocks, [&](std::int64_t b0, std::int64_t b1) {
        std::vector<std::int64_t> nodes;
        std::vector<double> eta;
        std::vector<std::uint8_t> omegas;
        std::vector<std::int64_t> scratch;
        Vec x(static_cast<std::size_t>(d));
        for (std::int64_t b = b0; b < b1; ++b) {
            const std::int64_t lo = b * kMcBlock;
            const std::int64_t hi =
                std::min<std::int64_t>(static_cast<std::int64_t>(n),
                                       lo + kMcBlock);
            double s1 = 0.0;
            double s2 = 0.0;
            for (std::int64_t i = lo; i < hi; ++i) {
                auto rng = make_stream(seed, static_cast<std::uint64_t>(i));
                sample_one_path(lat, apex, bottom, xi, rng, nodes, eta,
                                omegas);
                double action = 0.0;
                for (int level = apex.level; level > bottom; --level) {
                    const std::size_t off =
                        static_cast<std::size_t>(level - bottom) * d;
                    const std::span<const std::int64_t> m(nodes.data() + off,
                                                          d);
                    const auto xiv = xi.at(level, m);
                    lat.coords(m, x);
                    action += legendre(model, x, lat.time(level - 1), xiv)
                                  .value *
                              lat.dt();
                }
                const std::span<const std::int64_t> m0(nodes.data(), d);
                const double z =
                    action + layer_value(lat, terminal, m0, scratch);
                s1 += z;
                s2 += z * z;
            }
            bsum[static_cast<std::size_t>(b)] = s1;
            bsum2[static_cast<std::size_t>(b)] = s2;
        }
    });

    double s1 = 0.0;
    double s2 = 0.0;
    for (std::int64_t b = 0; b < blocks; ++b) {
        s1 += bsum[static_cast<std::size_t>(b)];
        s2 += bsum2[static_cast<std::size_t>(b)];
    }
    const double nn = static_cast<double>(n);
    McEstimate est;
    est.mean = s1 / nn + h * (lat.time(apex.level) - lat.time(bottom));
    if (n > 1) {
        const double var = std::max(0.0, (s2 - s1 * s1 / nn) / (nn - 1.0));
        est.se = std::sqrt(var / nn);
    }
    return est;
}

ControlField minimizing_control(const SolveResult& result,
                                const NodeIndex& apex) {
    const Lattice& lat = result.lattice();
    const int d = lat.dim();
    if (static_cast<int>(apex.m.size()) != d)
        throw InputError("minimizing_control: apex dimension mismatch");
    if (apex.level < 1 || apex.level > lat.horizon_steps())
        throw InputError("minimizing_control: apex level " +
                         std::to_string(apex.level) +
                         " outside [1, " +
                         std::to_string(lat.horizon_steps()) + "]");
    if (!lat.is_value_node(apex.m, apex.level))
        throw InputError("minimizing_control: apex " + node_str(apex.m) +
                         " is not a solution node at level " +
                         std::to_string(apex.level));

    const double bound = 1.0 / (d * lat.lambda());
    ControlField field(d, apex, 0, bound);
    const HamiltonianModel& model = result.model();

    for (int level = 1; level <= apex.level; ++level) {
        const IndexBox& box = field.level_box(level);
        if (!lat.is_periodic()) {
            IndexBox need = box.expanded(1);
            const IndexBox have = lat.level_box(level - 1);
            if (!have.contains(need.lo) || !have.contains(need.hi))
                throw OutOfDomainError(
                    "minimizing_control: level " + std::to_string(level - 1) +
                    " of the solve does not cover the cone of " +
                    node_str(apex.m));
        }
        std::vector<std::int64_t> m(static_cast<std::size_t>(d));
        Vec x(static_cast<std::size_t>(d));
        Vec ctrl(static_cast<std::size_t>(d));
        const double t_prev = lat.time(level - 1);
        const std::int64_t nslots = box.size();
        for (std::int64_t s = 0; s < nslots; ++s) {
            box.unflatten(s, m);
            if (!lat.is_value_node(m, level)) continue;
            const Vec g = result.gradient_at(m, level - 1);
            lat.coords(m, x);
            model.grad_p(x, t_prev, g, ctrl);
            field.set(level, m, ctrl);
        }
    }
    return field;
}

ControlField constant_control(const Lattice& lat, const NodeIndex& apex,
                              int bottom, std::span<const double> xi) {
    const int d = lat.dim();
    if (static_cast<int>(xi.size()) != d)
        throw InputError("constant_control: control dimension mismatch");
    const double bound = 1.0 / (d * lat.lambda());
    ControlField field(d, apex, bottom, bound);
    std::vector<std::int64_t> m(static_cast<std::size_t>(d));
    for (int level = bottom + 1; level <= apex.level; ++level) {
        const IndexBox& box = field.level_box(level);
        const std::int64_t nslots = box.size();
        for (std::int64_t s = 0; s < nslots; ++s) {
            box.unflatten(s, m);
            if (!lat.is_value_node(m, level)) continue;
            field.set(level, m, xi);
        }
    }
    return field;
}

ControlField random_control(const Lattice& lat, const NodeIndex& apex,
                            int bottom, std::uint64_t seed) {
    const int d = lat.dim();
    const double bound = 1.0 / (d * lat.lambda());
    ControlField field(d, apex, bottom, bound);
    std::vector<std::int64_t> m(static_cast<std::size_t>(d));
    Vec xi(static_cast<std::size_t>(d));
    for (int level = bottom + 1; level <= apex.level; ++level) {
        const IndexBox& box = field.level_box(level);
        const std::int64_t nslots = box.size();
        for (std::int64_t s = 0; s < nslots; ++s) {
            box.unflatten(s, m);
            if (!lat.is_value_node(m, level)) continue;
            auto rng = make_stream(
                seed ^ splitmix64(static_cast<std::uint64_t>(level)),
                static_cast<std::uint64_t>(s));
            for (int j = 0; j < d; ++j) {
                const double u =
                    static_cast<double>(rng() >> 11) * 0x1.0p-53;
                xi[j] = bound * (2.0 * u - 1.0);
            }
            field.set(level, m, xi);
        }
    }
    return field;
}

const IndexBox& Occupancy::box(int level) const {
    if (level < bottom || level > top)
        throw InputError("occupancy: level " + std::to_string(level) +
                         " outside [" + std::to_string(bottom) + ", " +
                         std::to_string(top) + "]");
    return boxes[static_cast<std::size_t>(level - bottom)];
}

const std::vector<double>& Occupancy::at(int level) const {
    if (level < bottom || level > top)
        throw InputError("occupancy: level " + std::to_string(level) +
                         " outside [" + std::to_string(bottom) + ", " +
                         std::to_string(top) + "]");
    return mass[static_cast<std::size_t>(level - bottom)];
}

Occupancy propagate_occupancy(const Lattice& lat, const NodeIndex& apex,
                              int bottom, const ControlField& xi) {
    validate_walk(lat, apex, bottom, xi);
    const int d = lat.dim();
    const int top = apex.level;

    Occupancy occ;
    occ.bottom = bottom;
    occ.top = top;
    occ.boxes.resize(static_cast<std::size_t>(top - bottom + 1));
    occ.mass.resize(occ.boxes.size());
    for (int level = bottom; level <= top; ++level) {
        const std::int64_t radius = top - level;
        IndexBox box;
        box.lo.resize(static_cast<std::size_t>(d));
        box.hi.resize(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) {
            box.lo[j] = apex.m[j] - radius;
            box.hi[j] = apex.m[j] + radius;
        }
        const std::size_t idx = static_cast<std::size_t>(level - bottom);
        occ.mass[idx].assign(static_cast<std::size_t>(box.size()), 0.0);
        occ.boxes[idx] = std::move(box);
    }
    occ.mass.back()[0] = 1.0;

    std::vector<std::int64_t> m(static_cast<std::size_t>(d));
    std::vector<std::int64_t> mn(static_cast<std::size_t>(d));
    for (int level = top; level > bottom; --level) {
        const std::size_t src_idx = static_cast<std::size_t>(level - bottom);
        const IndexBox& src_box = occ.boxes[src_idx];
        const std::vector<double>& src = occ.mass[src_idx];
        const IndexBox& dst_box = occ.boxes[src_idx - 1];
        std::vector<double>& dst = occ.mass[src_idx - 1];
        const std::int64_t nslots = src_box.size();
        for (std::int64_t s = 0; s < nslots; ++s) {
            const double mass = src[static_cast<std::size_t>(s)];
            if (mass == 0.0) continue;
            src_box.unflatten(s, m);
            const auto xiv = xi.at(level, m);
            const auto rho = transition_probs(xiv, lat.lambda());
            for (int w = 0; w < 2 * d; ++w) {
                if (rho[w] == 0.0) continue;
                std::copy(m.begin(), m.end(), mn.begin());
                mn[w / 2] += (w % 2 == 0) ? 1 : -1;
                dst[static_cast<std::size_t>(dst_box.flatten(mn))] +=
                    mass * rho[w];
            }
        }
    }
    return occ;
}

std::vector<Vec> averaged_path(const Lattice& lat, const NodeIndex& apex,
                               int bottom, const ControlField& xi) {
    const Occupancy occ = propagate_occupancy(lat, apex, bottom, xi);
    const int d = lat.dim();
    const int top = apex.level;

    std::vector<Vec> path(static_cast<std::size_t>(top - bottom + 1),
                          Vec(static_cast<std::size_t>(d), 0.0));
    Vec& at_top = path.back();
    for (int j = 0; j < d; ++j) at_top[j] = lat.coord(apex.m[j]);

    std::vector<std::int64_t> m(static_cast<std::size_t>(d));
    for (int level = top; level > bottom; --level) {
        const IndexBox& box = occ.box(level);
        const std::vector<double>& mass = occ.at(level);
        Vec xbar(static_cast<std::size_t>(d), 0.0);
        const std::int64_t nslots = box.size();
        for (std::int64_t s = 0; s < nslots; ++s) {
            const double w = mass[static_cast<std::size_t>(s)];
            if (w == 0.0) continue;
            box.unflatten(s, m);
            const auto xiv = xi.at(level, m);
            for (int j = 0; j < d; ++j) xbar[j] += w * xiv[j];
        }
        const std::size_t idx = static_cast<std::size_t>(level - bottom);
        for (int j = 0; j < d; ++j)
            path[idx - 1][j] = path[idx][j] - xbar[j] * lat.dt();
    }
    return path;
}

double WalkStats::sigma_at(int level, int axis) const {
    if (level < bottom || level > top || axis < 0 || axis >= dim)
        throw InputError("walk stats: index out of range");
    return sigma[static_cast<std::size_t>(level - bottom) * dim + axis];
}

double WalkStats::delta_at(int level, int axis) const {
    if (level < bottom || level > top || axis < 0 || axis >= dim)
        throw InputError("walk stats: index out of range");
    return delta[static_cast<std::size_t>(level - bottom) * dim + axis];
}

WalkStats walk_stats(const WalkEnsemble& ensemble) {
    const int d = ensemble.dim;
    const int levels = ensemble.apex.level - ensemble.bottom + 1;
    const std::size_t slots = static_cast<std::size_t>(levels) * d;

    WalkStats st;
    st.bottom = ensemble.bottom;
    st.top = ensemble.apex.level;
    st.dim = d;
    st.sampled = ensemble.kind == WalkEnsemble::Kind::Sampled;
    st.sigma.assign(slots, 0.0);
    st.delta.assign(slots, 0.0);
    st.sigma_se.assign(slots, 0.0);
    st.delta_se.assign(slots, 0.0);

    std::vector<double> sig2(slots, 0.0);
    std::vector<double> del2(slots, 0.0);
    for (const WalkPath& p : ensemble.paths) {
        for (std::size_t s = 0; s < slots; ++s) {
            const double diff =
                p.eta[s] - ensemble.dx * static_cast<double>(p.nodes[s]);
            const double z2 = diff * diff;
            const double z1 = std::abs(diff);
            st.sigma[s] += p.weight * z2;
            st.delta[s] += p.weight * z1;
            sig2[s] += p.weight * z2 * z2;
            del2[s] += p.weight * z1 * z1;
        }
    }
    if (st.sampled && ensemble.paths.size() > 1) {
        const double n = static_cast<double>(ensemble.paths.size());
        for (std::size_t s = 0; s < slots; ++s) {
            const double vs =
                std::max(0.0, (sig2[s] - st.sigma[s] * st.sigma[s]) * n /
                                  (n - 1.0));
            const double vd =
                std::max(0.0, (del2[s] - st.delta[s] * st.delta[s]) * n /
                                  (n - 1.0));
            st.sigma_se[s] = std::sqrt(vs / n);
            st.delta_se[s] = std::sqrt(vd / n);
        }
    }
    return st;
}

WalkStats sample_walk_stats(const Lattice& lat, const NodeIndex& apex,
                            int bottom, const ControlField& xi,
                            std::size_t n, std::uint64_t seed) {
    validate_walk(lat, apex, bottom, xi);
    if (n == 0) throw InputError("sample_walk_stats: need at least one path");

    const int d = lat.dim();
    const int levels = apex.level - bottom + 1;
    const std::size_t slots = static_cast<std::size_t>(levels) * d;
    const std::int64_t blocks =
        (static_cast<std::int64_t>(n) + kMcBlock - 1) / kMcBlock;

    std::vector<double> bs1(static_cast<std::size_t>(blocks) * slots, 0.0);
    std::vector<double> bs2(bs1.size(), 0.0);
    std::vector<double> bd1(bs1.size(), 0.0);
    std::vector<double> bd2(bs1.size(), 0.0);

    parallel_for(blocks, [&](std::int64_t b0, std::int64_t b1) {
        std::vector<std::int64_t> nodes;
        std::vector<double> eta;
        std::vector<std::uint8_t> omegas;
        for (std::int64_t b = b0; b < b1; ++b) {
            const std::int64_t lo = b * kMcBlock;
            const std::int64_t hi =
                std::min<std::int64_t>(static_cast<std::int64_t>(n),
                                       lo + kMcBlock);
            double* s1 = bs1.data() + static_cast<std::size_t>(b) * slots;
            double* s2 = bs2.data() + static_cast<std::size_t>(b) * slots;
            double* d1 = bd1.data() + static_cast<std::size_t>(b) * slots;
            double* d2 = bd2.data() + static_cast<std::size_t>(b) * slots;
            for (std::int64_t i = lo; i < hi; ++i) {
                auto rng = make_stream(seed, static_cast<std::uint64_t>(i));
                sample_one_path(lat, apex, bottom, xi, rng, nodes, eta,
                                omegas);
                for (std::size_t s = 0; s < slots; ++s) {
                    const double diff =
                        eta[s] - lat.dx() * static_cast<double>(nodes[s]);
                    const double z2 = diff * diff;
                    const double z1 = std::abs(diff);
                    s1[s] += z2;
                    s2[s] += z2 * z2;
                    d1[s] += z1;
                    d2[s] += z1 * z1;
                }
            }
        }
    });

    WalkStats st;
    st.bottom = bottom;
    st.top = apex.level;
    st.dim = d;
    st.sampled = true;
    st.sigma.assign(slots, 0.0);
    st.delta.assign(slots, 0.0);
    st.sigma_se.assign(slots, 0.0);
    st.delta_se.assign(slots, 0.0);

    const double nn = static_cast<double>(n);
    for (std::size_t s = 0; s < slots; ++s) {
        double t1 = 0.0;
        double t2 = 0.0;
        double u1 = 0.0;
        double u2 = 0.0;
        for (std::int64_t b = 0; b < blocks; ++b) {
            const std::size_t off = static_cast<std::size_t>(b) * slots + s;
            t1 += bs1[off];
            t2 += bs2[off];
            u1 += bd1[off];
            u2 += bd2[off];
        }
        st.sigma[s] = t1 / nn;
        st.delta[s] = u1 / nn;
        if (n > 1) {
            const double vs =
                std::max(0.0, (t2 - t1 * t1 / nn) / (nn - 1.0));
            const double vd =
                std::max(0.0, (u2 - u1 * u1 / nn) / (nn - 1.0));
            st.sigma_se[s] = std::sqrt(vs / nn);
            st.delta_se[s] = std::sqrt(vd / nn);
        }
    }
    return st;
}

std::vector<double> sigma_tilde_occupancy(const Lattice& lat,
                                          const NodeIndex& apex, int bottom,
                                          const ControlField& xi) {
    const Occupancy occ = propagate_occupancy(lat, apex, bottom, xi);
    const int d = lat.dim();
    const int top = apex.level;
    const std::size_t slots =
        static_cast<std::size_t>(top - bottom + 1) * d;
    std::vector<double> sig(slots, 0.0);

    const double dx2 = lat.dx() * lat.dx();
    const double lam2 = lat.lambda() * lat.lambda();
    std::vector<std::int64_t> m(static_cast<std::size_t>(d));
    for (int level = top; level > bottom; --level) {
        const IndexBox& box = occ.box(level);
        const std::vector<double>& mass = occ.at(level);
        Vec inc(static_cast<std::size_t>(d), 0.0);
        const std::int64_t nslots = box.size();
        for (std::int64_t s = 0; s < nslots; ++s) {
            const double w = mass[static_cast<std::size_t>(s)];
            if (w == 0.0) continue;
            box.unflatten(s, m);
            const auto xiv = xi.at(level, m);
            for (int j = 0; j < d; ++j)
                inc[j] += w * (1.0 / d - lam2 * xiv[j] * xiv[j]);
        }
        const std::size_t off = static_cast<std::size_t>(level - bottom) * d;
        for (int j = 0; j < d; ++j)
            sig[off - d + j] = sig[off + j] + dx2 * inc[j];
    }
    return sig;
}

double dp_identity_check(const Lattice& lat, const NodeIndex& apex,
                         const ControlField& xi, int split_level,
                         const Layer& terminal, const HamiltonianModel& model,
                         double h, std::size_t cap) {
    const int bottom = terminal.level;
    validate_walk(lat, apex, bottom, xi);
    if (split_level < bottom || split_level > apex.level)
        throw InputError("dp_identity_check: split level " +
                         std::to_string(split_level) + " outside [" +
                         std::to_string(bottom) + ", " +
                         std::to_string(apex.level) + "]");
    checked_path_count(lat.dim(), apex.level - split_level, cap);
    checked_path_count(lat.dim(), split_level - bottom, cap);

    const double lhs =
        expected_action_exact(lat, apex, xi, terminal, model, h, cap);

    IndexBox split_box;
    split_box.lo.resize(apex.m.size());
    split_box.hi.resize(apex.m.size());
    const std::int64_t radius = apex.level - split_level;
    for (std::size_t j = 0; j < apex.m.size(); ++j) {
        split_box.lo[j] = apex.m[j] - radius;
        split_box.hi[j] = apex.m[j] + radius;
    }
    std::unordered_map<std::int64_t, double> memo;

    double rhs = h * (lat.time(apex.level) - lat.time(split_level));
    ActionTree tree(lat, xi, model);
    tree.run(apex, split_level,
             [&](std::span<const std::int64_t> m, double density,
                 double action) {
                 const std::int64_t key = split_box.flatten(m);
                 auto it = memo.find(key);
                 if (it == memo.end()) {
                     NodeIndex sub;
                     sub.m.assign(m.begin(), m.end());
                     sub.level = split_level;
                     const double e = expected_action_exact(
                         lat, sub, xi, terminal, model, h, cap);
                     it = memo.emplace(key, e).first;
                 }
                 rhs += density * (action + it->second);
             });

    return std::abs(lhs - rhs);
}

McEstimate expect_over_paths(
    const WalkEnsemble& ensemble,
    const std::function<double(int, std::span<const std::int64_t>,
                               std::span<const double>)>& per_level,
    const std::function<double(std::span<const std::int64_t>)>& terminal) {
    if (ensemble.paths.empty())
        throw InputError("expect_over_paths: empty ensemble");

    double s1 = 0.0;
    double s2 = 0.0;
    for (const WalkPath& p : ensemble.paths) {
        double z = 0.0;
        for (int level = ensemble.bottom + 1; level <= ensemble.apex.level;
             ++level) {
            z += per_level(level, ensemble.node(p, level),
                           ensemble.eta_at(p, level));
        }
        z += terminal(ensemble.node(p, ensemble.bottom));
        s1 += p.weight * z;
        s2 += p.weight * z * z;
    }

    McEstimate est;
    est.mean = s1;
    if (ensemble.kind == WalkEnsemble::Kind::Sampled &&
        ensemble.paths.size() > 1) {
        const double n = static_cast<double>(ensemble.paths.size());
        const double var = std::max(0.0, (s2 - s1 * s1) * n / (n - 1.0));
        est.se = std::sqrt(var / n);
    }
    return est;
}

} // namespace hj
