#include "hj/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hj/errors.hpp"

namespace hj {

namespace {

void validate_common(int dim, double dx, double lambda) {
    if (dim < 1) throw InputError("lattice dimension must be at least 1");
    if (!(dx > 0.0)) throw InputError("lattice spacing must be positive");
    if (!(lambda > 0.0)) throw InputError("grid ratio must be positive");
}

std::int64_t wrap_index(std::int64_t m, std::int64_t p) {
    std::int64_t w = m % p;
    return w < 0 ? w + p : w;
}

} // namespace

Lattice Lattice::periodic(int dim, double dx, double lambda,
                          int horizon_steps,
                          std::vector<std::int64_t> period) {
    validate_common(dim, dx, lambda);
    if (static_cast<int>(period.size()) != dim)
        throw InputError("periodic domain: period rank does not match dim");
    for (auto p : period)
        if (p < 2 || p % 2 != 0)
            throw ConfigError(
                "periodic domain: period must be a positive even index count");
    if (horizon_steps < 0) throw InputError("horizon must be non-negative");
    Lattice lat;
    lat.dim_ = dim;
    lat.dx_ = dx;
    lat.lambda_ = lambda;
    lat.dt_ = lambda * dx;
    lat.horizon_steps_ = horizon_steps;
    lat.domain_ = PeriodicDomain{std::move(period)};
    return lat;
}

Lattice Lattice::cone(int dim, double dx, double lambda, NodeIndex apex) {
    validate_common(dim, dx, lambda);
    if (static_cast<int>(apex.m.size()) != dim)
        throw InputError("cone apex rank does not match dim");
    if (apex.level < 0) throw InputError("cone apex level must be >= 0");
    if ((parity_of(apex.m) + apex.level) % 2 != 1)
        throw InputError("cone apex must be a solution node");
    IndexBox box{apex.m, apex.m};
    return cone_box(dim, dx, lambda, std::move(box), apex.level);
}

Lattice Lattice::cone_box(int dim, double dx, double lambda, IndexBox apex,
                          int apex_level) {
    validate_common(dim, dx, lambda);
    if (apex.dim() != dim)
        throw InputError("cone apex box rank does not match dim");
    for (int j = 0; j < dim; ++j)
        if (apex.lo[j] > apex.hi[j])
            throw InputError("cone apex box is empty");
    if (apex_level < 0) throw InputError("cone apex level must be >= 0");
    Lattice lat;
    lat.dim_ = dim;
    lat.dx_ = dx;
    lat.lambda_ = lambda;
    lat.dt_ = lambda * dx;
    lat.horizon_steps_ = apex_level;
    lat.domain_ = ConeDomain{std::move(apex.lo), std::move(apex.hi),
                             apex_level};
    return lat;
}

bool Lattice::is_periodic() const {
    return std::holds_alternative<PeriodicDomain>(domain_);
}

const PeriodicDomain* Lattice::periodic_domain() const {
    return std::get_if<PeriodicDomain>(&domain_);
}

const ConeDomain* Lattice::cone_domain() const {
    return std::get_if<ConeDomain>(&domain_);
}

void Lattice::coords(std::span<const std::int64_t> m,
                     std::span<double> out) const {
    for (int j = 0; j < dim_; ++j) out[j] = dx_ * m[j];
}

int Lattice::level_of_time(double t) const {
    if (t < 0.0) throw InputError("time must be non-negative");
    int k = static_cast<int>(std::floor(t / dt_));
    if ((k + 1) * dt_ <= t) ++k;
    return k;
}

bool Lattice::is_value_node(std::span<const std::int64_t> m, int k) const {
    return (parity_of(m) + k) % 2 == 1;
}

bool Lattice::is_gradient_node(std::span<const std::int64_t> m,
                               int k) const {
    return (parity_of(m) + k) % 2 == 0;
}

IndexBox Lattice::level_box(int k) const {
    if (k < 0 || k > horizon_steps_)
        throw OutOfDomainError("level " + std::to_string(k) +
                               " outside stored range [0, " +
                               std::to_string(horizon_steps_) + "]");
    if (const auto* p = periodic_domain()) {
        IndexBox box;
        box.lo.assign(dim_, 0);
        box.hi.resize(dim_);
        for (int j = 0; j < dim_; ++j) box.hi[j] = p->period[j] - 1;
        return box;
    }
    const auto* c = cone_domain();
    IndexBox box{c->apex_lo, c->apex_hi};
    return box.expanded(c->apex_level - k);
}

void Lattice::canonical(std::span<const std::int64_t> m,
                        std::span<std::int64_t> out) const {
    if (const auto* p = periodic_domain()) {
        for (int j = 0; j < dim_; ++j)
            out[j] = wrap_index(m[j], p->period[j]);
    } else {
        std::copy(m.begin(), m.end(), out.begin());
    }
}

namespace {

template <class Keep>
std::vector<std::vector<std::int64_t>> collect_ball(
    const Lattice& lat, std::span<const std::int64_t> n, int radius,
    Keep&& keep) {
    const int d = lat.dim();
    std::vector<std::vector<std::int64_t>> out;
    std::vector<std::int64_t> m(n.begin(), n.end());
    for (int j = 0; j < d; ++j) m[j] -= radius;
    // Odometer sweep of the sup-norm ball in lexicographic order.
    while (true) {
        if (keep(std::span<const std::int64_t>(m))) out.push_back(m);
        int j = d - 1;
        while (j >= 0 && m[j] == n[j] + radius) {
            m[j] = n[j] - radius;
            --j;
        }
        if (j < 0) break;
        ++m[j];
    }
    if (lat.is_periodic()) {
        std::set<std::vector<std::int64_t>> dedup;
        std::vector<std::int64_t> w(d);
        for (auto& row : out) {
            lat.canonical(row, w);
            dedup.insert(w);
        }
        out.assign(dedup.begin(), dedup.end());
    }
    return out;
}

} // namespace

std::vector<std::vector<std::int64_t>> reachable_set(
    const Lattice& lat, std::span<const std::int64_t> n, int level_top,
    int level) {
    if (static_cast<int>(n.size()) != lat.dim())
        throw InputError("reachable_set: node rank does not match lattice");
    if (level < 0 || level > level_top)
        throw InputError("reachable_set: need 0 <= level <= level_top");
    if (!lat.is_value_node(n, level_top))
        throw InputError("reachable_set: start must be a solution node");
    const int radius = level_top - level;
    return collect_ball(lat, n, radius,
                        [&](std::span<const std::int64_t> m) {
                            return lat.is_value_node(m, level);
                        });
}

std::vector<std::vector<std::int64_t>> walk_support(
    const Lattice& lat, std::span<const std::int64_t> n, int level_top,
    int level) {
    if (static_cast<int>(n.size()) != lat.dim())
        throw InputError("walk_support: node rank does not match lattice");
    if (level < 0 || level > level_top)
        throw InputError("walk_support: need 0 <= level <= level_top");
    if (!lat.is_value_node(n, level_top))
        throw InputError("walk_support: start must be a solution node");
    const int steps = level_top - level;
    return collect_ball(lat, n, steps,
                        [&](std::span<const std::int64_t> m) {
                            std::int64_t l1 = 0;
                            for (int j = 0; j < lat.dim(); ++j)
                                l1 += m[j] >= n[j] ? m[j] - n[j]
                                                   : n[j] - m[j];
                            return l1 <= steps && (l1 - steps) % 2 == 0;
                        });
}

namespace {

/// Nearest index of the requested coordinate-sum parity in the 1-norm.
/// Rounds each axis half-up, then if the parity is off flips the axis
/// with the largest rounding remainder (lowest axis on ties) toward the
/// query, which keeps the map total, deterministic, and exact on nodes.
std::vector<std::int64_t> nearest_parity_index(const Lattice& lat,
                                               std::span<const double> x,
                                               int want_parity) {
    const int d = lat.dim();
    std::vector<std::int64_t> m(d);
    std::vector<double> frac(d);
    for (int j = 0; j < d; ++j) {
        const double y = x[j] / lat.dx();
        const double r = std::floor(y + 0.5);
        m[j] = static_cast<std::int64_t>(r);
        frac[j] = y - r; // in [-1/2, 1/2)
    }
    if (parity_of(m) != want_parity) {
        int best = 0;
        for (int j = 1; j < d; ++j)
            if (std::abs(frac[j]) > std::abs(frac[best])) best = j;
        m[best] += frac[best] >= 0.0 ? 1 : -1;
    }
    return m;
}

NodeIndex locate_cell(const Lattice& lat, std::span<const double> x,
                      double t, bool solution_parity) {
    if (static_cast<int>(x.size()) != lat.dim())
        throw InputError("locate: point rank does not match lattice");
    const int k = lat.level_of_time(t);
    if (k < 0 || k >= lat.horizon_steps())
        throw OutOfDomainError("time " + fmt_double(t) +
                               " outside the stored horizon");
    const int want = solution_parity ? (k + 1) % 2 : k % 2;
    NodeIndex node;
    node.level = k;
    node.m = nearest_parity_index(lat, x, want);
    return node;
}

} // namespace

NodeIndex locate_solution_cell(const Lattice& lat, std::span<const double> x,
                               double t) {
    return locate_cell(lat, x, t, true);
}

NodeIndex locate_gradient_cell(const Lattice& lat, std::span<const double> x,
                               double t) {
    return locate_cell(lat, x, t, false);
}

NodeIndex locate_parity_node(const Lattice& lat, std::span<const double> x,
                             int level, bool solution_parity) {
    if (static_cast<int>(x.size()) != lat.dim())
        throw InputError("locate: point rank does not match lattice");
    const int want = solution_parity ? (level + 1) % 2 : level % 2;
    NodeIndex node;
    node.level = level;
    node.m = nearest_parity_index(lat, x, want);
    return node;
}

} // namespace hj
