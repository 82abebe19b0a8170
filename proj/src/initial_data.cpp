#include "hj/initial_data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hj/errors.hpp"
#include "hj/util.hpp"

namespace hj {

namespace {

std::vector<double> affine_slope(const InitialDataSpec& spec, int dim) {
    if (spec.a.empty()) return std::vector<double>(dim, 0.0);
    if (static_cast<int>(spec.a.size()) != dim)
        throw InputError("affine data: slope has dimension " +
                         std::to_string(spec.a.size()) + ", expected " +
                         std::to_string(dim));
    return spec.a;
}

void validate_random(const InitialDataSpec& spec) {
    if (!(spec.period > 0.0))
        throw InputError("random data: period must be positive");
    if (spec.coarse < 2)
        throw InputError("random data: need at least 2 coarse cells");
    if (spec.lip < 0.0)
        throw InputError("random data: Lipschitz budget must be >= 0");
}

/// Seeded node table on the coarse periodic grid, values in [-1, 1];
/// node i draws from stream (seed, flat(i)) so the table does not depend
/// on construction order.
std::vector<double> random_table(int dim, int coarse, std::uint64_t seed) {
    std::int64_t total = 1;
    for (int j = 0; j < dim; ++j) total *= coarse;
    std::vector<double> table(static_cast<std::size_t>(total));
    for (std::int64_t i = 0; i < total; ++i) {
        auto rng = make_stream(seed, static_cast<std::uint64_t>(i));
        table[static_cast<std::size_t>(i)] =
            2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
    }
    return table;
}

double wrap_unit(double y, int coarse) {
    const double c = static_cast<double>(coarse);
    double w = std::fmod(y, c);
    if (w < 0.0) w += c;
    if (w >= c) w = 0.0;
    return w;
}

} // namespace

InitialData make_initial_data(const InitialDataSpec& spec, int dim) {
    if (dim < 1) throw InputError("initial data: dimension must be >= 1");

    if (spec.name == "constant") {
        const double b = spec.b;
        return [b](std::span<const double>) { return b; };
    }
    if (spec.name == "affine") {
        const std::vector<double> a = affine_slope(spec, dim);
        const double b = spec.b;
        return [a, b](std::span<const double> x) {
            double v = b;
            for (std::size_t j = 0; j < a.size(); ++j) v += a[j] * x[j];
            return v;
        };
    }
    if (spec.name == "neg_l1_norm") {
        return [](std::span<const double> x) {
            double v = 0.0;
            for (double xj : x) v -= std::abs(xj);
            return v;
        };
    }
    if (spec.name == "cosine") {
        return [](std::span<const double> x) {
            double v = 0.0;
            for (double xj : x)
                v += std::cos(2.0 * std::numbers::pi * xj);
            return v / (2.0 * std::numbers::pi);
        };
    }
    if (spec.name == "random_lipschitz") {
        validate_random(spec);
        const int coarse = spec.coarse;
        const double cell = spec.period / coarse;
        const double scale = spec.lip * cell / 2.0;
        const std::vector<double> table =
            random_table(dim, coarse, spec.seed);
        return [dim, coarse, cell, scale,
                table](std::span<const double> x) {
            std::vector<std::int64_t> base(static_cast<std::size_t>(dim));
            std::vector<double> frac(static_cast<std::size_t>(dim));
            for (int j = 0; j < dim; ++j) {
                const double y = wrap_unit(x[j] / cell, coarse);
                const double fl = std::floor(y);
                base[j] = static_cast<std::int64_t>(fl);
                frac[j] = y - fl;
            }
            double v = 0.0;
            const std::int64_t corners = std::int64_t{1} << dim;
            for (std::int64_t c = 0; c < corners; ++c) {
                double w = 1.0;
                std::int64_t flat = 0;
                for (int j = 0; j < dim; ++j) {
                    const int bit = static_cast<int>((c >> j) & 1);
                    w *= bit ? frac[j] : 1.0 - frac[j];
                    const std::int64_t node =
                        (base[j] + bit) % coarse;
                    flat = flat * coarse + node;
                }
                v += w * table[static_cast<std::size_t>(flat)];
            }
            return scale * v;
        };
    }
    throw InputError("unknown initial data \"" + spec.name + "\"");
}

double lipschitz_bound(const InitialDataSpec& spec, int dim) {
    if (spec.name == "constant") return 0.0;
    if (spec.name == "affine") {
        const std::vector<double> a = affine_slope(spec, dim);
        double r = 0.0;
        for (double aj : a) r = std::max(r, std::abs(aj));
        return r;
    }
    if (spec.name == "neg_l1_norm") return 1.0;
    if (spec.name == "cosine") return 1.0;
    if (spec.name == "random_lipschitz") {
        validate_random(spec);
        return spec.lip;
    }
    throw InputError("unknown initial data \"" + spec.name + "\"");
}

double value_bound(const InitialDataSpec& spec, int dim, double radius) {
    if (radius < 0.0) throw InputError("value_bound: radius must be >= 0");
    if (spec.name == "constant") return std::abs(spec.b);
    if (spec.name == "affine") {
        const std::vector<double> a = affine_slope(spec, dim);
        double r = std::abs(spec.b);
        for (double aj : a) r += std::abs(aj) * radius;
        return r;
    }
    if (spec.name == "neg_l1_norm") return dim * radius;
    if (spec.name == "cosine")
        return dim / (2.0 * std::numbers::pi);
    if (spec.name == "random_lipschitz") {
        validate_random(spec);
        return spec.lip * spec.period / (2.0 * spec.coarse);
    }
    throw InputError("unknown initial data \"" + spec.name + "\"");
}

} // namespace hj
