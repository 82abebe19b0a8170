#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"

#include "hj/errors.hpp"
#include "hj/lattice.hpp"
#include "hj/util.hpp"

using namespace hj;

TEST_CASE("index box flattening round-trips") {
    IndexBox box{{-2, 0, 3}, {1, 2, 5}};
    CHECK(box.size() == 4 * 3 * 3);
    std::vector<std::int64_t> m(3);
    for (std::int64_t idx = 0; idx < box.size(); ++idx) {
        box.unflatten(idx, m);
        CHECK(box.contains(m));
        CHECK(box.flatten(m) == idx);
    }
    const IndexBox grown = box.expanded(2);
    CHECK(grown.lo == std::vector<std::int64_t>{-4, -2, 1});
    CHECK(grown.hi == std::vector<std::int64_t>{3, 4, 7});
}

TEST_CASE("cone lattice geometry") {
    const NodeIndex apex{{1}, 4};
    const Lattice lat = Lattice::cone(1, 0.1, 0.5, apex);
    CHECK(lat.dim() == 1);
    CHECK(lat.dx() == 0.1);
    CHECK(lat.dt() == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(lat.lambda() == 0.5);
    CHECK(lat.horizon_steps() == 4);
    CHECK_FALSE(lat.is_periodic());

    const IndexBox bottom = lat.level_box(0);
    CHECK(bottom.lo[0] == -3);
    CHECK(bottom.hi[0] == 5);
    CHECK(lat.level_box(4).lo[0] == 1);
    CHECK(lat.level_box(4).hi[0] == 1);

    CHECK_THROWS_AS((void)Lattice::cone(1, 0.1, 0.5, NodeIndex{{0}, 4}),
                    InputError);
}

TEST_CASE("node parity alternates between levels") {
    const Lattice lat = Lattice::cone(2, 0.1, 0.25, NodeIndex{{0, 0}, 5});
    const std::vector<std::int64_t> even{0, 0};
    const std::vector<std::int64_t> odd{1, 0};
    CHECK(lat.is_gradient_node(even, 0));
    CHECK(lat.is_value_node(odd, 0));
    CHECK(lat.is_value_node(even, 1));
    CHECK(lat.is_gradient_node(odd, 1));
    CHECK_FALSE(lat.is_value_node(even, 0));
}

TEST_CASE("periodic lattice wraps indices and validates its period") {
    const Lattice lat = Lattice::periodic(1, 0.1, 0.5, 3, {10});
    std::vector<std::int64_t> out(1);
    lat.canonical(std::vector<std::int64_t>{13}, out);
    CHECK(out[0] == 3);
    lat.canonical(std::vector<std::int64_t>{-1}, out);
    CHECK(out[0] == 9);
    CHECK(lat.level_box(0).extent(0) == 10);
    CHECK(lat.level_box(3).extent(0) == 10);

    CHECK_THROWS_AS((void)Lattice::periodic(1, 0.1, 0.5, 3, {9}),
                    ConfigError);
    CHECK_THROWS_AS((void)Lattice::periodic(1, 0.1, 0.5, 3, {0}),
                    ConfigError);
    CHECK_THROWS_AS((void)Lattice::periodic(2, 0.1, 0.25, 3, {10}),
                    InputError);
}

TEST_CASE("time levels decode robustly") {
    const Lattice lat = Lattice::cone(1, 0.1, 0.5, NodeIndex{{1}, 6});
    for (int k = 0; k <= 6; ++k) {
        CHECK(lat.level_of_time(lat.time(k)) == k);
        if (k < 6)
            CHECK(lat.level_of_time(lat.time(k) + 0.5 * lat.dt()) == k);
    }
}

TEST_CASE("cell decoding picks the nearest node of the right parity") {
    const Lattice lat = Lattice::cone(1, 0.1, 0.5, NodeIndex{{1}, 6});
    const NodeIndex node =
        locate_solution_cell(lat, std::vector<double>{0.14}, 0.12);
    CHECK(node.level == 2);
    CHECK(node.m[0] == 1);

    const NodeIndex gnode =
        locate_gradient_cell(lat, std::vector<double>{0.14}, 0.12);
    CHECK(gnode.level == 2);
    CHECK(gnode.m[0] == 2);

    CHECK_THROWS_AS(
        (void)locate_solution_cell(lat, std::vector<double>{0.0}, -0.01),
        InputError);
    CHECK_THROWS_AS(
        (void)locate_solution_cell(lat, std::vector<double>{0.0}, 1.0),
        OutOfDomainError);
}

TEST_CASE("parity decoding matches brute force in two dimensions") {
    const Lattice lat = Lattice::periodic(2, 0.1, 0.25, 4, {40, 40});
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unif(-1.9, 1.9);
    std::vector<std::int64_t> cand(2);
    for (int trial = 0; trial < 200; ++trial) {
        const std::vector<double> x{unif(rng), unif(rng)};
        for (const bool solution : {true, false}) {
            const int level = trial % 5;
            const NodeIndex node = locate_parity_node(lat, x, level, solution);
            REQUIRE(node.m.size() == 2);
            const double got = std::abs(x[0] - lat.coord(node.m[0])) +
                               std::abs(x[1] - lat.coord(node.m[1]));
            double best = 1e300;
            const std::int64_t c0 = std::llround(x[0] / lat.dx());
            const std::int64_t c1 = std::llround(x[1] / lat.dx());
            for (std::int64_t a = c0 - 3; a <= c0 + 3; ++a)
                for (std::int64_t b = c1 - 3; b <= c1 + 3; ++b) {
                    cand[0] = a;
                    cand[1] = b;
                    const bool match = solution
                                           ? lat.is_value_node(cand, level)
                                           : lat.is_gradient_node(cand, level);
                    if (!match) continue;
                    best = std::min(best,
                                    std::abs(x[0] - lat.coord(a)) +
                                        std::abs(x[1] - lat.coord(b)));
                }
            CHECK(got <= best + 1e-12);
        }
    }
}

namespace {

std::set<std::vector<std::int64_t>> as_set(
    const std::vector<std::vector<std::int64_t>>& rows) {
    return {rows.begin(), rows.end()};
}

} // namespace

TEST_CASE("walk support sits inside the reachable set and is closed") {
    const Lattice lat = Lattice::cone(2, 0.1, 0.25, NodeIndex{{1, 0}, 4});
    const std::vector<std::int64_t> start{1, 0};

    for (int level = 0; level < 4; ++level) {
        const auto support = as_set(walk_support(lat, start, 4, level));
        const auto reach = as_set(reachable_set(lat, start, 4, level));
        for (const auto& node : support) CHECK(reach.count(node) == 1);

        if (level + 1 <= 4) {
            const auto above = walk_support(lat, start, 4, level + 1);
            for (const auto& node : above) {
                std::vector<std::int64_t> nb = node;
                for (int j = 0; j < 2; ++j) {
                    for (std::int64_t s : {std::int64_t{-1}, std::int64_t{1}}) {
                        nb[j] = node[j] + s;
                        CHECK(support.count(nb) == 1);
                    }
                    nb[j] = node[j];
                }
            }
        }
    }
}

TEST_CASE("walk support equals the reachable set in one dimension") {
    const Lattice lat = Lattice::cone(1, 0.1, 0.5, NodeIndex{{2}, 5});
    const std::vector<std::int64_t> start{2};
    for (int level = 0; level <= 5; ++level)
        CHECK(as_set(walk_support(lat, start, 5, level)) ==
              as_set(reachable_set(lat, start, 5, level)));
}
