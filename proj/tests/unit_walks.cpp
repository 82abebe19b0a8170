#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "doctest.h"

#include "hj/errors.hpp"
#include "hj/hamiltonian.hpp"
#include "hj/initial_data.hpp"
#include "hj/lattice.hpp"
#include "hj/scheme.hpp"
#include "hj/walks.hpp"

using namespace hj;

namespace {

InitialData affine1(double a) {
    return [a](std::span<const double> x) { return a * x[0]; };
}

} // namespace

TEST_CASE("transition kernel values, normalization, and drift") {
    const auto rho1 = transition_probs(std::vector<double>{1.0}, 0.5);
    REQUIRE(rho1.size() == 2);
    CHECK(rho1[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(rho1[1] == doctest::Approx(0.75).epsilon(1e-15));

    const auto rho2 = transition_probs(std::vector<double>{1.0, 0.0}, 0.5);
    REQUIRE(rho2.size() == 4);
    CHECK(rho2[0] == doctest::Approx(0.0));
    CHECK(rho2[1] == doctest::Approx(0.5));
    CHECK(rho2[2] == doctest::Approx(0.25));
    CHECK(rho2[3] == doctest::Approx(0.25));

    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 1 + trial % 3;
        const double lambda = 0.5 / d;
        const double bound = 1.0 / (d * lambda);
        std::uniform_real_distribution<double> unif(-bound, bound);
        std::vector<double> xi(d);
        for (double& c : xi) c = unif(rng);

        const auto rho = transition_probs(xi, lambda);
        double sum = 0.0;
        for (double p : rho) {
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
            sum += p;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-15);
        for (int j = 0; j < d; ++j) {
            const double drift = rho[2 * j] - rho[2 * j + 1];
            CHECK(std::abs(drift + lambda * xi[j]) <= 1e-15);
        }
    }
}

TEST_CASE("inadmissible controls are rejected") {
    CHECK_THROWS_AS((void)transition_probs(std::vector<double>{2.2}, 0.5),
                    ProbabilityError);
    CHECK_THROWS_AS((void)transition_probs(std::vector<double>{}, 0.5),
                    InputError);
    CHECK_THROWS_AS((void)transition_probs(std::vector<double>{0.0}, 0.0),
                    InputError);
}

TEST_CASE("control fields validate levels, nodes, and bounds") {
    const NodeIndex apex{{0}, 3};
    ControlField xi(1, apex, 0, 2.0);
    CHECK(xi.top() == 3);
    CHECK(xi.bottom() == 0);

    const std::vector<std::int64_t> node{0};
    xi.set(1, node, std::vector<double>{1.5});
    CHECK(xi.at(1, node)[0] == 1.5);
    CHECK(xi.defined(1, node));
    CHECK_FALSE(xi.defined(3, std::vector<std::int64_t>{0}));

    CHECK_THROWS_AS((void)xi.at(2, node), InputError);
    CHECK_THROWS_AS(
        (void)xi.at(3, std::vector<std::int64_t>{0}), OutOfDomainError);
    CHECK_THROWS_AS(
        xi.set(0, std::vector<std::int64_t>{0}, std::vector<double>{0.0}),
        InputError);
    CHECK_THROWS_AS(
        xi.set(1, std::vector<std::int64_t>{8}, std::vector<double>{0.0}),
        OutOfDomainError);
    CHECK_THROWS_AS(xi.set(1, node, std::vector<double>{2.5}),
                    ProbabilityError);
}

TEST_CASE("exhaustive enumeration covers the path tree") {
    const Lattice lat = Lattice::cone(1, 0.1, 0.5, NodeIndex{{0}, 3});
    const NodeIndex apex{{0}, 3};
    const ControlField xi = random_control(lat, apex, 0, 17);

    const WalkEnsemble ens = enumerate_walks(lat, apex, 0, xi);
    CHECK(ens.paths.size() == 8);
    double mass = 0.0;
    for (const WalkPath& p : ens.paths) {
        mass += p.density;
        CHECK(ens.node(p, 3)[0] == 0);
        CHECK(ens.eta_at(p, 3)[0] == 0.0);
    }
    CHECK(std::abs(mass - 1.0) <= 1e-12);

    CHECK_THROWS_AS((void)enumerate_walks(lat, apex, 0, xi, 7),
                    EnumerationCapError);
}

TEST_CASE("occupancy propagation agrees with enumeration") {
    const Lattice lat = Lattice::cone(2, 0.1, 0.25, NodeIndex{{0, 1}, 4});
    const NodeIndex apex{{0, 1}, 4};
    const ControlField xi = random_control(lat, apex, 0, 23);

    const WalkEnsemble ens = enumerate_walks(lat, apex, 0, xi);
    const Occupancy occ = propagate_occupancy(lat, apex, 0, xi);

    for (int level : {0, 2}) {
        std::map<std::vector<std::int64_t>, double> hist;
        for (const WalkPath& p : ens.paths) {
            const auto node = ens.node(p, level);
            hist[std::vector<std::int64_t>(node.begin(), node.end())] +=
                p.density;
        }
        const IndexBox& box = occ.box(level);
        const std::vector<double>& mass = occ.at(level);
        double total = 0.0;
        for (const auto& [node, weight] : hist) {
            const double got = mass[box.flatten(node)];
            CHECK(std::abs(got - weight) <= 1e-12);
            total += got;
        }
        CHECK(std::abs(total - 1.0) <= 1e-12);
    }
}

TEST_CASE("the averaged path equals the enumeration mean") {
    const Lattice lat = Lattice::cone(1, 0.1, 0.5, NodeIndex{{1}, 4});
    const NodeIndex apex{{1}, 4};
    const ControlField xi = random_control(lat, apex, 0, 29);

    const std::vector<Vec> mean = averaged_path(lat, apex, 0, xi);
    REQUIRE(mean.size() == 5);

    const WalkEnsemble ens = enumerate_walks(lat, apex, 0, xi);
    for (int level = 0; level <= 4; ++level) {
        double avg = 0.0;
        for (const WalkPath& p : ens.paths)
            avg += p.density * lat.coord(ens.node(p, level)[0]);
        CHECK(std::abs(mean[level][0] - avg) <= 1e-12);
    }
}

TEST_CASE("one-step walk moments in closed form") {
    const Lattice lat = Lattice::cone(1, 0.1, 0.5, NodeIndex{{0}, 1});
    const NodeIndex apex{{0}, 1};
    const ControlField xi =
        constant_control(lat, apex, 0, std::vector<double>{1.0});

    const WalkStats stats = walk_stats(enumerate_walks(lat, apex, 0, xi));
    CHECK_FALSE(stats.sampled);
    CHECK(stats.sigma_at(0, 0) == doctest::Approx(0.0075).epsilon(1e-14));
    CHECK(stats.delta_at(0, 0) == doctest::Approx(0.075).epsilon(1e-14));
    CHECK(stats.sigma_at(1, 0) == 0.0);
    CHECK(stats.delta_at(1, 0) == 0.0);
    CHECK(stats.delta_at(0, 0) * stats.delta_at(0, 0) <=
          stats.sigma_at(0, 0));
}

TEST_CASE("the variance bound is attained by the driftless walk") {
    const Lattice lat = Lattice::cone(1, 0.1, 0.5, NodeIndex{{0}, 5});
    const NodeIndex apex{{0}, 5};
    const ControlField zero =
        constant_control(lat, apex, 0, std::vector<double>{0.0});

    const WalkStats stats = walk_stats(enumerate_walks(lat, apex, 0, zero));
    for (int level = 0; level <= 5; ++level) {
        const double bound = (5 - level) * lat.dx() * lat.dx();
        CHECK(std::abs(stats.sigma_at(level, 0) - bound) <= 1e-15);
    }
}

TEST_CASE("occupancy second moments match the ensemble") {
    const Lattice lat = Lattice::cone(2, 0.1, 0.25, NodeIndex{{0, 1}, 4});
    const NodeIndex apex{{0, 1}, 4};
    const ControlField xi = random_control(lat, apex, 0, 31);

    const WalkStats stats = walk_stats(enumerate_walks(lat, apex, 0, xi));
    const std::vector<double> sigma = sigma_tilde_occupancy(lat, apex, 0, xi);
    REQUIRE(sigma.size() == stats.sigma.size());
    for (std::size_t i = 0; i < sigma.size(); ++i)
        CHECK(std::abs(sigma[i] - stats.sigma[i]) <= 1e-12);
}

TEST_CASE("the control functional in closed form for affine data") {
    const auto model = make_model("quadratic", 1);
    const Lattice lat = Lattice::cone(1, 0.2, 0.45, NodeIndex{{1}, 4});
    const NodeIndex apex{{1}, 4};
    const double a = 0.5;
    const double h = 0.2;
    const Layer terminal =
        discretize_initial(affine1(a), lat, InitMode::Pointwise);

    for (double c : {0.0, 0.8, -1.1, a}) {
        CAPTURE(c);
        const ControlField xi =
            constant_control(lat, apex, 0, std::vector<double>{c});
        const double got =
            expected_action_exact(lat, apex, xi, terminal, *model, h);
        const double horizon = lat.time(4);
        const double expected = horizon * c * c / 2.0 +
                                a * (lat.coord(1) - horizon * c) + h * horizon;
        CHECK(std::abs(got - expected) <= 1e-12);
    }
}

TEST_CASE("monte carlo action estimates are deterministic and consistent") {
    const auto model = make_model("quadratic", 1);
    const Lattice lat = Lattice::cone(1, 0.2, 0.45, NodeIndex{{1}, 6});
    const NodeIndex apex{{1}, 6};
    const ControlField xi = random_control(lat, apex, 0, 41);
    const Layer terminal =
        discretize_initial(affine1(0.6), lat, InitMode::Pointwise);

    const double exact =
        expected_action_exact(lat, apex, xi, terminal, *model, 0.0);
    const McEstimate est =
        expected_action_mc(lat, apex, xi, terminal, *model, 0.0, 6000, 9);
    CHECK(std::abs(est.mean - exact) <= 4.0 * est.se + 1e-12);
    CHECK(est.se > 0.0);

    const McEstimate again =
        expected_action_mc(lat, apex, xi, terminal, *model, 0.0, 6000, 9);
    CHECK(again.mean == est.mean);
    CHECK(again.se == est.se);

    CHECK_THROWS_AS((void)expected_action_mc(lat, apex, xi, terminal, *model,
                                             0.0, 1, 9),
                    InputError);
}

TEST_CASE("the minimizing control attains the scheme value") {
    const auto model = make_model("quadratic", 1);
    const SchemeConstants consts =
        scheme_constants(*model, 0.6, 1.0, 3.0, 0.2);
    const Lattice lat = Lattice::cone(1, 0.2, 0.45, NodeIndex{{0}, 5});
    const InitialData v0 =
        make_initial_data(InitialDataSpec{.name = "neg_l1_norm"}, 1);
    const SolveResult result =
        solve(v0, lat, model, consts, InitMode::Pointwise);

    const NodeIndex apex{{0}, 5};
    const ControlField best = minimizing_control(result, apex);
    const double rep = expected_action_exact(lat, apex, best,
                                             result.layer(0), *model,
                                             consts.h);
    const double value = result.value_at(apex.m, apex.level);
    CHECK(std::abs(rep - value) <= 1e-10);

    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const ControlField other = random_control(lat, apex, 0, seed);
        const double e = expected_action_exact(lat, apex, other,
                                               result.layer(0), *model,
                                               consts.h);
        CHECK(e >= rep - 1e-10);
    }
}

TEST_CASE("the dynamic programming split leaves no residual") {
    const auto model = make_model("quadratic", 1);
    const Lattice lat = Lattice::cone(1, 0.2, 0.45, NodeIndex{{0}, 5});
    const NodeIndex apex{{0}, 5};
    const ControlField xi = random_control(lat, apex, 0, 53);
    const Layer terminal =
        discretize_initial(affine1(0.4), lat, InitMode::Pointwise);

    for (int split : {1, 3}) {
        CAPTURE(split);
        const double resid =
            dp_identity_check(lat, apex, xi, split, terminal, *model, 0.1);
        CHECK(std::abs(resid) <= 1e-12);
    }
    CHECK_THROWS_AS((void)dp_identity_check(lat, apex, xi, 7, terminal,
                                            *model, 0.1),
                    InputError);
}

TEST_CASE("sampled walks are reproducible") {
    const Lattice lat = Lattice::cone(1, 0.1, 0.5, NodeIndex{{0}, 5});
    const NodeIndex apex{{0}, 5};
    const ControlField xi = random_control(lat, apex, 0, 61);

    const WalkEnsemble a = sample_walks(lat, apex, 0, xi, 64, 5);
    const WalkEnsemble b = sample_walks(lat, apex, 0, xi, 64, 5);
    REQUIRE(a.paths.size() == 64);
    REQUIRE(b.paths.size() == 64);
    CHECK(a.kind == WalkEnsemble::Kind::Sampled);
    for (std::size_t i = 0; i < 8; ++i)
        CHECK(a.paths[i].nodes == b.paths[i].nodes);

    CHECK_THROWS_AS((void)sample_walks(lat, apex, 0, xi, 0, 5), InputError);
}

TEST_CASE("path expectations reduce to the density mass") {
    const Lattice lat = Lattice::cone(1, 0.1, 0.5, NodeIndex{{0}, 3});
    const NodeIndex apex{{0}, 3};
    const ControlField xi = random_control(lat, apex, 0, 71);
    const WalkEnsemble ens = enumerate_walks(lat, apex, 0, xi);

    const McEstimate est = expect_over_paths(
        ens,
        [](int, std::span<const std::int64_t>, std::span<const double>) {
            return 0.0;
        },
        [](std::span<const std::int64_t>) { return 1.0; });
    CHECK(est.mean == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(est.se == 0.0);
}
