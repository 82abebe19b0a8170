#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"

#include "hj/errors.hpp"
#include "hj/hamiltonian.hpp"
#include "hj/util.hpp"

using namespace hj;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("quadratic model evaluates |p|^2 / 2") {
    const auto model = make_model("quadratic", 2);
    const std::vector<double> x{0.0, 0.0};
    const std::vector<double> p{3.0, 4.0};
    CHECK(eval_h(*model, x, 0.0, p) == doctest::Approx(12.5).epsilon(1e-15));
    CHECK(model->space_time_independent());
    CHECK(model->alpha() == 0.0);
    CHECK(model->hp_bound(2.0) == doctest::Approx(2.0));

    Vec g(2);
    model->grad_p(x, 0.0, p, g);
    CHECK(g[0] == 3.0);
    CHECK(g[1] == 4.0);

    Vec hess(4);
    model->hess_pp(x, 0.0, p, hess);
    CHECK(hess[0] == 1.0);
    CHECK(hess[1] == 0.0);
    CHECK(hess[3] == 1.0);
}

TEST_CASE("legendre transform of the quadratic model is |xi|^2 / 2") {
    const auto model = make_model("quadratic", 2);
    const std::vector<double> x{0.0, 0.0};
    const std::vector<double> xi{1.0, 2.0};
    const LagrangianValue lv = legendre(*model, x, 0.0, xi);
    CHECK(lv.value == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(lv.p_star[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lv.p_star[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(lv.grad_xi[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lv.grad_xi[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(lv.grad_x[0] == 0.0);
    CHECK(lv.grad_x[1] == 0.0);
}

TEST_CASE("anisotropic model conjugates through the inverse matrix") {
    const auto model = make_model("anisotropic-quadratic", 2, {1.0, 2.0});
    const std::vector<double> x{0.0, 0.0};
    const std::vector<double> xi{1.0, 2.0};
    const LagrangianValue lv = legendre(*model, x, 0.0, xi);
    CHECK(lv.p_star[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(lv.p_star[1] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(lv.value == doctest::Approx(1.5).epsilon(1e-10));
}

TEST_CASE("cosine perturbation reports its closed-form extrema") {
    const auto model = make_model("quadratic+cosine", 2);
    CHECK_FALSE(model->space_time_independent());
    CHECK(model->alpha() == doctest::Approx(2.0 * kPi).epsilon(1e-15));
    REQUIRE(model->sup_h_at_zero().has_value());
    CHECK(*model->sup_h_at_zero() == doctest::Approx(2.0));
    REQUIRE(model->max_abs_lagrangian_at_zero().has_value());
    CHECK(*model->max_abs_lagrangian_at_zero() == doctest::Approx(2.0));
    REQUIRE(model->max_abs_lagrangian_xx(1.0).has_value());
    CHECK(*model->max_abs_lagrangian_xx(1.0) ==
          doctest::Approx(4.0 * kPi * kPi));

    const std::vector<double> x{0.25, 0.5};
    const std::vector<double> p{1.0, -1.0};
    CHECK(eval_h(*model, x, 0.0, p) ==
          doctest::Approx(1.0 + std::cos(kPi / 2.0) + std::cos(kPi))
              .epsilon(1e-14));

    Vec gx(2);
    model->grad_x(x, 0.0, p, gx);
    CHECK(gx[0] == doctest::Approx(-2.0 * kPi * std::sin(kPi / 2.0)));
    CHECK(gx[1] == doctest::Approx(-2.0 * kPi * std::sin(kPi)).epsilon(1e-12));
}

TEST_CASE("scheme constants for the quadratic model") {
    for (int d : {1, 2}) {
        CAPTURE(d);
        const auto model = make_model("quadratic", d);
        const SchemeConstants c = scheme_constants(*model, 1.0, 1.0, 1.0, 0.0);
        CHECK(c.l_star == 0.0);
        CHECK(c.alpha1 == doctest::Approx(1.0));
        CHECK(c.alpha2 == 0.0);
        CHECK(c.deriv_bound == doctest::Approx(2.0));
        CHECK(c.lambda1 == doctest::Approx(1.0 / (2.0 * d)).epsilon(1e-15));
        CHECK(c.theta == 0.0);
        CHECK_FALSE(c.sampled);
    }
}

TEST_CASE("scheme constants for the cosine perturbation") {
    const auto model = make_model("quadratic+cosine", 1);
    const SchemeConstants c = scheme_constants(*model, 1.0, 1.0, 1.0, 0.0);
    CHECK(c.l_star == doctest::Approx(-1.0));
    CHECK(c.alpha1 == doctest::Approx(2.0));
    CHECK(c.alpha2 == doctest::Approx(2.0 * kPi * (2.0 + 1.0 + 3.0)));
    CHECK(c.deriv_bound == doctest::Approx(2.0 + c.alpha2));
    CHECK(c.lambda1 == doctest::Approx(1.0 / c.deriv_bound));
    CHECK(c.theta == doctest::Approx(4.0 * kPi * kPi));
    CHECK_FALSE(c.sampled);
}

TEST_CASE("biconjugation recovers the hamiltonian") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    for (const char* name : {"quadratic", "quadratic+cosine"}) {
        CAPTURE(name);
        const auto model = make_model(name, 2);
        for (int trial = 0; trial < 25; ++trial) {
            const std::vector<double> x{unif(rng), unif(rng)};
            const std::vector<double> p{unif(rng), unif(rng)};
            Vec xi(2);
            model->grad_p(x, 0.3, p, xi);
            const LagrangianValue lv = legendre(*model, x, 0.3, xi);
            const double dot = p[0] * xi[0] + p[1] * xi[1];
            CHECK(std::abs(dot - lv.value - eval_h(*model, x, 0.3, p)) <=
                  1e-8);
            CHECK(std::abs(lv.grad_xi[0] - p[0]) <= 1e-10);
            CHECK(std::abs(lv.grad_xi[1] - p[1]) <= 1e-10);
        }
    }
}

TEST_CASE("model construction and evaluation validate their input") {
    CHECK_THROWS_AS((void)make_model("nope", 1), InputError);
    CHECK_THROWS_AS((void)make_model("quadratic", 0), InputError);
    CHECK_THROWS_AS((void)make_model("anisotropic-quadratic", 2, {1.0}),
                    InputError);
    CHECK_THROWS_AS((void)make_model("anisotropic-quadratic", 2, {1.0, -1.0}),
                    InputError);

    const auto model = make_model("quadratic", 2);
    const std::vector<double> x1{0.0};
    const std::vector<double> p2{0.0, 0.0};
    CHECK_THROWS_AS((void)eval_h(*model, x1, 0.0, p2), InputError);
    const std::vector<double> x2{0.0, 0.0};
    const std::vector<double> p1{0.0};
    CHECK_THROWS_AS((void)eval_h(*model, x2, 0.0, p1), InputError);
    CHECK_THROWS_AS((void)legendre(*model, x2, 0.0, p1), InputError);
}
