#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "parheat/fields.hpp"
#include "parheat/rng.hpp"

using namespace parheat;

namespace {

SpaceTimePoint random_point(int n, double box, RngStream& r) {
    std::vector<double> x(n);
    for (auto& xi : x) xi = box * (2.0 * r.uniform() - 1.0);
    return {std::move(x), box * (2.0 * r.uniform() - 1.0)};
}

std::vector<ScalarField> corpus(int n) {
    std::vector<ScalarField> fs;
    fs.push_back(constant_field(n, 3.0));
    std::vector<double> xi(n, 0.0);
    xi[0] = 1.0;
    fs.push_back(plane_wave(xi, 0.0));
    fs.push_back(plane_wave(xi, 1.0));
    fs.push_back(caloric_quadratic(n));
    fs.push_back(spacetime_gaussian(n, 1.0, 1.0, 1.0));
    fs.push_back(time_profile_cos(n, 1.0));
    fs.push_back(radial_bump(n, 2.0));
    return fs;
}

}  // namespace

TEST_CASE("constant field evaluates and differentiates trivially") {
    auto f = constant_field(2, 3.0);
    SpaceTimePoint p({0.4, -0.3}, 0.7);
    REQUIRE(f(p) == 3.0);
    auto g = f.gradient_at(p);
    REQUIRE(g[0] == 0.0);
    REQUIRE(f.dt_at(p) == 0.0);
    auto rep = finite_difference_check(f, p, 1e-3);
    REQUIRE(rep.max_err == 0.0);
}

TEST_CASE("plane wave values at the origin") {
    auto f = plane_wave({1.0}, 0.0);
    SpaceTimePoint p({0.0}, 0.0);
    REQUIRE(f(p) == Catch::Approx(1.0));
    REQUIRE(f.gradient_at(p)[0] == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("clamped quadratic is exactly polynomial on the core") {
    const int n = 2;
    auto f = caloric_quadratic(n);  // x1^2 + (2/(n+2)) t
    SpaceTimePoint p({1.2, -0.5}, 0.8);
    REQUIRE(f(p) == Catch::Approx(1.2 * 1.2 + 0.5 * 0.8));
    REQUIRE(f.dt_at(p) == Catch::Approx(2.0 / (n + 2)));
    REQUIRE(f.laplacian_at(p) == Catch::Approx(2.0));
    // zero outside the clamp radius
    REQUIRE(f.eval(std::vector<double>{30.0, 0.0}, 0.0) == 0.0);
}

TEST_CASE("corpus fields respect their global bound on random points") {
    RngStream r(11, 0);
    for (int n : {1, 2, 3}) {
        for (const auto& f : corpus(n)) {
            for (int k = 0; k < 10000 / 4; ++k) {
                const auto p = random_point(n, 25.0, r);
                REQUIRE(std::abs(f(p)) <= f.bound * (1.0 + 1e-12));
            }
        }
    }
}

TEST_CASE("analytic closures match central differences at order 2") {
    RngStream r(12, 0);
    for (int n : {1, 2}) {
        for (const auto& f : corpus(n)) {
            // a point safely inside every field's smooth region
            SpaceTimePoint p(std::vector<double>(n, 0.31), 0.22);
            const double hs[3] = {1e-2, 5e-3, 2.5e-3};
            double errs[3];
            for (int i = 0; i < 3; ++i) errs[i] = finite_difference_check(f, p, hs[i]).max_err;
            if (errs[0] < 1e-11) continue;  // exact (constants, polynomials on the core)
            const double slope =
                std::log(errs[0] / errs[2]) / std::log(hs[0] / hs[2]);
            INFO("field with bound " << f.bound << ", errs " << errs[0] << " " << errs[2]);
            REQUIRE(slope > 1.8);
            REQUIRE(slope < 2.2);
        }
    }
}

TEST_CASE("finite difference ratio for the plane wave halves as h^2") {
    auto f = plane_wave({1.0}, 0.0);
    SpaceTimePoint p({0.3}, 0.2);
    const double e1 = finite_difference_check(f, p, 1e-2).max_err;
    const double e2 = finite_difference_check(f, p, 5e-3).max_err;
    REQUIRE(e1 / e2 == Catch::Approx(4.0).epsilon(0.05));
}

TEST_CASE("gaussian closures are accurate at small h") {
    auto f = spacetime_gaussian(1, 1.0, 1.0, 1.0);
    SpaceTimePoint p({0.4}, -0.3);
    REQUIRE(finite_difference_check(f, p, 1e-4).max_err < 1e-6);
}

TEST_CASE("make_test_function validates its inputs") {
    REQUIRE_THROWS_AS(make_test_function(TestFunctionTag::Constant, {}, 1), FieldError);
    REQUIRE_THROWS_AS(make_test_function(TestFunctionTag::PlaneWave, {0.0, 0.0}, 1),
                      FieldError);
    REQUIRE_THROWS_AS(parse_field("nonsense:1", 1), FieldError);
    auto f = parse_field("planewave:1,0", 1);
    REQUIRE(f(SpaceTimePoint({0.0}, 0.0)) == Catch::Approx(1.0));
}

TEST_CASE("finite_difference_check rejects points outside the smooth region") {
    auto f = radial_bump(1, 1.0);
    // smooth everywhere by construction, so use a clamped quadratic instead
    auto g = x1_squared(1);
    SpaceTimePoint outside({8.0}, 0.0);
    REQUIRE_THROWS_AS(finite_difference_check(g, outside, 1e-3), FieldError);
    (void)f;
}

TEST_CASE("translate shifts evaluation points") {
    auto f = spacetime_gaussian(1, 1.0, 1.0, 1.0);
    auto g = translate(f, {0.5}, -0.25);
    SpaceTimePoint p({0.9}, 0.1);
    REQUIRE(g(p) == Catch::Approx(f.eval(std::vector<double>{0.4}, 0.35)));
}

TEST_CASE("linear combinations combine closures") {
    auto f = plane_wave({1.0}, 0.5);
    auto g = spacetime_gaussian(1, 1.0, 1.3, 0.9);
    auto h = linear_combination(2.0, f, -0.5, g);
    SpaceTimePoint p({0.2}, 0.1);
    REQUIRE(h(p) == Catch::Approx(2.0 * f(p) - 0.5 * g(p)));
    REQUIRE(h.dt_at(p) == Catch::Approx(2.0 * f.dt_at(p) - 0.5 * g.dt_at(p)));
}
