#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "parheat/operators.hpp"
#include "parheat/rng.hpp"

using namespace parheat;

namespace {

// Analytic heat evolution of the separable space-time Gaussian (test oracle):
// spatial convolution inflates the variance by 2τ per dimension; time just shifts.
double gaussian_semigroup_oracle(int n, double sx, double st, const SpaceTimePoint& p,
                                 double tau) {
    const double s2 = sx * sx;
    double v = std::exp(-0.5 * (p.t - tau) * (p.t - tau) / (st * st));
    for (int i = 0; i < n; ++i)
        v *= std::sqrt(s2 / (s2 + 2.0 * tau)) *
             std::exp(-0.5 * p.x[i] * p.x[i] / (s2 + 2.0 * tau));
    return v;
}

}  // namespace

TEST_CASE("heat semigroup reproduces constants exactly") {
    auto u = constant_field(2, 4.5);
    SpaceTimePoint p({0.3, -0.2}, 1.0);
    REQUIRE(heat_semigroup(u, p, 0.7) == Catch::Approx(4.5).epsilon(1e-14));
}

TEST_CASE("heat semigroup damps the cosine by e^{-tau}") {
    auto u = plane_wave({1.0}, 0.0);
    SpaceTimePoint p({0.0}, 0.0);
    REQUIRE(heat_semigroup(u, p, 1.0) == Catch::Approx(std::exp(-1.0)).epsilon(1e-9));
    SpaceTimePoint p2({0.7}, 0.0);
    REQUIRE(heat_semigroup(u, p2, 1.0) ==
            Catch::Approx(std::exp(-1.0) * std::cos(0.7)).epsilon(1e-8));
}

TEST_CASE("heat semigroup matches the Gaussian closed form") {
    for (int n : {1, 2}) {
        auto u = spacetime_gaussian(n, 1.0, 1.1, 0.9);
        SpaceTimePoint p(std::vector<double>(n, 0.4), 0.3);
        for (double tau : {0.05, 0.8, 3.0}) {
            REQUIRE(heat_semigroup(u, p, tau) ==
                    Catch::Approx(gaussian_semigroup_oracle(n, 1.1, 0.9, p, tau))
                        .margin(1e-8));
        }
    }
}

TEST_CASE("symbol oracle values") {
    std::vector<double> e1{1.0};
    REQUIRE(symbol_oracle(e1, 0.0, 0.37).real() == Catch::Approx(1.0));
    REQUIRE(symbol_oracle(e1, 0.0, 0.37).imag() == Catch::Approx(0.0).margin(1e-15));
    // (1+i)^{1/2} = 2^{1/4} (cos π/8, sin π/8)
    const auto z = symbol_oracle(e1, 1.0, 0.5);
    REQUIRE(z.real() == Catch::Approx(std::pow(2.0, 0.25) * std::cos(M_PI / 8)).epsilon(1e-12));
    REQUIRE(z.imag() == Catch::Approx(std::pow(2.0, 0.25) * std::sin(M_PI / 8)).epsilon(1e-12));
    // s -> 1 continuity
    const auto znear = symbol_oracle(e1, 0.7, 0.999);
    REQUIRE(std::abs(znear - std::complex<double>(1.0, 0.7)) < 1e-2);
    REQUIRE_THROWS_AS(symbol_oracle(std::vector<double>{0.0}, 0.0, 0.5),
                      std::invalid_argument);
}

TEST_CASE("Balakrishnan route on constants and the pure cosine") {
    auto c = constant_field(1, 2.0);
    auto fp = make_frac_params(1, 0.3);
    SpaceTimePoint p({0.2}, 0.1);
    auto v = eval_hs_balakrishnan(c, p, fp);
    REQUIRE(std::abs(v.value) < 1e-12);

    // H^s cos(x1) = cos(x1): at the origin the Γ-identity gives exactly 1
    auto u = plane_wave({1.0}, 0.0);
    SpaceTimePoint o({0.0}, 0.0);
    for (double s : {0.3, 0.5, 0.75}) {
        auto fps = make_frac_params(1, s);
        auto hv = eval_hs_balakrishnan(u, o, fps);
        INFO("s=" << s << " err_est=" << hv.error_estimate);
        REQUIRE(hv.value == Catch::Approx(1.0).margin(1e-6));
    }
}

TEST_CASE("hypersingular route on constants and plane waves") {
    auto fp = make_frac_params(1, 0.3);
    SpaceTimePoint o({0.0}, 0.0);
    auto c = constant_field(1, 5.0);
    REQUIRE(std::abs(eval_hs_hypersingular(c, o, fp).value) < 1e-10);

    auto u = plane_wave({1.0}, 0.0);
    auto hv = eval_hs_hypersingular(u, o, fp);
    REQUIRE(hv.value == Catch::Approx(1.0).margin(1e-3));

    // space-time wave: H^{1/2} cos(x+t)(0,0) = Re[(1+i)^{1/2}] = 2^{1/4} cos(π/8)
    auto w = plane_wave({1.0}, 1.0);
    auto fph = make_frac_params(1, 0.5);
    auto hv2 = eval_hs_hypersingular(w, o, fph);
    REQUIRE(hv2.value == Catch::Approx(std::pow(2.0, 0.25) * std::cos(M_PI / 8)).margin(1e-3));
}

TEST_CASE("plane-wave exactness across routes and symbols") {
    // >= 5 (xi, rho) pairs within 1e-3 of the symbol oracle
    struct Pair {
        std::vector<double> xi;
        double rho;
    };
    const Pair pairs[] = {
        {{1.0}, 0.0}, {{1.0}, 1.0}, {{2.0}, -1.0}, {{0.7}, 0.4}, {{1.3}, 2.0},
    };
    SpaceTimePoint p({0.3}, 0.2);
    for (double s : {0.25, 0.5, 0.75}) {
        auto fp = make_frac_params(1, s);
        for (const auto& pr : pairs) {
            auto u = plane_wave(pr.xi, pr.rho);
            const double ref = plane_wave_hs_reference(pr.xi, pr.rho, s, p);
            const auto hb = eval_hs_balakrishnan(u, p, fp);
            const auto hh = eval_hs_hypersingular(u, p, fp);
            INFO("s=" << s << " xi=" << pr.xi[0] << " rho=" << pr.rho << " ref=" << ref
                      << " bal=" << hb.value << " hyp=" << hh.value);
            REQUIRE(hb.value == Catch::Approx(ref).margin(1e-3));
            REQUIRE(hh.value == Catch::Approx(ref).margin(1e-3));
        }
    }
}

TEST_CASE("route agreement on the corpus within reported error bars") {
    SpaceTimePoint p({0.25}, -0.1);
    std::vector<ScalarField> fields;
    fields.push_back(spacetime_gaussian(1, 1.0, 1.0, 1.0));
    fields.push_back(plane_wave({1.0}, 0.5));
    fields.push_back(caloric_quadratic(1));
    for (double s : {0.25, 0.5, 0.75}) {
        auto fp = make_frac_params(1, s);
        for (const auto& u : fields) {
            const auto hb = eval_hs_balakrishnan(u, p, fp);
            const auto hh = eval_hs_hypersingular(u, p, fp);
            INFO("s=" << s << " bal=" << hb.value << "±" << hb.error_estimate
                      << " hyp=" << hh.value << "±" << hh.error_estimate);
            REQUIRE(std::abs(hb.value - hh.value) <=
                    std::max(hb.error_estimate + hh.error_estimate, 2e-5));
        }
    }
}

TEST_CASE("linearity of H^s") {
    auto f = plane_wave({1.0}, 0.3);
    auto g = spacetime_gaussian(1, 1.0, 0.9, 1.2);
    auto fp = make_frac_params(1, 0.6);
    SpaceTimePoint p({0.1}, 0.05);
    RngStream r(3, 1);
    for (int k = 0; k < 3; ++k) {
        const double a = 2.0 * r.uniform() - 1.0;
        const double b = 2.0 * r.uniform() - 1.0;
        auto h = linear_combination(a, f, b, g);
        const double lhs = eval_hs_balakrishnan(h, p, fp).value;
        const double rhs = a * eval_hs_balakrishnan(f, p, fp).value +
                           b * eval_hs_balakrishnan(g, p, fp).value;
        REQUIRE(lhs == Catch::Approx(rhs).margin(1e-7));
    }
}

TEST_CASE("translation invariance of H^s") {
    auto u = spacetime_gaussian(1, 1.0, 1.0, 1.0);
    auto fp = make_frac_params(1, 0.45);
    auto ut = translate(u, {0.6}, -0.4);
    SpaceTimePoint p({0.2}, 0.1);
    SpaceTimePoint pt({0.8}, -0.3);
    const double a = eval_hs_hypersingular(u, p, fp).value;
    const double b = eval_hs_hypersingular(ut, pt, fp).value;
    REQUIRE(a == Catch::Approx(b).margin(1e-8));
}

TEST_CASE("n=2 plane wave against the symbol") {
    auto u = plane_wave({1.0, 1.0}, 0.5);
    auto fp = make_frac_params(2, 0.5);
    SpaceTimePoint p({0.1, -0.2}, 0.05);
    const double ref = plane_wave_hs_reference(std::vector<double>{1.0, 1.0}, 0.5, 0.5, p);
    REQUIRE(eval_hs_balakrishnan(u, p, fp).value == Catch::Approx(ref).margin(1e-3));
    REQUIRE(eval_hs_hypersingular(u, p, fp).value == Catch::Approx(ref).margin(1e-3));
}

TEST_CASE("extension recovers the boundary datum and a field-independent ratio") {
    auto fp = make_frac_params(1, 0.5);
    std::vector<double> grid;
    for (int i = 0; i < 9; ++i) grid.push_back(0.8 * std::pow(0.5, i));

    // constant field: U(λ) ≡ c for every λ
    auto c = constant_field(1, 2.5);
    SpaceTimePoint p({0.0}, 0.0);
    REQUIRE(extension_U(c, p, 0.37, fp.s) == Catch::Approx(2.5).epsilon(1e-9));

    auto u1 = plane_wave({1.0}, 0.0);
    auto u2 = spacetime_gaussian(1, 1.0, 1.0, 1.0);
    SpaceTimePoint p1({0.0}, 0.0);
    SpaceTimePoint p2({0.3}, 0.1);
    auto r1 = extension_neumann_ratio(u1, p1, fp, grid);
    auto r2 = extension_neumann_ratio(u2, p2, fp, grid);
    INFO("ratio1=" << r1.ratio << " ratio2=" << r2.ratio);
    REQUIRE(r1.ratio == Catch::Approx(r2.ratio).epsilon(1e-2));
    // U(0+, p) -> u(p)
    REQUIRE(r1.u_recovered == Catch::Approx(u1(p1)).margin(1e-3));
    REQUIRE(r2.u_recovered == Catch::Approx(u2(p2)).margin(1e-3));
}

TEST_CASE("degenerate extension ratio is rejected") {
    auto c = constant_field(1, 1.0);  // H^s c = 0
    auto fp = make_frac_params(1, 0.5);
    std::vector<double> grid;
    for (int i = 0; i < 5; ++i) grid.push_back(0.4 * std::pow(0.5, i));
    REQUIRE_THROWS_AS(extension_neumann_ratio(c, SpaceTimePoint({0.0}, 0.0), fp, grid),
                      std::invalid_argument);
}
