#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "parheat/quadrature.hpp"
#include "parheat/rng.hpp"

using namespace parheat;

TEST_CASE("adaptive GK15 on smooth integrands") {
    auto res = quad::integrate([](double x) { return std::exp(-x * x) * std::cos(3.0 * x); },
                               -6.0, 6.0, 1e-12, 1e-14, 500);
    const double exact = std::sqrt(M_PI) * std::exp(-9.0 / 4.0);
    REQUIRE(res.converged);
    REQUIRE(res.value == Catch::Approx(exact).epsilon(1e-11));
}

TEST_CASE("adaptive GK15 resolves an integrable endpoint power") {
    // ∫_0^1 x^{-1/2} dx = 2
    auto res = quad::integrate([](double x) { return 1.0 / std::sqrt(x); }, 1e-300, 1.0,
                               1e-9, 1e-10, 2000);
    REQUIRE(res.value == Catch::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("breakpoint list integration") {
    const double breaks[4] = {0.0, 0.1, 1.0, 2.0};
    auto res = quad::integrate_cells([](double x) { return x * x; }, breaks, 1e-12, 1e-14, 100);
    REQUIRE(res.value == Catch::Approx(8.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("Gauss-Hermite nodes integrate Gaussian moments") {
    for (int m : {8, 20, 40, 48}) {
        const auto& gh = quad::gauss_hermite(m);
        double w0 = 0.0, w2 = 0.0, cosi = 0.0;
        for (int i = 0; i < m; ++i) {
            w0 += gh.weights[i];
            w2 += gh.weights[i] * gh.nodes[i] * gh.nodes[i];
            cosi += gh.weights[i] * std::cos(2.0 * gh.nodes[i]);
        }
        REQUIRE(w0 == Catch::Approx(std::sqrt(M_PI)).epsilon(1e-13));
        REQUIRE(w2 == Catch::Approx(0.5 * std::sqrt(M_PI)).epsilon(1e-12));
        if (m >= 20) {
            // ∫ e^{-x^2} cos(2x) dx = √π e^{-1}
            REQUIRE(cosi == Catch::Approx(std::sqrt(M_PI) * std::exp(-1.0)).epsilon(1e-10));
        }
    }
}

TEST_CASE("rng streams are reproducible and distinct") {
    RngStream a(42, 0), b(42, 0), c(42, 1);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
    bool differs = false;
    RngStream a2(42, 0);
    for (int i = 0; i < 100; ++i) differs |= (a2.next_u64() != c.next_u64());
    REQUIRE(differs);
}

TEST_CASE("rng gamma sampler matches moments") {
    RngStream r(7, 3);
    for (double shape : {0.4, 0.9, 1.7}) {
        const int n = 200000;
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double g = r.gamma(shape);
            sum += g;
            sum2 += g * g;
        }
        const double mean = sum / n;
        const double var = sum2 / n - mean * mean;
        REQUIRE(mean == Catch::Approx(shape).margin(0.02 * std::max(1.0, shape)));
        REQUIRE(var == Catch::Approx(shape).margin(0.06 * std::max(1.0, shape)));
    }
}
