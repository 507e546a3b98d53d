#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "parheat/dpp.hpp"

using namespace parheat;

namespace {

// cos(x) damped in time so the datum is globally bounded with decaying far-time reads
ScalarField cos_time_damped(int n) {
    ScalarField f;
    f.dim = n;
    f.bound = 1.0;
    f.smooth_center = SpaceTimePoint(std::vector<double>(n, 0.0), 0.0);
    f.eval = [](std::span<const double> x, double t) {
        return std::cos(x[0]) * std::exp(-t * t / 18.0);
    };
    return f;
}

ScalarField radial_gaussian_data(int n) {
    return spacetime_gaussian(n, 1.0, 0.8, 3.0);
}

}  // namespace

TEST_CASE("stencil mass is one and constants are a fixed point") {
    auto data = constant_field(1, 2.5);
    auto slab = make_value_slab(1, -1.0, 1.0, 17, 0.0, 1.0, 16, 0.25, data);
    std::fill(slab.values.begin(), slab.values.end(), 2.5);
    auto fp = make_frac_params(1, 0.5);
    GameConfig cfg;
    auto res = dpp_apply(slab, cfg, fp);
    DppOperator op(slab, cfg, fp);
    REQUIRE(op.stencil_mass() == Catch::Approx(1.0).margin(1e-7));
    REQUIRE(res.residual < 1e-6);
}

TEST_CASE("constant data converges in one sweep") {
    auto data = constant_field(1, -1.3);
    auto slab = make_value_slab(1, -1.0, 1.0, 17, 0.0, 1.0, 16, 0.25, data);
    std::fill(slab.values.begin(), slab.values.end(), -1.3);
    auto fp = make_frac_params(1, 0.5);
    GameConfig cfg;
    auto [sol, log] = dpp_solve(std::move(slab), cfg, fp, 1e-6, 50);
    REQUIRE(log.converged);
    REQUIRE(log.sweeps == 1);
}

TEST_CASE("comparison principle: values stay within the data range") {
    auto data = cos_time_damped(1);
    auto slab = make_value_slab(1, -1.5, 1.5, 25, 0.0, 1.0, 20, 0.3, data);
    auto fp = make_frac_params(1, 0.5);
    GameConfig cfg;
    auto [sol, log] = dpp_solve(std::move(slab), cfg, fp, 1e-8, 120);
    REQUIRE(log.converged);
    for (double v : sol.values) {
        REQUIRE(v <= 1.0 + 1e-9);
        REQUIRE(v >= -1.0 - 1e-9);
    }
}

TEST_CASE("monotone data ordering is preserved sweep by sweep") {
    auto f = cos_time_damped(1);
    ScalarField g = f;
    g.eval = [f](std::span<const double> x, double t) { return f.eval(x, t) + 0.4; };
    g.bound = f.bound + 0.4;
    auto sf = make_value_slab(1, -1.0, 1.0, 17, 0.0, 0.8, 12, 0.3, f);
    auto sg = make_value_slab(1, -1.0, 1.0, 17, 0.0, 0.8, 12, 0.3, g);
    auto fp = make_frac_params(1, 0.4);
    GameConfig cfg;
    for (int sweep = 0; sweep < 6; ++sweep) {
        auto rf = dpp_apply(sf, cfg, fp);
        auto rg = dpp_apply(sg, cfg, fp);
        sf = std::move(rf.slab);
        sg = std::move(rg.slab);
        for (std::size_t i = 0; i < sf.values.size(); ++i)
            REQUIRE(sf.values[i] <= sg.values[i] + 1e-12);
    }
}

TEST_CASE("residual decay is geometric with the exit-mass rate") {
    auto data = cos_time_damped(1);
    auto slab = make_value_slab(1, -1.0, 1.0, 17, 0.0, 1.0, 16, 0.3, data);
    auto fp = make_frac_params(1, 0.5);
    GameConfig cfg;
    auto [sol, log] = dpp_solve(std::move(slab), cfg, fp, 1e-10, 200);
    REQUIRE(log.converged);
    const double p_exit = exit_mass_bound(fp, 0.3, 1.0);
    REQUIRE(p_exit > 0.0);
    // measured ratio over the geometric phase
    for (std::size_t i = 3; i + 2 < log.residuals.size(); ++i) {
        const double ratio = log.residuals[i + 1] / log.residuals[i];
        REQUIRE(ratio <= 1.0 - 0.5 * p_exit + 1e-9);
    }
}

TEST_CASE("converged slab satisfies the DPP identity under independent quadrature") {
    auto data = cos_time_damped(1);
    auto slab = make_value_slab(1, -1.5, 1.5, 31, 0.0, 1.0, 24, 0.3, data);
    auto fp = make_frac_params(1, 0.5);
    GameConfig cfg;
    auto [sol, log] = dpp_solve(std::move(slab), cfg, fp, 1e-9, 150);
    REQUIRE(log.converged);

    // independent route: adaptive exterior quadrature against the interpolated slab
    ScalarField sf;
    sf.dim = 1;
    sf.bound = 2.0;
    sf.smooth_center = SpaceTimePoint({0.0}, 0.0);
    sf.eval = [&sol](std::span<const double> x, double t) { return slab_read(sol, x, t); };
    for (double xq : {-0.6, 0.05, 0.8}) {
        SpaceTimePoint p({xq}, 0.21);
        const double rhs = mean_value_directional_pair(sf, p, sol.eps, Direction({1.0}),
                                                       Direction({1.0}), fp,
                                                       TimeOrientation::Forward);
        const double lhs = slab_read(sol, p.x, p.t);
        INFO("x=" << xq << " lhs=" << lhs << " rhs=" << rhs);
        REQUIRE(lhs == Catch::Approx(rhs).margin(5e-3));
    }
}

TEST_CASE("walk estimate agrees with the deterministic solver") {
    auto data = cos_time_damped(1);
    auto slab = make_value_slab(1, -1.5, 1.5, 31, 0.0, 1.0, 24, 0.3, data);
    auto fp = make_frac_params(1, 0.5);
    GameConfig cfg;
    auto [sol, log] = dpp_solve(std::move(slab), cfg, fp, 1e-9, 150);
    REQUIRE(log.converged);
    for (double xq : {-0.5, 0.3}) {
        SpaceTimePoint p({xq}, 0.0);
        auto we = walk_estimate(p, sol, cfg, fp, 4000, 42);
        const double interp_bound = 0.02;  // h²/8·|v_xx| + k/2·|v_t| scale at this grid
        const double solved = slab_read(sol, p.x, p.t);
        INFO("x=" << xq << " walk=" << we.value << "±" << we.std_error
                  << " dpp=" << solved);
        REQUIRE(std::abs(we.value - solved) <= 3.0 * we.std_error + interp_bound);
    }
}

TEST_CASE("mean walk steps decrease as eps grows") {
    auto data = cos_time_damped(1);
    auto fp = make_frac_params(1, 0.5);
    GameConfig cfg;
    SpaceTimePoint p({0.0}, 0.0);
    double prev = 1e300;
    for (double eps : {0.1, 0.2, 0.4}) {
        auto slab = make_value_slab(1, -1.0, 1.0, 9, 0.0, 1.0, 8, eps, data);
        auto we = walk_estimate(p, slab, cfg, fp, 3000, 7);
        INFO("eps=" << eps << " steps=" << we.mean_steps);
        REQUIRE(we.mean_steps < prev);
        prev = we.mean_steps;
    }
}

TEST_CASE("tug-of-war with even data stays even") {
    auto data = radial_gaussian_data(1);
    auto slab = make_value_slab(1, -1.2, 1.2, 25, 0.0, 0.8, 16, 0.3, data);
    auto fp = make_frac_params(1, 0.5);
    GameConfig cfg;
    cfg.mode = GameMode::TugOfWar;
    cfg.sphere_grid = make_sphere_grid(1, 1);
    auto [sol, log] = dpp_solve(std::move(slab), cfg, fp, 1e-9, 150);
    REQUIRE(log.converged);
    for (int i = 0; i < sol.nx; ++i) {
        for (int j = 0; j < sol.nt; ++j) {
            const double a = sol.values[sol.index(i, j)];
            const double b = sol.values[sol.index(sol.nx - 1 - i, j)];
            REQUIRE(a == Catch::Approx(b).margin(1e-9));
        }
    }
}

TEST_CASE("tug-of-war values sit between the pure-strategy ray means") {
    auto data = cos_time_damped(1);
    auto slab = make_value_slab(1, -1.0, 1.0, 17, 0.0, 0.8, 12, 0.3, data);
    auto fp = make_frac_params(1, 0.5);
    GameConfig tug;
    tug.mode = GameMode::TugOfWar;
    tug.sphere_grid = make_sphere_grid(1, 1);
    // seed both with the same start and compare one sweep against the ray extremes
    DppOperator op(slab, tug, fp);
    ValueSlab out = slab;
    op.apply(slab, out);
    // pure strategies: rays +1 and -1 with the same stencil
    GameConfig walk;
    walk.mode = GameMode::LinearWalk;
    for (std::size_t idx = 0; idx < out.values.size(); ++idx) {
        (void)idx;  // bounds checked below via min/max of ray means computed jointly
    }
    // the tug value at each node is the average of max and min over the two rays, so
    // it lies between them by construction; verify against a manual ray sweep
    dpp_detail::Stencil ray = dpp_detail::build_stencil_ray(
        fp.s, slab.eps, kappa_of(make_frac_params(1, fp.s)) * std::pow(slab.eps, 2.0 * fp.s),
        28, tug.mass_tol);
    for (int i = 0; i < slab.nx; i += 4) {
        for (int j = 0; j < slab.nt; j += 4) {
            const double t = slab.tat(j);
            std::vector<double> xr(1);
            double aplus = 0.0, aminus = 0.0;
            for (const auto& pt : ray.pts) {
                xr[0] = slab.xat(i) + pt.dw;
                aplus += pt.weight * slab_read(slab, xr, t + pt.dt);
                xr[0] = slab.xat(i) - pt.dw;
                aminus += pt.weight * slab_read(slab, xr, t + pt.dt);
            }
            const double tv = out.values[out.index(i, j)];
            REQUIRE(tv >= std::min(aplus, aminus) - 1e-10);
            REQUIRE(tv <= std::max(aplus, aminus) + 1e-10);
        }
    }
}

TEST_CASE("tug-of-war in two dimensions preserves the square symmetry") {
    auto data = radial_gaussian_data(2);
    auto slab = make_value_slab(2, -1.0, 1.0, 11, 0.0, 0.5, 6, 0.35, data);
    auto fp = make_frac_params(2, 0.5);
    GameConfig cfg;
    cfg.mode = GameMode::TugOfWar;
    cfg.sphere_grid = make_sphere_grid(2, 4);
    auto [sol, log] = dpp_solve(std::move(slab), cfg, fp, 1e-7, 80);
    REQUIRE(log.converged);
    // radially symmetric data about the origin: value(x,y) = value(y,x)
    for (int a = 0; a < sol.nx; ++a)
        for (int b = 0; b < sol.nx; ++b)
            for (int j = 0; j < sol.nt; j += 2) {
                const double v1 = sol.values[sol.index(static_cast<std::size_t>(a) * sol.nx + b, j)];
                const double v2 = sol.values[sol.index(static_cast<std::size_t>(b) * sol.nx + a, j)];
                REQUIRE(v1 == Catch::Approx(v2).margin(1e-8));
            }
    REQUIRE(log.refined_value_drift < 0.05);
}

TEST_CASE("Monte Carlo backend agrees with the quadrature stencil") {
    auto data = cos_time_damped(1);
    auto slab = make_value_slab(1, -1.0, 1.0, 17, 0.0, 1.0, 12, 0.3, data);
    auto fp = make_frac_params(1, 0.5);
    GameConfig qcfg;
    GameConfig mcfg;
    mcfg.backend = DppBackend::MonteCarlo;
    mcfg.mc_draws = 40000;
    mcfg.mc_seed = 11;
    auto [qs, ql] = dpp_solve(slab, qcfg, fp, 1e-9, 150);
    auto [ms, ml] = dpp_solve(slab, mcfg, fp, 1e-9, 150);
    double worst = 0.0;
    for (std::size_t i = 0; i < qs.values.size(); ++i)
        worst = std::max(worst, std::abs(qs.values[i] - ms.values[i]));
    INFO("max deviation " << worst);
    // sup-norm over ~200 nodes of per-node MC noise ~1/sqrt(draws): allow ~5 sigma
    REQUIRE(worst < 0.03);
}

TEST_CASE("solver is reproducible across thread counts") {
    auto data = cos_time_damped(1);
    auto slab = make_value_slab(1, -1.0, 1.0, 17, 0.0, 1.0, 12, 0.3, data);
    auto fp = make_frac_params(1, 0.5);
    GameConfig cfg;
    auto [s1, l1] = dpp_solve(slab, cfg, fp, 1e-9, 100, {}, 1);
    auto [s8, l8] = dpp_solve(slab, cfg, fp, 1e-9, 100, {}, 8);
    REQUIRE(s1.values == s8.values);
}

TEST_CASE("linear walk rejects unsupported dimensions") {
    auto data = constant_field(2, 0.0);
    auto slab = make_value_slab(2, -1.0, 1.0, 9, 0.0, 1.0, 8, 0.3, data);
    auto fp = make_frac_params(2, 0.5);
    GameConfig cfg;  // linear walk
    REQUIRE_THROWS_AS(dpp_apply(slab, cfg, fp), std::invalid_argument);
}
