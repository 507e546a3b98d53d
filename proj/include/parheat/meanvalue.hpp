#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "parheat/operators.hpp"

namespace parheat {

// ---- mean value operator M^s_ε ----
//
// M^s_ε u(p) = ½ κ(n,s) ε^{2s} ∬_{(R^n×R_-)\C_ε^-} (u(x+w,t+τ)+u(x-w,t+τ)) K_{n,s}(w,-τ)
// computed through the exact rearrangement
//     M^s_ε u = u(p) - κ ε^{2s} (H^s u - Cyl_ε u),
// where Cyl_ε u = ½ ∬_{C_ε^-} δ(u,p,(w,τ)) k(w,τ) dw dτ is the kernel integral of the
// symmetrized second difference over the excluded backward cylinder. The full integral
// reuses the hypersingular machinery; nothing straddles the cylinder boundary.

namespace detail {

// prefactor-included cylinder integral: ∬_{0<τ<ε², |w|<ε} ½ δ·k dw dτ.
inline TimeIntegral cylinder_second_difference(const ScalarField& u, const SpaceTimePoint& p,
                                               double eps, const FracParams& fp,
                                               const QuadratureSpec& q,
                                               double time_sign = -1.0) {
    const auto rule = sphere_rule(fp.n, q.sphere_points);
    const double inner_rel = std::min(1e-9, 0.1 * q.rel_tol);
    const double inner_abs = std::max(1e-15 * std::max(1.0, u.bound), 0.005 * q.abs_tol);
    auto G = [&](double tau) {
        return gaussian_second_difference(u, p, tau, rule, inner_rel, inner_abs, q, eps,
                                          time_sign);
    };
    const double e2 = eps * eps;
    // below tau_cut the |w|<ε restriction is invisible (ε/(2√τ) > w_max), so the
    // unrestricted small-time model applies
    const double tau_cut = std::min({q.small_tau_cut, e2 / 16.0,
                                     e2 / (4.0 * q.w_max * q.w_max)});
    const double exps[2] = {1.0, 2.0};
    TimeIntegral out = small_time_model(G, fp.s, exps, tau_cut, std::nullopt);
    if (!out.converged) return out;
    auto band = banded_time_integral(G, fp.s, tau_cut, e2, q.rel_tol, 0.25 * q.abs_tol,
                                     q.max_subdivisions);
    out.value = fp.positive_prefactor * (out.value + band.value);
    out.error = fp.positive_prefactor * (out.error + band.error);
    out.converged = out.converged && band.converged;
    return out;
}

}  // namespace detail

struct MeanValueResult {
    double value = 0.0;
    double error_estimate = 0.0;
    double hs_value = 0.0;        // H^s u(p) used in the rearrangement
    double cylinder_term = 0.0;   // Cyl_ε u (prefactor included)
};

inline MeanValueResult mean_value_ms_full(const ScalarField& u, const SpaceTimePoint& p,
                                          double eps, const FracParams& fp,
                                          const QuadratureSpec& q = {}) {
    if (eps <= 0.0) throw std::invalid_argument("mean_value_ms: eps must be positive");
    if (!u.in_smooth_region(p, eps))
        throw FieldError("mean_value_ms: eps exceeds the smooth radius at p");
    const double kap = kappa_of(fp, q);
    const auto hs = eval_hs_hypersingular(u, p, fp, q);
    const auto cyl = detail::cylinder_second_difference(u, p, eps, fp, q);
    MeanValueResult out;
    out.hs_value = hs.value;
    out.cylinder_term = cyl.value;
    const double scale = kap * std::pow(eps, 2.0 * fp.s);
    out.value = u.eval(p.x, p.t) - scale * (hs.value - cyl.value);
    out.error_estimate = scale * (hs.error_estimate + cyl.error);
    return out;
}

inline double mean_value_ms(const ScalarField& u, const SpaceTimePoint& p, double eps,
                            const FracParams& fp, const QuadratureSpec& q = {}) {
    return mean_value_ms_full(u, p, eps, fp, q).value;
}

// ---- asymptotic expansion report ----

struct ExpansionReport {
    std::vector<double> eps_grid;
    std::vector<double> mean_values;
    std::vector<double> remainders;  // |u - M^s_ε u - κ ε^{2s} H^s u|
    double fitted_order = 0.0;       // log-log slope of remainder vs ε
    bool exact = false;              // all remainders at quadrature-noise level
};

// u - M^s_ε u - κ ε^{2s} H^s u over a decreasing ε grid; the rearrangement makes the
// remainder exactly κ ε^{2s}·Cyl_ε, which is what gets measured (no cancellation).
inline ExpansionReport expansion_report(const ScalarField& u, const SpaceTimePoint& p,
                                        const FracParams& fp, std::span<const double> eps_grid,
                                        const QuadratureSpec& q = {}) {
    if (eps_grid.size() < 3)
        throw std::invalid_argument("expansion_report: need at least 3 grid points");
    for (std::size_t i = 0; i + 1 < eps_grid.size(); ++i)
        if (eps_grid[i + 1] >= eps_grid[i])
            throw std::invalid_argument("expansion_report: eps grid must decrease");

    ExpansionReport rep;
    const double kap = kappa_of(fp, q);
    const double up = u.eval(p.x, p.t);
    const auto hs = eval_hs_hypersingular(u, p, fp, q);
    double noise_floor = 0.0;
    for (double eps : eps_grid) {
        const auto cyl = detail::cylinder_second_difference(u, p, eps, fp, q);
        const double scale = kap * std::pow(eps, 2.0 * fp.s);
        const double mv = up - scale * (hs.value - cyl.value);
        rep.eps_grid.push_back(eps);
        rep.mean_values.push_back(mv);
        rep.remainders.push_back(std::abs(up - mv - scale * hs.value));
        noise_floor = std::max(noise_floor, scale * (cyl.error + 10.0 * q.abs_tol));
    }
    double max_rem = 0.0;
    for (double r : rep.remainders) max_rem = std::max(max_rem, r);
    if (max_rem <= noise_floor) {
        rep.exact = true;  // order fit meaningless at the quadrature floor
        return rep;
    }
    // least-squares slope in log-log
    const std::size_t m = eps_grid.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double lx = std::log(rep.eps_grid[i]);
        const double ly = std::log(std::max(rep.remainders[i], 1e-300));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    rep.fitted_order = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return rep;
}

// ---- viscosity touching check ----

// v = φ inside the cylinder U, u outside (the auxiliary test function of the viscosity
// definitions). Closures are φ's, valid up to the cylinder boundary.
inline ScalarField splice_field(const ScalarField& u, const ScalarField& phi,
                                const Cylinder& U) {
    if (u.dim != phi.dim) throw FieldError("splice_field: dimension mismatch");
    ScalarField v;
    v.dim = u.dim;
    v.bound = std::max(u.bound, phi.bound);
    v.smooth_center = U.center;
    v.smooth_radius = std::min(phi.smooth_radius, U.radius);
    v.eval = [u, phi, U](std::span<const double> x, double t) {
        SpaceTimePoint p(std::vector<double>(x.begin(), x.end()), t);
        return cylinder_contains(U, p) ? phi.eval(x, t) : u.eval(x, t);
    };
    v.grad_x = phi.grad_x;
    v.hess_x = phi.hess_x;
    v.dt = phi.dt;
    return v;
}

struct TouchVerdict {
    int sign = 0;  // +1, -1, or 0 when |value| <= error
    double value = 0.0;
    double error = 0.0;
    bool touched_from_below = false;  // φ < u on the sampled punctured neighborhood
};

namespace detail {

// 2D/3D/4D Halton points for deterministic low-discrepancy sampling of the cylinder.
inline double radical_inverse(int base, unsigned long long i) {
    double f = 1.0, r = 0.0;
    while (i > 0) {
        f /= base;
        r += f * (i % base);
        i /= base;
    }
    return r;
}

}  // namespace detail

// Checks φ(p)=u(p) (tolerance 1e-12) and strict one-sided touching on a deterministic
// low-discrepancy sample of U \ {p}, then evaluates H^s of the spliced field at p and
// reports the sign with its error bar.
inline TouchVerdict viscosity_touch_check(const ScalarField& u, const ScalarField& phi,
                                          const SpaceTimePoint& p, const FracParams& fp,
                                          double U_radius, const QuadratureSpec& q = {},
                                          int sample_count = 4096) {
    const int n = u.dim;
    if (std::abs(u.eval(p.x, p.t) - phi.eval(p.x, p.t)) > 1e-12)
        throw FieldError("viscosity_touch_check: φ(p) != u(p)");
    Cylinder U{p, U_radius, CylinderVariant::Full};

    static constexpr int primes[4] = {2, 3, 5, 7};
    int above = 0, below = 0;
    for (int k = 1; k <= sample_count; ++k) {
        SpaceTimePoint s(std::vector<double>(n, 0.0), 0.0);
        double r2 = 0.0;
        for (int d = 0; d < n; ++d) {
            const double c = 2.0 * detail::radical_inverse(primes[d], k) - 1.0;
            s.x[d] = p.x[d] + U_radius * c;
            r2 += c * c;
        }
        if (r2 >= 1.0) continue;  // outside the spatial ball
        s.t = p.t + U_radius * U_radius *
                        (2.0 * detail::radical_inverse(primes[3], k) - 1.0);
        if (spacetime_dist(s, p) < 1e-9) continue;
        const double du = u.eval(s.x, s.t) - phi.eval(s.x, s.t);
        if (du > 0)
            ++above;
        else if (du < 0)
            ++below;
    }
    if (above > 0 && below > 0)
        throw FieldError("viscosity_touch_check: touching condition violated on the sample");

    auto v = splice_field(u, phi, U);
    // the spliced field is only C^{2,1} up to the cylinder boundary; keep the smooth
    // radius there so the operator's smoothness check passes at p
    v.smooth_radius = U_radius;
    v.smooth_center = p;
    const auto hs = eval_hs_hypersingular(v, p, fp, q);
    TouchVerdict out;
    out.value = hs.value;
    out.error = hs.error_estimate;
    out.touched_from_below = below == 0;  // u - φ >= 0 around p
    out.sign = std::abs(hs.value) <= hs.error_estimate ? 0 : (hs.value > 0 ? 1 : -1);
    return out;
}

}  // namespace parheat
