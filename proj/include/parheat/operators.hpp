#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "parheat/fields.hpp"
#include "parheat/kernel.hpp"
#include "parheat/parallel.hpp"
#include "parheat/quadrature.hpp"
#include "parheat/special.hpp"

namespace parheat {

enum class OperatorRoute { Hypersingular, Balakrishnan, Symbol, Infinity };

struct OperatorValue {
    double value = 0.0;
    double error_estimate = 0.0;
    OperatorRoute route = OperatorRoute::Balakrishnan;
};

namespace detail {

struct TimeIntegral {
    double value = 0.0;
    double error = 0.0;
    bool converged = true;
};

// ---- small-time closed-form model ----
//
// Below tau_cut the integrand τ^{-1-s} G(τ) sits at the floating-point noise floor of
// G (G ~ c·τ against an absolute noise ~eps·|u|), so G is modeled as Σ c_i τ^{e_i}
// fitted from samples at tau_cut·2^{-j} and integrated exactly. A pinned analytic
// leading coefficient replaces the first fitted sample when available.
template <class G>
TimeIntegral small_time_model(G&& g, double s, std::span<const double> exps, double tau_cut,
                              std::optional<double> c0_analytic) {
    const int k = static_cast<int>(exps.size());
    const int fit = c0_analytic ? k - 1 : k;
    std::array<double, 3> c{0.0, 0.0, 0.0};
    if (c0_analytic) c[0] = *c0_analytic;

    if (fit > 0) {
        std::array<double, 3> tau{}, rhs{};
        const int off = c0_analytic ? 1 : 0;
        for (int j = 0; j < fit; ++j) {
            tau[j] = tau_cut * std::pow(0.5, j);
            rhs[j] = g(tau[j]);
            if (c0_analytic) rhs[j] -= c[0] * std::pow(tau[j], exps[0]);
        }
        double A[3][3], b[3];
        for (int j = 0; j < fit; ++j) {
            for (int i = 0; i < fit; ++i) A[j][i] = std::pow(tau[j], exps[off + i]);
            b[j] = rhs[j];
        }
        for (int col = 0; col < fit; ++col) {
            int piv = col;
            for (int row = col + 1; row < fit; ++row)
                if (std::abs(A[row][col]) > std::abs(A[piv][col])) piv = row;
            std::swap(A[col], A[piv]);
            std::swap(b[col], b[piv]);
            for (int row = col + 1; row < fit; ++row) {
                const double m = A[row][col] / A[col][col];
                for (int i = col; i < fit; ++i) A[row][i] -= m * A[col][i];
                b[row] -= m * b[col];
            }
        }
        for (int row = fit - 1; row >= 0; --row) {
            double v = b[row];
            for (int i = row + 1; i < fit; ++i) v -= A[row][i] * c[off + i];
            c[off + row] = v / A[row][row];
        }
    }

    TimeIntegral out;
    for (int i = 0; i < k; ++i) {
        const double p = exps[i] - s;
        if (p <= 1e-12) {
            out.converged = false;
            out.error = std::numeric_limits<double>::infinity();
            return out;
        }
        out.value += c[i] * std::pow(tau_cut, p) / p;
    }
    const double th = 0.65 * tau_cut;
    double model_th = 0.0;
    for (int i = 0; i < k; ++i) model_th += c[i] * std::pow(th, exps[i]);
    const double resid = std::abs(g(th) - model_th);
    const double e_next = exps[k - 1] + 0.5;
    out.error = 2.0 * resid * std::pow(tau_cut / th, e_next) *
                std::pow(tau_cut, e_next - s) / (e_next - s);
    return out;
}

// ∫_lo^hi τ^{-1-s} G(τ) dτ with 0 < lo < hi, via τ = e^{-r}. The integrand is smooth,
// so the subdivision count is capped: G carries inner-quadrature noise that adaptive
// refinement cannot (and need not) resolve past a few hundred cells.
template <class G>
TimeIntegral banded_time_integral(G&& g, double s, double lo, double hi, double rel_tol,
                                  double abs_tol, int max_subdivisions) {
    auto res = quad::integrate(
        [&](double r) { return std::exp(s * r) * g(std::exp(-r)); }, -std::log(hi),
        -std::log(lo), rel_tol, abs_tol, std::min(max_subdivisions, 400));
    return {res.value, res.error, res.converged};
}

// ---- far-field ladder ----
//
// ∫_T0^∞ τ^{-1-s} G(τ) dτ for G(τ) = u(p) - M(τ), M a Gaussian-weighted average of a
// bounded field. Integrates block [T,4T] at a time; once the probes of M fit the
// settled model c_inf + C·τ^{-n/2} within tolerance, the remaining tail is taken in
// closed form from the model and the misfit goes into the error estimate. Handles
// fields whose averages die out (waves, clamps, Gaussians) exactly where it matters
// and stays honest (wide error bar) for averages that never settle.
template <class G>
TimeIntegral far_field_time_integral(G&& g, double u_at_p, double bound, int n, double s,
                                     double t0, double rel_tol, double abs_tol,
                                     int max_subdivisions, int max_blocks = 8) {
    TimeIntegral out;
    double T = t0;
    double resid = 2.0 * bound;
    double c_inf = 0.0, c_pow = 0.0;
    const double half_n = 0.5 * n;
    for (int k = 0; k < max_blocks; ++k) {
        // probes of M(τ) = u(p) - G(τ) across the next block
        const double m1 = u_at_p - g(T);
        const double m2 = u_at_p - g(2.0 * T);
        const double m4 = u_at_p - g(4.0 * T);
        // fit c_inf + C·τ^{-n/2} through (T, m1), (4T, m4); validate at 2T
        const double a1 = std::pow(T, -half_n), a4 = std::pow(4.0 * T, -half_n);
        c_pow = (m1 - m4) / (a1 - a4);
        c_inf = m1 - c_pow * a1;
        resid = std::abs(m2 - (c_inf + c_pow * std::pow(2.0 * T, -half_n)));

        const double tail_scale = std::pow(T, -s) / s;
        const double tail_err = (3.0 * resid + 1e-14 * bound) * tail_scale;
        if (tail_err < std::max(abs_tol, rel_tol * std::abs(out.value)) || k == max_blocks - 1) {
            out.value += (u_at_p - c_inf) * tail_scale -
                         c_pow * std::pow(T, -(s + half_n)) / (s + half_n);
            out.error += tail_err;
            return out;
        }
        auto blk = banded_time_integral(g, s, T, 4.0 * T, rel_tol, 0.25 * abs_tol,
                                        std::min(max_subdivisions, 120));
        out.value += blk.value;
        out.error += blk.error;
        out.converged = out.converged && blk.converged;
        T *= 4.0;
    }
    return out;
}

// ---- full singular-time assembly ----
//
// ∫_0^∞ τ^{-1-s} G(τ) dτ: closed-form model on [0, tau_cut], log substitution on
// [tau_cut, split], settled-model ladder beyond split.
template <class G>
TimeIntegral singular_time_integral(G&& g, double u_at_p, double bound, int n, double s,
                                    std::span<const double> exps,
                                    std::optional<double> c0_analytic,
                                    const QuadratureSpec& q) {
    const double split = q.near_origin_split;
    const double tau_cut = std::min(q.small_tau_cut, split / 16.0);

    TimeIntegral out = small_time_model(g, s, exps, tau_cut, c0_analytic);
    if (!out.converged) return out;

    auto mid = banded_time_integral(g, s, tau_cut, split, q.rel_tol, 0.25 * q.abs_tol,
                                    q.max_subdivisions);
    out.value += mid.value;
    out.error += mid.error;
    out.converged = out.converged && mid.converged;

    auto far = far_field_time_integral(g, u_at_p, bound, n, s, split, q.rel_tol,
                                       0.5 * q.abs_tol, q.max_subdivisions);
    out.value += far.value;
    out.error += far.error;
    out.converged = out.converged && far.converged;
    return out;
}

// ---- spatial averages against the Gaussian weight ----

struct SphereRule {
    std::vector<std::vector<double>> dirs;
    std::vector<double> weights;
};

inline SphereRule sphere_rule(int n, int points) {
    SphereRule rule;
    if (n == 1) {
        rule.dirs = {{1.0}, {-1.0}};
        rule.weights = {0.5, 0.5};
        return rule;
    }
    if (n == 2) {
        const int m = std::max(4, points + (points % 2));  // even count keeps antipodes
        for (int j = 0; j < m; ++j) {
            const double th = 2.0 * M_PI * j / m;
            rule.dirs.push_back({std::cos(th), std::sin(th)});
            rule.weights.push_back(1.0 / m);
        }
        return rule;
    }
    if (n == 3) {
        // Gauss-Legendre in cos(phi) x uniform azimuth
        const int nb = std::max(4, points / 2);
        const int na = 2 * nb;
        std::vector<double> mu(nb), wmu(nb);
        for (int i = 0; i < nb; ++i) {
            double z = std::cos(M_PI * (i + 0.75) / (nb + 0.5));
            double pp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p1 = 1.0, p2 = 0.0;
                for (int j = 0; j < nb; ++j) {
                    const double p3 = p2;
                    p2 = p1;
                    p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
                }
                pp = nb * (z * p1 - p2) / (z * z - 1.0);
                const double z1 = z;
                z = z1 - p1 / pp;
                if (std::abs(z - z1) < 1e-15) break;
            }
            mu[i] = z;
            wmu[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        }
        for (int i = 0; i < nb; ++i) {
            const double sphi = std::sqrt(std::max(0.0, 1.0 - mu[i] * mu[i]));
            for (int j = 0; j < na; ++j) {
                const double th = 2.0 * M_PI * j / na;
                rule.dirs.push_back({sphi * std::cos(th), sphi * std::sin(th), mu[i]});
                rule.weights.push_back(wmu[i] / (2.0 * na));
            }
        }
        return rule;
    }
    throw std::invalid_argument("sphere_rule: n > 3 not supported");
}

// (2/Γ(n/2)) ∫_lo^hi r^{n-1} e^{-r²} favg(r) dr: the radial reduction of
// ∫ f(w) W_n(w,τ) dw after w = 2√τ r ω, with favg the sphere average at radius r.
template <class FAvg>
quad::Result gaussian_radial_integral(FAvg&& favg, int n, double r_lo, double r_hi,
                                      double rel_tol, double abs_tol, int max_subdivisions) {
    auto res = quad::integrate(
        [&](double r) { return std::pow(r, n - 1) * std::exp(-r * r) * favg(r); }, r_lo,
        r_hi, rel_tol, abs_tol, max_subdivisions);
    const double norm = 2.0 / std::tgamma(0.5 * n);
    res.value *= norm;
    res.error *= norm;
    return res;
}

inline int max_inner_subdivisions(const QuadratureSpec& q) {
    return std::min(q.max_subdivisions, 800);
}

// Cached direction sets (same synchronization idiom as the Hermite cache).
inline const SphereRule& sphere_rule_cached(int n, int points) {
    static std::map<std::pair<int, int>, SphereRule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find({n, points});
    if (it != cache.end()) return it->second;
    return cache.emplace(std::make_pair(n, points), sphere_rule(n, points)).first->second;
}

// u(p) - ½∫[u(x+w,t-τ)+u(x-w,t-τ)] W_n(w,τ) dw, by adaptive radial quadrature.
// Equals the half symmetrized second difference ½∫δ·W_n dw. time_sign=-1 reads the
// past (backward kernel support); +1 reads the future. The sphere average doubles its
// direction count until stable within a weight-aware tolerance: the angular bandwidth
// grows with the displacement radius, but so does the Gaussian damping.
inline double gaussian_second_difference(const ScalarField& u, const SpaceTimePoint& p,
                                         double tau, const SphereRule& rule,
                                         double inner_rel, double inner_abs,
                                         const QuadratureSpec& q,
                                         double w_cap = std::numeric_limits<double>::infinity(),
                                         double time_sign = -1.0) {
    const int n = u.dim;
    const double scale = 2.0 * std::sqrt(tau);
    const double tshift = p.t + time_sign * tau;
    const double u2 = 2.0 * u.eval(p.x, p.t);
    std::vector<double> xp(n), xm(n);
    auto avg_with = [&](const SphereRule& rl, double d) {
        double acc = 0.0;
        for (std::size_t k = 0; k < rl.dirs.size(); ++k) {
            const auto& dir = rl.dirs[k];
            for (int i = 0; i < n; ++i) {
                xp[i] = p.x[i] + d * dir[i];
                xm[i] = p.x[i] - d * dir[i];
            }
            acc += rl.weights[k] * (u2 - u.eval(xp, tshift) - u.eval(xm, tshift));
        }
        return acc;
    };
    auto favg = [&](double r) {
        const double d = scale * r;
        if (n == 1) return avg_with(rule, d);
        const double weight = std::pow(r, n - 1) * std::exp(-r * r);
        const double tol = 0.25 * inner_abs / std::max(weight, 1e-280);
        int m = static_cast<int>(rule.dirs.size());
        double prev = avg_with(rule, d);
        while (m < 256) {
            m *= 2;
            const double cur = avg_with(sphere_rule_cached(n, m), d);
            if (std::abs(cur - prev) <= std::max(tol, 4e-16 * std::abs(u2)) ||
                std::abs(cur - prev) <= 1e-12 * std::abs(cur)) {
                return cur;
            }
            prev = cur;
        }
        return prev;
    };
    const double r_hi = std::min(q.w_max, w_cap / scale);
    if (r_hi <= 0.0) return 0.0;
    return 0.5 *
           gaussian_radial_integral(favg, n, 0.0, r_hi, inner_rel, inner_abs,
                                    max_inner_subdivisions(q))
               .value;
}

inline int default_gh_points(int n, const QuadratureSpec& q) {
    if (q.gauss_hermite_points > 0) return q.gauss_hermite_points;
    return n == 1 ? 48 : (n == 2 ? 32 : 20);
}

}  // namespace detail

// ---- heat semigroup ----

// P_τ u(x,t) = ∫ W_n(x-w,τ) u(w, t-τ) dw, by tensor Gauss-Hermite in w = x + 2√τ y.
inline double heat_semigroup(const ScalarField& u, const SpaceTimePoint& p, double tau,
                             const QuadratureSpec& q = {}) {
    if (tau <= 0.0) throw std::invalid_argument("heat_semigroup: tau must be positive");
    const int n = u.dim;
    const int m = detail::default_gh_points(n, q);
    const auto& gh = quad::gauss_hermite(m);
    const double scale = 2.0 * std::sqrt(tau);
    const double tpast = p.t - tau;
    std::vector<double> w(n);
    const double norm = std::pow(M_PI, -0.5 * n);

    if (n == 1) {
        double acc = 0.0;
        for (int i = 0; i < m; ++i) {
            w[0] = p.x[0] + scale * gh.nodes[i];
            acc += gh.weights[i] * u.eval(w, tpast);
        }
        return norm * acc;
    }
    if (n == 2) {
        double acc = 0.0;
        for (int i = 0; i < m; ++i) {
            w[0] = p.x[0] + scale * gh.nodes[i];
            double row = 0.0;
            for (int j = 0; j < m; ++j) {
                w[1] = p.x[1] + scale * gh.nodes[j];
                row += gh.weights[j] * u.eval(w, tpast);
            }
            acc += gh.weights[i] * row;
        }
        return norm * acc;
    }
    if (n == 3) {
        double acc = 0.0;
        for (int i = 0; i < m; ++i) {
            w[0] = p.x[0] + scale * gh.nodes[i];
            double sl = 0.0;
            for (int j = 0; j < m; ++j) {
                w[1] = p.x[1] + scale * gh.nodes[j];
                double row = 0.0;
                for (int k = 0; k < m; ++k) {
                    w[2] = p.x[2] + scale * gh.nodes[k];
                    row += gh.weights[k] * u.eval(w, tpast);
                }
                sl += gh.weights[j] * row;
            }
            acc += gh.weights[i] * sl;
        }
        return norm * acc;
    }
    throw std::invalid_argument("heat_semigroup: n > 3 not supported");
}

// ---- symbol oracle ----

// Principal branch of (|ξ|² + iρ)^s; H^s applied to cos(x·ξ + ρt) equals
// Re[(|ξ|²+iρ)^s e^{i(x·ξ+ρt)}].
inline std::complex<double> symbol_oracle(std::span<const double> xi, double rho, double s) {
    const double x2 = norm2(xi);
    if (x2 == 0.0 && rho == 0.0)
        throw std::invalid_argument("symbol_oracle: (xi, rho) must be nonzero");
    return std::pow(std::complex<double>(x2, rho), s);
}

inline double plane_wave_hs_reference(std::span<const double> xi, double rho, double s,
                                      const SpaceTimePoint& p) {
    const double theta = dot(p.x, xi) + rho * p.t;
    const auto z = symbol_oracle(xi, rho, s);
    return std::real(z * std::exp(std::complex<double>(0.0, theta)));
}

// ---- Balakrishnan route ----

// H^s u(p) = s/Γ(1-s) ∫_0^∞ τ^{-1-s} (u(p) - P_τ u(p)) dτ. Gauss-Hermite semigroup
// nodes up to the split, analytic first-order model (∂_t - Δ)u(p)·τ below the cut,
// shared settled-model ladder beyond.
inline OperatorValue eval_hs_balakrishnan(const ScalarField& u, const SpaceTimePoint& p,
                                          const FracParams& fp, const QuadratureSpec& q = {}) {
    if (u.dim != fp.n) throw std::invalid_argument("eval_hs_balakrishnan: dimension mismatch");
    if (!u.in_smooth_region(p))
        throw FieldError("eval_hs_balakrishnan: point outside the smooth region");
    const double up = u.eval(p.x, p.t);
    const double split = q.near_origin_split;
    const double tau_cut = std::min(q.small_tau_cut, split / 16.0);

    auto G_gh = [&](double tau) { return up - heat_semigroup(u, p, tau, q); };
    std::optional<double> c0;
    if (u.has_derivatives()) c0 = u.dt_at(p) - u.laplacian_at(p);
    const double exps[2] = {1.0, 2.0};

    auto ti = detail::small_time_model(G_gh, fp.s, exps, tau_cut, c0);
    if (!ti.converged)
        throw QuadratureError("eval_hs_balakrishnan: non-integrable small-time model");
    auto mid = detail::banded_time_integral(G_gh, fp.s, tau_cut, split, q.rel_tol,
                                            0.25 * q.abs_tol, q.max_subdivisions);
    const auto rule = detail::sphere_rule(fp.n, q.sphere_points);
    const double inner_rel = std::min(1e-9, 0.1 * q.rel_tol);
    const double inner_abs = std::max(1e-15 * std::max(1.0, u.bound), 0.005 * q.abs_tol);
    auto G_gk = [&](double tau) {
        return detail::gaussian_second_difference(u, p, tau, rule, inner_rel, inner_abs, q);
    };
    auto far = detail::far_field_time_integral(G_gk, up, u.bound, fp.n, fp.s, split,
                                               q.rel_tol, 0.5 * q.abs_tol,
                                               q.max_subdivisions);

    OperatorValue out;
    out.route = OperatorRoute::Balakrishnan;
    out.value = fp.positive_prefactor * (ti.value + mid.value + far.value);
    out.error_estimate = fp.positive_prefactor * (ti.error + mid.error + far.error) +
                         1e-14 * std::abs(out.value) + u.bound * 4e-16;
    return out;
}

// ---- hypersingular route ----

// H^s u(p) = ½ ∬ [2u - u(x+w,t+τ) - u(x-w,t+τ)] K_{n,s}(w,-τ) dw dτ in the
// positive-kernel convention (backward support only): direct second differences in w
// at every τ node (adaptive radial rule), log/power substitutions in τ, empirical
// two-power model under the cut.
inline OperatorValue eval_hs_hypersingular(const ScalarField& u, const SpaceTimePoint& p,
                                           const FracParams& fp,
                                           const QuadratureSpec& q = {}) {
    if (u.dim != fp.n) throw std::invalid_argument("eval_hs_hypersingular: dimension mismatch");
    if (!u.in_smooth_region(p))
        throw FieldError("eval_hs_hypersingular: point outside the smooth region");
    const auto rule = detail::sphere_rule(fp.n, q.sphere_points);
    const double inner_rel = std::min(1e-9, 0.1 * q.rel_tol);
    const double inner_abs = std::max(1e-15 * std::max(1.0, u.bound), 0.005 * q.abs_tol);
    const double up = u.eval(p.x, p.t);
    auto G = [&](double tau) {
        return detail::gaussian_second_difference(u, p, tau, rule, inner_rel, inner_abs, q);
    };
    const double exps[2] = {1.0, 2.0};
    auto ti = detail::singular_time_integral(G, up, u.bound, fp.n, fp.s, exps, std::nullopt,
                                             q);
    if (!ti.converged && !std::isfinite(ti.error))
        throw QuadratureError("eval_hs_hypersingular: non-convergent quadrature");
    OperatorValue out;
    out.route = OperatorRoute::Hypersingular;
    out.value = fp.positive_prefactor * ti.value;
    out.error_estimate = fp.positive_prefactor * ti.error +
                         1e-14 * std::abs(out.value) + u.bound * 4e-16 +
                         4.0 * u.bound * std::erfc(q.w_max);
    return out;
}

inline OperatorValue eval_hs(const ScalarField& u, const SpaceTimePoint& p,
                             const FracParams& fp, OperatorRoute route,
                             const QuadratureSpec& q = {}) {
    switch (route) {
        case OperatorRoute::Hypersingular: return eval_hs_hypersingular(u, p, fp, q);
        case OperatorRoute::Balakrishnan: return eval_hs_balakrishnan(u, p, fp, q);
        default: throw std::invalid_argument("eval_hs: route must be hypersingular/balakrishnan");
    }
}

// Point-batch evaluation; items are independent and write disjoint slots, so results
// are identical for any thread count.
inline std::vector<OperatorValue> eval_hs_batch(
    std::span<const std::pair<const ScalarField*, SpaceTimePoint>> items,
    const FracParams& fp, OperatorRoute route, const QuadratureSpec& q = {},
    int threads = 1) {
    std::vector<OperatorValue> out(items.size());
    parallel_for(items.size(), threads, [&](std::size_t i) {
        out[i] = eval_hs(*items[i].first, items[i].second, fp, route, q);
    });
    return out;
}

// ---- extension problem (Neumann trace) ----

namespace detail {

// Robust Gaussian spatial average of u(·, t-τ) by the adaptive radial rule (used where
// Gauss-Hermite nodes cannot resolve the integrand, i.e. very large τ).
inline double gaussian_average(const ScalarField& u, const SpaceTimePoint& p, double tau,
                               const SphereRule& rule, double inner_rel, double inner_abs,
                               const QuadratureSpec& q) {
    const double up = u.eval(p.x, p.t);
    return up - gaussian_second_difference(u, p, tau, rule, inner_rel, inner_abs, q);
}

}  // namespace detail

struct ExtensionRatioReport {
    std::vector<double> lambda;   // interior grid points where the trace was formed
    std::vector<double> neumann;  // -λ^{1-2s} ∂_λ U(λ)
    double extrapolated = 0.0;    // λ -> 0 limit of the above (Richardson)
    double hs_value = 0.0;        // Balakrishnan reference H^s u(p)
    double ratio = 0.0;           // empirical c_s = extrapolated / hs_value
    double u_recovered = 0.0;     // Richardson limit of U(λ) as λ -> 0 (approaches u(p))
};

// U(λ,p) = (1/Γ(s)) ∫_0^∞ m^{s-1} e^{-m} P_{λ²/(4m)} u(p) dm (the substitution
// m = λ²/(4τ) of the extension integral is exact for the weight). Small m means
// huge τ; there the average is taken from the settled-model probes.
inline double extension_U(const ScalarField& u, const SpaceTimePoint& p, double lambda,
                          double s, const QuadratureSpec& q = {}) {
    if (lambda <= 0.0) throw std::invalid_argument("extension_U: lambda must be positive");
    const auto rule = detail::sphere_rule(u.dim, q.sphere_points);
    const double inner_rel = 1e-9;
    const double inner_abs = 1e-13 * std::max(1.0, u.bound);
    auto Pu = [&](double m) {
        return detail::gaussian_average(u, p, lambda * lambda / (4.0 * m), rule, inner_rel,
                                        inner_abs, q);
    };
    // settled average for tiny m (τ beyond the resolvable window)
    const double tau_far = 1e5;
    const double m_cut = lambda * lambda / (4.0 * tau_far);
    const double p1 = Pu(m_cut), p2 = Pu(0.5 * m_cut);
    const double c_inf = 0.5 * (p1 + p2);
    double head = gamma_p(s, m_cut) * std::tgamma(s) * c_inf;
    // [m_cut, 1]: m = y^{1/s} removes the m^{s-1} singularity
    auto mid = quad::integrate(
        [&](double y) {
            const double m = std::pow(y, 1.0 / s);
            return std::exp(-m) * Pu(m);
        },
        std::pow(m_cut, s), 1.0, q.rel_tol, q.abs_tol, q.max_subdivisions);
    auto tail = quad::integrate(
        [&](double m) { return std::pow(m, s - 1.0) * std::exp(-m) * Pu(m); }, 1.0, 60.0,
        q.rel_tol, q.abs_tol, q.max_subdivisions);
    return (head + mid.value / s + tail.value) / std::tgamma(s);
}

// Estimates -λ^{1-2s} ∂_λ U on the interior of a decreasing geometric λ grid, then
// Richardson-extrapolates with the leading correction O(λ^{2-2s}); λ^{1-2s} amplifies
// finite-difference noise for s > 1/2, which the geometric grid keeps in check.
inline ExtensionRatioReport extension_neumann_ratio(const ScalarField& u,
                                                    const SpaceTimePoint& p,
                                                    const FracParams& fp,
                                                    std::span<const double> lambda_grid,
                                                    const QuadratureSpec& q = {}) {
    if (lambda_grid.size() < 3)
        throw std::invalid_argument("extension_neumann_ratio: need at least 3 lambdas");
    for (std::size_t i = 0; i + 1 < lambda_grid.size(); ++i)
        if (lambda_grid[i + 1] >= lambda_grid[i])
            throw std::invalid_argument("extension_neumann_ratio: grid must decrease");

    std::vector<double> Uv(lambda_grid.size());
    for (std::size_t i = 0; i < lambda_grid.size(); ++i)
        Uv[i] = extension_U(u, p, lambda_grid[i], fp.s, q);

    ExtensionRatioReport rep;
    for (std::size_t i = 1; i + 1 < lambda_grid.size(); ++i) {
        const double hp = lambda_grid[i - 1] - lambda_grid[i];  // toward larger λ
        const double hm = lambda_grid[i] - lambda_grid[i + 1];
        const double dU = (Uv[i - 1] * hm * hm - Uv[i + 1] * hp * hp +
                           Uv[i] * (hp * hp - hm * hm)) /
                          (hp * hm * (hp + hm));
        rep.lambda.push_back(lambda_grid[i]);
        rep.neumann.push_back(-std::pow(lambda_grid[i], 1.0 - 2.0 * fp.s) * dU);
    }
    const double beta = 2.0 - 2.0 * fp.s;
    const std::size_t last = rep.lambda.size() - 1;
    const double lam_ratio = rep.lambda[last - 1] / rep.lambda[last];
    const double r = std::pow(lam_ratio, beta);
    rep.extrapolated = (r * rep.neumann[last] - rep.neumann[last - 1]) / (r - 1.0);

    const auto hs = eval_hs_balakrishnan(u, p, fp, q);
    rep.hs_value = hs.value;
    if (std::abs(hs.value) < 1e-10)
        throw std::invalid_argument("extension_neumann_ratio: H^s u(p) is degenerate (≈0)");
    rep.ratio = rep.extrapolated / hs.value;
    // Richardson limit of U itself: U(λ) = u(p) + O(λ^{2s})
    const std::size_t nu = Uv.size();
    const double ru = std::pow(lambda_grid[nu - 2] / lambda_grid[nu - 1], 2.0 * fp.s);
    rep.u_recovered = (ru * Uv[nu - 1] - Uv[nu - 2]) / (ru - 1.0);
    return rep;
}

}  // namespace parheat
