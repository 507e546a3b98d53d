#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "parheat/kernel.hpp"
#include "parheat/parallel.hpp"
#include "parheat/quadrature.hpp"
#include "parheat/rng.hpp"
#include "parheat/special.hpp"

namespace parheat {

// ---- one-sided stable subordinator ----

namespace ctrw_detail {

// Kanter's integrand A(u) for the positive stable law with E[e^{-λD}] = exp(-λ^s):
// A(u) = sin(su)^{s/(1-s)} · sin((1-s)u) / sin(u)^{1/(1-s)}, u in (0,π).
inline double kanter_a(double u, double s) {
    const double oms = 1.0 - s;
    return std::pow(std::sin(s * u), s / oms) * std::sin(oms * u) /
           std::pow(std::sin(u), 1.0 / oms);
}

inline double kanter_a_min(double s) {
    // A(0+) = (1-s) s^{s/(1-s)}; A increases on (0,π)
    return (1.0 - s) * std::pow(s, s / (1.0 - s));
}

}  // namespace ctrw_detail

// Draws D with E[e^{-τD}] = exp(-τ^s) by the classical two-uniform transformation
// (U uniform on (0,π), E standard exponential).
inline double sample_stable_subordinator(double s, RngStream& rng) {
    if (!(s > 0.0 && s < 1.0))
        throw std::invalid_argument("sample_stable_subordinator: s must lie in (0,1)");
    const double u = M_PI * rng.uniform_open();
    const double e = rng.exponential();
    return std::pow(ctrw_detail::kanter_a(u, s) / e, (1.0 - s) / s);
}

// ---- coupled space-time jump ----

struct CoupledJump {
    std::vector<double> w;  // spatial displacement
    double tau = 0.0;       // waiting time, > 0
};

// D from the subordinator, then A | D ~ N(0, 2D·I_n).
inline CoupledJump sample_coupled_pair(double s, int n, RngStream& rng) {
    CoupledJump j;
    j.tau = sample_stable_subordinator(s, rng);
    const double sd = std::sqrt(2.0 * j.tau);
    j.w.resize(n);
    for (int i = 0; i < n; ++i) j.w[i] = sd * rng.normal();
    return j;
}

// ---- density of the subordinator (for importance weights) ----

// Convergent series f(t) = (1/π) Σ_{k>=1} (-1)^{k+1} Γ(ks+1)/k! sin(πks) t^{-ks-1};
// at small t the series cancels catastrophically, so the Zolotarev integral
// representation takes over (evaluated in log space against A - A_min).
inline double stable_log_density(double t, double s) {
    if (t <= 0.0) return -std::numeric_limits<double>::infinity();
    // series attempt with a cancellation guard; rational s makes alternating terms
    // vanish exactly (sin(πks) = 0), so two consecutive small terms are required
    double sum = 0.0, max_term = 0.0, prev_term = std::numeric_limits<double>::infinity();
    bool series_ok = false;
    for (int k = 1; k <= 200; ++k) {
        const double lg = std::lgamma(k * s + 1.0) - std::lgamma(k + 1.0);
        const double term = std::exp(lg - (k * s + 1.0) * std::log(t)) *
                            std::sin(M_PI * k * s) * (k % 2 == 1 ? 1.0 : -1.0);
        sum += term;
        max_term = std::max(max_term, std::abs(term));
        if (k > 3 && std::abs(term) + std::abs(prev_term) < 1e-17 * std::abs(sum)) {
            series_ok = max_term < 1e12 * std::abs(sum);
            break;
        }
        prev_term = term;
    }
    if (series_ok && sum > 0.0) return std::log(sum / M_PI);

    // Zolotarev: f(t) = s/((1-s)π) t^{-1/(1-s)} ∫_0^π A(φ) e^{-λA(φ)} dφ, λ = t^{-s/(1-s)}
    const double lambda = std::pow(t, -s / (1.0 - s));
    const double amin = ctrw_detail::kanter_a_min(s);
    auto res = quad::integrate(
        [&](double phi) {
            const double a = ctrw_detail::kanter_a(phi, s);
            return a * std::exp(-lambda * (a - amin));
        },
        1e-12, M_PI - 1e-12, 1e-10, 1e-14, 2000);
    return std::log(s / ((1.0 - s) * M_PI)) - std::log(t) / (1.0 - s) - lambda * amin +
           std::log(std::max(res.value, 1e-300));
}

inline double stable_density(double t, double s) { return std::exp(stable_log_density(t, s)); }

// ---- conditioned exterior sampler ----

enum class ExteriorRoute {
    DirectRejection,  // (A,D) proposal restricted to the exterior + importance weights
    Decomposition,    // exact two-region sampler of the kernel-restricted law
};

struct SampleBatch {
    std::vector<CoupledJump> draws;
    std::vector<double> weights;    // self-normalized; all 1/N for the decomposition route
    double acceptance_rate = 1.0;
    double ess = 0.0;               // effective sample size of the weights
    double eps = 0.0;
    ExteriorRoute route = ExteriorRoute::Decomposition;
};

struct ExteriorSamplerOptions {
    double stall_floor = 1e-4;            // rejection acceptance below this aborts
    double decomposition_threshold = 0.25;  // eps >= this prefers the exact sampler
    ExteriorRoute forced_route = ExteriorRoute::Decomposition;
    bool force = false;
};

inline bool outside_forward_cylinder(std::span<const double> w, double tau, double eps) {
    return tau >= eps * eps || norm2(w) >= eps * eps;
}

namespace ctrw_detail {

// Exact sampler of the normalized kernel density restricted to the exterior of
// C_eps^+(0,0). Region A (τ >= eps²): Pareto-type τ, Gaussian w. Region B (τ < eps²,
// |w| >= eps): in m = eps²/(4τ), z = |w|²/(4τ) coordinates the joint density is
// m^{s-1} z^{n/2-1} e^{-z} on {m > 1/4, z > m}; the z-marginal is a truncated
// Gamma(n/2+s) thinned by 1 - (4z)^{-s}, and m | z inverts in closed form.
inline CoupledJump sample_exterior_decomposition(double s, int n, double eps,
                                                 double region_a_prob, RngStream& rng) {
    CoupledJump j;
    j.w.resize(n);
    if (rng.uniform() < region_a_prob) {
        // τ = eps² V^{-1/s}, w ~ N(0, 2τ I)
        j.tau = eps * eps * std::pow(rng.uniform_open(), -1.0 / s);
        const double sd = std::sqrt(2.0 * j.tau);
        for (int i = 0; i < n; ++i) j.w[i] = sd * rng.normal();
        return j;
    }
    const double a = 0.5 * n + s;
    for (;;) {
        const double z = rng.gamma(a);
        if (z <= 0.25) continue;                          // truncation m > 1/4 forces z > 1/4
        if (rng.uniform() > 1.0 - std::pow(4.0 * z, -s)) continue;
        const double u = rng.uniform();
        const double m = std::pow(std::pow(0.25, s) + u * (std::pow(z, s) - std::pow(0.25, s)),
                                  1.0 / s);
        j.tau = eps * eps / (4.0 * m);
        const double r = 2.0 * std::sqrt(j.tau * z);      // |w| = 2√(τ z) >= eps
        // uniform direction
        double nn = 0.0;
        for (int i = 0; i < n; ++i) {
            j.w[i] = rng.normal();
            nn += j.w[i] * j.w[i];
        }
        nn = std::sqrt(nn);
        if (nn == 0.0) continue;
        for (int i = 0; i < n; ++i) j.w[i] *= r / nn;
        return j;
    }
}

// Unnormalized masses of the two exterior regions under the τ^{-1-s}-weighted kernel.
inline std::pair<double, double> exterior_region_masses(double s, int n, double eps) {
    const double mass_a = std::pow(eps, -2.0 * s) / s;
    // M_B = (4/eps²)^s ∫_{1/4}^∞ m^{s-1} Q(n/2, m) dm
    auto res = quad::integrate(
        [&](double m) { return std::pow(m, s - 1.0) * gamma_q(0.5 * n, m); }, 0.25, 60.0,
        1e-10, 1e-13, 1000);
    const double mass_b = std::pow(4.0 / (eps * eps), s) * res.value;
    return {mass_a, mass_b};
}

}  // namespace ctrw_detail

// Rejection/decomposition sampler for jumps conditioned on leaving the forward
// ε-cylinder. The decomposition route samples the kernel-restricted law exactly (unit
// weights); direct rejection keeps the coupled-pair law restricted to the exterior and
// attaches self-normalized importance weights ∝ τ^{-1-s}/f_D(τ) bridging to the kernel
// target (reported log-space; the ESS shows when the bridge is unusable).
inline SampleBatch sample_conditioned_exterior(double s, int n, double eps, int count,
                                               RngStream& rng,
                                               const ExteriorSamplerOptions& opt = {}) {
    if (eps <= 0.0) throw std::invalid_argument("sample_conditioned_exterior: eps <= 0");
    if (count < 1) throw std::invalid_argument("sample_conditioned_exterior: count < 1");
    SampleBatch batch;
    batch.eps = eps;
    batch.route = opt.force ? opt.forced_route
                  : (eps >= opt.decomposition_threshold ? ExteriorRoute::Decomposition
                                                        : ExteriorRoute::DirectRejection);
    batch.draws.reserve(count);

    if (batch.route == ExteriorRoute::Decomposition) {
        auto [ma, mb] = ctrw_detail::exterior_region_masses(s, n, eps);
        const double pa = ma / (ma + mb);
        for (int i = 0; i < count; ++i)
            batch.draws.push_back(
                ctrw_detail::sample_exterior_decomposition(s, n, eps, pa, rng));
        batch.weights.assign(count, 1.0 / count);
        batch.acceptance_rate = 1.0;
        batch.ess = count;
        return batch;
    }

    long proposals = 0;
    std::vector<double> logw;
    logw.reserve(count);
    while (static_cast<int>(batch.draws.size()) < count) {
        auto j = sample_coupled_pair(s, n, rng);
        ++proposals;
        if (outside_forward_cylinder(j.w, j.tau, eps)) {
            logw.push_back(-(1.0 + s) * std::log(j.tau) - stable_log_density(j.tau, s));
            batch.draws.push_back(std::move(j));
        } else if (proposals > 64 &&
                   static_cast<double>(batch.draws.size()) / proposals < opt.stall_floor) {
            throw std::runtime_error(
                "sample_conditioned_exterior: acceptance stalled; eps too large for "
                "direct rejection — use the decomposition route");
        }
    }
    batch.acceptance_rate = static_cast<double>(count) / proposals;
    // self-normalize in log space
    const double lmax = *std::max_element(logw.begin(), logw.end());
    double zsum = 0.0;
    for (double lw : logw) zsum += std::exp(lw - lmax);
    batch.weights.resize(count);
    double w2 = 0.0;
    for (int i = 0; i < count; ++i) {
        batch.weights[i] = std::exp(logw[i] - lmax) / zsum;
        w2 += batch.weights[i] * batch.weights[i];
    }
    batch.ess = 1.0 / w2;
    return batch;
}

// ---- statistical validators ----

struct TransformNode {
    std::vector<double> k;
    double tau = 0.0;
};

struct TransformCheck {
    std::vector<double> empirical;   // Re of the empirical joint transform
    std::vector<double> expected;    // exp(-(τ+|k|²)^s)
    std::vector<double> std_error;   // per-node standard error of the mean
    double max_sigma = 0.0;          // worst |emp-exp|/SE over the nodes
};

// E[e^{i k·A - τ D}] against exp(-(τ+|k|²)^s) over the given nodes.
inline TransformCheck validate_joint_transform(double s, int n, long draws,
                                               std::span<const TransformNode> nodes,
                                               RngStream& rng) {
    TransformCheck out;
    const std::size_t m = nodes.size();
    std::vector<double> sum(m, 0.0), sum2(m, 0.0);
    for (long i = 0; i < draws; ++i) {
        const auto j = sample_coupled_pair(s, n, rng);
        for (std::size_t a = 0; a < m; ++a) {
            const double v = std::cos(dot(nodes[a].k, j.w)) * std::exp(-nodes[a].tau * j.tau);
            sum[a] += v;
            sum2[a] += v * v;
        }
    }
    for (std::size_t a = 0; a < m; ++a) {
        const double mean = sum[a] / draws;
        const double var = std::max(sum2[a] / draws - mean * mean, 0.0);
        const double se = std::sqrt(var / draws);
        const double expect =
            std::exp(-std::pow(nodes[a].tau + norm2(nodes[a].k), s));
        out.empirical.push_back(mean);
        out.expected.push_back(expect);
        out.std_error.push_back(se);
        out.max_sigma = std::max(out.max_sigma, std::abs(mean - expect) / se);
    }
    return out;
}

// One-sample Kolmogorov-Smirnov distance of subordinator draws at s=1/2 against the
// Levy(c=1/2) law, whose CDF at t is erfc(1/(2√t)).
inline double ks_distance_levy_half(long draws, RngStream& rng) {
    std::vector<double> xs(draws);
    for (long i = 0; i < draws; ++i) xs[i] = sample_stable_subordinator(0.5, rng);
    std::sort(xs.begin(), xs.end());
    double d = 0.0;
    for (long i = 0; i < draws; ++i) {
        const double cdf = std::erfc(1.0 / (2.0 * std::sqrt(xs[i])));
        d = std::max(d, std::abs(cdf - static_cast<double>(i + 1) / draws));
        d = std::max(d, std::abs(cdf - static_cast<double>(i) / draws));
    }
    return d;
}

struct ChiSquare {
    double statistic = 0.0;
    int dof = 0;
    double p_value = 1.0;
};

// Pearson chi-square of exterior draws against the quadrature of the kernel density
// over log-spaced (|w|, τ) bins. Bins with expected count < 10 merge into an overflow
// cell; expectations come from the same 1D reduction used for κ.
inline ChiSquare conditioned_histogram_chisq(double s, int n, double eps, int draws,
                                             RngStream& rng, int nbins_tau = 6,
                                             int nbins_w = 5) {
    auto fp = make_frac_params(n, s);
    auto batch = sample_conditioned_exterior(s, n, eps, draws, rng,
                                             {.forced_route = ExteriorRoute::Decomposition,
                                              .force = true});
    const double e2 = eps * eps;
    // bin edges: τ log-spaced from eps²/16 with the first/last bins open-ended
    std::vector<double> tedges{0.0};
    for (int i = 0; i <= nbins_tau; ++i)
        tedges.push_back(e2 / 16.0 * std::pow(4.0, i));
    tedges.back() = std::numeric_limits<double>::infinity();
    std::vector<double> wedges{0.0};
    for (int i = 0; i <= nbins_w; ++i) wedges.push_back(eps * 0.5 * std::pow(2.0, i));
    wedges.back() = std::numeric_limits<double>::infinity();

    const int nt = static_cast<int>(tedges.size()) - 1;
    const int nw = static_cast<int>(wedges.size()) - 1;
    std::vector<double> observed(static_cast<std::size_t>(nt) * nw, 0.0);
    for (const auto& j : batch.draws) {
        const double wn = norm(j.w);
        int it = 0, iw = 0;
        while (it + 1 < nt && j.tau >= tedges[it + 1]) ++it;
        while (iw + 1 < nw && wn >= wedges[iw + 1]) ++iw;
        observed[static_cast<std::size_t>(it) * nw + iw] += 1.0;
    }

    // expected mass of bin = ∫_{τ bin} pref τ^{-1-s} [Q(n/2, wlo²/(4τ)) - Q(n/2, whi²/(4τ))] dτ
    // restricted to the exterior, normalized by the total exterior mass
    const double total = exterior_kernel_mass(fp, eps).mass;
    auto bin_mass = [&](double tlo, double thi, double wlo, double whi) {
        tlo = std::max(tlo, 1e-12 * e2);
        thi = std::min(thi, 1e9 * e2);
        if (thi <= tlo) return 0.0;
        auto f = [&](double logtau) {
            const double tau = std::exp(logtau);
            double lo = wlo, hi = whi;
            if (tau < e2) lo = std::max(lo, eps);  // exterior restriction
            if (hi <= lo) return 0.0;
            const double qs = gamma_q(0.5 * n, lo * lo / (4.0 * tau)) -
                              (std::isfinite(hi) ? gamma_q(0.5 * n, hi * hi / (4.0 * tau))
                                                 : 0.0);
            return fp.positive_prefactor * std::pow(tau, -s) * qs;
        };
        auto res = quad::integrate(f, std::log(tlo), std::log(thi), 1e-8, 1e-12, 800);
        return res.value;
    };

    // merge small-expectation bins into an overflow cell
    double chi = 0.0, obs_rest = batch.draws.size(), exp_rest = draws;
    int used = 0;
    for (int it = 0; it < nt; ++it) {
        for (int iw = 0; iw < nw; ++iw) {
            const double em =
                draws * bin_mass(tedges[it], tedges[it + 1], wedges[iw], wedges[iw + 1]) /
                total;
            if (em < 10.0) continue;
            const double o = observed[static_cast<std::size_t>(it) * nw + iw];
            chi += (o - em) * (o - em) / em;
            obs_rest -= o;
            exp_rest -= em;
            ++used;
        }
    }
    if (exp_rest > 10.0) {
        chi += (obs_rest - exp_rest) * (obs_rest - exp_rest) / exp_rest;
        ++used;
    }
    ChiSquare out;
    out.statistic = chi;
    out.dof = std::max(1, used - 1);
    out.p_value = chi_square_sf(chi, out.dof);
    return out;
}

}  // namespace parheat
