#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "parheat/ctrw.hpp"
#include "parheat/infinity.hpp"
#include "parheat/kernel.hpp"
#include "parheat/parallel.hpp"

namespace parheat {

// ---- value slab ----
//
// Uniform grid over Ω × [t0, T] carrying game values; exterior_data defines the value
// outside the open slab, including all t >= T (terminal condition). The walk moves
// strictly forward in time.

struct ValueSlab {
    int n = 1;
    double x_lo = 0.0, x_hi = 1.0;  // Ω = (x_lo, x_hi) per dimension (square for n=2)
    int nx = 0;                     // nodes per spatial dimension (includes edges)
    double t0 = 0.0, T = 1.0;
    int nt = 0;                     // time rows on [t0, T - k]
    double eps = 0.1;
    std::vector<double> values;     // nx^n * nt, x-major then t
    ScalarField exterior;

    double h() const { return (x_hi - x_lo) / (nx - 1); }
    double k() const { return (T - t0) / nt; }
    double xat(int i) const { return x_lo + i * h(); }
    double tat(int j) const { return t0 + j * k(); }
    std::size_t spatial_nodes() const {
        return n == 1 ? static_cast<std::size_t>(nx)
                      : static_cast<std::size_t>(nx) * nx;
    }
    std::size_t index(std::size_t si, int j) const { return si * nt + j; }
};

inline ValueSlab make_value_slab(int n, double x_lo, double x_hi, int nx, double t0, double T,
                                 int nt, double eps, ScalarField exterior_data) {
    if (n < 1 || n > 2) throw std::invalid_argument("ValueSlab: n must be 1 or 2");
    if (nx < 2 || nt < 2) throw std::invalid_argument("ValueSlab: grid too small");
    if (!(x_hi > x_lo) || !(T > t0)) throw std::invalid_argument("ValueSlab: empty box");
    if (eps <= 0.0) throw std::invalid_argument("ValueSlab: eps must be positive");
    ValueSlab s;
    s.n = n;
    s.x_lo = x_lo;
    s.x_hi = x_hi;
    s.nx = nx;
    s.t0 = t0;
    s.T = T;
    s.nt = nt;
    s.eps = eps;
    s.exterior = std::move(exterior_data);
    s.values.assign(s.spatial_nodes() * static_cast<std::size_t>(nt), 0.0);
    return s;
}

// Multilinear interpolation inside the open slab; exterior reads bypass the grid and
// go to the analytic field. Beyond the last time row (t in (T-k, T)) the value is
// extrapolated constant in time, which keeps the scheme within its h² + k error model.
// Reads within a relative hair of the spatial boundary count as exterior, so rays that
// graze ∂Ω classify identically no matter the roundoff in their direction components.
inline double slab_read(const ValueSlab& s, std::span<const double> x, double t) {
    const double edge = 1e-12 * (s.x_hi - s.x_lo);
    bool inside = t < s.T;
    for (int d = 0; d < s.n && inside; ++d)
        inside = x[d] > s.x_lo + edge && x[d] < s.x_hi - edge;
    if (!inside) return s.exterior.eval(x, t);

    const double h = s.h(), k = s.k();
    const double ft = std::clamp((t - s.t0) / k, 0.0, static_cast<double>(s.nt - 1));
    const int j0 = std::min(static_cast<int>(ft), s.nt - 2);
    const double wt = std::clamp(ft - j0, 0.0, 1.0);

    auto axis = [&](double xi, int& i0, double& wx) {
        const double fx = std::clamp((xi - s.x_lo) / h, 0.0, static_cast<double>(s.nx - 1));
        i0 = std::min(static_cast<int>(fx), s.nx - 2);
        wx = std::clamp(fx - i0, 0.0, 1.0);
    };

    if (s.n == 1) {
        int i0;
        double wx;
        axis(x[0], i0, wx);
        auto v = [&](int i, int j) { return s.values[s.index(i, j)]; };
        const double a = (1 - wx) * v(i0, j0) + wx * v(i0 + 1, j0);
        const double b = (1 - wx) * v(i0, j0 + 1) + wx * v(i0 + 1, j0 + 1);
        return (1 - wt) * a + wt * b;
    }
    int i0, i1;
    double wx, wy;
    axis(x[0], i0, wx);
    axis(x[1], i1, wy);
    auto v = [&](int a, int b, int j) {
        return s.values[s.index(static_cast<std::size_t>(a) * s.nx + b, j)];
    };
    auto plane = [&](int j) {
        const double p00 = v(i0, i1, j), p10 = v(i0 + 1, i1, j);
        const double p01 = v(i0, i1 + 1, j), p11 = v(i0 + 1, i1 + 1, j);
        return (1 - wx) * ((1 - wy) * p00 + wy * p01) + wx * ((1 - wy) * p10 + wy * p11);
    };
    return (1 - wt) * plane(j0) + wt * plane(j0 + 1);
}

// ---- game configuration and the DPP operator ----

enum class GameMode { LinearWalk, TugOfWar };
enum class DppBackend { Quadrature, MonteCarlo };

struct GameConfig {
    GameMode mode = GameMode::LinearWalk;
    SphereGrid sphere_grid;            // tug-of-war directions
    DppBackend backend = DppBackend::Quadrature;
    long mc_draws = 2000;              // per sweep when the Monte Carlo backend is active
    std::uint64_t mc_seed = 1;
    double mass_tol = 1e-9;            // far-field truncation: discarded kernel mass
};

namespace dpp_detail {

struct StencilPoint {
    double dw;  // spatial offset magnitude (applied per direction) or signed offset
    double dt;
    double weight;
};

// Fixed κ ε^{2s}-normalized quadrature plan for the forward exterior kernel integral.
// Region A (τ >= ε²): composite GK15 panels in θ = τ^{-s} (maps the tail onto a finite
// interval exactly); per τ node, Gauss-Hermite offsets (full kernel) or ray nodes
// (1D tug kernel). Region B (τ < ε², |w| >= ε): log-spaced τ panels, Gaussian tail
// nodes in w. Total weight ≈ 1, which the all-ones test verifies.
struct Stencil {
    std::vector<StencilPoint> pts;  // signed dw for linear-walk n=1; radial for rays
    double mass = 0.0;
};

inline Stencil build_stencil_1d_full(double s, double eps, double kappa_eps, int gh_points,
                                     double mass_tol) {
    Stencil st;
    const double e2 = eps * eps;
    const double pref = s / std::tgamma(1.0 - s);
    // far truncation where the remaining κ-normalized mass drops below mass_tol
    const double T_far = std::pow(kappa_eps * pref / (s * mass_tol), 1.0 / s);

    const auto& gh = quad::gauss_hermite(gh_points);

    // region A panels in θ-space: θ from (T_far)^{-s} .. ε^{-2s}
    {
        const double th_lo = std::pow(T_far, -s);
        const double th_hi = std::pow(e2, -s);
        const int panels = 24;
        std::vector<double> txs, tws;
        for (int p = 0; p < panels; ++p) {
            const double a = th_lo + (th_hi - th_lo) * p / panels;
            const double b = th_lo + (th_hi - th_lo) * (p + 1) / panels;
            quad::gk15_panel_nodes(a, b, txs, tws);
        }
        for (std::size_t i = 0; i < txs.size(); ++i) {
            const double tau = std::pow(txs[i], -1.0 / s);
            const double wt = kappa_eps * pref * tws[i] / s;  // κ ε^{2s} pref τ^{-1-s} dτ
            for (int g = 0; g < gh_points; ++g) {
                st.pts.push_back({2.0 * std::sqrt(tau) * gh.nodes[g], tau,
                                  wt * gh.weights[g] / std::sqrt(M_PI)});
            }
        }
    }
    // region B: τ = e^{-r} panels from e2 down to e2/(4 w_max²); per τ, one-sided
    // Gaussian tail nodes mirrored to both signs
    {
        const double wmax = 8.0;
        const double r_lo = -std::log(e2);
        const double r_hi = r_lo + 2.0 * std::log(2.0 * wmax);  // τ down to e2/(4wmax²)
        const int panels = 10;
        std::vector<double> rxs, rws;
        for (int p = 0; p < panels; ++p) {
            const double a = r_lo + (r_hi - r_lo) * p / panels;
            const double b = r_lo + (r_hi - r_lo) * (p + 1) / panels;
            quad::gk15_panel_nodes(a, b, rxs, rws);
        }
        for (std::size_t i = 0; i < rxs.size(); ++i) {
            const double tau = std::exp(-rxs[i]);
            const double wt = kappa_eps * pref * std::pow(tau, -s) * rws[i];
            const double L = eps / (2.0 * std::sqrt(tau));
            if (L >= wmax) continue;
            std::vector<double> yxs, yws;
            quad::gk15_panel_nodes(L, std::min(L + 10.0, wmax), yxs, yws);
            for (std::size_t g = 0; g < yxs.size(); ++g) {
                const double gw = wt * std::exp(-yxs[g] * yxs[g]) * yws[g] / std::sqrt(M_PI);
                const double off = 2.0 * std::sqrt(tau) * yxs[g];
                st.pts.push_back({off, tau, gw});
                st.pts.push_back({-off, tau, gw});
            }
        }
    }
    for (const auto& p : st.pts) st.mass += p.weight;
    return st;
}

// Ray stencil for the tug-of-war 1D kernel: offsets are |η| >= 0 along a chosen
// direction; the |η|-folding doubles the one-sided weights.
inline Stencil build_stencil_ray(double s, double eps, double kappa_eps, int gh_points,
                                 double mass_tol) {
    Stencil full = build_stencil_1d_full(s, eps, kappa_eps, gh_points, mass_tol);
    Stencil st;
    st.pts.reserve(full.pts.size());
    for (const auto& p : full.pts) st.pts.push_back({std::abs(p.dw), p.dt, p.weight});
    st.mass = full.mass;
    return st;
}

}  // namespace dpp_detail

// One synchronous (Jacobi) sweep of the forward-in-time DPP operator; reads the old
// array only, writes a new one, so the result is order- and thread-count-independent.
class DppOperator {
  public:
    DppOperator(const ValueSlab& slab, const GameConfig& cfg, const FracParams& fp,
                const QuadratureSpec& q = {}) : cfg_(cfg) {
        if (slab.n != fp.n) throw std::invalid_argument("DppOperator: dimension mismatch");
        if (cfg.mode == GameMode::LinearWalk && slab.n != 1)
            throw std::invalid_argument(
                "DppOperator: linear-walk mode is implemented for n=1 only");
        if (cfg.mode == GameMode::TugOfWar && cfg.sphere_grid.points.empty())
            throw std::invalid_argument("DppOperator: tug-of-war needs a sphere grid");
        if (cfg.backend == DppBackend::MonteCarlo) {
            // shared random quadrature rule: one conditioned-kernel batch per operator
            if (cfg.mc_draws < 1000)
                throw std::invalid_argument("DppOperator: Monte Carlo backend needs >= 1000 draws");
            const int kernel_dim = cfg.mode == GameMode::LinearWalk ? slab.n : 1;
            RngStream rng(cfg.mc_seed, 77);
            auto [ma, mb] = ctrw_detail::exterior_region_masses(fp.s, kernel_dim, slab.eps);
            const double pa = ma / (ma + mb);
            const double w = 1.0 / cfg.mc_draws;
            for (long i = 0; i < cfg.mc_draws; ++i) {
                auto j = ctrw_detail::sample_exterior_decomposition(fp.s, kernel_dim,
                                                                    slab.eps, pa, rng);
                const double dw = cfg.mode == GameMode::LinearWalk ? j.w[0]
                                                                   : std::abs(j.w[0]);
                stencil_.pts.push_back({dw, j.tau, w});
            }
            stencil_.mass = 1.0;
            return;
        }
        const double kap = kappa_of(make_frac_params(slab.n, fp.s), q) *
                           std::pow(slab.eps, 2.0 * fp.s);
        const double kap1 = kappa_of(make_frac_params(1, fp.s), q) *
                            std::pow(slab.eps, 2.0 * fp.s);
        const int ghp = 28;
        if (cfg.mode == GameMode::LinearWalk) {
            stencil_ = dpp_detail::build_stencil_1d_full(fp.s, slab.eps, kap, ghp,
                                                         cfg.mass_tol);
        } else {
            stencil_ = dpp_detail::build_stencil_ray(fp.s, slab.eps, kap1, ghp,
                                                     cfg.mass_tol);
        }
    }

    double stencil_mass() const { return stencil_.mass; }

    // Applies the operator to every grid node; returns the sup-norm residual.
    double apply(const ValueSlab& in, ValueSlab& out, int threads = 1) const {
        const std::size_t sn = in.spatial_nodes();
        std::vector<double> res(sn, 0.0);
        parallel_for(sn, threads, [&](std::size_t si) {
            std::vector<double> x(in.n), xr(in.n);
            if (in.n == 1) {
                x[0] = in.xat(static_cast<int>(si));
            } else {
                x[0] = in.xat(static_cast<int>(si) / in.nx);
                x[1] = in.xat(static_cast<int>(si) % in.nx);
            }
            double worst = 0.0;
            for (int j = 0; j < in.nt; ++j) {
                const double t = in.tat(j);
                double nv;
                if (cfg_.mode == GameMode::LinearWalk) {
                    nv = apply_linear(in, x, t, xr);
                } else {
                    nv = apply_tug(in, x, t, xr);
                }
                const std::size_t idx = in.index(si, j);
                out.values[idx] = nv;
                worst = std::max(worst, std::abs(nv - in.values[idx]));
            }
            res[si] = worst;
        });
        double r = 0.0;
        for (double v : res) r = std::max(r, v);
        return r;
    }

  private:
    double apply_linear(const ValueSlab& in, std::span<const double> x, double t,
                        std::span<double> xr) const {
        double acc = 0.0;
        for (const auto& p : stencil_.pts) {
            xr[0] = x[0] + p.dw;
            acc += p.weight * slab_read(in, xr, t + p.dt);
        }
        return acc;
    }

    double apply_tug(const ValueSlab& in, std::span<const double> x, double t,
                     std::span<double> xr) const {
        // A(y) = ray mean along +y; value = ½ max_y A + ½ min_y A over the antipodal grid
        double best_hi = -std::numeric_limits<double>::infinity();
        double best_lo = std::numeric_limits<double>::infinity();
        for (const auto& y : cfg_.sphere_grid.points) {
            double a = 0.0;
            for (const auto& p : stencil_.pts) {
                for (int d = 0; d < in.n; ++d) xr[d] = x[d] + p.dw * y[d];
                a += p.weight * slab_read(in, xr, t + p.dt);
            }
            if (a > best_hi) best_hi = a;
            if (a < best_lo) best_lo = a;
        }
        return 0.5 * best_hi + 0.5 * best_lo;
    }

    GameConfig cfg_;
    dpp_detail::Stencil stencil_;
};

struct IterationLog {
    std::vector<double> residuals;
    int sweeps = 0;
    bool converged = false;
    double stencil_mass = 0.0;
    double refined_value_drift = 0.0;  // tug: value change under direction-grid doubling
};

struct DppApplyResult {
    ValueSlab slab;
    double residual = 0.0;
};

inline DppApplyResult dpp_apply(const ValueSlab& slab, const GameConfig& cfg,
                                const FracParams& fp, const QuadratureSpec& q = {},
                                int threads = 1) {
    DppOperator op(slab, cfg, fp, q);
    DppApplyResult out{slab, 0.0};
    out.residual = op.apply(slab, out.slab, threads);
    return out;
}

// Iterates Jacobi sweeps until the sup-norm residual drops below tol. Returns the best
// iterate with the per-sweep residual log; convergence is geometric because the walk
// exits the slab in one step with probability at least the kernel mass of
// {τ >= T - t0}.
inline std::pair<ValueSlab, IterationLog> dpp_solve(ValueSlab slab, const GameConfig& cfg,
                                                    const FracParams& fp, double tol,
                                                    int max_sweeps,
                                                    const QuadratureSpec& q = {},
                                                    int threads = 1) {
    if (tol <= 0.0) throw std::invalid_argument("dpp_solve: tol must be positive");
    DppOperator op(slab, cfg, fp, q);
    IterationLog log;
    log.stencil_mass = op.stencil_mass();
    ValueSlab next = slab;
    for (int it = 0; it < max_sweeps; ++it) {
        const double r = op.apply(slab, next, threads);
        std::swap(slab.values, next.values);
        log.residuals.push_back(r);
        ++log.sweeps;
        if (r <= tol) {
            log.converged = true;
            break;
        }
    }
    if (cfg.mode == GameMode::TugOfWar && cfg.sphere_grid.points.size() >= 2) {
        // direction-refinement study: one sweep with a doubled grid
        GameConfig fine = cfg;
        fine.sphere_grid = make_sphere_grid(slab.n, 2 * std::max(1, cfg.sphere_grid.resolution));
        DppOperator fop(slab, fine, fp, q);
        ValueSlab probe = slab;
        fop.apply(slab, probe, threads);
        double drift = 0.0;
        for (std::size_t i = 0; i < slab.values.size(); ++i)
            drift = std::max(drift, std::abs(probe.values[i] - slab.values[i]));
        log.refined_value_drift = drift;
    }
    return {std::move(slab), std::move(log)};
}

// ---- Monte Carlo walk estimator (linear-walk mode) ----

struct WalkEstimate {
    double value = 0.0;
    double std_error = 0.0;
    double mean_steps = 0.0;
    long draws = 0;
};

// Simulates the coupled walk from p with kernel-law jumps conditioned outside the
// forward ε-cylinder until it leaves Ω × [t0, T), then averages the exterior data at
// the exit points. Walks use one stream per draw, so batches are reproducible across
// parallel schedules. Linear-walk mode only.
inline WalkEstimate walk_estimate(const SpaceTimePoint& p, const ValueSlab& geometry,
                                  const GameConfig& cfg, const FracParams& fp, long draws,
                                  std::uint64_t seed, int threads = 1) {
    if (cfg.mode != GameMode::LinearWalk)
        throw std::invalid_argument("walk_estimate: linear-walk mode only");
    if (draws < 100) throw std::invalid_argument("walk_estimate: need at least 100 draws");
    const double eps = geometry.eps;
    const double s = fp.s;
    const int n = geometry.n;
    auto [ma, mb] = ctrw_detail::exterior_region_masses(s, n, eps);
    const double pa = ma / (ma + mb);

    std::vector<double> payoff(draws), steps(draws);
    parallel_for(static_cast<std::size_t>(draws), threads, [&](std::size_t i) {
        RngStream rng(seed, 1000 + i);
        std::vector<double> x(p.x);
        double t = p.t;
        long nsteps = 0;
        for (;;) {
            auto j = ctrw_detail::sample_exterior_decomposition(s, n, eps, pa, rng);
            for (int d = 0; d < n; ++d) x[d] += j.w[d];
            t += j.tau;
            ++nsteps;
            bool inside = t < geometry.T;
            for (int d = 0; d < n && inside; ++d)
                inside = x[d] > geometry.x_lo && x[d] < geometry.x_hi;
            if (!inside) break;
        }
        payoff[i] = geometry.exterior.eval(x, t);
        steps[i] = static_cast<double>(nsteps);
    });
    WalkEstimate out;
    out.draws = draws;
    double sum = 0.0, sum2 = 0.0, st = 0.0;
    for (long i = 0; i < draws; ++i) {
        sum += payoff[i];
        sum2 += payoff[i] * payoff[i];
        st += steps[i];
    }
    out.value = sum / draws;
    out.std_error = std::sqrt(std::max(sum2 / draws - out.value * out.value, 0.0) /
                              static_cast<double>(draws));
    out.mean_steps = st / draws;
    return out;
}

// Kernel mass of {τ >= horizon} under the κ ε^{2s}-normalized exterior law: a lower
// bound on the per-step exit probability (the residual decay rate bound).
inline double exit_mass_bound(const FracParams& fp, double eps, double horizon,
                              const QuadratureSpec& q = {}) {
    const double kap = kappa_of(fp, q);
    return kap * std::pow(eps, 2.0 * fp.s) * fp.positive_prefactor *
           std::pow(horizon, -fp.s) / fp.s;
}

}  // namespace parheat
