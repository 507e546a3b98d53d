#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <utility>

#include "parheat/common.hpp"
#include "parheat/quadrature.hpp"
#include "parheat/special.hpp"

namespace parheat {

// Order parameters and the Gamma-derived constants. positive_prefactor = s/Γ(1-s)
// equals 1/|Γ(-s)| via Γ(-s) = -Γ(1-s)/s; the kernel is stored as a positive density
// (see KernelConvention) so conditioned averages are genuine expectations.
struct FracParams {
    int n = 1;
    double s = 0.5;
    double gamma_1ms = 0.0;          // Γ(1-s)
    double positive_prefactor = 0.0; // s/Γ(1-s)
    std::optional<double> kappa;     // cached κ(n,s)
};

inline FracParams make_frac_params(int n, double s) {
    if (n < 1) throw std::invalid_argument("FracParams: n must be >= 1");
    if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("FracParams: s must lie in (0,1)");
    FracParams fp;
    fp.n = n;
    fp.s = s;
    fp.gamma_1ms = std::tgamma(1.0 - s);
    fp.positive_prefactor = s / fp.gamma_1ms;
    return fp;
}

// Heat (transition) kernel in R^n: (4πτ)^{-n/2} e^{-|w|^2/(4τ)} for τ>0, else 0.
inline double heat_kernel_radial(double w2, double tau, int n) {
    if (tau <= 0.0) return 0.0;
    return std::pow(4.0 * M_PI * tau, -0.5 * n) * std::exp(-w2 / (4.0 * tau));
}

inline double heat_kernel(std::span<const double> w, double tau, int n) {
    return heat_kernel_radial(norm2(w), tau, n);
}

enum class KernelConvention {
    PositiveKernel,  // default: prefactor s/Γ(1-s) = 1/|Γ(-s)|, a bona fide density shape
    LiteralGamma,    // 1/Γ(-s) as printed; negative for s in (0,1)
};

// Space-time kernel weight k(w,τ) = prefactor · W_n(w,τ) · τ^{-1-s}, supported on τ>0.
inline double kernel_density(std::span<const double> w, double tau, const FracParams& fp,
                             KernelConvention conv = KernelConvention::PositiveKernel) {
    if (tau <= 0.0) return 0.0;
    const double pref = conv == KernelConvention::PositiveKernel ? fp.positive_prefactor
                                                                 : 1.0 / std::tgamma(-fp.s);
    return pref * heat_kernel(w, tau, fp.n) * std::pow(tau, -1.0 - fp.s);
}

inline double kernel_density_radial(double w2, double tau, const FracParams& fp) {
    if (tau <= 0.0) return 0.0;
    return fp.positive_prefactor * heat_kernel_radial(w2, tau, fp.n) *
           std::pow(tau, -1.0 - fp.s);
}

// ---- parabolic cylinders ----

enum class CylinderVariant { Full, Forward, Backward };

struct Cylinder {
    SpaceTimePoint center;
    double radius = 1.0;
    CylinderVariant variant = CylinderVariant::Full;
};

// Strict-interior membership. Full: B(x,ε)×(t-ε², t+ε²); forward: (t, t+ε²); backward: (t-ε², t).
inline bool cylinder_contains(const Cylinder& c, const SpaceTimePoint& p) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < c.center.x.size(); ++i) {
        const double d = p.x[i] - c.center.x[i];
        d2 += d * d;
    }
    if (d2 >= c.radius * c.radius) return false;
    const double dt = p.t - c.center.t;
    const double e2 = c.radius * c.radius;
    switch (c.variant) {
        case CylinderVariant::Full: return dt > -e2 && dt < e2;
        case CylinderVariant::Forward: return dt > 0.0 && dt < e2;
        case CylinderVariant::Backward: return dt > -e2 && dt < 0.0;
    }
    return false;
}

// ---- κ(n,s) and exterior kernel mass ----

// ∫_{|w|>=r} W_n(w,τ) dw = P(|Z| >= r/√(2τ)), Z ~ N(0, I_n): the chi-square(n) tail.
inline double heat_kernel_tail_mass(double r, double tau, int n) {
    if (tau <= 0.0) return 0.0;
    return gamma_q(0.5 * n, r * r / (4.0 * tau));
}

struct KappaResult {
    double kappa = 0.0;
    double error = 0.0;  // estimated quadrature error on κ
};

// Kernel mass of the complement of C_eps^+(0,0) inside R^n × R_+, reduced to 1D:
//   ∫_{eps^2}^inf pref τ^{-1-s} dτ  +  ∫_0^{eps^2} pref τ^{-1-s} Q(n/2, eps²/(4τ)) dτ.
// The first piece is closed-form pref·eps^{-2s}/s; the second uses τ = eps² e^{-r} to
// resolve the τ^{-1-s} singularity against the doubly-exponential Gaussian tail.
struct ExteriorMassResult {
    double mass = 0.0;
    double error = 0.0;
};

inline ExteriorMassResult exterior_kernel_mass(const FracParams& fp, double eps,
                                               const QuadratureSpec& q = {}) {
    if (eps <= 0.0) throw std::invalid_argument("exterior_kernel_mass: eps must be positive");
    const double s = fp.s;
    const double tail = fp.positive_prefactor * std::pow(eps, -2.0 * s) / s;

    const double e2 = eps * eps;
    auto integrand = [&](double r) {
        return std::exp(s * r) * gamma_q(0.5 * fp.n, e2 * std::exp(r) / 4.0);
    };
    // r_min puts τ at eps²; r_max where the Gaussian tail Q(n/2, eps² e^r/4) has died.
    const double r_min = -std::log(e2);
    const double r_max = r_min + std::log(240.0) + 2.0;
    auto res = quad::integrate(integrand, r_min, r_max, q.rel_tol, q.abs_tol,
                               q.max_subdivisions);
    if (!res.converged)
        throw QuadratureError("exterior_kernel_mass: time quadrature did not converge");
    ExteriorMassResult out;
    out.mass = tail + fp.positive_prefactor * res.value;
    out.error = fp.positive_prefactor * res.error;
    return out;
}

// κ(n,s) = 1 / (kernel mass outside the unit forward cylinder).
inline KappaResult kappa(const FracParams& fp, const QuadratureSpec& q = {}) {
    const auto m = exterior_kernel_mass(fp, 1.0, q);
    KappaResult out;
    out.kappa = 1.0 / m.mass;
    out.error = m.error / (m.mass * m.mass);
    return out;
}

// Params with κ resolved (immutable after construction; safe to share across workers).
inline FracParams with_kappa(FracParams fp, const QuadratureSpec& q = {}) {
    if (!fp.kappa) fp.kappa = kappa(fp, q).kappa;
    return fp;
}

// Interior-synchronized memo so repeated κ(n,s) lookups stay cheap for any caller.
inline double kappa_of(const FracParams& fp, const QuadratureSpec& q = {}) {
    if (fp.kappa) return *fp.kappa;
    static std::map<std::pair<int, double>, double> cache;
    static std::mutex mtx;
    const std::pair<int, double> key{fp.n, fp.s};
    {
        std::lock_guard<std::mutex> lock(mtx);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    const double k = kappa(fp, q).kappa;
    std::lock_guard<std::mutex> lock(mtx);
    return cache.emplace(key, k).first->second;
}

}  // namespace parheat
