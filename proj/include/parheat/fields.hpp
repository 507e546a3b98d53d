#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "parheat/common.hpp"

namespace parheat {

// A globally bounded space-time function with optional exact derivative closures.
// eval is total on R^{n+1}; the closures are trusted only inside the smooth ball
// of radius smooth_radius (space-time Euclidean) around smooth_center.
struct ScalarField {
    int dim = 1;
    double bound = 0.0;
    double smooth_radius = std::numeric_limits<double>::infinity();
    SpaceTimePoint smooth_center;

    std::function<double(std::span<const double>, double)> eval;
    std::function<void(std::span<const double>, double, std::span<double>)> grad_x;  // length n
    std::function<void(std::span<const double>, double, std::span<double>)> hess_x;  // row-major n*n
    std::function<double(std::span<const double>, double)> dt;

    double operator()(const SpaceTimePoint& p) const { return eval(p.x, p.t); }
    double operator()(std::span<const double> x, double t) const { return eval(x, t); }

    bool has_derivatives() const { return grad_x && hess_x && dt; }

    bool in_smooth_region(const SpaceTimePoint& p, double margin = 0.0) const {
        return spacetime_dist(p, smooth_center) + margin < smooth_radius;
    }

    std::vector<double> gradient_at(const SpaceTimePoint& p) const {
        if (!grad_x) throw FieldError("field has no gradient closure");
        std::vector<double> g(dim);
        grad_x(p.x, p.t, g);
        return g;
    }

    std::vector<double> hessian_at(const SpaceTimePoint& p) const {
        if (!hess_x) throw FieldError("field has no hessian closure");
        std::vector<double> h(static_cast<std::size_t>(dim) * dim);
        hess_x(p.x, p.t, h);
        return h;
    }

    double dt_at(const SpaceTimePoint& p) const {
        if (!dt) throw FieldError("field has no time-derivative closure");
        return dt(p.x, p.t);
    }

    double laplacian_at(const SpaceTimePoint& p) const {
        const auto h = hessian_at(p);
        double tr = 0.0;
        for (int i = 0; i < dim; ++i) tr += h[static_cast<std::size_t>(i) * dim + i];
        return tr;
    }
};

enum class TestFunctionTag {
    Constant,
    PlaneWave,
    ClampedQuadratic,
    SpaceTimeGaussian,
    TimeProfile,
    RadialBump,
};

namespace fields_detail {

// C^inf transition: 0 for th<=0, 1 for th>=1.
inline double smoothstep(double th) {
    if (th <= 0.0) return 0.0;
    if (th >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / th);
    const double b = std::exp(-1.0 / (1.0 - th));
    return a / (a + b);
}

// 1 on [0, r_core], 0 beyond r_clamp, C^inf monotone in between.
inline double clamp_profile(double rho, double r_core, double r_clamp) {
    return 1.0 - smoothstep((rho - r_core) / (r_clamp - r_core));
}

}  // namespace fields_detail

inline ScalarField constant_field(int n, double c) {
    ScalarField f;
    f.dim = n;
    f.bound = std::abs(c);
    f.smooth_center = SpaceTimePoint(std::vector<double>(n, 0.0), 0.0);
    f.eval = [c](std::span<const double>, double) { return c; };
    f.grad_x = [](std::span<const double>, double, std::span<double> g) {
        std::fill(g.begin(), g.end(), 0.0);
    };
    f.hess_x = [](std::span<const double>, double, std::span<double> h) {
        std::fill(h.begin(), h.end(), 0.0);
    };
    f.dt = [](std::span<const double>, double) { return 0.0; };
    return f;
}

// cos(x.xi + rho t); globally bounded by 1 with exact closures everywhere.
inline ScalarField plane_wave(std::vector<double> xi, double rho) {
    if (norm(xi) == 0.0 && rho == 0.0) throw FieldError("plane_wave: (xi,rho) must be nonzero");
    ScalarField f;
    const int n = static_cast<int>(xi.size());
    f.dim = n;
    f.bound = 1.0;
    f.smooth_center = SpaceTimePoint(std::vector<double>(n, 0.0), 0.0);
    auto phase = [xi, rho](std::span<const double> x, double t) {
        return dot(x, std::span<const double>(xi)) + rho * t;
    };
    f.eval = [phase](std::span<const double> x, double t) { return std::cos(phase(x, t)); };
    f.grad_x = [phase, xi](std::span<const double> x, double t, std::span<double> g) {
        const double s = -std::sin(phase(x, t));
        for (std::size_t i = 0; i < xi.size(); ++i) g[i] = s * xi[i];
    };
    f.hess_x = [phase, xi, n](std::span<const double> x, double t, std::span<double> h) {
        const double c = -std::cos(phase(x, t));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                h[static_cast<std::size_t>(i) * n + j] = c * xi[i] * xi[j];
    };
    f.dt = [phase, rho](std::span<const double> x, double t) {
        return -rho * std::sin(phase(x, t));
    };
    return f;
}

// q(x,t) = c0 + g.(x-x0) + (x-x0)^T Q (x-x0) + ct (t-t0) + ctt (t-t0)^2, smoothly clamped
// to zero outside clamp_radius so the global boundedness hypothesis holds. The field is
// exactly polynomial within core_radius of the center; closures are valid there.
struct QuadraticSpec {
    double c0 = 0.0;
    std::vector<double> lin;    // empty = zero
    std::vector<double> quad;   // row-major n*n, symmetric; empty = zero
    double ct = 0.0;
    double ctt = 0.0;
};

inline ScalarField clamped_quadratic(int n, QuadraticSpec spec,
                                     SpaceTimePoint center = {},
                                     double core_radius = 5.0, double clamp_radius = 10.0) {
    if (center.x.empty()) center = SpaceTimePoint(std::vector<double>(n, 0.0), 0.0);
    if (spec.lin.empty()) spec.lin.assign(n, 0.0);
    if (spec.quad.empty()) spec.quad.assign(static_cast<std::size_t>(n) * n, 0.0);
    if (core_radius <= 0 || clamp_radius <= core_radius)
        throw FieldError("clamped_quadratic: need 0 < core_radius < clamp_radius");

    ScalarField f;
    f.dim = n;
    f.smooth_center = center;
    f.smooth_radius = core_radius;

    // sup bound over the clamp support via coefficient norms
    double qnorm = 0.0;
    for (double v : spec.quad) qnorm += std::abs(v);
    double lnorm = 0.0;
    for (double v : spec.lin) lnorm += std::abs(v);
    const double R = clamp_radius;
    f.bound = std::abs(spec.c0) + lnorm * R + qnorm * R * R + std::abs(spec.ct) * R +
              std::abs(spec.ctt) * R * R;

    auto poly = [spec, center, n](std::span<const double> x, double t) {
        double v = spec.c0;
        const double dt0 = t - center.t;
        v += spec.ct * dt0 + spec.ctt * dt0 * dt0;
        for (int i = 0; i < n; ++i) {
            const double di = x[i] - center.x[i];
            v += spec.lin[i] * di;
            for (int j = 0; j < n; ++j)
                v += spec.quad[static_cast<std::size_t>(i) * n + j] * di * (x[j] - center.x[j]);
        }
        return v;
    };
    auto rho = [center](std::span<const double> x, double t) {
        double s = (t - center.t) * (t - center.t);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - center.x[i];
            s += d * d;
        }
        return std::sqrt(s);
    };
    f.eval = [poly, rho, core_radius, clamp_radius](std::span<const double> x, double t) {
        const double r = rho(x, t);
        if (r >= clamp_radius) return 0.0;
        const double phi = fields_detail::clamp_profile(r, core_radius, clamp_radius);
        return phi == 0.0 ? 0.0 : poly(x, t) * phi;
    };
    f.grad_x = [spec, center, n](std::span<const double> x, double /*t*/, std::span<double> g) {
        for (int i = 0; i < n; ++i) {
            double v = spec.lin[i];
            for (int j = 0; j < n; ++j)
                v += 2.0 * spec.quad[static_cast<std::size_t>(i) * n + j] *
                     (x[j] - center.x[j]);
            g[i] = v;
        }
    };
    f.hess_x = [spec, n](std::span<const double>, double, std::span<double> h) {
        for (std::size_t k = 0; k < static_cast<std::size_t>(n) * n; ++k)
            h[k] = 2.0 * spec.quad[k];
    };
    f.dt = [spec, center](std::span<const double>, double t) {
        return spec.ct + 2.0 * spec.ctt * (t - center.t);
    };
    return f;
}

// A exp(-|x-c|^2/(2 sx^2) - (t-tc)^2/(2 st^2)); entire, closures valid everywhere.
inline ScalarField spacetime_gaussian(int n, double amplitude, double sigma_x, double sigma_t,
                                      SpaceTimePoint center = {}) {
    if (sigma_x <= 0 || sigma_t <= 0) throw FieldError("gaussian: sigmas must be positive");
    if (center.x.empty()) center = SpaceTimePoint(std::vector<double>(n, 0.0), 0.0);
    ScalarField f;
    f.dim = n;
    f.bound = std::abs(amplitude);
    f.smooth_center = center;
    const double isx2 = 1.0 / (sigma_x * sigma_x);
    const double ist2 = 1.0 / (sigma_t * sigma_t);
    auto val = [=](std::span<const double> x, double t) {
        double e = (t - center.t) * (t - center.t) * ist2;
        for (int i = 0; i < n; ++i) {
            const double d = x[i] - center.x[i];
            e += d * d * isx2;
        }
        return amplitude * std::exp(-0.5 * e);
    };
    f.eval = val;
    f.grad_x = [=](std::span<const double> x, double t, std::span<double> g) {
        const double u = val(x, t);
        for (int i = 0; i < n; ++i) g[i] = -u * (x[i] - center.x[i]) * isx2;
    };
    f.hess_x = [=](std::span<const double> x, double t, std::span<double> h) {
        const double u = val(x, t);
        for (int i = 0; i < n; ++i) {
            const double di = (x[i] - center.x[i]) * isx2;
            for (int j = 0; j < n; ++j) {
                const double dj = (x[j] - center.x[j]) * isx2;
                h[static_cast<std::size_t>(i) * n + j] = u * (di * dj - (i == j ? isx2 : 0.0));
            }
        }
    };
    f.dt = [=](std::span<const double> x, double t) {
        return -val(x, t) * (t - center.t) * ist2;
    };
    return f;
}

// Space-independent profile cos(omega t).
inline ScalarField time_profile_cos(int n, double omega) {
    ScalarField f;
    f.dim = n;
    f.bound = 1.0;
    f.smooth_center = SpaceTimePoint(std::vector<double>(n, 0.0), 0.0);
    f.eval = [omega](std::span<const double>, double t) { return std::cos(omega * t); };
    f.grad_x = [](std::span<const double>, double, std::span<double> g) {
        std::fill(g.begin(), g.end(), 0.0);
    };
    f.hess_x = [](std::span<const double>, double, std::span<double> h) {
        std::fill(h.begin(), h.end(), 0.0);
    };
    f.dt = [omega](std::span<const double>, double t) { return -omega * std::sin(omega * t); };
    return f;
}

// Compactly supported C^inf bump h(z), z = (|x-c|^2+(t-tc)^2)/R^2, h(z)=exp(-z/(1-z)).
inline ScalarField radial_bump(int n, double radius, SpaceTimePoint center = {}) {
    if (radius <= 0) throw FieldError("radial_bump: radius must be positive");
    if (center.x.empty()) center = SpaceTimePoint(std::vector<double>(n, 0.0), 0.0);
    ScalarField f;
    f.dim = n;
    f.bound = 1.0;
    f.smooth_center = center;
    const double iR2 = 1.0 / (radius * radius);
    auto zval = [=](std::span<const double> x, double t) {
        double z = (t - center.t) * (t - center.t);
        for (int i = 0; i < n; ++i) {
            const double d = x[i] - center.x[i];
            z += d * d;
        }
        return z * iR2;
    };
    auto h0 = [](double z) { return z >= 1.0 ? 0.0 : std::exp(-z / (1.0 - z)); };
    auto h1 = [h0](double z) {  // dh/dz
        if (z >= 1.0) return 0.0;
        const double om = 1.0 - z;
        return -h0(z) / (om * om);
    };
    auto h2 = [h0](double z) {  // d^2h/dz^2
        if (z >= 1.0) return 0.0;
        const double om = 1.0 - z;
        return h0(z) * (1.0 / (om * om * om * om) - 2.0 / (om * om * om));
    };
    f.eval = [=](std::span<const double> x, double t) { return h0(zval(x, t)); };
    f.grad_x = [=](std::span<const double> x, double t, std::span<double> g) {
        const double z = zval(x, t);
        const double d1 = h1(z);
        for (int i = 0; i < n; ++i) g[i] = d1 * 2.0 * (x[i] - center.x[i]) * iR2;
    };
    f.hess_x = [=](std::span<const double> x, double t, std::span<double> h) {
        const double z = zval(x, t);
        const double d1 = h1(z), d2 = h2(z);
        for (int i = 0; i < n; ++i) {
            const double zi = 2.0 * (x[i] - center.x[i]) * iR2;
            for (int j = 0; j < n; ++j) {
                const double zj = 2.0 * (x[j] - center.x[j]) * iR2;
                h[static_cast<std::size_t>(i) * n + j] =
                    d2 * zi * zj + (i == j ? d1 * 2.0 * iR2 : 0.0);
            }
        }
    };
    f.dt = [=](std::span<const double> x, double t) {
        return h1(zval(x, t)) * 2.0 * (t - center.t) * iR2;
    };
    return f;
}

// ---- named corpus helpers ----

// u = x1^2 + (2/(n+2)) t : solves (d_t - (1/(n+2)) Lap) u = 0 on the core.
inline ScalarField caloric_quadratic(int n) {
    QuadraticSpec s;
    s.quad.assign(static_cast<std::size_t>(n) * n, 0.0);
    s.quad[0] = 1.0;
    s.ct = 2.0 / (n + 2);
    return clamped_quadratic(n, s);
}

inline ScalarField x1_squared(int n) {
    QuadraticSpec s;
    s.quad.assign(static_cast<std::size_t>(n) * n, 0.0);
    s.quad[0] = 1.0;
    return clamped_quadratic(n, s);
}

inline ScalarField x1sq_plus_t(int n) {
    QuadraticSpec s;
    s.quad.assign(static_cast<std::size_t>(n) * n, 0.0);
    s.quad[0] = 1.0;
    s.ct = 1.0;
    return clamped_quadratic(n, s);
}

inline ScalarField radial_squared(int n) {
    QuadraticSpec s;
    s.quad.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) s.quad[static_cast<std::size_t>(i) * n + i] = 1.0;
    return clamped_quadratic(n, s);
}

inline ScalarField linear_field(int n, std::vector<double> a) {
    QuadraticSpec s;
    s.lin = std::move(a);
    return clamped_quadratic(n, s);
}

// make_test_function: enumeration tag + flat parameter list (CLI-facing factory).
inline ScalarField make_test_function(TestFunctionTag tag, const std::vector<double>& params,
                                      int n) {
    switch (tag) {
        case TestFunctionTag::Constant:
            if (params.size() != 1) throw FieldError("constant needs 1 parameter");
            return constant_field(n, params[0]);
        case TestFunctionTag::PlaneWave: {
            if (params.size() != static_cast<std::size_t>(n) + 1)
                throw FieldError("planewave needs n+1 parameters (xi..., rho)");
            std::vector<double> xi(params.begin(), params.end() - 1);
            if (norm(xi) == 0.0 && params.back() == 0.0)
                throw FieldError("planewave: xi and rho cannot both vanish");
            return plane_wave(std::move(xi), params.back());
        }
        case TestFunctionTag::ClampedQuadratic: {
            // params: a (coefficient of x1^2), b (coefficient of t)
            if (params.size() != 2) throw FieldError("quadratic needs 2 parameters (axx, at)");
            QuadraticSpec s;
            s.quad.assign(static_cast<std::size_t>(n) * n, 0.0);
            s.quad[0] = params[0];
            s.ct = params[1];
            return clamped_quadratic(n, s);
        }
        case TestFunctionTag::SpaceTimeGaussian:
            if (params.size() != 2) throw FieldError("gaussian needs 2 parameters (sx, st)");
            return spacetime_gaussian(n, 1.0, params[0], params[1]);
        case TestFunctionTag::TimeProfile:
            if (params.size() != 1) throw FieldError("timecos needs 1 parameter (omega)");
            return time_profile_cos(n, params[0]);
        case TestFunctionTag::RadialBump:
            if (params.size() != 1) throw FieldError("bump needs 1 parameter (radius)");
            return radial_bump(n, params[0]);
    }
    throw FieldError("unknown test function tag");
}

// Parse "name:p1,p2,..." (e.g. "planewave:1,0"). Names: constant, planewave, quadratic,
// gaussian, timecos, bump, plus conveniences caloric, x1sq, radial2, linear.
inline ScalarField parse_field(const std::string& text, int n) {
    std::string name = text;
    std::vector<double> params;
    if (auto colon = text.find(':'); colon != std::string::npos) {
        name = text.substr(0, colon);
        std::stringstream ss(text.substr(colon + 1));
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (!tok.empty()) params.push_back(std::stod(tok));
        }
    }
    if (name == "constant") return make_test_function(TestFunctionTag::Constant, params, n);
    if (name == "planewave") return make_test_function(TestFunctionTag::PlaneWave, params, n);
    if (name == "quadratic")
        return make_test_function(TestFunctionTag::ClampedQuadratic, params, n);
    if (name == "gaussian")
        return make_test_function(TestFunctionTag::SpaceTimeGaussian, params, n);
    if (name == "timecos") return make_test_function(TestFunctionTag::TimeProfile, params, n);
    if (name == "bump") return make_test_function(TestFunctionTag::RadialBump, params, n);
    if (name == "caloric") return caloric_quadratic(n);
    if (name == "x1sq") return x1_squared(n);
    if (name == "radial2") return radial_squared(n);
    if (name == "linear") {
        if (params.size() != static_cast<std::size_t>(n))
            throw FieldError("linear needs n parameters");
        return linear_field(n, params);
    }
    throw FieldError("unknown field spec: " + text);
}

// ---- finite-difference verification of the closures ----

struct FiniteDifferenceReport {
    double grad_err = 0.0;
    double hess_err = 0.0;
    double dt_err = 0.0;
    double max_err = 0.0;
};

// Central differences of eval vs the analytic closures; O(h^2) by contract.
inline FiniteDifferenceReport finite_difference_check(const ScalarField& f,
                                                      const SpaceTimePoint& p, double h) {
    if (!f.in_smooth_region(p, 2.0 * h))
        throw FieldError("finite_difference_check: point outside the smooth region");
    if (!f.has_derivatives()) throw FieldError("finite_difference_check: closures missing");
    const int n = f.dim;
    FiniteDifferenceReport rep;

    std::vector<double> xp(p.x), xm(p.x), xpp(p.x);
    const auto g = f.gradient_at(p);
    for (int i = 0; i < n; ++i) {
        xp = p.x;
        xm = p.x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (f.eval(xp, p.t) - f.eval(xm, p.t)) / (2.0 * h);
        rep.grad_err = std::max(rep.grad_err, std::abs(fd - g[i]));
    }

    const auto H = f.hessian_at(p);
    const double f0 = f.eval(p.x, p.t);
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            double fd;
            if (i == j) {
                xp = p.x;
                xm = p.x;
                xp[i] += h;
                xm[i] -= h;
                fd = (f.eval(xp, p.t) - 2.0 * f0 + f.eval(xm, p.t)) / (h * h);
            } else {
                xpp = p.x;
                xpp[i] += h;
                xpp[j] += h;
                const double fpp = f.eval(xpp, p.t);
                xpp[j] -= 2.0 * h;
                const double fpm = f.eval(xpp, p.t);
                xpp[i] -= 2.0 * h;
                const double fmm = f.eval(xpp, p.t);
                xpp[j] += 2.0 * h;
                const double fmp = f.eval(xpp, p.t);
                fd = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            }
            rep.hess_err = std::max(
                rep.hess_err, std::abs(fd - H[static_cast<std::size_t>(i) * n + j]));
        }
    }

    const double fdt = (f.eval(p.x, p.t + h) - f.eval(p.x, p.t - h)) / (2.0 * h);
    rep.dt_err = std::abs(fdt - f.dt_at(p));
    rep.max_err = std::max({rep.grad_err, rep.hess_err, rep.dt_err});
    return rep;
}

// ---- field combinators used by operators and tests ----

inline ScalarField translate(const ScalarField& f, const std::vector<double>& dx, double dtshift) {
    ScalarField g = f;
    g.smooth_center.t += dtshift;
    for (int i = 0; i < f.dim; ++i) g.smooth_center.x[i] += dx[i];
    auto unshift = [dx](std::span<const double> x) {
        std::vector<double> xs(x.begin(), x.end());
        for (std::size_t i = 0; i < xs.size(); ++i) xs[i] -= dx[i];
        return xs;
    };
    g.eval = [unshift, dtshift, base = f.eval](std::span<const double> x, double t) {
        return base(unshift(x), t - dtshift);
    };
    if (f.grad_x)
        g.grad_x = [unshift, dtshift, base = f.grad_x](std::span<const double> x, double t,
                                                       std::span<double> out) {
            base(unshift(x), t - dtshift, out);
        };
    if (f.hess_x)
        g.hess_x = [unshift, dtshift, base = f.hess_x](std::span<const double> x, double t,
                                                       std::span<double> out) {
            base(unshift(x), t - dtshift, out);
        };
    if (f.dt)
        g.dt = [unshift, dtshift, base = f.dt](std::span<const double> x, double t) {
            return base(unshift(x), t - dtshift);
        };
    return g;
}

inline ScalarField linear_combination(double a, const ScalarField& f, double b,
                                      const ScalarField& g) {
    if (f.dim != g.dim) throw FieldError("linear_combination: dimension mismatch");
    ScalarField h;
    h.dim = f.dim;
    h.bound = std::abs(a) * f.bound + std::abs(b) * g.bound;
    h.smooth_center = f.smooth_center;
    h.smooth_radius = std::min(f.smooth_radius,
                               g.smooth_radius - spacetime_dist(f.smooth_center, g.smooth_center));
    h.eval = [a, f, b, g](std::span<const double> x, double t) {
        return a * f.eval(x, t) + b * g.eval(x, t);
    };
    if (f.has_derivatives() && g.has_derivatives()) {
        h.grad_x = [a, f, b, g](std::span<const double> x, double t, std::span<double> out) {
            std::vector<double> tmp(out.size());
            f.grad_x(x, t, out);
            g.grad_x(x, t, tmp);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * out[i] + b * tmp[i];
        };
        h.hess_x = [a, f, b, g](std::span<const double> x, double t, std::span<double> out) {
            std::vector<double> tmp(out.size());
            f.hess_x(x, t, out);
            g.hess_x(x, t, tmp);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * out[i] + b * tmp[i];
        };
        h.dt = [a, f, b, g](std::span<const double> x, double t) {
            return a * f.dt(x, t) + b * g.dt(x, t);
        };
    }
    return h;
}

}  // namespace parheat
