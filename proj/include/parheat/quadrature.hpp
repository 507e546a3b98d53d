#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <queue>
#include <span>
#include <vector>

#include "parheat/common.hpp"

namespace parheat {

// Knobs shared by every quadrature-backed operator. Tolerances are for the outermost
// integral; inner (spatial) integrals run tighter so their noise stays below the outer
// error estimate. Gaussian-space truncation at w_max standard deviations bounds the
// discarded tail by ~bound*erfc(w_max), which is recorded in error estimates.
struct QuadratureSpec {
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    int max_subdivisions = 2000;
    double w_max = 8.0;             // spatial truncation in units of the Gaussian scale
    double near_origin_split = 1.0; // time-domain split between log and power substitutions
    double small_tau_cut = 1e-5;    // below this the small-time power model takes over
    int gauss_hermite_points = 0;   // 0 = per-dimension default
    int sphere_points = 16;         // circle points (n=2) / 2*bands (n=3) for sphere averages
};

namespace quad {

struct Result {
    double value = 0.0;
    double error = 0.0;
    long evaluations = 0;
    bool converged = true;
};

namespace detail {

// Gauss-Kronrod 15(7) on [-1,1]; nonnegative abscissae, symmetric rule (QUADPACK dqk15).
inline constexpr double kXgk[8] = {
    0.9914553711208126392068546975263285, 0.9491079123427585245261896840478513,
    0.8648644233597690727897127886409262, 0.7415311855993944398638647732807884,
    0.5860872354676911302941448382587296, 0.4058451513773971669066064120769615,
    0.2077849550078984676006894037732449, 0.0};
inline constexpr double kWgk[8] = {
    0.0229353220105292249637320080589695, 0.0630920926299785532907006631892042,
    0.1047900103222501838398763225415180, 0.1406532597155259187451895905102379,
    0.1690047266392679028265834265985503, 0.1903505780647854099132564024210137,
    0.2044329400752988924141619992346491, 0.2094821410847278280129991748917143};
inline constexpr double kWg[4] = {
    0.1294849661688696932706114326790820, 0.2797053914892766679014677714237796,
    0.3818300505051189449503697754889751, 0.4179591836734693877551020408163265};

struct Cell {
    double a, b, value, error;
};

template <class F>
Cell gk15(F&& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double kron = kWgk[7] * fc;
    double gauss = kWg[3] * fc;
    for (int i = 0; i < 7; ++i) {
        const double x = h * kXgk[i];
        const double fsum = f(c - x) + f(c + x);
        kron += kWgk[i] * fsum;
        if (i % 2 == 1) gauss += kWg[i / 2] * fsum;
    }
    kron *= h;
    gauss *= h;
    return {a, b, kron, std::abs(kron - gauss)};
}

}  // namespace detail

// Adaptive Gauss-Kronrod with worst-cell-first refinement over the given breakpoints.
template <class F>
Result integrate_cells(F&& f, std::span<const double> breaks, double rel_tol, double abs_tol,
                       int max_subdivisions) {
    Result res;
    if (breaks.size() < 2) return res;
    auto cmp = [](const detail::Cell& l, const detail::Cell& r) { return l.error < r.error; };
    std::priority_queue<detail::Cell, std::vector<detail::Cell>, decltype(cmp)> heap(cmp);
    double value = 0.0, error = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (breaks[i] == breaks[i + 1]) continue;
        auto cell = detail::gk15(f, breaks[i], breaks[i + 1]);
        value += cell.value;
        error += cell.error;
        res.evaluations += 15;
        heap.push(cell);
    }
    int splits = 0;
    while (error > std::max(abs_tol, rel_tol * std::abs(value)) && splits < max_subdivisions &&
           !heap.empty()) {
        const detail::Cell worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (mid <= worst.a || mid >= worst.b) continue;  // interval exhausted by rounding
        auto left = detail::gk15(f, worst.a, mid);
        auto right = detail::gk15(f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        res.evaluations += 30;
        heap.push(left);
        heap.push(right);
        ++splits;
    }
    res.value = value;
    res.error = error;
    res.converged = error <= std::max(abs_tol, rel_tol * std::abs(value));
    return res;
}

template <class F>
Result integrate(F&& f, double a, double b, double rel_tol, double abs_tol,
                 int max_subdivisions) {
    const double breaks[2] = {a, b};
    return integrate_cells(f, breaks, rel_tol, abs_tol, max_subdivisions);
}

// Nodes/weights for ∫ e^{-x^2} f(x) dx ≈ Σ w_i f(x_i); full symmetric set.
struct GaussHermite {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Newton iteration on orthonormal Hermite recurrence; cached per order.
inline const GaussHermite& gauss_hermite(int m) {
    static std::map<int, GaussHermite> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(m);
    if (it != cache.end()) return it->second;

    GaussHermite gh;
    gh.nodes.assign(m, 0.0);
    gh.weights.assign(m, 0.0);
    const int half = (m + 1) / 2;
    double z = 0.0, pp = 0.0;
    for (int i = 0; i < half; ++i) {
        if (i == 0) {
            z = std::sqrt(2.0 * m + 1.0) - 1.85575 * std::pow(2.0 * m + 1.0, -1.0 / 6.0);
        } else if (i == 1) {
            z -= 1.14 * std::pow(static_cast<double>(m), 0.426) / z;
        } else if (i == 2) {
            z = 1.86 * z - 0.86 * gh.nodes[0];
        } else if (i == 3) {
            z = 1.91 * z - 0.91 * gh.nodes[1];
        } else {
            z = 2.0 * z - gh.nodes[i - 2];
        }
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = std::pow(M_PI, -0.25);
            double p2 = 0.0;
            for (int j = 0; j < m; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / (j + 1.0)) * p2 -
                     std::sqrt(static_cast<double>(j) / (j + 1.0)) * p3;
            }
            pp = std::sqrt(2.0 * m) * p2;
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15 * std::max(1.0, std::abs(z))) break;
        }
        gh.nodes[i] = z;
        gh.nodes[m - 1 - i] = -z;
        gh.weights[i] = 2.0 / (pp * pp);
        gh.weights[m - 1 - i] = gh.weights[i];
    }
    if (m % 2 == 1) gh.nodes[half - 1] = 0.0;
    return cache.emplace(m, std::move(gh)).first->second;
}

// Composite (non-adaptive) GK15 panels, used where a fixed quadrature plan is required.
template <class F>
double composite_gk15(F&& f, std::span<const double> breaks) {
    double v = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
        v += detail::gk15(f, breaks[i], breaks[i + 1]).value;
    return v;
}

// Record the GK15 nodes/weights of a composite panel plan (for stencil construction).
inline void gk15_panel_nodes(double a, double b, std::vector<double>& xs,
                             std::vector<double>& ws) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    xs.push_back(c);
    ws.push_back(h * detail::kWgk[7]);
    for (int i = 0; i < 7; ++i) {
        const double x = h * detail::kXgk[i];
        xs.push_back(c - x);
        ws.push_back(h * detail::kWgk[i]);
        xs.push_back(c + x);
        ws.push_back(h * detail::kWgk[i]);
    }
}

}  // namespace quad
}  // namespace parheat
