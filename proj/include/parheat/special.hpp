#pragma once

// Thin wrappers so boost.math stays localized to one header.

#include <boost/math/special_functions/gamma.hpp>

namespace parheat {

// Regularized upper incomplete gamma Q(a,x) = Γ(a,x)/Γ(a).
inline double gamma_q(double a, double x) { return boost::math::gamma_q(a, x); }

// Regularized lower incomplete gamma P(a,x).
inline double gamma_p(double a, double x) { return boost::math::gamma_p(a, x); }

// Upper tail of |Z| for Z ~ N(0, I_n): P(|Z| > r) = Q(n/2, r^2/2).
inline double gaussian_norm_tail(int n, double r) {
    if (r <= 0.0) return 1.0;
    return gamma_q(0.5 * n, 0.5 * r * r);
}

// Survival function of the chi-square distribution with k dof.
inline double chi_square_sf(double x, double k) { return gamma_q(0.5 * k, 0.5 * x); }

}  // namespace parheat
