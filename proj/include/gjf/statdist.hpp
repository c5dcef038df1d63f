#pragma once

#include <limits>

namespace gjf {

// Regularized lower incomplete gamma P(a, x); series for x < a+1,
// continued fraction otherwise. Absolute error <= 1e-12 on [0, inf).
double regularized_gamma_p(double a, double x);

// P[chi^2(m) <= x]. Throws std::domain_error for x < 0 or m < 1.
double chi2_cdf(double x, int m);

// Inverse of chi2_cdf in x for fixed m; prob in [0, 1), +inf at prob -> 1.
double chi2_quantile(double prob, int m);

// Standard normal quantile (rational approximation polished by Newton).
double normal_quantile(double prob);
double normal_cdf(double z);

// c(alpha): the (1 - alpha) quantile of chi^2(m); +inf when alpha = 0.
double threshold_constant(double alpha, int m);

// q(alpha) = E[V 1{V <= c(alpha)}] / m for V ~ chi^2(m),
// computed through the identity E[V 1{V <= c}] = m P[chi^2(m+2) <= c].
double truncation_factor(double alpha, int m);

// The per-block filter constants (c, q, p) for a given alpha and block dim.
struct TruncationConstants {
    double alpha = 0.0;
    int m = 1;
    double c = std::numeric_limits<double>::infinity();
    double q = 1.0;
    double p = 1.0;

    static TruncationConstants make(double alpha, int m);
};

}  // namespace gjf
