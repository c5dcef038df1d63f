#include "gjf/statdist.hpp"

#include <cmath>
#include <stdexcept>

namespace gjf {

namespace {

constexpr double kEps = 1e-15;
constexpr int kMaxIter = 500;

// Lower series: P(a,x) = x^a e^{-x} / Gamma(a) * sum x^k / (a)_{k+1}
double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < kMaxIter; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * kEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper continued fraction (modified Lentz): Q(a,x).
double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double f = d;
    for (int i = 1; i <= kMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        f *= delta;
        if (std::abs(delta - 1.0) < kEps) break;
    }
    return f * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double regularized_gamma_p(double a, double x) {
    if (!(a > 0.0)) throw std::domain_error("regularized_gamma_p: a must be positive");
    if (x < 0.0) throw std::domain_error("regularized_gamma_p: x must be nonnegative");
    if (x == 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_cf(a, x);
}

double chi2_cdf(double x, int m) {
    if (m < 1) throw std::domain_error("chi2_cdf: m must be >= 1");
    if (x < 0.0) throw std::domain_error("chi2_cdf: x must be nonnegative");
    return regularized_gamma_p(0.5 * m, 0.5 * x);
}

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double normal_quantile(double prob) {
    if (!(prob > 0.0 && prob < 1.0))
        throw std::domain_error("normal_quantile: prob must be in (0,1)");
    // Beasley-Springer-Moro style start.
    static const double a[4] = {2.50662823884, -18.61500062529, 41.39119773534, -25.44106049637};
    static const double b[4] = {-8.47351093090, 23.08336743743, -21.06224101826, 3.13082909833};
    static const double c[9] = {0.3374754822726147, 0.9761690190917186, 0.1607979714918209,
                                0.0276438810333863, 0.0038405729373609, 0.0003951896511919,
                                0.0000321767881768, 0.0000002888167364, 0.0000003960315187};
    const double u = prob - 0.5;
    double z;
    if (std::abs(u) < 0.42) {
        const double r = u * u;
        z = u * (((a[3] * r + a[2]) * r + a[1]) * r + a[0]) /
            ((((b[3] * r + b[2]) * r + b[1]) * r + b[0]) * r + 1.0);
    } else {
        double r = (u < 0.0) ? prob : 1.0 - prob;
        r = std::log(-std::log(r));
        z = c[0];
        double rp = 1.0;
        for (int i = 1; i < 9; ++i) {
            rp *= r;
            z += c[i] * rp;
        }
        if (u < 0.0) z = -z;
    }
    // Two Newton corrections against the exact cdf.
    for (int it = 0; it < 2; ++it) {
        const double err = normal_cdf(z) - prob;
        const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
        if (pdf <= 0.0) break;
        z -= err / pdf;
    }
    return z;
}

double chi2_quantile(double prob, int m) {
    if (m < 1) throw std::domain_error("chi2_quantile: m must be >= 1");
    if (prob < 0.0 || prob >= 1.0)
        throw std::domain_error("chi2_quantile: prob must be in [0,1)");
    if (prob == 0.0) return 0.0;

    // Wilson-Hilferty start, then safeguarded Newton on the cdf.
    const double z = normal_quantile(prob);
    const double t = 1.0 - 2.0 / (9.0 * m) + z * std::sqrt(2.0 / (9.0 * m));
    double x = m * t * t * t;
    if (!(x > 0.0)) x = 0.5 / m;

    double lo = 0.0;
    double hi = std::max(4.0 * x, 16.0 + 4.0 * m);
    while (chi2_cdf(hi, m) < prob) {
        hi *= 2.0;
        if (hi > 1e12) throw std::runtime_error("chi2_quantile: bracket failure");
    }

    const double a = 0.5 * m;
    const double lg = std::lgamma(a);
    for (int it = 0; it < 200; ++it) {
        const double f = chi2_cdf(x, m) - prob;
        if (std::abs(f) <= 1e-13) return x;
        if (f > 0.0) hi = x; else lo = x;
        // chi^2 pdf at x
        const double pdf = std::exp((a - 1.0) * std::log(0.5 * x) - 0.5 * x - lg) * 0.5;
        double next = (pdf > 0.0) ? x - f / pdf : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 1e-14 * std::max(1.0, x)) return next;
        x = next;
    }
    throw std::runtime_error("chi2_quantile: no convergence in 200 iterations");
}

double threshold_constant(double alpha, int m) {
    if (alpha < 0.0 || alpha >= 1.0)
        throw std::domain_error("threshold_constant: alpha must be in [0,1)");
    if (alpha == 0.0) return std::numeric_limits<double>::infinity();
    return chi2_quantile(1.0 - alpha, m);
}

double truncation_factor(double alpha, int m) {
    if (alpha < 0.0 || alpha >= 1.0)
        throw std::domain_error("truncation_factor: alpha must be in [0,1)");
    if (alpha == 0.0) return 1.0;
    const double c = threshold_constant(alpha, m);
    return chi2_cdf(c, m + 2);
}

TruncationConstants TruncationConstants::make(double alpha, int m) {
    TruncationConstants tc;
    tc.alpha = alpha;
    tc.m = m;
    tc.c = threshold_constant(alpha, m);
    tc.q = truncation_factor(alpha, m);
    tc.p = 1.0 - alpha;
    return tc;
}

}  // namespace gjf
