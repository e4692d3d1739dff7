#include "matrixpower/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#include "matrixpower/error.hpp"

namespace matrixpower {

namespace {

void require_probability(double p, const char* fn) {
    if (!(p > 0.0 && p < 1.0))
        throw DomainError(std::string(fn) + ": probability must lie in (0, 1), got " + std::to_string(p));
}

double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < 100000; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper tail Q(a, x) by modified Lentz continued fraction.
double gamma_q_fraction(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 100000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
    require_probability(p, "normal_quantile");
    // Acklam's rational approximation refined by two Halley steps.
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    for (int it = 0; it < 2; ++it) {
        const double e = normal_cdf(x) - p;
        const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

double t_quantile(double df, double p) {
    require_probability(p, "t_quantile");
    if (!(df > 0.0)) throw DomainError("t_quantile: degrees of freedom must be positive");
    if (!std::isfinite(df) || df > 1e12) return normal_quantile(p);
    return boost::math::quantile(boost::math::students_t_distribution<double>(df), p);
}

double gamma_p(double a, double x) {
    if (!(a > 0.0)) throw DomainError("gamma_p: shape must be positive");
    if (x <= 0.0) return 0.0;
    if (x < a + 1.0) return std::min(1.0, gamma_p_series(a, x));
    return std::max(0.0, 1.0 - gamma_q_fraction(a, x));
}

double chisq_cdf(double x, double df) {
    if (!(df > 0.0)) throw DomainError("chisq_cdf: degrees of freedom must be positive");
    return gamma_p(0.5 * df, 0.5 * x);
}

double chisq_quantile(double p, double df) {
    require_probability(p, "chisq_quantile");
    double lo = 0.0;
    double hi = std::max(1.0, df);
    while (chisq_cdf(hi, df) < p) {
        lo = hi;
        hi *= 2.0;
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (chisq_cdf(mid, df) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double noncentral_chisq_cdf(double x, double df, double lambda) {
    if (!(df > 0.0)) throw DomainError("noncentral_chisq_cdf: degrees of freedom must be positive");
    if (lambda < 0.0) throw DomainError("noncentral_chisq_cdf: noncentrality must be nonnegative");
    if (x <= 0.0) return 0.0;
    if (lambda == 0.0) return chisq_cdf(x, df);

    const double mu = 0.5 * lambda;
    const auto mode = static_cast<long>(std::floor(mu));
    auto log_weight = [mu](long j) { return -mu + j * std::log(mu) - std::lgamma(j + 1.0); };

    double total_weight = 0.0;
    double sum = 0.0;
    long up = mode;
    long down = mode - 1;
    const double target = 1.0 - 1e-12;
    while (total_weight < target) {
        const double wu = std::exp(log_weight(up));
        const double wd = down >= 0 ? std::exp(log_weight(down)) : 0.0;
        if (wu >= wd || down < 0) {
            total_weight += wu;
            sum += wu * chisq_cdf(x, df + 2.0 * up);
            ++up;
        } else {
            total_weight += wd;
            sum += wd * chisq_cdf(x, df + 2.0 * down);
            --down;
        }
        if (wu == 0.0 && (down < 0 || wd == 0.0)) break;
    }
    return std::clamp(sum, 0.0, 1.0);
}

}  // namespace matrixpower
