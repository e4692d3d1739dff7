#pragma once

// Distribution functions used for power calculations and interval
// estimates. Quantile functions throw DomainError for p outside (0, 1).

namespace matrixpower {

double normal_cdf(double x);
double normal_quantile(double p);

/// Student t quantile; df may be non-integer (Barnard-Rubin degrees of freedom).
double t_quantile(double df, double p);

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

double chisq_cdf(double x, double df);
double chisq_quantile(double p, double df);

/// Noncentral chi-square CDF as a Poisson(lambda/2) mixture of central CDFs,
/// summed outward from the Poisson mode until the accumulated weight exceeds
/// 1 - 1e-12.
double noncentral_chisq_cdf(double x, double df, double lambda);

}  // namespace matrixpower
