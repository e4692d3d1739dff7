#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "matrixpower/design.hpp"
#include "matrixpower/linalg.hpp"
#include "matrixpower/moments.hpp"

namespace matrixpower {

/// H0: R (beta0, beta')' = r, with R of full row rank q.
struct LinearHypothesis {
    Matrix R;
    Vector r;

    LinearHypothesis(Matrix R, Vector r);
    std::size_t q() const noexcept { return R.rows(); }
};

struct PowerSpec {
    LinearHypothesis hypothesis;
    RegressionModel alternative;
    double alpha = 0.05;
    double target_power = 0.8;
};

struct SampleSizeResult {
    std::size_t n_total = 0;
    std::vector<std::size_t> per_form;
    double achieved_power = 0.0;
    double noncentrality_at_n = 0.0;
    double n_exact = 0.0;  ///< real-valued n at which power equals the target
};

/// Per-observation Wald noncentrality (R b - r)'[R V R']^{-1}(R b - r).
/// Throws DegenerateConstraint when R V R' is singular.
double noncentrality_unit(const LinearHypothesis& h, const RegressionModel& alt, const SymMatrix& cov_beta_unit);

/// Power of the level-alpha Wald chi-square test at total sample size n.
double wald_power(const LinearHypothesis& h, const RegressionModel& alt, const SymMatrix& cov_beta_unit, double n,
                  double alpha = 0.05);

/// Smallest n, in whole multiples of the number of forms, whose Wald power
/// reaches the target. Per-form counts split n equally for uniform
/// allocations and by largest remainders otherwise. Throws NoEffect when
/// R beta = r.
SampleSizeResult sample_size(const PowerSpec& spec, const SymMatrix& cov_beta_unit,
                             std::span<const double> allocation);

/// Largest-remainder apportionment of n across the allocation fractions.
std::vector<std::size_t> apportion(std::size_t n, std::span<const double> allocation);

/// H0: beta_1 = .. = beta_p = 0.
LinearHypothesis overall_test(const RegressionModel& alt);
/// H0: beta_j = value, j = 1..p (j = 0 addresses the intercept).
LinearHypothesis coefficient_test(std::size_t p, std::size_t j, double value = 0.0);

/// Alternative from a uniform rescaling of the slopes that raises R^2 by
/// delta; H0 pins all slopes at their base values (q = p).
PowerSpec r2_increase_uniform(const RegressionModel& base, const SymMatrix& sigma_xx, double delta,
                              double alpha = 0.05, double target_power = 0.8);
/// Alternative from moving slope j (0-based) alone; H0 pins beta_j at its
/// base value (q = 1).
PowerSpec r2_increase_single(const RegressionModel& base, const SymMatrix& sigma_xx, double delta, std::size_t j,
                             double alpha = 0.05, double target_power = 0.8);

enum class CovarianceSource { MatrixSampled, Complete };

/// Per-observation covariance of (beta0, beta) at `model`, either under the
/// design or with complete data.
SymMatrix model_cov_beta_unit(const RegressionModel& model, const Vector& mu_x, const SymMatrix& sigma_xx,
                              const Design& d, CovarianceSource source);

}  // namespace matrixpower
