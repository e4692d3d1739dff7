#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "matrixpower/dataset.hpp"
#include "matrixpower/linalg.hpp"
#include "matrixpower/moments.hpp"
#include "matrixpower/rng.hpp"

namespace matrixpower {

struct FitResult {
    std::string method;
    double beta0 = 0.0;
    Vector beta;
    double sigma2 = 0.0;
    Vector se;  ///< intercept first

    /// (beta0, beta_1..beta_p).
    Vector coefficients() const;
};

struct PooledResult {
    std::size_t imputations = 0;
    Vector estimate;  ///< mean of the per-imputation estimates
    Vector within;    ///< W, mean squared standard error
    Vector between;   ///< B, variance of the estimates
    Vector total;     ///< T = W + (1 + 1/M) B
    Vector df;        ///< Barnard-Rubin degrees of freedom
    Vector fmi;       ///< (B + B/M) / T
    Vector ci_low;
    Vector ci_high;

    Vector se() const;
};

/// Least squares with the unbiased residual variance (denominator n - p - 1).
/// Throws RankDeficient for singular X'X and InvariantError on missing cells.
FitResult ols(const Dataset& complete);

struct EmOptions {
    double tolerance = 1e-8;  ///< relative change in log-likelihood
    int max_iterations = 5000;
};

struct EmResult {
    MomentStructure moments;
    FitResult fit;
    int iterations = 0;
    std::vector<double> loglik_trace;  ///< log-likelihood at each iterate, starting values first
};

/// Normal-theory maximum likelihood for (mu, Sigma) with missing
/// regressors, by EM over missingness patterns. Standard errors come from
/// the expected information at the estimate with the observed pattern
/// counts. Throws NoConvergence after the iteration cap.
EmResult em_mvn(const Dataset& data, const EmOptions& options = {});

/// EM on a reweighted sample (row i counted weights[i] times).
EmResult em_mvn_weighted(const Dataset& data, std::span<const double> weights, const EmOptions& options = {});

/// M completed datasets, each drawn from the conditional normal of the
/// missing cells given the observed ones under parameters re-estimated by
/// EM on a bootstrap resample of the rows.
std::vector<Dataset> mi_mvn(const Dataset& data, std::size_t imputations, RngStream& stream,
                            const EmOptions& options = {});

struct PmmOptions {
    std::size_t k_donors = 5;
    std::size_t cycles = 10;
    /// Predict recipients from regression coefficients drawn from their
    /// posterior (donors always use the least-squares fit). When false both
    /// sides use the least-squares fit.
    bool draw_parameters = true;
};

/// M completed datasets by chained predictive mean matching over the
/// regressors with missing cells. Every imputed value is an observed value
/// of the same column. Throws InsufficientDonors when a column has fewer
/// than k_donors observed cells.
std::vector<Dataset> mi_pmm(const Dataset& data, std::size_t imputations, RngStream& stream,
                            const PmmOptions& options = {});

/// Rubin's rules. `complete_df` is the complete-data residual degrees of
/// freedom n - p - 1 used in the Barnard-Rubin adjustment.
PooledResult rubin_pool(std::span<const FitResult> fits, double complete_df);

}  // namespace matrixpower
