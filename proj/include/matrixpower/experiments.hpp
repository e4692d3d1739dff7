#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "matrixpower/dataset.hpp"
#include "matrixpower/design.hpp"
#include "matrixpower/estimators.hpp"
#include "matrixpower/linalg.hpp"
#include "matrixpower/moments.hpp"
#include "matrixpower/rng.hpp"

namespace matrixpower {

/// Correlation matrix of the Big Five subscales O, C, E, A, N.
SymMatrix bigfive_correlation();

/// The population regression used with the Big Five design:
/// beta = (0.3, 0, 0, 0.3, 0), beta0 = 0, sigma2 = 1.248602.
RegressionModel bigfive_model();

/// min, p05, p25, median, p75, p95, max by linear interpolation between
/// order statistics. NaN entries are ignored; all-NaN input gives NaNs.
struct Quantiles {
    std::size_t count = 0;
    double min = 0, p05 = 0, p25 = 0, median = 0, p75 = 0, p90 = 0, p95 = 0, max = 0;
    double mean = 0;
};
Quantiles summarize(std::vector<double> values);
/// Interpolated quantile of sorted data at probability q (type 7).
double quantile_sorted(const std::vector<double>& sorted, double q);

// ---------------------------------------------------------------------------
// Parameter-space exploration

struct ExploreConfig {
    std::size_t draws = 1000;
    double r2 = 0.15;
    double delta = 0.01;
    double alpha = 0.05;
    double power = 0.8;
    double n_reference = 1000;  ///< labels the FMI columns only; FMI does not depend on n
    std::uint64_t seed = 1;
    std::size_t threads = 1;
};

/// One beta draw. Sample sizes are 0 when the draw failed or (single-slope
/// tests) when no slope value reaches the target R^2.
struct ExploreDraw {
    std::size_t index = 0;
    Vector beta;
    double sigma2 = 0.0;
    std::size_t n_overall = 0, n_overall_complete = 0;
    std::size_t n_uniform = 0, n_uniform_complete = 0;
    std::vector<std::size_t> n_single, n_single_complete;
    std::vector<bool> single_no_root;
    Vector fmi;  ///< intercept first
    std::string failure;  ///< empty on success
};

struct ExploreReport {
    ExploreConfig config;
    std::vector<ExploreDraw> draws;
    std::map<std::string, Quantiles> summaries;
    std::vector<std::size_t> no_root_count;  ///< per slope
    std::size_t failures = 0;
};

/// Draws beta ~ N(0, I_p) per draw (stream `draw index` under the seed),
/// sets sigma2 for the target R^2 and computes sample sizes for the overall
/// test, the uniform R^2 increase and each single-slope increase under both
/// the matrix-sampled and complete-data covariances, plus per-coefficient
/// FMI. Regressor means are zero.
ExploreReport explore(const ExploreConfig& config, const Design& design, const SymMatrix& sigma_xx);
ExploreReport explore(const ExploreConfig& config);  ///< Big Five design and correlations

void write_explore_csv(std::ostream& out, const ExploreReport& report);

// ---------------------------------------------------------------------------
// Microdata simulation

/// n rows of the Big Five regressors built from skewed, bimodal and normal
/// factors rotated onto the Big Five correlation matrix, and
/// y = 0.3 x1 + 0.3 x4 + e with Var(e) = 1.248602.
Dataset generate_microdata(std::size_t n, RngStream& stream);

/// Assigns rows to forms by a random permutation with exact per-form counts
/// and masks the regressors each row's form does not administer. Throws
/// AllocationError when allocation * n is not integral for some form.
Dataset apply_design(const Dataset& data, const Design& d, RngStream& stream);

struct SimConfig {
    std::size_t n = 1000;
    std::size_t reps = 1200;
    std::size_t m_small = 5;
    std::size_t m_large = 50;
    std::vector<std::string> methods{"complete", "em", "mi-mvn", "mi-pmm"};
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    PmmOptions pmm;
    EmOptions em;
};

/// Estimates of one method on one replicate. MI methods are reported twice,
/// pooled over the first m_small and over all m_large imputations.
struct MethodResult {
    std::string label;  ///< complete, em, mi-mvn-5, mi-mvn-50, ...
    bool ok = false;
    std::string failure;
    Vector estimate;  ///< intercept first
    Vector se;
    Vector ci_low, ci_high;
    Vector fmi;       ///< reported FMI, MI only
};

struct Replicate {
    std::size_t index = 0;
    std::vector<MethodResult> results;
};

struct CoefficientSummary {
    double mean = 0.0;
    double mean_ci_low = 0.0, mean_ci_high = 0.0;
    double sd = 0.0;
    double coverage = 0.0;
    Quantiles se;
    double se_tail_pct = 0.0;  ///< share of SEs beyond 3x the analytic SE, in percent
    std::optional<Quantiles> reported_fmi;
    std::optional<double> empirical_fmi;  ///< 1 - Var_complete / Var_method
};

struct MethodSummary {
    std::string label;
    std::size_t successes = 0;
    std::size_t failures = 0;
    std::map<std::string, std::size_t> failure_reasons;
    std::vector<CoefficientSummary> coefficients;  ///< intercept first
};

struct SimReport {
    SimConfig config;
    Vector truth;        ///< intercept first
    Vector analytic_se;  ///< under the design at n
    Vector analytic_fmi;
    std::vector<Replicate> replicates;
    std::vector<MethodSummary> methods;
};

SimReport simulate(const SimConfig& config);

void write_simulate_csv(std::ostream& out, const SimReport& report);

}  // namespace matrixpower
