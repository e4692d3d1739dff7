#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "matrixpower/dataset.hpp"
#include "matrixpower/design.hpp"
#include "matrixpower/linalg.hpp"
#include "matrixpower/moments.hpp"

namespace matrixpower {

/// Observed-variable set with its (possibly fractional) number of rows.
/// Designs reduce to one pattern per form; EM fits use the empirical
/// missingness patterns.
struct ObservedPattern {
    std::vector<std::size_t> variables;  ///< ascending indices into (x_1..x_p, y)
    double count = 0.0;
};

std::vector<ObservedPattern> design_patterns(const Design& d, double n_total);

/// Inverse of a form's covariance submatrix, zero-padded back to the full
/// (p+1)x(p+1) layout over (x_1..x_p, y).
struct TauMatrix {
    SymMatrix tau;
    std::vector<std::size_t> variables;
};

TauMatrix padded_inverse(const SymMatrix& sigma, std::span<const std::size_t> variables);
TauMatrix tau(const MomentStructure& m, const Design& d, std::size_t form);

/// Expected information for the free parameters of vech(Omega), laid out by
/// VechIndex. Mean/covariance cross entries are identically zero.
struct InformationMatrix {
    VechIndex index;
    SymMatrix matrix;
};

InformationMatrix information(const MomentStructure& m, std::span<const ObservedPattern> patterns);
InformationMatrix information(const MomentStructure& m, const Design& d, double n_total);

/// Inverse information. Throws SingularInformation when the Cholesky
/// factorization fails; the overload taking a design names the pairs of
/// variables no form observes jointly.
SymMatrix cov_omega(const InformationMatrix& info);
SymMatrix cov_omega(const InformationMatrix& info, const Design& d);

/// Jacobian of (beta0, beta_1..beta_p) with respect to the free parameters
/// (means and centered covariances), (p+1) x parameter_count(p).
Matrix grad_beta(const MomentStructure& m);

/// The same Jacobian taken with respect to the raw moments of Omega.
Matrix grad_beta_raw(const MomentStructure& m);

/// sigma2 * (n E[(1,x)(1,x)'])^{-1}, the complete-data OLS covariance.
SymMatrix complete_cov_beta(const MomentStructure& m, double n_total);

struct AsymptoticReport {
    double n_total = 0.0;
    RegressionModel model;
    SymMatrix cov_omega;
    Matrix grad_beta;
    SymMatrix cov_beta;           ///< intercept first
    SymMatrix cov_beta_complete;  ///< complete-data benchmark
    Vector se;
    Vector se_complete;
    Vector fmi;                   ///< 1 - complete/matrix-sampled variance, per coefficient
    double information_condition = 0.0;
};

AsymptoticReport report(const MomentStructure& m, const Design& d, double n_total);
AsymptoticReport report(const MomentStructure& m, std::span<const ObservedPattern> patterns, double n_total);

/// Per-observation As.V of (beta0, beta) under the design.
SymMatrix cov_beta_unit(const MomentStructure& m, const Design& d);

/// Multivariate normal log-likelihood of the observed cells. Every row must
/// carry a form label whose administered variables are exactly its
/// observed cells.
double loglik(const Dataset& data, const MomentStructure& m, const Design& d);

/// Same likelihood, grouping rows by their observed cells (no form labels).
double loglik(const Dataset& data, const MomentStructure& m);

}  // namespace matrixpower
