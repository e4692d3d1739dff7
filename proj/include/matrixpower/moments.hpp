#pragma once

#include <cstddef>
#include <utility>

#include "matrixpower/linalg.hpp"

namespace matrixpower {

/// Linear regression y = beta0 + beta'x + e with Var(e) = sigma2.
struct RegressionModel {
    double beta0 = 0.0;
    Vector beta;
    double sigma2 = 1.0;

    std::size_t p() const noexcept { return beta.size(); }
};

/// Means and centered covariance of z = (x_1..x_p, y). This is the source of
/// truth; the raw-moment matrix Omega is derived from it on demand.
class MomentStructure {
public:
    /// Checks that dimensions agree and p >= 1. Positive definiteness is
    /// checked where a factorization is needed (NotPositiveDefinite).
    MomentStructure(Vector mu, SymMatrix sigma);

    std::size_t p() const noexcept { return mu_.size() - 1; }
    std::size_t dim() const noexcept { return mu_.size(); }
    const Vector& mu() const noexcept { return mu_; }
    const SymMatrix& sigma() const noexcept { return sigma_; }

    Vector mu_x() const;
    SymMatrix sigma_xx() const;

private:
    Vector mu_;
    SymMatrix sigma_;
};

/// Bordered raw-moment matrix E[(1, x', y)'(1, x', y)] of size (p+2)x(p+2)
/// with omega(0, 0) == 1.
struct OmegaView {
    SymMatrix omega;

    std::size_t p() const noexcept { return omega.dim() - 2; }
    /// E[(1, x')'(1, x')], the (p+1)x(p+1) leading block.
    SymMatrix design_block() const;
    /// E[(1, x')' y], the first p+1 entries of the last column.
    Vector cross_block() const;
};

OmegaView omega_view(const MomentStructure& m);
MomentStructure moments_from_omega(const OmegaView& omega);

/// Flat indexing of the free parameters of vech(Omega).
///
/// Symbols (s, t) with 0 <= s <= t <= p+1 use 0 for the intercept, 1..p for
/// the regressors and p+1 for y. omega_00 is fixed at 1 and excluded. The
/// order is that of vech: (0,1), (0,2), .., (0,p+1), (1,1), (1,2), ..,
/// (p+1,p+1); the first p+1 indices form the mean block.
class VechIndex {
public:
    explicit VechIndex(std::size_t p);

    std::size_t p() const noexcept { return p_; }
    std::size_t parameter_count() const noexcept { return count_; }
    std::size_t mean_count() const noexcept { return p_ + 1; }
    std::size_t covariance_count() const noexcept { return count_ - p_ - 1; }

    /// Flat index of symbol (s, t); the order of s and t does not matter.
    /// Throws IndexError for (0, 0) and out-of-range symbols.
    std::size_t index_of(std::size_t s, std::size_t t) const;
    std::pair<std::size_t, std::size_t> symbol_of(std::size_t index) const;
    bool is_mean(std::size_t index) const { return index < p_ + 1; }

private:
    std::size_t p_;
    std::size_t count_;
};

/// (p+2)(p+3)/2 - 1.
std::size_t parameter_count(std::size_t p);

/// Joint moments implied by the regression: mu_y = beta0 + beta'mu_x,
/// Cov(x, y) = Sigma_xx beta, Var(y) = beta'Sigma_xx beta + sigma2.
MomentStructure build_moments(const Vector& mu_x, const SymMatrix& sigma_xx, const RegressionModel& model);

/// Regression of y on x recovered from the bordered solve on Omega.
RegressionModel regression_from_moments(const MomentStructure& m);

/// beta'Sigma beta / (beta'Sigma beta + sigma2).
double r_squared(const RegressionModel& model, const SymMatrix& sigma_xx);

/// Residual variance that gives the requested R^2; DomainError when the
/// explained variance beta'Sigma beta is zero or r2 is outside (0, 1).
double sigma2_for_r2(const Vector& beta, const SymMatrix& sigma_xx, double r2);

/// Multiplies every slope by the same factor so that R^2 grows by `delta`
/// with sigma2 fixed.
RegressionModel inflate_beta_for_r2(const RegressionModel& model, const SymMatrix& sigma_xx, double delta);

/// Moves slope j alone so that R^2 grows by `delta` with sigma2 fixed. Of the
/// two roots of the quadratic in the new slope, the one closest to the
/// current value wins (ties go to the larger). Throws NoRealRoot when the
/// target cannot be reached through slope j.
RegressionModel poke_beta_for_r2(const RegressionModel& model, const SymMatrix& sigma_xx, double delta,
                                 std::size_t j);

}  // namespace matrixpower
