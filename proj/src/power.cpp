#include "matrixpower/power.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "matrixpower/asymptotics.hpp"
#include "matrixpower/error.hpp"
#include "matrixpower/special.hpp"

namespace matrixpower {

LinearHypothesis::LinearHypothesis(Matrix R_, Vector r_) : R(std::move(R_)), r(std::move(r_)) {
    if (R.rows() == 0) throw InvariantError("hypothesis needs at least one constraint");
    if (R.rows() != r.size()) throw InvariantError("constraint matrix and target vector disagree in length");
    try {
        chol(SymMatrix::symmetrized(R * R.transpose()));
    } catch (const NotPositiveDefinite&) {
        throw DegenerateConstraint("constraint matrix does not have full row rank");
    }
}

namespace {

Vector coefficients(const RegressionModel& m) {
    Vector b{m.beta0};
    b.insert(b.end(), m.beta.begin(), m.beta.end());
    return b;
}

Vector discrepancy(const LinearHypothesis& h, const RegressionModel& alt) {
    const Vector b = coefficients(alt);
    if (h.R.cols() != b.size()) throw InvariantError("constraint matrix width must be p + 1");
    Vector d = h.R * b;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= h.r[i];
    return d;
}

bool is_null(const LinearHypothesis& h, const RegressionModel& alt) {
    const Vector d = discrepancy(h, alt);
    for (std::size_t i = 0; i < d.size(); ++i)
        if (std::abs(d[i]) > 1e-12 * (1.0 + std::abs(h.r[i]))) return false;
    return true;
}

}  // namespace

double noncentrality_unit(const LinearHypothesis& h, const RegressionModel& alt, const SymMatrix& cov_beta_unit) {
    const Vector d = discrepancy(h, alt);
    const SymMatrix rvr = congruence(h.R, cov_beta_unit);
    try {
        return dot(d, spd_solve(rvr, d));
    } catch (const NotPositiveDefinite&) {
        throw DegenerateConstraint("R V R' is singular; the hypothesis is not testable under this covariance");
    }
}

double wald_power(const LinearHypothesis& h, const RegressionModel& alt, const SymMatrix& cov_beta_unit, double n,
                  double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
    const double q = static_cast<double>(h.q());
    const double crit = chisq_quantile(1.0 - alpha, q);
    const double lambda = n * noncentrality_unit(h, alt, cov_beta_unit);
    return 1.0 - noncentral_chisq_cdf(crit, q, lambda);
}

std::vector<std::size_t> apportion(std::size_t n, std::span<const double> allocation) {
    std::vector<std::size_t> counts(allocation.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < allocation.size(); ++k) {
        const double exact = allocation[k] * static_cast<double>(n);
        counts[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        assigned += counts[k];
        remainders.emplace_back(exact - static_cast<double>(counts[k]), k);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < n && i < remainders.size(); ++i, ++assigned) ++counts[remainders[i].second];
    return counts;
}

SampleSizeResult sample_size(const PowerSpec& spec, const SymMatrix& cov_beta_unit,
                             std::span<const double> allocation) {
    if (allocation.empty()) throw InvariantError("sample size needs at least one form");
    if (!(spec.target_power > spec.alpha && spec.target_power < 1.0))
        throw DomainError("target power must lie in (alpha, 1)");
    if (is_null(spec.hypothesis, spec.alternative))
        throw NoEffect("the alternative satisfies the null hypothesis; no sample size has power above alpha");

    const double q = static_cast<double>(spec.hypothesis.q());
    const double crit = chisq_quantile(1.0 - spec.alpha, q);
    const double lambda_unit = noncentrality_unit(spec.hypothesis, spec.alternative, cov_beta_unit);
    if (!(lambda_unit > 0.0)) throw NoEffect("zero noncentrality");
    auto power_at = [&](double n) { return 1.0 - noncentral_chisq_cdf(crit, q, n * lambda_unit); };

    const double granule = static_cast<double>(allocation.size());
    double lo = 0.0;
    double hi = granule;
    while (power_at(hi) < spec.target_power) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e15) throw DomainError("required sample size exceeds 1e15");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-9 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (power_at(mid) < spec.target_power ? lo : hi) = mid;
    }

    SampleSizeResult res;
    res.n_exact = hi;
    const auto granules = static_cast<std::size_t>(std::ceil(hi / granule - 1e-12));
    res.n_total = std::max<std::size_t>(1, granules) * allocation.size();
    // Guard against the bisection tolerance landing one granule short.
    while (power_at(static_cast<double>(res.n_total)) < spec.target_power) res.n_total += allocation.size();
    res.per_form = apportion(res.n_total, allocation);
    res.noncentrality_at_n = static_cast<double>(res.n_total) * lambda_unit;
    res.achieved_power = power_at(static_cast<double>(res.n_total));
    return res;
}

LinearHypothesis overall_test(const RegressionModel& alt) {
    const std::size_t p = alt.p();
    Matrix R(p, p + 1);
    for (std::size_t j = 0; j < p; ++j) R(j, j + 1) = 1.0;
    return LinearHypothesis(std::move(R), Vector(p, 0.0));
}

LinearHypothesis coefficient_test(std::size_t p, std::size_t j, double value) {
    if (j > p) throw IndexError("coefficient index out of range");
    Matrix R(1, p + 1);
    R(0, j) = 1.0;
    return LinearHypothesis(std::move(R), Vector{value});
}

PowerSpec r2_increase_uniform(const RegressionModel& base, const SymMatrix& sigma_xx, double delta, double alpha,
                              double target_power) {
    RegressionModel alt = inflate_beta_for_r2(base, sigma_xx, delta);
    const std::size_t p = base.p();
    Matrix R(p, p + 1);
    for (std::size_t j = 0; j < p; ++j) R(j, j + 1) = 1.0;
    return PowerSpec{LinearHypothesis(std::move(R), base.beta), std::move(alt), alpha, target_power};
}

PowerSpec r2_increase_single(const RegressionModel& base, const SymMatrix& sigma_xx, double delta, std::size_t j,
                             double alpha, double target_power) {
    RegressionModel alt = poke_beta_for_r2(base, sigma_xx, delta, j);
    return PowerSpec{coefficient_test(base.p(), j + 1, base.beta[j]), std::move(alt), alpha, target_power};
}

SymMatrix model_cov_beta_unit(const RegressionModel& model, const Vector& mu_x, const SymMatrix& sigma_xx,
                              const Design& d, CovarianceSource source) {
    const MomentStructure m = build_moments(mu_x, sigma_xx, model);
    if (source == CovarianceSource::Complete) return complete_cov_beta(m, 1.0);
    return cov_beta_unit(m, d);
}

}  // namespace matrixpower
