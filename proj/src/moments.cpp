#include "matrixpower/moments.hpp"

#include <cmath>
#include <string>

#include "matrixpower/error.hpp"

namespace matrixpower {

MomentStructure::MomentStructure(Vector mu, SymMatrix sigma) : mu_(std::move(mu)), sigma_(std::move(sigma)) {
    if (mu_.size() < 2) throw InvariantError("moment structure needs at least one regressor and the outcome");
    if (sigma_.dim() != mu_.size()) throw InvariantError("mean and covariance dimensions disagree");
}

Vector MomentStructure::mu_x() const { return Vector(mu_.begin(), mu_.end() - 1); }

SymMatrix MomentStructure::sigma_xx() const {
    std::vector<std::size_t> idx(p());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return sigma_.select(idx);
}

SymMatrix OmegaView::design_block() const {
    std::vector<std::size_t> idx(p() + 1);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return omega.select(idx);
}

Vector OmegaView::cross_block() const {
    Vector b(p() + 1);
    for (std::size_t i = 0; i <= p(); ++i) b[i] = omega(i, p() + 1);
    return b;
}

OmegaView omega_view(const MomentStructure& m) {
    const std::size_t d = m.dim();
    SymMatrix omega(d + 1);
    omega.set(0, 0, 1.0);
    for (std::size_t i = 0; i < d; ++i) {
        omega.set(0, i + 1, m.mu()[i]);
        for (std::size_t j = 0; j <= i; ++j) omega.set(i + 1, j + 1, m.sigma()(i, j) + m.mu()[i] * m.mu()[j]);
    }
    return {std::move(omega)};
}

MomentStructure moments_from_omega(const OmegaView& view) {
    const std::size_t d = view.omega.dim() - 1;
    Vector mu(d);
    SymMatrix sigma(d);
    for (std::size_t i = 0; i < d; ++i) mu[i] = view.omega(0, i + 1);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j <= i; ++j) sigma.set(i, j, view.omega(i + 1, j + 1) - mu[i] * mu[j]);
    return MomentStructure(std::move(mu), std::move(sigma));
}

std::size_t parameter_count(std::size_t p) { return (p + 2) * (p + 3) / 2 - 1; }

VechIndex::VechIndex(std::size_t p) : p_(p), count_(matrixpower::parameter_count(p)) {
    if (p == 0) throw IndexError("vech index needs p >= 1");
}

std::size_t VechIndex::index_of(std::size_t s, std::size_t t) const {
    if (s > t) std::swap(s, t);
    const std::size_t n = p_ + 2;
    if (t >= n) throw IndexError("vech symbol (" + std::to_string(s) + "," + std::to_string(t) + ") out of range");
    if (t == 0) throw IndexError("omega_00 is fixed and has no parameter index");
    return s * (2 * n - s + 1) / 2 + (t - s) - 1;
}

std::pair<std::size_t, std::size_t> VechIndex::symbol_of(std::size_t index) const {
    if (index >= count_) throw IndexError("vech index " + std::to_string(index) + " out of range");
    const std::size_t n = p_ + 2;
    std::size_t flat = index + 1;
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t row = n - s;
        if (flat < row) return {s, s + flat};
        flat -= row;
    }
    throw IndexError("vech index out of range");
}

MomentStructure build_moments(const Vector& mu_x, const SymMatrix& sigma_xx, const RegressionModel& model) {
    const std::size_t p = mu_x.size();
    if (sigma_xx.dim() != p || model.beta.size() != p)
        throw InvariantError("regressor dimensions disagree in build_moments");
    if (model.sigma2 < 0.0) throw DomainError("residual variance must be nonnegative");
    chol(sigma_xx);

    const Vector cov_xy = sigma_xx.matrix() * model.beta;
    Vector mu(mu_x);
    mu.push_back(model.beta0 + dot(model.beta, mu_x));
    SymMatrix sigma(p + 1);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j <= i; ++j) sigma.set(i, j, sigma_xx(i, j));
        sigma.set(i, p, cov_xy[i]);
    }
    sigma.set(p, p, dot(model.beta, cov_xy) + model.sigma2);
    return MomentStructure(std::move(mu), std::move(sigma));
}

RegressionModel regression_from_moments(const MomentStructure& m) {
    const OmegaView view = omega_view(m);
    const SymMatrix a = view.design_block();
    const Vector b = view.cross_block();
    const Vector theta = spd_solve(a, b);

    RegressionModel model;
    model.beta0 = theta[0];
    model.beta.assign(theta.begin() + 1, theta.end());
    // Residual variance from the centered blocks, which avoids cancellation
    // against large raw second moments.
    const SymMatrix sxx = m.sigma_xx();
    Vector sxy(m.p());
    for (std::size_t i = 0; i < m.p(); ++i) sxy[i] = m.sigma()(i, m.p());
    model.sigma2 = m.sigma()(m.p(), m.p()) - dot(model.beta, sxy);
    return model;
}

namespace {

double explained(const Vector& beta, const SymMatrix& sigma_xx) {
    if (beta.size() != sigma_xx.dim()) throw InvariantError("slope and covariance dimensions disagree");
    return dot(beta, sigma_xx.matrix() * beta);
}

}  // namespace

double r_squared(const RegressionModel& model, const SymMatrix& sigma_xx) {
    const double q = explained(model.beta, sigma_xx);
    return q / (q + model.sigma2);
}

double sigma2_for_r2(const Vector& beta, const SymMatrix& sigma_xx, double r2) {
    if (!(r2 > 0.0 && r2 < 1.0)) throw DomainError("target R^2 must lie in (0, 1)");
    const double q = explained(beta, sigma_xx);
    if (!(q > 0.0)) throw DomainError("zero slopes explain no variance; no residual variance gives R^2 > 0");
    return q * (1.0 - r2) / r2;
}

RegressionModel inflate_beta_for_r2(const RegressionModel& model, const SymMatrix& sigma_xx, double delta) {
    const double q = explained(model.beta, sigma_xx);
    if (!(q > 0.0)) throw DomainError("cannot rescale zero slopes to change R^2");
    const double target = q / (q + model.sigma2) + delta;
    if (!(target > 0.0 && target < 1.0)) throw DomainError("target R^2 must lie in (0, 1)");
    const double c = std::sqrt(target * model.sigma2 / ((1.0 - target) * q));
    RegressionModel out = model;
    for (double& b : out.beta) b *= c;
    return out;
}

RegressionModel poke_beta_for_r2(const RegressionModel& model, const SymMatrix& sigma_xx, double delta,
                                 std::size_t j) {
    const std::size_t p = model.beta.size();
    if (j >= p) throw IndexError("coefficient index out of range");
    const double q = explained(model.beta, sigma_xx);
    const double target = q / (q + model.sigma2) + delta;
    if (!(target > 0.0 && target < 1.0)) throw DomainError("target R^2 must lie in (0, 1)");
    const double t_explained = model.sigma2 * target / (1.0 - target);

    // q(t) = s_jj t^2 + 2 c t + rest, where c = Sigma_{j,-j} beta_{-j}.
    double c = 0.0;
    double rest = 0.0;
    for (std::size_t a = 0; a < p; ++a) {
        if (a == j) continue;
        c += sigma_xx(j, a) * model.beta[a];
        for (std::size_t b = 0; b < p; ++b)
            if (b != j) rest += model.beta[a] * sigma_xx(a, b) * model.beta[b];
    }
    const double a2 = sigma_xx(j, j);
    const double disc = c * c - a2 * (rest - t_explained);
    if (disc < 0.0)
        throw NoRealRoot("R^2 increase of " + std::to_string(delta) + " is unreachable through coefficient " +
                         std::to_string(j + 1) + " alone");
    const double root = std::sqrt(disc);
    const double lo = (-c - root) / a2;
    const double hi = (-c + root) / a2;
    const double current = model.beta[j];
    const double pick = std::abs(hi - current) <= std::abs(lo - current) ? hi : lo;

    RegressionModel out = model;
    out.beta[j] = pick;
    return out;
}

}  // namespace matrixpower
