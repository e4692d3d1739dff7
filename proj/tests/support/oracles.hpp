#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Nothing here calls into the library code it is meant to check,
// apart from plain containers and the random stream.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "matrixpower/design.hpp"
#include "matrixpower/linalg.hpp"
#include "matrixpower/moments.hpp"
#include "matrixpower/rng.hpp"

namespace oracle {

using matrixpower::Matrix;
using matrixpower::SymMatrix;
using matrixpower::Vector;

/// Gauss-Jordan inverse with partial pivoting.
inline Matrix gauss_jordan_inverse(const Matrix& a) {
    const std::size_t n = a.rows();
    Matrix w(n, 2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) w(i, j) = a(i, j);
        w(i, n + i) = 1.0;
    }
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(w(r, c)) > std::abs(w(piv, c))) piv = r;
        if (w(piv, c) == 0.0) throw std::runtime_error("singular");
        for (std::size_t j = 0; j < 2 * n; ++j) std::swap(w(c, j), w(piv, j));
        const double d = w(c, c);
        for (std::size_t j = 0; j < 2 * n; ++j) w(c, j) /= d;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c) continue;
            const double f = w(r, c);
            for (std::size_t j = 0; j < 2 * n; ++j) w(r, j) -= f * w(c, j);
        }
    }
    Matrix inv(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) inv(i, j) = w(i, n + j);
    return inv;
}

/// Duplication matrix D_d with vec(S) = D vech(S), vech in column-major
/// lower-triangle order (which is the row-major upper-triangle order used by
/// the parameter layout).
inline Matrix duplication(std::size_t d) {
    const std::size_t m = d * (d + 1) / 2;
    Matrix dm(d * d, m);
    std::size_t col = 0;
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t i = j; i < d; ++i, ++col) {
            dm(j * d + i, col) = 1.0;
            dm(i * d + j, col) = 1.0;
        }
    return dm;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            for (std::size_t r = 0; r < b.rows(); ++r)
                for (std::size_t c = 0; c < b.cols(); ++c) k(i * b.rows() + r, j * b.cols() + c) = a(i, j) * b(r, c);
    return k;
}

/// Information for (mu, vech Sigma) from the Kronecker form
/// sum_k n_k diag(tau_k, 1/2 D'(tau_k x tau_k) D).
inline Matrix kronecker_information(const SymMatrix& sigma, const matrixpower::Design& design, double n) {
    const std::size_t d = sigma.dim();
    const std::size_t m = d * (d + 1) / 2;
    Matrix info(d + m, d + m);
    const Matrix dup = duplication(d);
    for (std::size_t k = 0; k < design.form_count(); ++k) {
        const auto vars = design.administered(k);
        Matrix sub(vars.size(), vars.size());
        for (std::size_t a = 0; a < vars.size(); ++a)
            for (std::size_t b = 0; b < vars.size(); ++b) sub(a, b) = sigma(vars[a], vars[b]);
        const Matrix inv = gauss_jordan_inverse(sub);
        Matrix tau(d, d);
        for (std::size_t a = 0; a < vars.size(); ++a)
            for (std::size_t b = 0; b < vars.size(); ++b) tau(vars[a], vars[b]) = inv(a, b);
        const double nk = n * design.allocation()[k];
        const Matrix cov_block = dup.transpose() * kron(tau, tau) * dup;
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b) info(a, b) += nk * tau(a, b);
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b) info(d + a, d + b) += nk * 0.5 * cov_block(a, b);
    }
    return info;
}

/// beta = A^{-1} b from the raw moments, by Gauss-Jordan.
inline Vector regression_coefficients(const Vector& mu, const Matrix& sigma) {
    const std::size_t p = mu.size() - 1;
    Matrix a(p + 1, p + 1);
    Vector b(p + 1);
    a(0, 0) = 1.0;
    b[0] = mu[p];
    for (std::size_t i = 0; i < p; ++i) {
        a(0, i + 1) = a(i + 1, 0) = mu[i];
        b[i + 1] = sigma(i, p) + mu[i] * mu[p];
        for (std::size_t j = 0; j < p; ++j) a(i + 1, j + 1) = sigma(i, j) + mu[i] * mu[j];
    }
    const Matrix inv = gauss_jordan_inverse(a);
    return inv * b;
}

/// Central finite differences of the regression coefficients with respect
/// to (mu, vech Sigma), laid out like the library's parameter index.
inline Matrix fd_gradient(const Vector& mu, const Matrix& sigma, double h = 1e-6) {
    const std::size_t d = mu.size();
    const std::size_t m = d * (d + 1) / 2;
    Matrix g(d, d + m);
    auto column = [&](std::size_t col, const Vector& plus, const Vector& minus) {
        for (std::size_t r = 0; r < d; ++r) g(r, col) = (plus[r] - minus[r]) / (2.0 * h);
    };
    for (std::size_t s = 0; s < d; ++s) {
        Vector up = mu, dn = mu;
        up[s] += h;
        dn[s] -= h;
        column(s, regression_coefficients(up, sigma), regression_coefficients(dn, sigma));
    }
    std::size_t col = d;
    for (std::size_t s = 0; s < d; ++s)
        for (std::size_t t = s; t < d; ++t, ++col) {
            Matrix up = sigma, dn = sigma;
            up(s, t) += h;
            dn(s, t) -= h;
            if (s != t) {
                up(t, s) += h;
                dn(t, s) -= h;
            }
            column(col, regression_coefficients(mu, up), regression_coefficients(mu, dn));
        }
    return g;
}

/// Random symmetric positive definite matrix W W' / d + 0.5 I.
inline SymMatrix random_spd(std::size_t d, matrixpower::RngStream& rng) {
    Matrix w(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) w(i, j) = rng.std_normal();
    Matrix s = w * w.transpose() * (1.0 / static_cast<double>(d));
    for (std::size_t i = 0; i < d; ++i) s(i, i) += 0.5;
    return SymMatrix::symmetrized(s);
}

/// Per-pattern sufficient statistics of normal data and the observed-data
/// log-likelihood written directly from them.
struct PatternData {
    std::vector<std::size_t> vars;
    double n = 0.0;
    Vector sum;
    Matrix cross;
};

inline double loglik_from_stats(const std::vector<PatternData>& data, const Vector& mu, const Matrix& sigma) {
    double ll = 0.0;
    for (const auto& pd : data) {
        const std::size_t q = pd.vars.size();
        Matrix s(q, q);
        Vector m(q);
        for (std::size_t a = 0; a < q; ++a) {
            m[a] = mu[pd.vars[a]];
            for (std::size_t b = 0; b < q; ++b) s(a, b) = sigma(pd.vars[a], pd.vars[b]);
        }
        // log det by Gaussian elimination on a copy
        Matrix u = s;
        double logdet = 0.0;
        for (std::size_t c = 0; c < q; ++c) {
            logdet += std::log(u(c, c));
            for (std::size_t r = c + 1; r < q; ++r) {
                const double f = u(r, c) / u(c, c);
                for (std::size_t j = c; j < q; ++j) u(r, j) -= f * u(c, j);
            }
        }
        const Matrix inv = gauss_jordan_inverse(s);
        double quad = 0.0;
        for (std::size_t a = 0; a < q; ++a)
            for (std::size_t b = 0; b < q; ++b)
                quad += inv(a, b) * (pd.cross(b, a) - pd.sum[b] * m[a] - m[b] * pd.sum[a] + pd.n * m[a] * m[b]);
        ll -= 0.5 * (pd.n * (static_cast<double>(q) * std::log(2.0 * std::numbers::pi) + logdet) + quad);
    }
    return ll;
}

/// Numerical Hessian of loglik_from_stats over (mu, vech Sigma), central
/// differences with step h.
inline Matrix numerical_hessian(const std::vector<PatternData>& data, const Vector& mu, const Matrix& sigma,
                                double h) {
    const std::size_t d = mu.size();
    std::vector<std::pair<std::size_t, std::size_t>> sym;
    for (std::size_t s = 0; s < d; ++s)
        for (std::size_t t = s; t < d; ++t) sym.emplace_back(s, t);
    const std::size_t np = d + sym.size();
    auto eval = [&](std::size_t i, double di, std::size_t j, double dj) {
        Vector m = mu;
        Matrix s = sigma;
        auto bump = [&](std::size_t k, double delta) {
            if (delta == 0.0) return;
            if (k < d) {
                m[k] += delta;
            } else {
                const auto [a, b] = sym[k - d];
                s(a, b) += delta;
                if (a != b) s(b, a) += delta;
            }
        };
        bump(i, di);
        bump(j, dj);
        return loglik_from_stats(data, m, s);
    };
    Matrix hess(np, np);
    const double f0 = eval(0, 0.0, 0, 0.0);
    for (std::size_t i = 0; i < np; ++i) {
        hess(i, i) = (eval(i, h, i, 0.0) - 2.0 * f0 + eval(i, -h, i, 0.0)) / (h * h);
        for (std::size_t j = 0; j < i; ++j) {
            const double v = (eval(i, h, j, h) - eval(i, h, j, -h) - eval(i, -h, j, h) + eval(i, -h, j, -h)) /
                             (4.0 * h * h);
            hess(i, j) = hess(j, i) = v;
        }
    }
    return hess;
}

/// Normal data generated per form at (mu, Sigma) and reduced to sufficient
/// statistics over each form's administered variables.
inline std::vector<PatternData> simulate_patterns(const Vector& mu, const Matrix& sigma,
                                                  const matrixpower::Design& design, double n_total,
                                                  matrixpower::RngStream& rng) {
    const std::size_t d = mu.size();
    // Cholesky by hand
    Matrix l(d, d);
    for (std::size_t j = 0; j < d; ++j) {
        double s = sigma(j, j);
        for (std::size_t k = 0; k < j; ++k) s -= l(j, k) * l(j, k);
        l(j, j) = std::sqrt(s);
        for (std::size_t i = j + 1; i < d; ++i) {
            double t = sigma(i, j);
            for (std::size_t k = 0; k < j; ++k) t -= l(i, k) * l(j, k);
            l(i, j) = t / l(j, j);
        }
    }
    std::vector<PatternData> out;
    Vector z(d), x(d);
    for (std::size_t k = 0; k < design.form_count(); ++k) {
        PatternData pd;
        pd.vars = design.administered(k);
        const std::size_t q = pd.vars.size();
        pd.sum.assign(q, 0.0);
        pd.cross = Matrix(q, q);
        const auto rows = static_cast<std::size_t>(std::llround(n_total * design.allocation()[k]));
        for (std::size_t r = 0; r < rows; ++r) {
            for (auto& v : z) v = rng.std_normal();
            for (std::size_t i = 0; i < d; ++i) {
                x[i] = mu[i];
                for (std::size_t j = 0; j <= i; ++j) x[i] += l(i, j) * z[j];
            }
            for (std::size_t a = 0; a < q; ++a) {
                pd.sum[a] += x[pd.vars[a]];
                for (std::size_t b = 0; b < q; ++b) pd.cross(a, b) += x[pd.vars[a]] * x[pd.vars[b]];
            }
        }
        pd.n = static_cast<double>(rows);
        out.push_back(std::move(pd));
    }
    return out;
}

/// Two-sided z-test sample size (z_{1-alpha/2} + z_{power})^2 v / delta^2.
inline double z_test_n(double v, double delta, double z_alpha, double z_power) {
    const double z = z_alpha + z_power;
    return z * z * v / (delta * delta);
}

}  // namespace oracle
