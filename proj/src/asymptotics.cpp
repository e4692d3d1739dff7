#include "matrixpower/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "matrixpower/error.hpp"

namespace matrixpower {

std::vector<ObservedPattern> design_patterns(const Design& d, double n_total) {
    std::vector<ObservedPattern> out;
    for (std::size_t k = 0; k < d.form_count(); ++k) out.push_back({d.administered(k), d.allocation()[k] * n_total});
    return out;
}

TauMatrix padded_inverse(const SymMatrix& sigma, std::span<const std::size_t> variables) {
    const SymMatrix inv = spd_inverse(sigma.select(variables));
    TauMatrix t{SymMatrix(sigma.dim()), {variables.begin(), variables.end()}};
    for (std::size_t a = 0; a < variables.size(); ++a)
        for (std::size_t b = 0; b <= a; ++b) t.tau.set(variables[a], variables[b], inv(a, b));
    return t;
}

TauMatrix tau(const MomentStructure& m, const Design& d, std::size_t form) {
    if (d.variable_count() != m.dim()) throw InvariantError("design and moment structure dimensions disagree");
    const auto vars = d.administered(form);
    return padded_inverse(m.sigma(), vars);
}

InformationMatrix information(const MomentStructure& m, std::span<const ObservedPattern> patterns) {
    const VechIndex index(m.p());
    const std::size_t np = index.parameter_count();
    SymMatrix info(np);

    std::vector<std::pair<std::size_t, std::size_t>> symbols(np);
    for (std::size_t i = 0; i < np; ++i) symbols[i] = index.symbol_of(i);

    for (const auto& pattern : patterns) {
        if (pattern.count == 0.0) continue;
        const SymMatrix t = padded_inverse(m.sigma(), pattern.variables).tau;
        const double nk = pattern.count;
        // Symbols 1..p+1 address variable (symbol - 1) of tau.
        auto tv = [&](std::size_t s, std::size_t u) { return t(s - 1, u - 1); };

        for (std::size_t i = 0; i < np; ++i) {
            const auto [s0, s] = symbols[i];
            for (std::size_t j = 0; j <= i; ++j) {
                const auto [u0, u] = symbols[j];
                double entry = 0.0;
                if (index.is_mean(i) && index.is_mean(j)) {
                    entry = tv(s, u);
                } else if (index.is_mean(i) != index.is_mean(j)) {
                    continue;  // mean/covariance blocks are independent
                } else {
                    const std::size_t a = s0, b = s, c = u0, e = u;
                    if (a == b && c == e) {
                        entry = 0.5 * tv(a, c) * tv(a, c);
                    } else if (a == b) {
                        entry = tv(a, c) * tv(a, e);
                    } else if (c == e) {
                        entry = tv(c, a) * tv(c, b);
                    } else {
                        entry = tv(a, c) * tv(b, e) + tv(a, e) * tv(b, c);
                    }
                }
                info.add(i, j, nk * entry);
            }
        }
    }
    return {index, std::move(info)};
}

InformationMatrix information(const MomentStructure& m, const Design& d, double n_total) {
    if (d.variable_count() != m.dim()) throw InvariantError("design and moment structure dimensions disagree");
    if (!(n_total > 0.0)) throw DomainError("total sample size must be positive");
    const auto patterns = design_patterns(d, n_total);
    return information(m, patterns);
}

SymMatrix cov_omega(const InformationMatrix& info) {
    try {
        return spd_inverse(info.matrix);
    } catch (const NotPositiveDefinite& e) {
        throw SingularInformation(std::string("information matrix is singular: ") + e.what());
    }
}

SymMatrix cov_omega(const InformationMatrix& info, const Design& d) {
    try {
        return spd_inverse(info.matrix);
    } catch (const NotPositiveDefinite&) {
        const auto est = validate_estimability(d);
        std::string msg = "information matrix is singular";
        if (!est.uncovered_pairs.empty()) {
            msg += "; pairs never observed together:";
            for (const auto& [a, b] : est.uncovered_pairs) msg += " (" + a + "," + b + ")";
        }
        throw SingularInformation(msg, est.uncovered_pairs);
    }
}

Matrix grad_beta_raw(const MomentStructure& m) {
    const std::size_t p = m.p();
    const OmegaView view = omega_view(m);
    const SymMatrix a_inv = spd_inverse(view.design_block());
    const Vector theta = a_inv.matrix() * view.cross_block();
    const VechIndex index(p);
    Matrix g(p + 1, index.parameter_count());

    // Symbols (s, t) with t <= p live in the bordered block A and act through
    // -A^{-1} dA A^{-1} b; symbols (s, p+1) live in b and act through A^{-1} db.
    for (std::size_t i = 0; i < index.parameter_count(); ++i) {
        const auto [s, t] = index.symbol_of(i);
        if (t == p + 1) {
            if (s == p + 1) continue;  // d beta / d omega_yy = 0
            for (std::size_t r = 0; r <= p; ++r) g(r, i) = a_inv(r, s);
        } else if (s == t) {
            for (std::size_t r = 0; r <= p; ++r) g(r, i) = -a_inv(r, s) * theta[s];
        } else {
            for (std::size_t r = 0; r <= p; ++r) g(r, i) = -(a_inv(r, s) * theta[t] + a_inv(r, t) * theta[s]);
        }
    }
    return g;
}

Matrix grad_beta(const MomentStructure& m) {
    // Chain rule through omega_0j = mu_j, omega_st = sigma_st + mu_s mu_t.
    const Matrix raw = grad_beta_raw(m);
    const std::size_t p = m.p();
    const VechIndex index(p);
    Matrix g = raw;
    for (std::size_t i = 0; i < index.parameter_count(); ++i) {
        const auto [s, t] = index.symbol_of(i);
        if (s == 0) continue;
        // d omega_st / d mu_s = mu_t and d omega_st / d mu_t = mu_s
        const std::size_t is = index.index_of(0, s);
        const std::size_t it = index.index_of(0, t);
        const double mu_s = m.mu()[s - 1];
        const double mu_t = m.mu()[t - 1];
        for (std::size_t r = 0; r <= p; ++r) {
            g(r, is) += raw(r, i) * mu_t;
            g(r, it) += raw(r, i) * mu_s;
        }
    }
    return g;
}

SymMatrix complete_cov_beta(const MomentStructure& m, double n_total) {
    const RegressionModel model = regression_from_moments(m);
    const SymMatrix a_inv = spd_inverse(omega_view(m).design_block());
    return a_inv * (model.sigma2 / n_total);
}

namespace {

double condition_number(const SymMatrix& info) {
    const SymEigen eig = sym_eigen(info);
    const double hi = eig.values.front();
    const double lo = eig.values.back();
    return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

AsymptoticReport finish_report(const MomentStructure& m, const InformationMatrix& info, SymMatrix cov_w,
                               double n_total) {
    AsymptoticReport r;
    r.n_total = n_total;
    r.model = regression_from_moments(m);
    r.cov_omega = std::move(cov_w);
    r.grad_beta = grad_beta(m);
    r.cov_beta = congruence(r.grad_beta, r.cov_omega);
    r.cov_beta_complete = complete_cov_beta(m, n_total);
    const std::size_t k = r.cov_beta.dim();
    r.se.resize(k);
    r.se_complete.resize(k);
    r.fmi.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        r.se[j] = std::sqrt(r.cov_beta(j, j));
        r.se_complete[j] = std::sqrt(r.cov_beta_complete(j, j));
        const double fmi = 1.0 - r.cov_beta_complete(j, j) / r.cov_beta(j, j);
        // Roundoff when nothing is missing.
        r.fmi[j] = std::abs(fmi) < 1e-12 ? 0.0 : fmi;
    }
    r.information_condition = condition_number(info.matrix);
    return r;
}

}  // namespace

AsymptoticReport report(const MomentStructure& m, const Design& d, double n_total) {
    const InformationMatrix info = information(m, d, n_total);
    return finish_report(m, info, cov_omega(info, d), n_total);
}

AsymptoticReport report(const MomentStructure& m, std::span<const ObservedPattern> patterns, double n_total) {
    const InformationMatrix info = information(m, patterns);
    return finish_report(m, info, cov_omega(info), n_total);
}

SymMatrix cov_beta_unit(const MomentStructure& m, const Design& d) {
    const InformationMatrix info = information(m, d, 1.0);
    return congruence(grad_beta(m), cov_omega(info, d));
}

namespace {

// Sum of log densities of the rows in `rows`, restricted to `vars`.
double pattern_loglik(const Dataset& data, const MomentStructure& m, std::span<const std::size_t> vars,
                      std::span<const std::size_t> rows) {
    const Matrix l = chol(m.sigma().select(vars));
    const double logdet = chol_logdet(l);
    const std::size_t q = vars.size();
    Vector resid(q);
    double quad = 0.0;
    for (auto i : rows) {
        for (std::size_t a = 0; a < q; ++a) resid[a] = data(i, vars[a]) - m.mu()[vars[a]];
        // forward substitution gives L^{-1} r
        for (std::size_t a = 0; a < q; ++a) {
            double s = resid[a];
            for (std::size_t b = 0; b < a; ++b) s -= l(a, b) * resid[b];
            resid[a] = s / l(a, a);
        }
        quad += dot(resid, resid);
    }
    const double n = static_cast<double>(rows.size());
    return -0.5 * (n * q * std::log(2.0 * std::numbers::pi) + n * logdet + quad);
}

}  // namespace

double loglik(const Dataset& data, const MomentStructure& m, const Design& d) {
    if (data.cols() != m.dim() || d.variable_count() != m.dim())
        throw InvariantError("dataset, design and moment structure dimensions disagree");
    if (!data.forms()) throw InvariantError("loglik with a design needs per-row form labels");
    const auto& forms = *data.forms();
    std::vector<std::vector<std::size_t>> rows(d.form_count());
    for (std::size_t i = 0; i < data.rows(); ++i) {
        const std::size_t k = forms[i];
        if (k >= d.form_count()) throw IndexError("row " + std::to_string(i + 1) + " has an unknown form label");
        const auto vars = d.administered(k);
        std::size_t observed = 0;
        for (std::size_t j = 0; j < data.cols(); ++j) observed += data.missing(i, j) ? 0 : 1;
        const bool match = observed == vars.size() &&
                           std::none_of(vars.begin(), vars.end(), [&](std::size_t v) { return data.missing(i, v); });
        if (!match)
            throw InvariantError("row " + std::to_string(i + 1) + " does not match the items of its form");
        rows[k].push_back(i);
    }
    double ll = 0.0;
    for (std::size_t k = 0; k < d.form_count(); ++k)
        if (!rows[k].empty()) ll += pattern_loglik(data, m, d.administered(k), rows[k]);
    return ll;
}

double loglik(const Dataset& data, const MomentStructure& m) {
    if (data.cols() != m.dim()) throw InvariantError("dataset and moment structure dimensions disagree");
    double ll = 0.0;
    for (const auto& g : missingness_patterns(data))
        if (!g.observed.empty()) ll += pattern_loglik(data, m, g.observed, g.rows);
    return ll;
}

}  // namespace matrixpower
