#include "matrixpower/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "matrixpower/asymptotics.hpp"
#include "matrixpower/error.hpp"
#include "matrixpower/special.hpp"

namespace matrixpower {

Vector FitResult::coefficients() const {
    Vector b{beta0};
    b.insert(b.end(), beta.begin(), beta.end());
    return b;
}

Vector PooledResult::se() const {
    Vector s(total.size());
    for (std::size_t j = 0; j < s.size(); ++j) s[j] = std::sqrt(total[j]);
    return s;
}

namespace {

// Solves L' x = b in place for lower-triangular L.
void back_substitute(const Matrix& l, Vector& x) {
    const std::size_t n = x.size();
    for (std::size_t i = n; i-- > 0;) {
        double s = x[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
        x[i] = s / l(i, i);
    }
}

struct NormalEquations {
    Matrix lower;  // Cholesky factor of X'X
    Vector coef;
    double rss = 0.0;
};

// Least squares of column `target` on an intercept and `predictors` over `rows`.
NormalEquations least_squares(const Dataset& data, std::span<const std::size_t> rows,
                              std::span<const std::size_t> predictors, std::size_t target) {
    const std::size_t k = predictors.size() + 1;
    SymMatrix xtx(k);
    Vector xty(k, 0.0);
    Vector x(k);
    for (auto i : rows) {
        x[0] = 1.0;
        for (std::size_t a = 0; a < predictors.size(); ++a) x[a + 1] = data(i, predictors[a]);
        const double y = data(i, target);
        for (std::size_t a = 0; a < k; ++a) {
            for (std::size_t b = 0; b <= a; ++b) xtx.add(a, b, x[a] * x[b]);
            xty[a] += x[a] * y;
        }
    }
    NormalEquations ne;
    try {
        ne.lower = chol(xtx);
    } catch (const NotPositiveDefinite&) {
        throw RankDeficient("design matrix X'X is singular");
    }
    ne.coef = chol_solve(ne.lower, xty);
    // Direct residuals; the normal-equation shortcut loses digits on near-exact fits.
    double rss = 0.0;
    for (auto i : rows) {
        double fit = ne.coef[0];
        for (std::size_t a = 0; a < predictors.size(); ++a) fit += ne.coef[a + 1] * data(i, predictors[a]);
        const double r = data(i, target) - fit;
        rss += r * r;
    }
    ne.rss = rss;
    return ne;
}

// Weighted sufficient statistics of one missingness pattern.
struct PatternStats {
    std::vector<std::size_t> observed;
    std::vector<std::size_t> missing;
    double weight = 0.0;
    Vector sum;       // over observed variables
    SymMatrix cross;  // sum of z_O z_O'
};

std::vector<PatternStats> pattern_stats(const Dataset& data, std::span<const double> weights) {
    std::vector<PatternStats> out;
    for (const auto& g : missingness_patterns(data)) {
        PatternStats s;
        s.observed = g.observed;
        for (std::size_t j = 0; j < data.cols(); ++j)
            if (!std::binary_search(g.observed.begin(), g.observed.end(), j)) s.missing.push_back(j);
        const std::size_t q = g.observed.size();
        s.sum.assign(q, 0.0);
        s.cross = SymMatrix(q);
        for (auto i : g.rows) {
            const double w = weights.empty() ? 1.0 : weights[i];
            if (w == 0.0) continue;
            s.weight += w;
            for (std::size_t a = 0; a < q; ++a) {
                const double za = data(i, g.observed[a]);
                s.sum[a] += w * za;
                for (std::size_t b = 0; b <= a; ++b) s.cross.add(a, b, w * za * data(i, g.observed[b]));
            }
        }
        if (s.weight > 0.0 && q > 0) out.push_back(std::move(s));
    }
    return out;
}

double stats_loglik(const std::vector<PatternStats>& stats, const Vector& mu, const SymMatrix& sigma) {
    double ll = 0.0;
    for (const auto& s : stats) {
        const std::size_t q = s.observed.size();
        const Matrix l = chol(sigma.select(s.observed));
        Vector mu_o(q);
        for (std::size_t a = 0; a < q; ++a) mu_o[a] = mu[s.observed[a]];
        // sum_i (z_i - mu)'S^{-1}(z_i - mu) = tr(S^{-1} C) - 2 mu'S^{-1} sum + w mu'S^{-1} mu
        const Matrix inv_c = chol_solve(l, s.cross.matrix());
        const Vector inv_mu = chol_solve(l, mu_o);
        const double quad = inv_c.trace() - 2.0 * dot(inv_mu, s.sum) + s.weight * dot(inv_mu, mu_o);
        ll -= 0.5 * (s.weight * (static_cast<double>(q) * std::log(2.0 * std::numbers::pi) + chol_logdet(l)) + quad);
    }
    return ll;
}

struct EmCore {
    Vector mu;
    SymMatrix sigma;
    int iterations = 0;
    std::vector<double> trace;
};

// Regression of the missing block on the observed block under (mu, sigma).
struct Conditional {
    Matrix b;       // |M| x |O|
    Vector a;       // mu_M - B mu_O
    SymMatrix cov;  // Sigma_MM - B Sigma_OM
};

Conditional conditional(const Vector& mu, const SymMatrix& sigma, std::span<const std::size_t> obs,
                        std::span<const std::size_t> mis) {
    const Matrix l = chol(sigma.select(obs));
    const Matrix s_om = sigma.matrix().select(obs, mis);
    const Matrix bt = chol_solve(l, s_om);  // Sigma_OO^{-1} Sigma_OM
    Conditional c;
    c.b = bt.transpose();
    c.a.resize(mis.size());
    for (std::size_t m = 0; m < mis.size(); ++m) {
        double v = mu[mis[m]];
        for (std::size_t o = 0; o < obs.size(); ++o) v -= c.b(m, o) * mu[obs[o]];
        c.a[m] = v;
    }
    Matrix cov = sigma.matrix().select(mis, mis) - c.b * s_om;
    c.cov = SymMatrix::symmetrized(cov);
    return c;
}

EmCore em_core(const Dataset& data, std::span<const double> weights, const EmOptions& options) {
    data.check_outcome_observed();
    const std::size_t d = data.cols();
    const auto stats = pattern_stats(data, weights);
    double total = 0.0;
    for (const auto& s : stats) total += s.weight;
    if (total <= 0.0) throw InvariantError("EM needs at least one row");

    // Available-case starting values.
    Vector mu(d, 0.0), ss(d, 0.0), cnt(d, 0.0);
    for (const auto& s : stats)
        for (std::size_t a = 0; a < s.observed.size(); ++a) {
            const std::size_t j = s.observed[a];
            mu[j] += s.sum[a];
            ss[j] += s.cross(a, a);
            cnt[j] += s.weight;
        }
    Vector var(d);
    for (std::size_t j = 0; j < d; ++j) {
        if (cnt[j] == 0.0) throw InvariantError("column " + data.columns()[j] + " is never observed");
        mu[j] /= cnt[j];
        var[j] = ss[j] / cnt[j] - mu[j] * mu[j];
        if (!(var[j] > 0.0)) throw NotPositiveDefinite("column " + data.columns()[j] + " has no variance");
    }
    EmCore core{mu, SymMatrix::diagonal(var), 0, {}};
    double ll = stats_loglik(stats, core.mu, core.sigma);
    core.trace.push_back(ll);

    for (int it = 1; it <= options.max_iterations; ++it) {
        Vector t1(d, 0.0);
        SymMatrix t2(d);
        for (const auto& s : stats) {
            const auto& obs = s.observed;
            const auto& mis = s.missing;
            for (std::size_t a = 0; a < obs.size(); ++a) {
                t1[obs[a]] += s.sum[a];
                for (std::size_t b = 0; b <= a; ++b) t2.add(obs[a], obs[b], s.cross(a, b));
            }
            if (mis.empty()) continue;
            const Conditional c = conditional(core.mu, core.sigma, obs, mis);
            const Vector bs = c.b * s.sum;          // B sum
            const Matrix bc = c.b * s.cross.matrix();  // B C
            for (std::size_t m = 0; m < mis.size(); ++m) {
                t1[mis[m]] += s.weight * c.a[m] + bs[m];
                // observed x missing: sum a' + C B'
                for (std::size_t o = 0; o < obs.size(); ++o)
                    t2.add(mis[m], obs[o], s.sum[o] * c.a[m] + bc(m, o));
                // missing x missing: w(a a' + C_cond) + a (B s)' + (B s) a' + B C B'
                for (std::size_t m2 = 0; m2 <= m; ++m2) {
                    double bcb = 0.0;
                    for (std::size_t o = 0; o < obs.size(); ++o) bcb += bc(m, o) * c.b(m2, o);
                    const double v = s.weight * (c.a[m] * c.a[m2] + c.cov(m, m2)) + c.a[m] * bs[m2] +
                                     bs[m] * c.a[m2] + bcb;
                    t2.add(mis[m], mis[m2], v);
                }
            }
        }
        for (std::size_t j = 0; j < d; ++j) core.mu[j] = t1[j] / total;
        SymMatrix sigma(d);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b <= a; ++b) sigma.set(a, b, t2(a, b) / total - core.mu[a] * core.mu[b]);
        core.sigma = std::move(sigma);
        core.iterations = it;

        const double next = stats_loglik(stats, core.mu, core.sigma);
        core.trace.push_back(next);
        const bool converged = std::abs(next - ll) < options.tolerance * std::abs(ll);
        ll = next;
        if (converged) return core;
    }
    throw NoConvergence("EM did not converge within " + std::to_string(options.max_iterations) + " iterations");
}

EmResult finish_em(const Dataset& data, std::span<const double> weights, EmCore core) {
    MomentStructure m(core.mu, core.sigma);
    std::vector<ObservedPattern> patterns;
    double n = 0.0;
    for (const auto& g : missingness_patterns(data)) {
        double count = 0.0;
        for (auto i : g.rows) count += weights.empty() ? 1.0 : weights[i];
        if (count > 0.0) patterns.push_back({g.observed, count});
        n += count;
    }
    const AsymptoticReport rep = report(m, patterns, n);
    FitResult fit;
    fit.method = "em";
    fit.beta0 = rep.model.beta0;
    fit.beta = rep.model.beta;
    fit.sigma2 = rep.model.sigma2;
    fit.se = rep.se;
    return EmResult{std::move(m), std::move(fit), core.iterations, std::move(core.trace)};
}

}  // namespace

FitResult ols(const Dataset& complete) {
    if (complete.has_missing()) throw InvariantError("ols needs a dataset without missing cells");
    const std::size_t p = complete.p();
    const std::size_t n = complete.rows();
    if (n <= p + 1) throw DomainError("ols needs more rows than coefficients");
    std::vector<std::size_t> rows(n), predictors(p);
    std::iota(rows.begin(), rows.end(), 0);
    std::iota(predictors.begin(), predictors.end(), 0);
    const NormalEquations ne = least_squares(complete, rows, predictors, p);

    FitResult fit;
    fit.method = "complete";
    fit.beta0 = ne.coef[0];
    fit.beta.assign(ne.coef.begin() + 1, ne.coef.end());
    fit.sigma2 = ne.rss / static_cast<double>(n - p - 1);
    const Matrix inv = chol_solve(ne.lower, Matrix::identity(p + 1));
    fit.se.resize(p + 1);
    for (std::size_t j = 0; j <= p; ++j) fit.se[j] = std::sqrt(fit.sigma2 * inv(j, j));
    return fit;
}

EmResult em_mvn(const Dataset& data, const EmOptions& options) {
    return finish_em(data, {}, em_core(data, {}, options));
}

EmResult em_mvn_weighted(const Dataset& data, std::span<const double> weights, const EmOptions& options) {
    if (weights.size() != data.rows()) throw InvariantError("one weight per row is required");
    return finish_em(data, weights, em_core(data, weights, options));
}

std::vector<Dataset> mi_mvn(const Dataset& data, std::size_t imputations, RngStream& stream,
                            const EmOptions& options) {
    data.check_outcome_observed();
    std::vector<Dataset> out;
    out.reserve(imputations);
    if (!data.has_missing()) {
        out.assign(imputations, data);
        return out;
    }
    const auto groups = missingness_patterns(data);
    const std::size_t n = data.rows();
    std::vector<double> weights(n);
    constexpr int kMaxAttempts = 20;

    for (std::size_t m = 0; m < imputations; ++m) {
        EmCore core;
        for (int attempt = 1;; ++attempt) {
            std::fill(weights.begin(), weights.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) weights[stream.uniform_index(n)] += 1.0;
            try {
                core = em_core(data, weights, options);
                break;
            } catch (const Error&) {
                if (attempt == kMaxAttempts) throw;
            }
        }

        Dataset completed = data;
        for (const auto& g : groups) {
            std::vector<std::size_t> mis;
            for (std::size_t j = 0; j < data.cols(); ++j)
                if (!std::binary_search(g.observed.begin(), g.observed.end(), j)) mis.push_back(j);
            if (mis.empty()) continue;
            const Conditional c = conditional(core.mu, core.sigma, g.observed, mis);
            const Matrix l = chol(c.cov);
            Vector e(mis.size());
            for (auto i : g.rows) {
                for (auto& v : e) v = stream.std_normal();
                for (std::size_t a = 0; a < mis.size(); ++a) {
                    double v = c.a[a];
                    for (std::size_t o = 0; o < g.observed.size(); ++o) v += c.b(a, o) * data(i, g.observed[o]);
                    for (std::size_t b = 0; b <= a; ++b) v += l(a, b) * e[b];
                    completed(i, mis[a]) = v;
                }
            }
        }
        out.push_back(std::move(completed));
    }
    return out;
}

std::vector<Dataset> mi_pmm(const Dataset& data, std::size_t imputations, RngStream& stream,
                            const PmmOptions& options) {
    data.check_outcome_observed();
    if (options.k_donors == 0) throw InvariantError("k_donors must be at least 1");
    const std::size_t n = data.rows();
    const std::size_t d = data.cols();

    struct Column {
        std::size_t index;
        std::vector<std::size_t> donors;
        std::vector<std::size_t> recipients;
        std::vector<std::size_t> predictors;
    };
    std::vector<Column> columns;
    for (std::size_t j = 0; j + 1 < d; ++j) {
        Column c{j, {}, {}, {}};
        for (std::size_t i = 0; i < n; ++i) (data.missing(i, j) ? c.recipients : c.donors).push_back(i);
        if (c.recipients.empty()) continue;
        if (c.donors.size() < options.k_donors)
            throw InsufficientDonors("column " + data.columns()[j] + " has " + std::to_string(c.donors.size()) +
                                     " observed values, fewer than k = " + std::to_string(options.k_donors));
        for (std::size_t v = 0; v < d; ++v)
            if (v != j) c.predictors.push_back(v);
        columns.push_back(std::move(c));
    }

    std::vector<Dataset> out;
    out.reserve(imputations);
    std::vector<std::pair<double, std::size_t>> donor_pred;
    for (std::size_t m = 0; m < imputations; ++m) {
        Dataset completed = data;
        for (const auto& c : columns)
            for (auto i : c.recipients) completed(i, c.index) = data(c.donors[stream.uniform_index(c.donors.size())], c.index);
        if (columns.empty()) {
            out.push_back(std::move(completed));
            continue;
        }

        for (std::size_t cycle = 0; cycle < options.cycles; ++cycle) {
            for (const auto& c : columns) {
                const NormalEquations ne = least_squares(completed, c.donors, c.predictors, c.index);
                const std::size_t k = ne.coef.size();
                Vector draw = ne.coef;
                if (options.draw_parameters) {
                    const std::size_t df = c.donors.size() > k ? c.donors.size() - k : 1;
                    double chi = 0.0;
                    for (std::size_t t = 0; t < df; ++t) {
                        const double z = stream.std_normal();
                        chi += z * z;
                    }
                    const double sigma = std::sqrt(ne.rss / chi);
                    Vector z(k);
                    for (auto& v : z) v = stream.std_normal();
                    back_substitute(ne.lower, z);  // z ~ N(0, (X'X)^{-1})
                    for (std::size_t a = 0; a < k; ++a) draw[a] += sigma * z[a];
                }
                auto predict = [&](std::size_t i, const Vector& b) {
                    double v = b[0];
                    for (std::size_t a = 0; a < c.predictors.size(); ++a) v += b[a + 1] * completed(i, c.predictors[a]);
                    return v;
                };

                donor_pred.clear();
                for (auto i : c.donors) donor_pred.emplace_back(predict(i, ne.coef), i);
                std::sort(donor_pred.begin(), donor_pred.end());
                const std::size_t nd = donor_pred.size();
                const std::size_t kk = options.k_donors;
                for (auto i : c.recipients) {
                    const double target = predict(i, draw);
                    // Grow the window [lo, hi) of the kk nearest donors outward from the insertion point.
                    std::size_t hi = static_cast<std::size_t>(
                        std::lower_bound(donor_pred.begin(), donor_pred.end(), std::make_pair(target, std::size_t{0})) -
                        donor_pred.begin());
                    std::size_t lo = hi;
                    while (hi - lo < kk) {
                        if (lo == 0) {
                            ++hi;
                        } else if (hi == nd) {
                            --lo;
                        } else if (target - donor_pred[lo - 1].first <= donor_pred[hi].first - target) {
                            --lo;
                        } else {
                            ++hi;
                        }
                    }
                    const std::size_t pick = kk == 1 ? lo : lo + stream.uniform_index(kk);
                    completed(i, c.index) = data(donor_pred[pick].second, c.index);
                }
            }
        }
        out.push_back(std::move(completed));
    }
    return out;
}

PooledResult rubin_pool(std::span<const FitResult> fits, double complete_df) {
    const std::size_t m = fits.size();
    if (m < 2) throw DomainError("pooling needs at least two imputations");
    const std::size_t k = fits.front().se.size();
    for (const auto& f : fits)
        if (f.se.size() != k || f.beta.size() + 1 != k) throw InvariantError("fits disagree in coefficient layout");

    const double md = static_cast<double>(m);
    PooledResult r;
    r.imputations = m;
    r.estimate.assign(k, 0.0);
    r.within.assign(k, 0.0);
    r.between.assign(k, 0.0);
    for (const auto& f : fits) {
        const Vector q = f.coefficients();
        for (std::size_t j = 0; j < k; ++j) {
            r.estimate[j] += q[j] / md;
            r.within[j] += f.se[j] * f.se[j] / md;
        }
    }
    for (const auto& f : fits) {
        const Vector q = f.coefficients();
        for (std::size_t j = 0; j < k; ++j) r.between[j] += (q[j] - r.estimate[j]) * (q[j] - r.estimate[j]) / (md - 1.0);
    }
    r.total.resize(k);
    r.df.resize(k);
    r.fmi.resize(k);
    r.ci_low.resize(k);
    r.ci_high.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        const double b = (1.0 + 1.0 / md) * r.between[j];
        r.total[j] = r.within[j] + b;
        const double lambda = r.total[j] > 0.0 ? b / r.total[j] : 0.0;
        r.fmi[j] = lambda;
        const double nu_obs = (complete_df + 1.0) / (complete_df + 3.0) * complete_df * (1.0 - lambda);
        if (lambda > 0.0) {
            const double nu_old = (md - 1.0) / (lambda * lambda);
            r.df[j] = nu_old * nu_obs / (nu_old + nu_obs);
        } else {
            r.df[j] = nu_obs;
        }
        const double half = t_quantile(r.df[j], 0.975) * std::sqrt(r.total[j]);
        r.ci_low[j] = r.estimate[j] - half;
        r.ci_high[j] = r.estimate[j] + half;
    }
    return r;
}

}  // namespace matrixpower
