#include "matrixpower/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include "matrixpower/asymptotics.hpp"
#include "matrixpower/error.hpp"
#include "matrixpower/power.hpp"
#include "matrixpower/special.hpp"

namespace matrixpower {

SymMatrix bigfive_correlation() {
    return SymMatrix{{1.00, 0.26, 0.47, 0.20, -0.16},
                     {0.26, 1.00, 0.28, 0.46, -0.28},
                     {0.47, 0.28, 1.00, 0.20, -0.35},
                     {0.20, 0.46, 0.20, 1.00, -0.37},
                     {-0.16, -0.28, -0.35, -0.37, 1.00}};
}

RegressionModel bigfive_model() { return RegressionModel{0.0, {0.3, 0.0, 0.0, 0.3, 0.0}, 1.248602}; }

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Quantiles summarize(std::vector<double> values) {
    std::erase_if(values, [](double v) { return std::isnan(v); });
    std::sort(values.begin(), values.end());
    Quantiles q;
    q.count = values.size();
    auto at = [&](double p) { return quantile_sorted(values, p); };
    q.min = at(0.0);
    q.p05 = at(0.05);
    q.p25 = at(0.25);
    q.median = at(0.5);
    q.p75 = at(0.75);
    q.p90 = at(0.90);
    q.p95 = at(0.95);
    q.max = at(1.0);
    double s = 0.0;
    for (double v : values) s += v;
    q.mean = values.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(values.size());
    return q;
}

namespace {

// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
// handled exactly once; callers write into per-index slots.
template <class F>
void parallel_for(std::size_t count, std::size_t threads, F body) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) body(i);
        });
}

void put(std::ostream& out, double v) {
    if (std::isnan(v)) return;
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, res.ptr - buf);
}

double fmi_ratio(double complete_var, double method_var) { return 1.0 - complete_var / method_var; }

}  // namespace

// ---------------------------------------------------------------------------

ExploreReport explore(const ExploreConfig& config, const Design& design, const SymMatrix& sigma_xx) {
    const std::size_t p = design.regressor_count();
    if (sigma_xx.dim() != p) throw InvariantError("regressor covariance does not match the design");
    if (!(config.r2 > 0.0 && config.delta > 0.0 && config.r2 + config.delta < 1.0))
        throw DomainError("explore needs 0 < r2, 0 < delta and r2 + delta < 1");
    const Vector mu_x(p, 0.0);
    const auto& alloc = design.allocation();

    ExploreReport rep;
    rep.config = config;
    rep.draws.resize(config.draws);

    parallel_for(config.draws, config.threads, [&](std::size_t i) {
        ExploreDraw& d = rep.draws[i];
        d.index = i;
        RngStream stream(config.seed, i);
        d.beta.resize(p);
        for (auto& b : d.beta) b = stream.std_normal();
        d.n_single.assign(p, 0);
        d.n_single_complete.assign(p, 0);
        d.single_no_root.assign(p, false);
        d.fmi.assign(p + 1, std::numeric_limits<double>::quiet_NaN());
        try {
            d.sigma2 = sigma2_for_r2(d.beta, sigma_xx, config.r2);
            const RegressionModel base{0.0, d.beta, d.sigma2};
            auto covs = [&](const RegressionModel& m) {
                return std::pair{model_cov_beta_unit(m, mu_x, sigma_xx, design, CovarianceSource::MatrixSampled),
                                 model_cov_beta_unit(m, mu_x, sigma_xx, design, CovarianceSource::Complete)};
            };
            auto sizes = [&](const PowerSpec& spec) {
                const auto [ms, cc] = covs(spec.alternative);
                return std::pair{sample_size(spec, ms, alloc).n_total, sample_size(spec, cc, alloc).n_total};
            };

            const auto [v_ms, v_cc] = covs(base);
            for (std::size_t j = 0; j <= p; ++j) d.fmi[j] = fmi_ratio(v_cc(j, j), v_ms(j, j));

            const PowerSpec overall{overall_test(base), base, config.alpha, config.power};
            std::tie(d.n_overall, d.n_overall_complete) =
                std::pair{sample_size(overall, v_ms, alloc).n_total, sample_size(overall, v_cc, alloc).n_total};

            std::tie(d.n_uniform, d.n_uniform_complete) =
                sizes(r2_increase_uniform(base, sigma_xx, config.delta, config.alpha, config.power));

            for (std::size_t j = 0; j < p; ++j) {
                try {
                    std::tie(d.n_single[j], d.n_single_complete[j]) =
                        sizes(r2_increase_single(base, sigma_xx, config.delta, j, config.alpha, config.power));
                } catch (const NoRealRoot&) {
                    d.single_no_root[j] = true;
                }
            }
        } catch (const Error& e) {
            d.failure = e.what();
        }
    });

    rep.no_root_count.assign(p, 0);
    std::map<std::string, std::vector<double>> columns;
    for (const auto& d : rep.draws) {
        if (!d.failure.empty()) {
            ++rep.failures;
            continue;
        }
        columns["n_overall"].push_back(static_cast<double>(d.n_overall));
        columns["n_overall_complete"].push_back(static_cast<double>(d.n_overall_complete));
        columns["n_uniform"].push_back(static_cast<double>(d.n_uniform));
        columns["n_uniform_complete"].push_back(static_cast<double>(d.n_uniform_complete));
        for (std::size_t j = 0; j < p; ++j) {
            const std::string k = std::to_string(j + 1);
            if (d.single_no_root[j]) {
                ++rep.no_root_count[j];
                continue;
            }
            columns["n_single" + k].push_back(static_cast<double>(d.n_single[j]));
            columns["n_single" + k + "_complete"].push_back(static_cast<double>(d.n_single_complete[j]));
        }
        columns["fmi_b0"].push_back(d.fmi[0]);
        for (std::size_t j = 1; j <= p; ++j) {
            columns["fmi_b" + std::to_string(j)].push_back(d.fmi[j]);
            columns["fmi_slopes"].push_back(d.fmi[j]);
        }
    }
    for (auto& [name, values] : columns) rep.summaries[name] = summarize(std::move(values));
    return rep;
}

ExploreReport explore(const ExploreConfig& config) {
    return explore(config, builtin_bigfive(), bigfive_correlation());
}

void write_explore_csv(std::ostream& out, const ExploreReport& report) {
    const std::size_t p = report.draws.empty() ? 0 : report.draws.front().beta.size();
    out << "draw";
    for (std::size_t j = 1; j <= p; ++j) out << ",beta" << j;
    out << ",sigma2,n_overall,n_overall_complete,n_uniform,n_uniform_complete";
    for (std::size_t j = 1; j <= p; ++j) out << ",n_single" << j << ",n_single" << j << "_complete";
    for (std::size_t j = 0; j <= p; ++j) out << ",fmi_b" << j;
    out << ",status\n";
    for (const auto& d : report.draws) {
        const bool ok = d.failure.empty();
        out << d.index + 1;
        for (double b : d.beta) {
            out << ',';
            put(out, b);
        }
        out << ',';
        if (ok) put(out, d.sigma2);
        auto n = [&](std::size_t v, bool present) {
            out << ',';
            if (ok && present) out << v;
        };
        n(d.n_overall, true);
        n(d.n_overall_complete, true);
        n(d.n_uniform, true);
        n(d.n_uniform_complete, true);
        for (std::size_t j = 0; j < p; ++j) {
            n(d.n_single[j], !d.single_no_root[j]);
            n(d.n_single_complete[j], !d.single_no_root[j]);
        }
        for (double f : d.fmi) {
            out << ',';
            put(out, f);
        }
        out << ',';
        if (ok) {
            bool any_no_root = std::find(d.single_no_root.begin(), d.single_no_root.end(), true) != d.single_no_root.end();
            out << (any_no_root ? "no_real_root" : "ok");
        } else {
            out << "failed";
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------

Dataset generate_microdata(std::size_t n, RngStream& stream) {
    static const SymEigen eig = sym_eigen(bigfive_correlation());
    const RegressionModel model = bigfive_model();
    const std::size_t p = 5;
    Dataset data({"O", "C", "E", "A", "N", "y"}, n);
    Vector f(p), scale(p);
    for (std::size_t j = 0; j < p; ++j) scale[j] = std::sqrt(eig.values[j]);
    const double sd_e = std::sqrt(model.sigma2);
    for (std::size_t i = 0; i < n; ++i) {
        f[0] = -std::log(stream.uniform01()) - 1.0;
        const double sign = stream.bernoulli(0.5) ? 1.0 : -1.0;
        f[1] = sign * (-std::log(stream.uniform01()) - 1.0);
        for (std::size_t j = 2; j < p; ++j) f[j] = stream.std_normal();
        double y = model.beta0;
        for (std::size_t a = 0; a < p; ++a) {
            double x = 0.0;
            for (std::size_t j = 0; j < p; ++j) x += eig.vectors(a, j) * scale[j] * f[j];
            data(i, a) = x;
            y += model.beta[a] * x;
        }
        data(i, p) = y + sd_e * stream.std_normal();
    }
    return data;
}

Dataset apply_design(const Dataset& data, const Design& d, RngStream& stream) {
    if (data.cols() != d.variable_count()) throw InvariantError("dataset and design dimensions disagree");
    const std::size_t n = data.rows();
    std::vector<std::size_t> counts(d.form_count());
    std::size_t total = 0;
    for (std::size_t k = 0; k < d.form_count(); ++k) {
        const double exact = d.allocation()[k] * static_cast<double>(n);
        const double rounded = std::round(exact);
        if (std::abs(exact - rounded) > 1e-6)
            throw AllocationError("allocation of form " + d.forms()[k].name + " times n = " + std::to_string(n) +
                                  " is not a whole number of rows");
        counts[k] = static_cast<std::size_t>(rounded);
        total += counts[k];
    }
    if (total != n) throw AllocationError("per-form counts do not add up to n");

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[stream.uniform_index(i)]);

    Dataset out = data;
    std::vector<std::size_t> forms(n);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < d.form_count(); ++k) {
        const auto vars = d.administered(k);
        for (std::size_t c = 0; c < counts[k]; ++c, ++pos) {
            const std::size_t i = perm[pos];
            forms[i] = k;
            for (std::size_t j = 0; j < d.regressor_count(); ++j)
                if (!std::binary_search(vars.begin(), vars.end(), j)) out.set_missing(i, j);
        }
    }
    out.set_forms(std::move(forms));
    return out;
}

namespace {

MethodResult from_fit(std::string label, const FitResult& fit, double crit) {
    MethodResult r;
    r.label = std::move(label);
    r.ok = true;
    r.estimate = fit.coefficients();
    r.se = fit.se;
    for (std::size_t j = 0; j < r.se.size(); ++j) {
        r.ci_low.push_back(r.estimate[j] - crit * r.se[j]);
        r.ci_high.push_back(r.estimate[j] + crit * r.se[j]);
    }
    return r;
}

MethodResult from_pool(std::string label, const PooledResult& pool) {
    MethodResult r;
    r.label = std::move(label);
    r.ok = true;
    r.estimate = pool.estimate;
    r.se = pool.se();
    r.ci_low = pool.ci_low;
    r.ci_high = pool.ci_high;
    r.fmi = pool.fmi;
    return r;
}

MethodResult failed(std::string label, std::string why) {
    MethodResult r;
    r.label = std::move(label);
    r.failure = std::move(why);
    return r;
}

std::vector<std::string> method_labels(const SimConfig& c) {
    std::vector<std::string> out;
    for (const auto& m : c.methods) {
        if (m == "complete" || m == "em") {
            out.push_back(m);
        } else if (m == "mi-mvn" || m == "mi-pmm") {
            out.push_back(m + "-" + std::to_string(c.m_small));
            out.push_back(m + "-" + std::to_string(c.m_large));
        } else {
            throw InvariantError("unknown method " + m + " (expected complete, em, mi-mvn, mi-pmm)");
        }
    }
    return out;
}

void impute_and_pool(std::vector<MethodResult>& results, const std::string& method, const SimConfig& c,
                     const std::vector<Dataset>& completed, double complete_df) {
    std::vector<FitResult> fits;
    fits.reserve(completed.size());
    for (const auto& d : completed) fits.push_back(ols(d));
    const std::span<const FitResult> all(fits);
    results.push_back(from_pool(method + "-" + std::to_string(c.m_small), rubin_pool(all.first(c.m_small), complete_df)));
    results.push_back(from_pool(method + "-" + std::to_string(c.m_large), rubin_pool(all, complete_df)));
}

Replicate run_replicate(const SimConfig& c, const Design& design, std::size_t index) {
    Replicate rep;
    rep.index = index;
    const RngStream root(c.seed, index);
    RngStream gen = root.substream(1);
    RngStream mask = root.substream(2);
    RngStream mvn = root.substream(3);
    RngStream pmm = root.substream(4);

    const Dataset full = generate_microdata(c.n, gen);
    const Dataset observed = apply_design(full, design, mask);
    const std::size_t p = full.p();
    const double complete_df = static_cast<double>(c.n - p - 1);
    const double z = normal_quantile(0.975);

    auto guarded = [&](const std::string& method, auto&& body) {
        try {
            body();
        } catch (const Error& e) {
            if (method == "mi-mvn" || method == "mi-pmm") {
                rep.results.push_back(failed(method + "-" + std::to_string(c.m_small), e.what()));
                rep.results.push_back(failed(method + "-" + std::to_string(c.m_large), e.what()));
            } else {
                rep.results.push_back(failed(method, e.what()));
            }
        }
    };

    for (const auto& m : c.methods) {
        if (m == "complete") {
            guarded(m, [&] {
                rep.results.push_back(from_fit(m, ols(full), t_quantile(complete_df, 0.975)));
            });
        } else if (m == "em") {
            guarded(m, [&] { rep.results.push_back(from_fit(m, em_mvn(observed, c.em).fit, z)); });
        } else if (m == "mi-mvn") {
            guarded(m, [&] { impute_and_pool(rep.results, m, c, mi_mvn(observed, c.m_large, mvn, c.em), complete_df); });
        } else if (m == "mi-pmm") {
            guarded(m, [&] { impute_and_pool(rep.results, m, c, mi_pmm(observed, c.m_large, pmm, c.pmm), complete_df); });
        }
    }
    return rep;
}

double sample_variance(const std::vector<double>& v) {
    if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(v.size() - 1);
}

}  // namespace

SimReport simulate(const SimConfig& config) {
    if (config.reps == 0) throw InvariantError("simulate needs at least one replicate");
    if (config.m_small < 2 || config.m_large < config.m_small)
        throw InvariantError("imputation counts need 2 <= m_small <= m_large");
    const Design design = builtin_bigfive();
    if (config.n % design.form_count() != 0)
        throw AllocationError("n = " + std::to_string(config.n) + " does not split evenly across " +
                              std::to_string(design.form_count()) + " forms");
    const auto labels = method_labels(config);

    SimReport rep;
    rep.config = config;
    const RegressionModel model = bigfive_model();
    const std::size_t p = model.p();
    rep.truth = Vector{model.beta0};
    rep.truth.insert(rep.truth.end(), model.beta.begin(), model.beta.end());
    const MomentStructure m = build_moments(Vector(p, 0.0), bigfive_correlation(), model);
    const AsymptoticReport analytic = report(m, design, static_cast<double>(config.n));
    rep.analytic_se = analytic.se;
    rep.analytic_fmi = analytic.fmi;

    rep.replicates.resize(config.reps);
    parallel_for(config.reps, config.threads, [&](std::size_t i) { rep.replicates[i] = run_replicate(config, design, i); });

    // Estimates of the complete-data fit, by replicate, for the empirical FMI.
    std::vector<const MethodResult*> complete(config.reps, nullptr);
    for (std::size_t i = 0; i < config.reps; ++i)
        for (const auto& r : rep.replicates[i].results)
            if (r.label == "complete" && r.ok) complete[i] = &r;

    for (const auto& label : labels) {
        MethodSummary s;
        s.label = label;
        std::vector<std::vector<double>> est(p + 1), se(p + 1), fmi(p + 1), paired_m(p + 1), paired_c(p + 1);
        std::vector<std::size_t> covered(p + 1, 0), tail(p + 1, 0);
        bool has_fmi = false;
        for (std::size_t i = 0; i < config.reps; ++i) {
            for (const auto& r : rep.replicates[i].results) {
                if (r.label != label) continue;
                if (!r.ok) {
                    ++s.failures;
                    ++s.failure_reasons[r.failure];
                    continue;
                }
                ++s.successes;
                has_fmi = has_fmi || !r.fmi.empty();
                for (std::size_t j = 0; j <= p; ++j) {
                    est[j].push_back(r.estimate[j]);
                    se[j].push_back(r.se[j]);
                    if (!r.fmi.empty()) fmi[j].push_back(r.fmi[j]);
                    if (r.ci_low[j] <= rep.truth[j] && rep.truth[j] <= r.ci_high[j]) ++covered[j];
                    if (r.se[j] > 3.0 * rep.analytic_se[j]) ++tail[j];
                    if (complete[i]) {
                        paired_m[j].push_back(r.estimate[j]);
                        paired_c[j].push_back(complete[i]->estimate[j]);
                    }
                }
            }
        }
        for (std::size_t j = 0; j <= p; ++j) {
            CoefficientSummary cs;
            const double count = static_cast<double>(est[j].size());
            const Quantiles q = summarize(est[j]);
            cs.mean = q.mean;
            cs.sd = std::sqrt(sample_variance(est[j]));
            const double half = normal_quantile(0.975) * cs.sd / std::sqrt(count);
            cs.mean_ci_low = cs.mean - half;
            cs.mean_ci_high = cs.mean + half;
            cs.coverage = count > 0 ? static_cast<double>(covered[j]) / count : std::numeric_limits<double>::quiet_NaN();
            cs.se = summarize(se[j]);
            cs.se_tail_pct = count > 0 ? 100.0 * static_cast<double>(tail[j]) / count : 0.0;
            if (has_fmi) cs.reported_fmi = summarize(fmi[j]);
            if (label != "complete" && paired_m[j].size() >= 2)
                cs.empirical_fmi = fmi_ratio(sample_variance(paired_c[j]), sample_variance(paired_m[j]));
            s.coefficients.push_back(std::move(cs));
        }
        rep.methods.push_back(std::move(s));
    }
    return rep;
}

void write_simulate_csv(std::ostream& out, const SimReport& report) {
    const std::size_t k = report.truth.size();
    out << "rep,method,status";
    for (std::size_t j = 0; j < k; ++j) out << ",b" << j;
    for (std::size_t j = 0; j < k; ++j) out << ",se" << j;
    for (std::size_t j = 0; j < k; ++j) out << ",covered" << j;
    for (std::size_t j = 0; j < k; ++j) out << ",fmi" << j;
    out << ",failure\n";
    for (const auto& r : report.replicates) {
        for (const auto& m : r.results) {
            out << r.index + 1 << ',' << m.label << ',' << (m.ok ? "ok" : "failed");
            for (std::size_t j = 0; j < k; ++j) {
                out << ',';
                if (m.ok) put(out, m.estimate[j]);
            }
            for (std::size_t j = 0; j < k; ++j) {
                out << ',';
                if (m.ok) put(out, m.se[j]);
            }
            for (std::size_t j = 0; j < k; ++j) {
                out << ',';
                if (m.ok) out << (m.ci_low[j] <= report.truth[j] && report.truth[j] <= m.ci_high[j] ? 1 : 0);
            }
            for (std::size_t j = 0; j < k; ++j) {
                out << ',';
                if (m.ok && !m.fmi.empty()) put(out, m.fmi[j]);
            }
            out << ',';
            if (!m.ok) {
                std::string why = m.failure;
                std::replace(why.begin(), why.end(), ',', ';');
                std::replace(why.begin(), why.end(), '\n', ' ');
                out << why;
            }
            out << '\n';
        }
    }
}

}  // namespace matrixpower
