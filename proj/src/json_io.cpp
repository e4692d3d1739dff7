#include "matrixpower/json_io.hpp"

#include <cmath>

#include "matrixpower/error.hpp"

namespace matrixpower {

namespace {

Json parse_document(const std::string& document, const char* what) {
    try {
        return Json::parse(document);
    } catch (const Json::parse_error& e) {
        throw SchemaError(std::string(what) + " is not valid JSON: " + e.what());
    }
}

Vector vector_at(const Json& doc, const char* key) {
    const auto& v = doc.at(key);
    if (!v.is_array()) throw SchemaError(std::string("'") + key + "' must be an array of numbers");
    return v.get<Vector>();
}

Matrix matrix_from(const Json& v, const char* key) {
    if (!v.is_array() || v.empty()) throw SchemaError(std::string("'") + key + "' must be a non-empty array of rows");
    const std::size_t rows = v.size();
    const std::size_t cols = v.front().size();
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!v[i].is_array() || v[i].size() != cols)
            throw SchemaError(std::string("rows of '") + key + "' must all have the same length");
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = v[i][j].get<double>();
    }
    return m;
}

// Wraps nlohmann type and key errors as SchemaError.
template <class F>
auto schema_guard(const char* what, F body) {
    try {
        return body();
    } catch (const Json::exception& e) {
        throw SchemaError(std::string("malformed ") + what + ": " + e.what());
    }
}

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

ModelDocument parse_model(const std::string& document) {
    const Json doc = parse_document(document, "model document");
    return schema_guard("model document", [&] {
        if (!doc.is_object()) throw SchemaError("model document must be a JSON object");
        ModelDocument m;
        m.model.beta = vector_at(doc, "beta");
        const std::size_t p = m.model.beta.size();
        if (p == 0) throw SchemaError("'beta' must not be empty");
        const Matrix s = matrix_from(doc.at("sigma_xx"), "sigma_xx");
        if (s.rows() != p || s.cols() != p) throw SchemaError("'sigma_xx' must be p x p with p = length of beta");
        try {
            m.sigma_xx = SymMatrix(s);
        } catch (const InvariantError&) {
            throw SchemaError("'sigma_xx' must be symmetric");
        }
        m.mu_x = doc.contains("mu_x") ? vector_at(doc, "mu_x") : Vector(p, 0.0);
        if (m.mu_x.size() != p) throw SchemaError("'mu_x' must have length p");
        m.model.beta0 = doc.value("beta0", 0.0);
        const bool has_s2 = doc.contains("sigma2");
        const bool has_r2 = doc.contains("r2");
        if (has_s2 == has_r2) throw SchemaError("model document needs exactly one of 'sigma2' and 'r2'");
        if (has_s2) {
            m.model.sigma2 = doc.at("sigma2").get<double>();
            if (!(m.model.sigma2 >= 0.0)) throw SchemaError("'sigma2' must be non-negative");
        } else {
            m.model.sigma2 = sigma2_for_r2(m.model.beta, m.sigma_xx, doc.at("r2").get<double>());
        }
        return m;
    });
}

Json model_to_json(const ModelDocument& m) {
    Json j;
    j["mu_x"] = to_json(m.mu_x);
    j["sigma_xx"] = to_json(m.sigma_xx);
    j["beta0"] = m.model.beta0;
    j["beta"] = to_json(m.model.beta);
    j["sigma2"] = m.model.sigma2;
    return j;
}

ModelDocument bigfive_model_document() {
    return ModelDocument{Vector(5, 0.0), bigfive_correlation(), bigfive_model()};
}

HypothesisKind parse_hypothesis_kind(const std::string& name) {
    if (name == "overall") return HypothesisKind::Overall;
    if (name == "coef") return HypothesisKind::Coef;
    if (name == "r2-uniform") return HypothesisKind::R2Uniform;
    if (name == "r2-single") return HypothesisKind::R2Single;
    if (name == "custom-R") return HypothesisKind::CustomR;
    throw SchemaError("unknown hypothesis '" + name + "' (expected overall, coef, r2-uniform, r2-single, custom-R)");
}

std::string to_string(HypothesisKind kind) {
    switch (kind) {
        case HypothesisKind::Overall: return "overall";
        case HypothesisKind::Coef: return "coef";
        case HypothesisKind::R2Uniform: return "r2-uniform";
        case HypothesisKind::R2Single: return "r2-single";
        case HypothesisKind::CustomR: return "custom-R";
    }
    return "overall";
}

PowerRequest parse_power_request(const std::string& document) {
    const Json doc = parse_document(document, "power request");
    return schema_guard("power request", [&] {
        if (!doc.is_object()) throw SchemaError("power request must be a JSON object");
        PowerRequest req;
        req.kind = parse_hypothesis_kind(doc.value("hypothesis", std::string("overall")));
        req.index = doc.value("index", std::size_t{1});
        req.value = doc.value("value", 0.0);
        req.delta = doc.value("delta", 0.01);
        req.alpha = doc.value("alpha", 0.05);
        req.power = doc.value("power", 0.8);
        const std::string cov = doc.value("covariance", std::string("matrix-sampled"));
        if (cov == "matrix-sampled") {
            req.covariance = CovarianceSource::MatrixSampled;
        } else if (cov == "complete") {
            req.covariance = CovarianceSource::Complete;
        } else {
            throw SchemaError("'covariance' must be 'matrix-sampled' or 'complete'");
        }
        if (req.kind == HypothesisKind::CustomR) {
            req.R = matrix_from(doc.at("R"), "R");
            req.r = doc.contains("r") ? vector_at(doc, "r") : Vector(req.R.rows(), 0.0);
        }
        return req;
    });
}

Json power_request_to_json(const PowerRequest& req) {
    Json j;
    j["hypothesis"] = to_string(req.kind);
    if (req.kind == HypothesisKind::Coef || req.kind == HypothesisKind::R2Single) j["index"] = req.index;
    if (req.kind == HypothesisKind::Coef) j["value"] = req.value;
    if (req.kind == HypothesisKind::R2Uniform || req.kind == HypothesisKind::R2Single) j["delta"] = req.delta;
    if (req.kind == HypothesisKind::CustomR) {
        j["R"] = to_json(req.R);
        j["r"] = to_json(req.r);
    }
    j["alpha"] = req.alpha;
    j["power"] = req.power;
    j["covariance"] = req.covariance == CovarianceSource::Complete ? "complete" : "matrix-sampled";
    return j;
}

ResolvedPower resolve_power(const PowerRequest& req, const ModelDocument& m, const Design& design) {
    const std::size_t p = m.model.p();
    if (design.regressor_count() != p) throw InvariantError("design and model disagree on the number of regressors");
    auto spec = [&]() -> PowerSpec {
        switch (req.kind) {
            case HypothesisKind::Overall:
                return PowerSpec{overall_test(m.model), m.model, req.alpha, req.power};
            case HypothesisKind::Coef:
                return PowerSpec{coefficient_test(p, req.index, req.value), m.model, req.alpha, req.power};
            case HypothesisKind::R2Uniform:
                return r2_increase_uniform(m.model, m.sigma_xx, req.delta, req.alpha, req.power);
            case HypothesisKind::R2Single:
                if (req.index < 1 || req.index > p) throw IndexError("slope index must be in 1..p");
                return r2_increase_single(m.model, m.sigma_xx, req.delta, req.index - 1, req.alpha, req.power);
            case HypothesisKind::CustomR:
                return PowerSpec{LinearHypothesis(req.R, req.r), m.model, req.alpha, req.power};
        }
        throw InvariantError("unhandled hypothesis kind");
    }();
    SymMatrix cov = model_cov_beta_unit(spec.alternative, m.mu_x, m.sigma_xx, design, req.covariance);
    return ResolvedPower{std::move(spec), std::move(cov)};
}

Json to_json(const Vector& v) {
    Json j = Json::array();
    for (double x : v) j.push_back(number(x));
    return j;
}

Json to_json(const Matrix& m) {
    Json j = Json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (std::size_t k = 0; k < m.cols(); ++k) row.push_back(number(m(i, k)));
        j.push_back(std::move(row));
    }
    return j;
}

Json to_json(const SymMatrix& m) { return to_json(m.matrix()); }

Json to_json(const RegressionModel& m) {
    Json j;
    j["beta0"] = m.beta0;
    j["beta"] = to_json(m.beta);
    j["sigma2"] = m.sigma2;
    return j;
}

Json to_json(const EstimabilityReport& r, const Design& d) {
    Json j;
    j["estimable"] = !r.singular;
    Json pairs = Json::array();
    for (const auto& [pair, forms] : r.pair_coverage) {
        Json e;
        e["pair"] = {d.variable_name(pair.first), d.variable_name(pair.second)};
        Json names = Json::array();
        for (auto k : forms) names.push_back(d.forms()[k].name);
        e["forms"] = std::move(names);
        pairs.push_back(std::move(e));
    }
    j["pair_coverage"] = std::move(pairs);
    Json un = Json::array();
    for (const auto& [a, b] : r.uncovered_pairs) un.push_back({a, b});
    j["uncovered_pairs"] = std::move(un);
    return j;
}

Json to_json(const AsymptoticReport& r) {
    Json j;
    j["n_total"] = r.n_total;
    j["model"] = to_json(r.model);
    j["se"] = to_json(r.se);
    j["se_complete"] = to_json(r.se_complete);
    j["fmi"] = to_json(r.fmi);
    j["cov_beta"] = to_json(r.cov_beta);
    j["cov_beta_complete"] = to_json(r.cov_beta_complete);
    j["information_condition"] = number(r.information_condition);
    return j;
}

Json to_json(const SampleSizeResult& r) {
    Json j;
    j["n_total"] = r.n_total;
    j["per_form"] = r.per_form;
    j["achieved_power"] = r.achieved_power;
    j["noncentrality_at_n"] = r.noncentrality_at_n;
    j["n_exact"] = r.n_exact;
    return j;
}

Json to_json(const Quantiles& q) {
    Json j;
    j["count"] = q.count;
    j["mean"] = number(q.mean);
    j["min"] = number(q.min);
    j["p05"] = number(q.p05);
    j["p25"] = number(q.p25);
    j["median"] = number(q.median);
    j["p75"] = number(q.p75);
    j["p90"] = number(q.p90);
    j["p95"] = number(q.p95);
    j["max"] = number(q.max);
    return j;
}

Json to_json(const ExploreConfig& c) {
    Json j;
    j["draws"] = c.draws;
    j["r2"] = c.r2;
    j["delta"] = c.delta;
    j["alpha"] = c.alpha;
    j["power"] = c.power;
    j["n_reference"] = c.n_reference;
    j["seed"] = c.seed;
    return j;
}

Json to_json(const SimConfig& c) {
    Json j;
    j["n"] = c.n;
    j["reps"] = c.reps;
    j["m_small"] = c.m_small;
    j["m_large"] = c.m_large;
    j["methods"] = c.methods;
    j["seed"] = c.seed;
    j["pmm"] = {{"k_donors", c.pmm.k_donors}, {"cycles", c.pmm.cycles}, {"draw_parameters", c.pmm.draw_parameters}};
    j["em"] = {{"tolerance", c.em.tolerance}, {"max_iterations", c.em.max_iterations}};
    return j;
}

Json summary_json(const ExploreReport& r) {
    Json j;
    j["config"] = to_json(r.config);
    j["draws"] = r.draws.size();
    j["failures"] = r.failures;
    j["no_real_root"] = r.no_root_count;
    Json s;
    for (const auto& [name, q] : r.summaries) s[name] = to_json(q);
    j["summaries"] = std::move(s);
    return j;
}

Json summary_json(const SimReport& r) {
    Json j;
    j["config"] = to_json(r.config);
    j["truth"] = to_json(r.truth);
    j["analytic_se"] = to_json(r.analytic_se);
    j["analytic_fmi"] = to_json(r.analytic_fmi);
    Json methods = Json::array();
    for (const auto& m : r.methods) {
        Json mj;
        mj["method"] = m.label;
        mj["successes"] = m.successes;
        mj["failures"] = m.failures;
        Json reasons = Json::object();
        for (const auto& [why, n] : m.failure_reasons) reasons[why] = n;
        mj["failure_reasons"] = std::move(reasons);
        Json coefs = Json::array();
        for (std::size_t k = 0; k < m.coefficients.size(); ++k) {
            const auto& c = m.coefficients[k];
            Json cj;
            cj["coefficient"] = k == 0 ? std::string("b0") : "b" + std::to_string(k);
            cj["mean"] = number(c.mean);
            cj["mean_ci"] = {number(c.mean_ci_low), number(c.mean_ci_high)};
            cj["sd"] = number(c.sd);
            cj["coverage"] = number(c.coverage);
            cj["se"] = to_json(c.se);
            cj["se_tail_pct"] = c.se_tail_pct;
            cj["reported_fmi"] = c.reported_fmi ? to_json(*c.reported_fmi) : Json(nullptr);
            cj["empirical_fmi"] = c.empirical_fmi ? number(*c.empirical_fmi) : Json(nullptr);
            coefs.push_back(std::move(cj));
        }
        mj["coefficients"] = std::move(coefs);
        methods.push_back(std::move(mj));
    }
    j["methods"] = std::move(methods);
    return j;
}

}  // namespace matrixpower
