#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include <json.hpp>

#include "matrixpower/asymptotics.hpp"
#include "matrixpower/design.hpp"
#include "matrixpower/experiments.hpp"
#include "matrixpower/linalg.hpp"
#include "matrixpower/moments.hpp"
#include "matrixpower/power.hpp"

namespace matrixpower {

using Json = nlohmann::ordered_json;

/// Regressor distribution plus regression model.
struct ModelDocument {
    Vector mu_x;
    SymMatrix sigma_xx;
    RegressionModel model;
};

/// `{"mu_x", "sigma_xx", "beta0", "beta", "sigma2" | "r2"}`; exactly one of
/// sigma2 and r2. mu_x defaults to zeros and beta0 to 0. Throws SchemaError
/// for malformed documents.
ModelDocument parse_model(const std::string& document);
Json model_to_json(const ModelDocument& m);

/// Big Five correlations with the matching population regression.
ModelDocument bigfive_model_document();

enum class HypothesisKind { Overall, Coef, R2Uniform, R2Single, CustomR };

/// `{"hypothesis": "overall" | "coef" | "r2-uniform" | "r2-single" | "custom-R",
///   "index": j, "value": v, "delta": d, "R": [[...]], "r": [...],
///   "alpha": 0.05, "power": 0.8, "covariance": "matrix-sampled" | "complete"}`.
/// `index` is 1-based over the slopes (0 addresses the intercept for coef).
struct PowerRequest {
    HypothesisKind kind = HypothesisKind::Overall;
    std::size_t index = 1;
    double value = 0.0;
    double delta = 0.01;
    Matrix R;
    Vector r;
    double alpha = 0.05;
    double power = 0.8;
    CovarianceSource covariance = CovarianceSource::MatrixSampled;
};

PowerRequest parse_power_request(const std::string& document);
HypothesisKind parse_hypothesis_kind(const std::string& name);
std::string to_string(HypothesisKind kind);
Json power_request_to_json(const PowerRequest& req);

/// The power specification the request describes, with the covariance
/// evaluated at its alternative.
struct ResolvedPower {
    PowerSpec spec;
    SymMatrix cov_beta_unit;
};
ResolvedPower resolve_power(const PowerRequest& req, const ModelDocument& model, const Design& design);

Json to_json(const Vector& v);
Json to_json(const Matrix& m);
Json to_json(const SymMatrix& m);
Json to_json(const RegressionModel& m);
Json to_json(const EstimabilityReport& r, const Design& d);
Json to_json(const AsymptoticReport& r);
Json to_json(const SampleSizeResult& r);
Json to_json(const Quantiles& q);
Json summary_json(const ExploreReport& r);
Json summary_json(const SimReport& r);
Json to_json(const ExploreConfig& c);
Json to_json(const SimConfig& c);

}  // namespace matrixpower
