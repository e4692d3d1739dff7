#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "matrixpower/linalg.hpp"

namespace matrixpower {

/// One questionnaire form: the regressors it administers (indices into
/// Design::regressors(), ascending). The outcome is on every form.
struct Form {
    std::string name;
    std::vector<std::size_t> items;
};

/// A multiple matrix sampling plan.
///
/// Variables are indexed 0..p-1 for the regressors and p for the outcome;
/// this "variable index" matches the rows/columns of the (x, y) covariance
/// matrix used throughout the library.
class Design {
public:
    /// Validates: allocation sums to 1 within 1e-9, each fraction in (0, 1],
    /// each form administers at least one regressor, items are known and
    /// unique. Throws InvariantError otherwise.
    Design(std::vector<std::string> regressors, std::string outcome, std::vector<Form> forms,
           std::vector<double> allocation);

    std::size_t regressor_count() const noexcept { return regressors_.size(); }
    std::size_t variable_count() const noexcept { return regressors_.size() + 1; }
    std::size_t form_count() const noexcept { return forms_.size(); }

    const std::vector<std::string>& regressors() const noexcept { return regressors_; }
    const std::string& outcome() const noexcept { return outcome_; }
    const std::vector<Form>& forms() const noexcept { return forms_; }
    const std::vector<double>& allocation() const noexcept { return allocation_; }

    /// Name of variable `v` (regressor or outcome).
    const std::string& variable_name(std::size_t v) const;
    /// Administered variable indices of form k, ascending, outcome last.
    std::vector<std::size_t> administered(std::size_t k) const;
    bool is_uniform() const;

private:
    std::vector<std::string> regressors_;
    std::string outcome_;
    std::vector<Form> forms_;
    std::vector<double> allocation_;
};

/// 0/1 matrix whose rows pick the administered variables of one form out of
/// the bordered vector (1, x_1..x_p, y). The intercept column is always zero.
struct SelectorMatrix {
    Matrix f;
    std::vector<std::size_t> variables;  ///< administered variable indices, one per row
};

struct EstimabilityReport {
    /// For each unordered variable pair (a <= b, variable indices), the forms
    /// observing both. Diagonal pairs are included.
    std::vector<std::pair<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>>> pair_coverage;
    std::vector<std::pair<std::string, std::string>> uncovered_pairs;
    bool singular = false;
};

/// Parses the JSON design document
/// `{"variables": [...], "outcome": "y", "forms": [{"name", "items", "fraction"}]}`.
/// Throws SchemaError for malformed documents and InvariantError for
/// documents that violate the design invariants.
Design parse_design(const std::string& document);
std::string design_to_json(const Design& d);

SelectorMatrix selector(const Design& d, std::size_t form);

EstimabilityReport validate_estimability(const Design& d);

/// The ten-form Big Five design: every pair of the five subscales O, C, E,
/// A, N on one form, each form with allocation 0.1.
Design builtin_bigfive();

/// One form per regressor pair (lexicographic order), equal allocation.
/// Regressors are named x1..xp and the outcome y.
Design balanced_pairs_design(std::size_t p);

/// A single form administering every regressor.
Design complete_design(std::vector<std::string> regressors, std::string outcome = "y");
Design complete_design(std::size_t p);

}  // namespace matrixpower
