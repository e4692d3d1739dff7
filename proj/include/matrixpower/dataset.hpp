#pragma once

#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "matrixpower/linalg.hpp"

namespace matrixpower {

/// n rows over (x_1..x_p, y). Missing cells hold NaN. The outcome (last
/// column) is never missing. Rows may carry the index of the form that
/// produced them.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<std::string> columns, std::size_t rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return columns_.size(); }
    std::size_t p() const noexcept { return columns_.size() - 1; }
    const std::vector<std::string>& columns() const noexcept { return columns_; }

    double& operator()(std::size_t i, std::size_t j) { return values_[i * cols() + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values_[i * cols() + j]; }
    std::span<const double> row(std::size_t i) const { return {values_.data() + i * cols(), cols()}; }

    bool missing(std::size_t i, std::size_t j) const { return std::isnan((*this)(i, j)); }
    void set_missing(std::size_t i, std::size_t j) { (*this)(i, j) = std::numeric_limits<double>::quiet_NaN(); }
    bool has_missing() const;
    std::size_t observed_count(std::size_t j) const;

    const std::optional<std::vector<std::size_t>>& forms() const noexcept { return forms_; }
    void set_forms(std::vector<std::size_t> forms);

    /// Throws InvariantError if the outcome is missing anywhere.
    void check_outcome_observed() const;

private:
    std::vector<std::string> columns_;
    std::size_t rows_ = 0;
    std::vector<double> values_;
    std::optional<std::vector<std::size_t>> forms_;
};

/// CSV with a header row. Empty fields are missing; an optional `form`
/// column carries 1-based form labels.
Dataset read_csv(std::istream& in);
void write_csv(std::ostream& out, const Dataset& data);

/// Rows grouped by their observed-variable pattern.
struct PatternGroup {
    std::vector<std::size_t> observed;  ///< ascending column indices
    std::vector<std::size_t> rows;
};
std::vector<PatternGroup> missingness_patterns(const Dataset& data);

}  // namespace matrixpower
