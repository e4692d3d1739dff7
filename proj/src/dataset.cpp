#include "matrixpower/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "matrixpower/error.hpp"

namespace matrixpower {

Dataset::Dataset(std::vector<std::string> columns, std::size_t rows)
    : columns_(std::move(columns)), rows_(rows), values_(rows_ * columns_.size(), 0.0) {
    if (columns_.size() < 2) throw InvariantError("dataset needs at least one regressor and the outcome");
}

bool Dataset::has_missing() const {
    return std::any_of(values_.begin(), values_.end(), [](double v) { return std::isnan(v); });
}

std::size_t Dataset::observed_count(std::size_t j) const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < rows_; ++i) c += missing(i, j) ? 0 : 1;
    return c;
}

void Dataset::set_forms(std::vector<std::size_t> forms) {
    if (forms.size() != rows_) throw InvariantError("one form label per row is required");
    forms_ = std::move(forms);
}

void Dataset::check_outcome_observed() const {
    for (std::size_t i = 0; i < rows_; ++i)
        if (missing(i, p())) throw InvariantError("outcome is missing in row " + std::to_string(i + 1));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    fields.push_back(field);
    return fields;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\"");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\"");
    return s.substr(b, e - b + 1);
}

}  // namespace

Dataset read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("CSV input is empty");
    std::vector<std::string> header = split_csv_line(line);
    for (auto& h : header) h = trim(h);

    std::optional<std::size_t> form_col;
    std::vector<std::string> columns;
    std::vector<std::size_t> value_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == "form") {
            form_col = c;
        } else {
            columns.push_back(header[c]);
            value_cols.push_back(c);
        }
    }

    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> forms;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw SchemaError("CSV line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                              " fields, expected " + std::to_string(header.size()));
        std::vector<double> row;
        for (auto c : value_cols) {
            const std::string f = trim(fields[c]);
            if (f.empty() || f == "NA" || f == ".") {
                row.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            double v = 0.0;
            const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
            if (res.ec != std::errc{} || res.ptr != f.data() + f.size())
                throw SchemaError("CSV line " + std::to_string(line_no) + ": '" + f + "' is not a number");
            row.push_back(v);
        }
        if (form_col) {
            const std::string f = trim(fields[*form_col]);
            std::size_t label = 0;
            const auto res = std::from_chars(f.data(), f.data() + f.size(), label);
            if (res.ec != std::errc{} || label == 0)
                throw SchemaError("CSV line " + std::to_string(line_no) + ": form label must be a positive integer");
            forms.push_back(label - 1);
        }
        rows.push_back(std::move(row));
    }

    Dataset data(columns, rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < columns.size(); ++j) data(i, j) = rows[i][j];
    if (form_col) data.set_forms(std::move(forms));
    data.check_outcome_observed();
    return data;
}

void write_csv(std::ostream& out, const Dataset& data) {
    const bool with_forms = data.forms().has_value();
    for (std::size_t j = 0; j < data.cols(); ++j) out << (j ? "," : "") << data.columns()[j];
    if (with_forms) out << ",form";
    out << '\n';
    char buf[64];
    for (std::size_t i = 0; i < data.rows(); ++i) {
        for (std::size_t j = 0; j < data.cols(); ++j) {
            if (j) out << ',';
            if (!data.missing(i, j)) {
                const auto res = std::to_chars(buf, buf + sizeof buf, data(i, j));
                out.write(buf, res.ptr - buf);
            }
        }
        if (with_forms) out << ',' << (*data.forms())[i] + 1;
        out << '\n';
    }
}

std::vector<PatternGroup> missingness_patterns(const Dataset& data) {
    std::map<std::vector<std::size_t>, std::vector<std::size_t>> groups;
    std::vector<std::size_t> observed;
    for (std::size_t i = 0; i < data.rows(); ++i) {
        observed.clear();
        for (std::size_t j = 0; j < data.cols(); ++j)
            if (!data.missing(i, j)) observed.push_back(j);
        groups[observed].push_back(i);
    }
    std::vector<PatternGroup> out;
    out.reserve(groups.size());
    for (auto& [obs, rows] : groups) out.push_back({obs, std::move(rows)});
    return out;
}

}  // namespace matrixpower
