#include "matrixpower/design.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <json.hpp>

#include "matrixpower/error.hpp"

namespace matrixpower {

using nlohmann::json;

Design::Design(std::vector<std::string> regressors, std::string outcome, std::vector<Form> forms,
               std::vector<double> allocation)
    : regressors_(std::move(regressors)),
      outcome_(std::move(outcome)),
      forms_(std::move(forms)),
      allocation_(std::move(allocation)) {
    if (regressors_.empty()) throw InvariantError("design has no regressors");
    std::set<std::string> names(regressors_.begin(), regressors_.end());
    if (names.size() != regressors_.size()) throw InvariantError("duplicate regressor names");
    if (names.count(outcome_)) throw InvariantError("outcome '" + outcome_ + "' is also listed as a regressor");
    if (forms_.empty()) throw InvariantError("design has no forms");
    if (allocation_.size() != forms_.size()) throw InvariantError("one allocation fraction per form is required");

    for (auto& form : forms_) {
        if (form.items.empty())
            throw InvariantError("form '" + form.name + "' administers no regressor");
        std::sort(form.items.begin(), form.items.end());
        if (std::adjacent_find(form.items.begin(), form.items.end()) != form.items.end())
            throw InvariantError("form '" + form.name + "' lists an item twice");
        if (form.items.back() >= regressors_.size())
            throw InvariantError("form '" + form.name + "' refers to an unknown regressor");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < allocation_.size(); ++k) {
        const double a = allocation_[k];
        if (!(a > 0.0 && a <= 1.0))
            throw InvariantError("allocation of form '" + forms_[k].name + "' must lie in (0, 1]");
        total += a;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw InvariantError("allocation fractions sum to " + std::to_string(total) + ", not 1");
}

const std::string& Design::variable_name(std::size_t v) const {
    if (v < regressors_.size()) return regressors_[v];
    if (v == regressors_.size()) return outcome_;
    throw IndexError("variable index out of range");
}

std::vector<std::size_t> Design::administered(std::size_t k) const {
    if (k >= forms_.size()) throw IndexError("form index " + std::to_string(k) + " out of range");
    std::vector<std::size_t> v = forms_[k].items;
    v.push_back(regressors_.size());
    return v;
}

bool Design::is_uniform() const {
    const double a0 = allocation_.front();
    return std::all_of(allocation_.begin(), allocation_.end(),
                       [a0](double a) { return std::abs(a - a0) <= 1e-12; });
}

Design parse_design(const std::string& document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("design document is not valid JSON: ") + e.what());
    }
    try {
        if (!doc.is_object()) throw SchemaError("design document must be a JSON object");
        const auto regressors = doc.at("variables").get<std::vector<std::string>>();
        const std::string outcome = doc.value("outcome", std::string("y"));
        const auto& forms_doc = doc.at("forms");
        if (!forms_doc.is_array()) throw SchemaError("'forms' must be an array");

        std::vector<Form> forms;
        std::vector<double> allocation;
        for (std::size_t k = 0; k < forms_doc.size(); ++k) {
            const auto& f = forms_doc[k];
            Form form;
            form.name = f.contains("name") ? (f["name"].is_string() ? f["name"].get<std::string>()
                                                                   : f["name"].dump())
                                           : std::to_string(k + 1);
            if (f.contains("outcome") && !f["outcome"].get<bool>())
                throw InvariantError("form '" + form.name + "' does not administer the outcome");
            for (const auto& item : f.at("items").get<std::vector<std::string>>()) {
                if (item == outcome) continue;
                const auto it = std::find(regressors.begin(), regressors.end(), item);
                if (it == regressors.end())
                    throw InvariantError("form '" + form.name + "' lists unknown variable '" + item + "'");
                form.items.push_back(static_cast<std::size_t>(it - regressors.begin()));
            }
            forms.push_back(std::move(form));
            allocation.push_back(f.at("fraction").get<double>());
        }
        return Design(regressors, outcome, std::move(forms), std::move(allocation));
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed design document: ") + e.what());
    }
}

std::string design_to_json(const Design& d) {
    json doc;
    doc["variables"] = d.regressors();
    doc["outcome"] = d.outcome();
    doc["forms"] = json::array();
    for (std::size_t k = 0; k < d.form_count(); ++k) {
        std::vector<std::string> items;
        for (auto i : d.forms()[k].items) items.push_back(d.regressors()[i]);
        doc["forms"].push_back({{"name", d.forms()[k].name}, {"items", items}, {"fraction", d.allocation()[k]}});
    }
    return doc.dump(2);
}

SelectorMatrix selector(const Design& d, std::size_t form) {
    SelectorMatrix s;
    s.variables = d.administered(form);
    s.f = Matrix(s.variables.size(), d.variable_count() + 1);
    for (std::size_t r = 0; r < s.variables.size(); ++r) s.f(r, s.variables[r] + 1) = 1.0;
    return s;
}

EstimabilityReport validate_estimability(const Design& d) {
    EstimabilityReport report;
    const std::size_t nv = d.variable_count();
    std::vector<std::vector<bool>> on_form(d.form_count(), std::vector<bool>(nv, false));
    for (std::size_t k = 0; k < d.form_count(); ++k)
        for (auto v : d.administered(k)) on_form[k][v] = true;

    for (std::size_t a = 0; a < nv; ++a) {
        for (std::size_t b = a; b < nv; ++b) {
            std::vector<std::size_t> forms;
            for (std::size_t k = 0; k < d.form_count(); ++k)
                if (on_form[k][a] && on_form[k][b] && d.allocation()[k] > 0.0) forms.push_back(k);
            if (forms.empty()) report.uncovered_pairs.emplace_back(d.variable_name(a), d.variable_name(b));
            report.pair_coverage.push_back({{a, b}, std::move(forms)});
        }
    }
    report.singular = !report.uncovered_pairs.empty();
    return report;
}

Design balanced_pairs_design(std::size_t p) {
    if (p < 2) throw DomainError("balanced pairs design needs at least two regressors");
    std::vector<std::string> names;
    for (std::size_t j = 1; j <= p; ++j) names.push_back("x" + std::to_string(j));
    std::vector<Form> forms;
    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = a + 1; b < p; ++b)
            forms.push_back({std::to_string(forms.size() + 1), {a, b}});
    std::vector<double> allocation(forms.size(), 1.0 / static_cast<double>(forms.size()));
    return Design(std::move(names), "y", std::move(forms), std::move(allocation));
}

Design builtin_bigfive() {
    const Design pairs = balanced_pairs_design(5);
    return Design({"O", "C", "E", "A", "N"}, "y", pairs.forms(), std::vector<double>(10, 0.1));
}

Design complete_design(std::vector<std::string> regressors, std::string outcome) {
    std::vector<std::size_t> all(regressors.size());
    std::iota(all.begin(), all.end(), 0);
    return Design(std::move(regressors), std::move(outcome), {Form{"1", all}}, {1.0});
}

Design complete_design(std::size_t p) {
    std::vector<std::string> names;
    for (std::size_t j = 1; j <= p; ++j) names.push_back("x" + std::to_string(j));
    return complete_design(std::move(names));
}

}  // namespace matrixpower
