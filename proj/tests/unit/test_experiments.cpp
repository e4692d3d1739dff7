#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "matrixpower/error.hpp"
#include "matrixpower/experiments.hpp"

using namespace matrixpower;
using Catch::Matchers::WithinAbs;

namespace {

std::string explore_csv(const ExploreConfig& c) {
    std::ostringstream s;
    write_explore_csv(s, explore(c));
    return s.str();
}

std::string simulate_csv(const SimConfig& c) {
    std::ostringstream s;
    write_simulate_csv(s, simulate(c));
    return s.str();
}

SimConfig small_sim() {
    SimConfig c;
    c.n = 200;
    c.reps = 3;
    c.m_small = 2;
    c.m_large = 4;
    c.pmm.cycles = 3;
    return c;
}

double moment(const std::vector<double>& v, double mean, int k) {
    double s = 0.0;
    for (double x : v) s += std::pow(x - mean, k);
    return s / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("quantile summaries") {
    const Quantiles q = summarize({5, 1, 4, 2, 3});
    CHECK(q.count == 5);
    CHECK(q.min == 1.0);
    CHECK(q.median == 3.0);
    CHECK(q.max == 5.0);
    CHECK_THAT(q.p25, WithinAbs(2.0, 1e-15));
    CHECK_THAT(q.p95, WithinAbs(4.8, 1e-12));
    CHECK_THAT(q.mean, WithinAbs(3.0, 1e-15));
    const Quantiles nan = summarize({std::nan(""), 2.0, std::nan("")});
    CHECK(nan.count == 1);
    CHECK(nan.median == 2.0);
    CHECK(std::isnan(summarize({}).median));
    const Quantiles r = summarize({3.0, 9.0, -1.0, 7.5, 0.0, 2.2, 8.1});
    CHECK(r.min <= r.p05);
    CHECK(r.p05 <= r.p25);
    CHECK(r.p25 <= r.median);
    CHECK(r.median <= r.p75);
    CHECK(r.p75 <= r.p90);
    CHECK(r.p90 <= r.p95);
    CHECK(r.p95 <= r.max);
}

TEST_CASE("Big Five population model") {
    const RegressionModel m = bigfive_model();
    CHECK(m.beta == Vector{0.3, 0.0, 0.0, 0.3, 0.0});
    CHECK(m.sigma2 == 1.248602);
    CHECK(m.beta0 == 0.0);
}

TEST_CASE("generated microdata has the Big Five covariance and the factor shapes") {
    RngStream s(3, 1);
    const std::size_t n = 1000000;
    const Dataset d = generate_microdata(n, s);
    REQUIRE(d.cols() == 6);
    CHECK_FALSE(d.has_missing());
    const SymMatrix target = bigfive_correlation();
    Vector mean(5, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < 5; ++j) mean[j] += d(i, j) / static_cast<double>(n);
    for (std::size_t a = 0; a < 5; ++a) {
        CHECK(std::abs(mean[a]) < 0.005);
        for (std::size_t b = 0; b <= a; ++b) {
            double c = 0.0;
            for (std::size_t i = 0; i < n; ++i) c += (d(i, a) - mean[a]) * (d(i, b) - mean[b]);
            CHECK_THAT(c / static_cast<double>(n), WithinAbs(target(a, b), 0.005));
        }
    }
    double ry = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = d(i, 5) - 0.3 * d(i, 0) - 0.3 * d(i, 3);
        ry += e * e / static_cast<double>(n);
    }
    CHECK_THAT(ry, WithinAbs(1.248602, 0.01));
}

TEST_CASE("factor recipes: shifted exponential and its two-sided mirror") {
    RngStream s(4, 0);
    const std::size_t n = 400000;
    std::vector<double> f1(n), f2(n);
    for (std::size_t i = 0; i < n; ++i) {
        f1[i] = -std::log(s.uniform01()) - 1.0;
        const double sign = s.bernoulli(0.5) ? 1.0 : -1.0;
        f2[i] = sign * (-std::log(s.uniform01()) - 1.0);
    }
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        m1 += f1[i] / static_cast<double>(n);
        m2 += f2[i] / static_cast<double>(n);
    }
    CHECK(std::abs(m1) < 0.01);
    CHECK(std::abs(m2) < 0.01);
    CHECK_THAT(moment(f1, m1, 2), WithinAbs(1.0, 0.02));
    CHECK_THAT(moment(f2, m2, 2), WithinAbs(1.0, 0.02));
    CHECK_THAT(moment(f1, m1, 3) / std::pow(moment(f1, m1, 2), 1.5), WithinAbs(2.0, 0.1));
    CHECK(std::abs(moment(f2, m2, 3)) < 0.05);
}

TEST_CASE("apply_design masks exactly per the Big Five layout") {
    RngStream gen(5, 1), mask(5, 2);
    const Dataset full = generate_microdata(1000, gen);
    const Dataset d = apply_design(full, builtin_bigfive(), mask);
    REQUIRE(d.forms().has_value());
    for (std::size_t j = 0; j < 5; ++j) CHECK(d.observed_count(j) == 400);
    CHECK(d.observed_count(5) == 1000);
    for (std::size_t a = 0; a < 5; ++a)
        for (std::size_t b = a + 1; b < 5; ++b) {
            std::size_t both = 0;
            for (std::size_t i = 0; i < d.rows(); ++i) both += !d.missing(i, a) && !d.missing(i, b);
            CHECK(both == 100);
        }
    std::vector<std::size_t> per_form(10, 0);
    for (std::size_t f : *d.forms()) ++per_form[f];
    CHECK(per_form == std::vector<std::size_t>(10, 100));
    for (std::size_t i = 0; i < d.rows(); ++i)
        for (std::size_t j = 0; j < 6; ++j)
            if (!d.missing(i, j)) CHECK(d(i, j) == full(i, j));

    RngStream m2(5, 2);
    const Dataset none = apply_design(full, complete_design(5), m2);
    CHECK_FALSE(none.has_missing());
    RngStream m3(5, 2);
    CHECK_THROWS_AS(apply_design(generate_microdata(995, gen), builtin_bigfive(), m3), AllocationError);
}

TEST_CASE("explore produces positive sample sizes and sensible orderings") {
    ExploreConfig c;
    c.draws = 40;
    const ExploreReport r = explore(c);
    REQUIRE(r.draws.size() == 40);
    CHECK(r.failures == 0);
    std::size_t no_root = 0;
    for (const auto& d : r.draws) {
        CHECK(d.n_overall > 0);
        CHECK(d.n_overall <= d.n_uniform);
        CHECK(d.n_uniform_complete <= d.n_uniform);
        CHECK(d.n_overall_complete <= d.n_overall);
        for (std::size_t j = 0; j < 5; ++j) {
            if (d.single_no_root[j]) {
                ++no_root;
                CHECK(d.n_single[j] == 0);
            } else {
                CHECK(d.n_single[j] > 0);
                CHECK(d.n_single_complete[j] <= d.n_single[j]);
            }
        }
        for (std::size_t j = 1; j <= 5; ++j) {
            CHECK(d.fmi[j] > 0.0);
            CHECK(d.fmi[j] < 1.0);
        }
        CHECK(d.fmi[0] >= 0.0);
    }
    std::size_t tallied = 0;
    for (std::size_t v : r.no_root_count) tallied += v;
    CHECK(tallied == no_root);
    for (const char* key : {"n_overall", "n_uniform", "n_single1", "fmi_b0", "fmi_slopes"}) CHECK(r.summaries.count(key) == 1);
    CHECK(r.summaries.at("n_uniform").count == 40);
}

TEST_CASE("explore is deterministic and independent of the thread count") {
    ExploreConfig c;
    c.draws = 25;
    c.seed = 77;
    const std::string a = explore_csv(c);
    CHECK(a == explore_csv(c));
    c.threads = 4;
    CHECK(a == explore_csv(c));
    c.seed = 78;
    CHECK(a != explore_csv(c));
    CHECK(a.substr(0, a.find('\n')) ==
          "draw,beta1,beta2,beta3,beta4,beta5,sigma2,n_overall,n_overall_complete,n_uniform,n_uniform_complete,"
          "n_single1,n_single1_complete,n_single2,n_single2_complete,n_single3,n_single3_complete,"
          "n_single4,n_single4_complete,n_single5,n_single5_complete,fmi_b0,fmi_b1,fmi_b2,fmi_b3,fmi_b4,fmi_b5,status");
}

TEST_CASE("simulate reports every method label and is deterministic") {
    SimConfig c = small_sim();
    const SimReport r = simulate(c);
    std::vector<std::string> labels;
    for (const auto& m : r.methods) labels.push_back(m.label);
    CHECK(labels == std::vector<std::string>{"complete", "em", "mi-mvn-2", "mi-mvn-4", "mi-pmm-2", "mi-pmm-4"});
    CHECK(r.replicates.size() == 3);
    CHECK(r.truth == Vector{0.0, 0.3, 0.0, 0.0, 0.3, 0.0});
    CHECK_THAT(r.analytic_fmi[1], WithinAbs(0.736, 0.01));
    for (const auto& m : r.methods) {
        CHECK(m.successes + m.failures == 3);
        for (const auto& cs : m.coefficients) {
            CHECK(cs.coverage >= 0.0);
            CHECK(cs.coverage <= 1.0);
            CHECK(cs.mean_ci_low <= cs.mean);
            CHECK(cs.mean <= cs.mean_ci_high);
        }
    }
    const std::string csv = simulate_csv(c);
    CHECK(csv == simulate_csv(c));
    c.threads = 3;
    CHECK(csv == simulate_csv(c));
    CHECK(csv.substr(0, csv.find('\n')) ==
          "rep,method,status,b0,b1,b2,b3,b4,b5,se0,se1,se2,se3,se4,se5,covered0,covered1,covered2,covered3,covered4,"
          "covered5,fmi0,fmi1,fmi2,fmi3,fmi4,fmi5,failure");
}

TEST_CASE("simulate M-small pooling uses a prefix of the large imputation set") {
    SimConfig c = small_sim();
    c.reps = 1;
    c.methods = {"mi-pmm"};
    c.m_small = 4;
    c.m_large = 4;
    const SimReport r = simulate(c);
    const auto& res = r.replicates[0].results;
    REQUIRE(res.size() == 2);
    CHECK(res[0].estimate == res[1].estimate);
}

TEST_CASE("mean confidence intervals shrink with the square root of the replicate count") {
    SimConfig c = small_sim();
    c.methods = {"complete"};
    c.reps = 40;
    const SimReport a = simulate(c);
    c.reps = 160;
    const SimReport b = simulate(c);
    const auto width = [](const SimReport& r) {
        const auto& cs = r.methods[0].coefficients[1];
        return (cs.mean_ci_high - cs.mean_ci_low) / cs.sd;
    };
    CHECK_THAT(width(a) / width(b), WithinAbs(2.0, 0.1));
}
