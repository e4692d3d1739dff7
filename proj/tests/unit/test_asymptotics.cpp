#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "matrixpower/asymptotics.hpp"
#include "matrixpower/error.hpp"
#include "matrixpower/experiments.hpp"
#include "oracles.hpp"

using namespace matrixpower;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::string slurp(const std::string& name) {
    std::ifstream in(std::string(MATRIXPOWER_DATA_DIR) + "/" + name);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

MomentStructure bigfive_moments() {
    return build_moments(Vector(5, 0.0), bigfive_correlation(), bigfive_model());
}

MomentStructure random_moments(std::size_t p, RngStream& rng) {
    const SymMatrix s = oracle::random_spd(p + 1, rng);
    Vector mu(p + 1);
    for (auto& v : mu) v = rng.std_normal();
    return MomentStructure(mu, s);
}

// Expected sufficient statistics of each form at (mu, Sigma).
std::vector<oracle::PatternData> expected_patterns(const MomentStructure& m, const Design& d, double n) {
    std::vector<oracle::PatternData> out;
    for (std::size_t k = 0; k < d.form_count(); ++k) {
        oracle::PatternData pd;
        pd.vars = d.administered(k);
        pd.n = n * d.allocation()[k];
        const std::size_t q = pd.vars.size();
        pd.sum.resize(q);
        pd.cross = Matrix(q, q);
        for (std::size_t a = 0; a < q; ++a) {
            pd.sum[a] = pd.n * m.mu()[pd.vars[a]];
            for (std::size_t b = 0; b < q; ++b)
                pd.cross(a, b) = pd.n * (m.sigma()(pd.vars[a], pd.vars[b]) + m.mu()[pd.vars[a]] * m.mu()[pd.vars[b]]);
        }
        out.push_back(std::move(pd));
    }
    return out;
}

// Library parameter order: means (0,1..p+1) then covariances (s,t), s<=t over 1..p+1;
// the oracle uses means then vech(Sigma) in the same (s,t) order.
Matrix library_information(const MomentStructure& m, const Design& d, double n) {
    return information(m, d, n).matrix.matrix();
}

}  // namespace

TEST_CASE("Big Five standard errors and FMI") {
    const AsymptoticReport r = report(bigfive_moments(), builtin_bigfive(), 1000.0);
    const double expected[] = {0.0791, 0.0856, 0.0926, 0.0824, 0.0832};
    for (std::size_t j = 0; j < 5; ++j) CHECK_THAT(r.se[j + 1], WithinAbs(expected[j], 5e-4));
    CHECK_THAT(r.fmi[1], WithinAbs(0.736, 0.01));
    for (std::size_t j = 1; j <= 5; ++j) {
        CHECK(r.fmi[j] > 0.0);
        CHECK(r.fmi[j] < 1.0);
    }
}

TEST_CASE("complete design reproduces the OLS covariance and zero FMI") {
    const MomentStructure m = bigfive_moments();
    const AsymptoticReport r = report(m, complete_design(5), 1000.0);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(r.fmi[i] == 0.0);
        for (std::size_t j = 0; j < 6; ++j) CHECK_THAT(r.cov_beta(i, j), WithinAbs(r.cov_beta_complete(i, j), 1e-10));
    }
}

TEST_CASE("Design 1 is singular and names the uncovered pairs") {
    const Design d1 = parse_design(slurp("design1.json"));
    RngStream rng(1, 0);
    const MomentStructure m = random_moments(3, rng);
    const InformationMatrix info = information(m, d1, 300.0);
    const std::size_t i12 = info.index.index_of(1, 2);
    for (std::size_t j = 0; j < info.index.parameter_count(); ++j) {
        CHECK(info.matrix(i12, j) == 0.0);
        CHECK(info.matrix(j, i12) == 0.0);
    }
    try {
        report(m, d1, 300.0);
        FAIL("expected SingularInformation");
    } catch (const SingularInformation& e) {
        bool found = false;
        for (const auto& [a, b] : e.uncovered_pairs()) found = found || (a == "x1" && b == "x2");
        CHECK(found);
        CHECK(std::string(e.what()).find("(x1,x2)") != std::string::npos);
    }
}

TEST_CASE("information on the complete design with identity covariance") {
    const Design d = complete_design(2);
    const MomentStructure m(Vector(3, 0.0), SymMatrix::identity(3));
    const InformationMatrix info = information(m, d, 2.0);
    const VechIndex& idx = info.index;
    CHECK_THAT(info.matrix(idx.index_of(1, 1), idx.index_of(1, 1)), WithinAbs(1.0, 1e-15));
    CHECK_THAT(info.matrix(idx.index_of(1, 2), idx.index_of(1, 2)), WithinAbs(2.0, 1e-15));
    CHECK_THAT(info.matrix(idx.index_of(0, 1), idx.index_of(0, 1)), WithinAbs(2.0, 1e-15));

    const SymMatrix cov = cov_omega(information(m, d, 50.0));
    CHECK_THAT(cov(idx.index_of(0, 2), idx.index_of(0, 2)), WithinAbs(1.0 / 50.0, 1e-15));
    CHECK_THAT(cov(idx.index_of(2, 2), idx.index_of(2, 2)), WithinAbs(2.0 / 50.0, 1e-15));
}

TEST_CASE("complete design: Var of a variance estimate is 2 sigma^2 / n") {
    RngStream rng(2, 0);
    const MomentStructure m = random_moments(3, rng);
    const SymMatrix cov = cov_omega(information(m, complete_design(3), 400.0));
    const VechIndex idx(3);
    for (std::size_t s = 1; s <= 4; ++s) {
        const double v = m.sigma()(s - 1, s - 1);
        CHECK_THAT(cov(idx.index_of(s, s), idx.index_of(s, s)), WithinRel(2.0 * v * v / 400.0, 1e-10));
    }
}

TEST_CASE("information matches the duplication-matrix oracle") {
    RngStream rng(3, 0);
    for (const Design& d : {parse_design(slurp("design2.json")), builtin_bigfive(), complete_design(4)}) {
        const MomentStructure m = random_moments(d.regressor_count(), rng);
        const Matrix lib = library_information(m, d, 123.0);
        const Matrix orc = oracle::kronecker_information(m.sigma(), d, 123.0);
        REQUIRE(lib.rows() == orc.rows());
        CHECK((lib - orc).max_abs() < 1e-10 * std::max(1.0, orc.max_abs()));
    }
}

TEST_CASE("information equals the negative Hessian at the expected-data limit") {
    RngStream rng(4, 0);
    const Design d = parse_design(slurp("design2.json"));
    const MomentStructure m = random_moments(3, rng);
    const auto stats = expected_patterns(m, d, 1000.0);
    const Matrix hess = oracle::numerical_hessian(stats, m.mu(), m.sigma().matrix(), 1e-4);
    const Matrix info = library_information(m, d, 1000.0);
    const double scale = info.max_abs();
    for (std::size_t i = 0; i < info.rows(); ++i)
        for (std::size_t j = 0; j < info.cols(); ++j) CHECK_THAT(-hess(i, j), WithinAbs(info(i, j), 1e-4 * scale));
}

TEST_CASE("information has a zero cross block, is PSD and scales with n") {
    RngStream rng(5, 0);
    const Design d = builtin_bigfive();
    const MomentStructure m = random_moments(5, rng);
    const InformationMatrix a = information(m, d, 100.0);
    const InformationMatrix b = information(m, d, 200.0);
    const VechIndex& idx = a.index;
    for (std::size_t i = 0; i < idx.parameter_count(); ++i)
        for (std::size_t j = 0; j < idx.parameter_count(); ++j) {
            if (idx.is_mean(i) != idx.is_mean(j)) CHECK(a.matrix(i, j) == 0.0);
            CHECK_THAT(b.matrix(i, j), WithinAbs(2.0 * a.matrix(i, j), 1e-12 * std::abs(b.matrix(i, j)) + 1e-15));
        }
    const SymEigen e = sym_eigen(a.matrix);
    CHECK(e.values.back() >= -1e-10 * a.matrix.trace());

    const AsymptoticReport r1 = report(m, d, 100.0);
    const AsymptoticReport r2 = report(m, d, 200.0);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j)
            CHECK_THAT(r2.cov_beta(i, j), WithinAbs(0.5 * r1.cov_beta(i, j), 1e-12 * std::abs(r1.cov_beta(i, j)) + 1e-16));
}

TEST_CASE("matrix-sampled covariance dominates the complete-data covariance") {
    RngStream rng(6, 0);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t p = 2 + rep % 4;
        const MomentStructure m = random_moments(p, rng);
        const AsymptoticReport r = report(m, balanced_pairs_design(p), 500.0);
        const SymMatrix diff = r.cov_beta + r.cov_beta_complete * -1.0;
        const SymEigen e = sym_eigen(diff);
        CHECK(e.values.back() >= -1e-12 * r.cov_beta.trace());
    }
}

TEST_CASE("tau examples") {
    const Design d2 = parse_design(slurp("design2.json"));
    const MomentStructure id(Vector(4, 0.0), SymMatrix::identity(4));
    const TauMatrix t = tau(id, d2, 0);
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = 0; b < 4; ++b) {
            const double expect = (a == b && a != 0) ? 1.0 : 0.0;
            CHECK(t.tau(a, b) == expect);
        }

    RngStream rng(7, 0);
    const MomentStructure m = random_moments(3, rng);
    const TauMatrix full = tau(m, complete_design(3), 0);
    const SymMatrix inv = spd_inverse(m.sigma());
    CHECK((full.tau.matrix() - inv.matrix()).max_abs() < 1e-12);

    const MomentStructure b5 = bigfive_moments();
    const TauMatrix f1 = tau(b5, builtin_bigfive(), 0);
    const std::vector<std::size_t> vars{0, 1, 5};
    const SymMatrix sub = spd_inverse(b5.sigma().select(vars));
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b) CHECK_THAT(f1.tau(vars[a], vars[b]), WithinAbs(sub(a, b), 1e-14));
    CHECK(f1.tau(2, 2) == 0.0);
    CHECK(f1.tau(0, 3) == 0.0);
}

TEST_CASE("grad_beta matches central differences") {
    RngStream rng(8, 0);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t p = 1 + rep % 5;
        const MomentStructure m = random_moments(p, rng);
        const Matrix g = grad_beta(m);
        const Matrix fd = oracle::fd_gradient(m.mu(), m.sigma().matrix(), 1e-5);
        CHECK((g - fd).max_abs() / std::max(1.0, g.max_abs()) < 1e-6);
    }
}

TEST_CASE("raw gradient: derivative with respect to E[y] is the first column of the bordered inverse") {
    RngStream rng(9, 0);
    const MomentStructure m = random_moments(3, rng);
    const Matrix g = grad_beta_raw(m);
    const SymMatrix a_inv = spd_inverse(omega_view(m).design_block());
    const std::size_t col = VechIndex(3).index_of(0, 4);
    for (std::size_t r = 0; r < 4; ++r) CHECK_THAT(g(r, col), WithinAbs(a_inv(r, 0), 1e-14));
    const std::size_t yy = VechIndex(3).index_of(4, 4);
    for (std::size_t r = 0; r < 4; ++r) CHECK(g(r, yy) == 0.0);
}

TEST_CASE("zero slopes leave beta insensitive to the regressor variances") {
    const MomentStructure m = build_moments(Vector{0.5, -0.5}, SymMatrix{{1, 0.3}, {0.3, 2}},
                                            RegressionModel{1.0, {0.0, 0.0}, 1.0});
    const Matrix g = grad_beta(m);
    const VechIndex idx(2);
    for (std::size_t j = 1; j <= 2; ++j)
        for (std::size_t r = 0; r < 3; ++r) CHECK_THAT(g(r, idx.index_of(j, j)), WithinAbs(0.0, 1e-15));
}

TEST_CASE("loglik examples") {
    const Design d = complete_design(2);
    Dataset one({"x1", "x2", "y"}, 1);
    one.set_forms({0});
    const MomentStructure id(Vector(3, 0.0), SymMatrix::identity(3));
    CHECK_THAT(loglik(one, id, d), WithinAbs(-1.5 * std::log(2.0 * std::numbers::pi), 1e-14));

    RngStream rng(10, 0);
    const Design d2 = parse_design(slurp("design2.json"));
    const MomentStructure m = random_moments(3, rng);
    Dataset data({"x1", "x2", "x3", "y"}, 6);
    std::vector<std::size_t> forms{0, 1, 2, 0, 1, 2};
    for (std::size_t i = 0; i < 6; ++i) {
        const auto vars = d2.administered(forms[i]);
        for (std::size_t j = 0; j < 4; ++j) {
            if (std::find(vars.begin(), vars.end(), j) == vars.end())
                data.set_missing(i, j);
            else
                data(i, j) = rng.std_normal();
        }
    }
    data.set_forms(forms);
    const double ll = loglik(data, m, d2);
    CHECK_THAT(loglik(data, m), WithinAbs(ll, 1e-10));

    // Brute-force density on form 1 rows (x2, x3, y) from an explicit 3x3 inverse.
    double brute = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
        const auto vars = d2.administered(forms[i]);
        Matrix s(3, 3);
        Vector r(3);
        for (std::size_t a = 0; a < 3; ++a) {
            r[a] = data(i, vars[a]) - m.mu()[vars[a]];
            for (std::size_t b = 0; b < 3; ++b) s(a, b) = m.sigma()(vars[a], vars[b]);
        }
        const double det = s(0, 0) * (s(1, 1) * s(2, 2) - s(1, 2) * s(2, 1)) -
                           s(0, 1) * (s(1, 0) * s(2, 2) - s(1, 2) * s(2, 0)) +
                           s(0, 2) * (s(1, 0) * s(2, 1) - s(1, 1) * s(2, 0));
        const Matrix inv = oracle::gauss_jordan_inverse(s);
        brute += -1.5 * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det) - 0.5 * dot(r, inv * r);
    }
    CHECK_THAT(ll, WithinAbs(brute, 1e-10));

    // Location invariance.
    Dataset shifted = data;
    Vector mu = m.mu();
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            if (!shifted.missing(i, j)) shifted(i, j) += 3.0;
    for (auto& v : mu) v += 3.0;
    CHECK_THAT(loglik(shifted, MomentStructure(mu, m.sigma()), d2), WithinAbs(ll, 1e-9));

    Dataset wrong = data;
    wrong(0, 0) = 1.0;  // form 1 does not administer x1
    CHECK_THROWS_AS(loglik(wrong, m, d2), InvariantError);
}

TEST_CASE("slope FMIs at random Big Five draws stay inside (0, 1)") {
    RngStream rng(12, 0);
    const Design d = builtin_bigfive();
    for (int rep = 0; rep < 50; ++rep) {
        Vector beta(5);
        for (auto& b : beta) b = rng.std_normal();
        const RegressionModel model{0.0, beta, sigma2_for_r2(beta, bigfive_correlation(), 0.15)};
        const AsymptoticReport r = report(build_moments(Vector(5, 0.0), bigfive_correlation(), model), d, 1000.0);
        for (std::size_t j = 1; j <= 5; ++j) {
            CHECK(r.fmi[j] > 0.0);
            CHECK(r.fmi[j] < 1.0);
        }
    }
}
