#include "matrixpower/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "matrixpower/asymptotics.hpp"
#include "matrixpower/error.hpp"
#include "matrixpower/experiments.hpp"
#include "matrixpower/json_io.hpp"
#include "matrixpower/power.hpp"
#include "matrixpower/special.hpp"

#ifndef MATRIXPOWER_VERSION
#define MATRIXPOWER_VERSION "0.0.0"
#endif

namespace matrixpower {

namespace {

namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct Common {
    std::string design_file;
    std::string model_file;
    bool bigfive = false;
    std::optional<std::uint64_t> seed;
    std::string output;
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("MATRIXPOWER_SEED")) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(env, &used);
            if (used == std::string(env).size()) return v;
        } catch (const std::exception&) {
        }
        throw UsageError(std::string("MATRIXPOWER_SEED is not an unsigned integer: ") + env);
    }
    return 1;
}

Design load_design(const Common& c) {
    if (!c.design_file.empty()) return parse_design(read_file(c.design_file));
    if (c.bigfive) return builtin_bigfive();
    throw UsageError("a design is required (--design FILE or --bigfive)");
}

ModelDocument load_model(const Common& c) {
    if (!c.model_file.empty()) return parse_model(read_file(c.model_file));
    if (c.bigfive) return bigfive_model_document();
    throw UsageError("a model is required (--model FILE or --bigfive)");
}

Json manifest(const std::string& command, Json config, std::uint64_t seed, const std::string& started,
              const std::vector<std::string>& outputs) {
    Json m;
    m["command"] = command;
    m["tool_version"] = MATRIXPOWER_VERSION;
    m["seed"] = seed;
    m["config"] = std::move(config);
    m["started_at"] = started;
    m["finished_at"] = utc_now();
    m["outputs"] = outputs;
    return m;
}

void emit(const Json& doc, const std::string& path, std::ostream& out) {
    if (path.empty()) {
        out << doc.dump(2) << '\n';
        return;
    }
    std::ofstream f(path);
    if (!f) throw UsageError("cannot write " + path);
    f << doc.dump(2) << '\n';
}

void add_common(CLI::App* cmd, Common& c, bool needs_model) {
    cmd->add_option("--design", c.design_file, "Design document (JSON)");
    if (needs_model) cmd->add_option("--model", c.model_file, "Model document (JSON)");
    cmd->add_flag("--bigfive", c.bigfive, "Use the built-in Big Five design and model for missing inputs");
    cmd->add_option("--seed", c.seed, "Random seed (default: MATRIXPOWER_SEED or 1)");
    cmd->add_option("-o,--output", c.output, "Write the JSON result here instead of stdout");
}

struct PowerFlags {
    std::string request_file;
    std::string hypothesis = "overall";
    std::size_t index = 1;
    double value = 0.0;
    double delta = 0.01;
    double alpha = 0.05;
    double power = 0.8;
    bool complete = false;
    bool oracle = false;
    double n = 0.0;
};

void add_power_flags(CLI::App* cmd, PowerFlags& f, bool with_n) {
    cmd->add_option("--request", f.request_file, "Power request document (JSON); overrides hypothesis flags");
    cmd->add_option("--hypothesis", f.hypothesis, "overall | coef | r2-uniform | r2-single")
        ->check(CLI::IsMember({"overall", "coef", "r2-uniform", "r2-single"}));
    cmd->add_option("--index", f.index, "Coefficient index for coef / r2-single (1-based; 0 = intercept for coef)");
    cmd->add_option("--value", f.value, "Null value for coef");
    cmd->add_option("--delta", f.delta, "R^2 increase for r2-uniform / r2-single");
    cmd->add_option("--alpha", f.alpha, "Test size")->capture_default_str();
    cmd->add_option("--power", f.power, "Target power")->capture_default_str();
    cmd->add_flag("--complete", f.complete, "Use the complete-data covariance instead of the matrix-sampled one");
    cmd->add_flag("--oracle", f.oracle, "Also print the closed-form z-test value (single-constraint hypotheses)");
    if (with_n) cmd->add_option("--n", f.n, "Total sample size")->required();
}

PowerRequest request_from(const PowerFlags& f) {
    PowerRequest req;
    if (!f.request_file.empty()) return parse_power_request(read_file(f.request_file));
    req.kind = parse_hypothesis_kind(f.hypothesis);
    req.index = f.index;
    req.value = f.value;
    req.delta = f.delta;
    req.alpha = f.alpha;
    req.power = f.power;
    req.covariance = f.complete ? CovarianceSource::Complete : CovarianceSource::MatrixSampled;
    return req;
}

// Effect R b - r and its per-observation variance R V R' for q = 1.
std::pair<double, double> single_constraint(const ResolvedPower& rp) {
    const auto& h = rp.spec.hypothesis;
    if (h.q() != 1) throw UsageError("--oracle needs a single-constraint hypothesis");
    Vector b{rp.spec.alternative.beta0};
    b.insert(b.end(), rp.spec.alternative.beta.begin(), rp.spec.alternative.beta.end());
    const double effect = (h.R * b)[0] - h.r[0];
    const double v = congruence(h.R, rp.cov_beta_unit)(0, 0);
    return {effect, v};
}

int cmd_validate(const Common& c, std::ostream& out) {
    const std::string started = utc_now();
    const Design d = load_design(c);
    const EstimabilityReport est = validate_estimability(d);
    Json doc;
    doc["result"] = to_json(est, d);
    doc["manifest"] = manifest("validate", {{"design", c.design_file.empty() ? "bigfive" : c.design_file}},
                               resolve_seed(c.seed), started, {});
    emit(doc, c.output, out);
    return est.singular ? 2 : 0;
}

int cmd_asymptotics(const Common& c, double n, std::ostream& out) {
    const std::string started = utc_now();
    if (!(n > 0.0)) throw UsageError("--n must be positive");
    const Design d = load_design(c);
    const ModelDocument m = load_model(c);
    if (d.regressor_count() != m.model.p())
        throw InvariantError("design and model disagree on the number of regressors");
    const MomentStructure mom = build_moments(m.mu_x, m.sigma_xx, m.model);
    const AsymptoticReport rep = report(mom, d, n);
    Json config{{"design", c.design_file.empty() ? "bigfive" : c.design_file},
                {"model", c.model_file.empty() ? "bigfive" : c.model_file},
                {"n", n}};
    Json doc;
    doc["result"] = to_json(rep);
    doc["manifest"] = manifest("asymptotics", std::move(config), resolve_seed(c.seed), started, {});
    emit(doc, c.output, out);
    return 0;
}

int cmd_power(const Common& c, const PowerFlags& f, bool sample_size_mode, std::ostream& out) {
    const std::string started = utc_now();
    const Design d = load_design(c);
    const ModelDocument m = load_model(c);
    const PowerRequest req = request_from(f);
    const ResolvedPower rp = resolve_power(req, m, d);

    Json result;
    result["alternative"] = to_json(rp.spec.alternative);
    result["q"] = rp.spec.hypothesis.q();
    if (sample_size_mode) {
        const SampleSizeResult ss = sample_size(rp.spec, rp.cov_beta_unit, d.allocation());
        result["sample_size"] = to_json(ss);
        if (f.oracle) {
            const auto [effect, v] = single_constraint(rp);
            const double z = normal_quantile(1.0 - req.alpha / 2.0) + normal_quantile(req.power);
            result["oracle_n"] = z * z * v / (effect * effect);
        }
    } else {
        if (!(f.n > 0.0)) throw UsageError("--n must be positive");
        const double lambda = f.n * noncentrality_unit(rp.spec.hypothesis, rp.spec.alternative, rp.cov_beta_unit);
        result["n"] = f.n;
        result["noncentrality"] = lambda;
        result["power"] = wald_power(rp.spec.hypothesis, rp.spec.alternative, rp.cov_beta_unit, f.n, req.alpha);
        if (f.oracle) {
            single_constraint(rp);
            const double zc = normal_quantile(1.0 - req.alpha / 2.0);
            const double s = std::sqrt(lambda);
            result["oracle_power"] = normal_cdf(s - zc) + normal_cdf(-s - zc);
        }
    }
    Json config{{"design", c.design_file.empty() ? "bigfive" : c.design_file},
                {"model", c.model_file.empty() ? "bigfive" : c.model_file},
                {"request", power_request_to_json(req)}};
    if (!sample_size_mode) config["n"] = f.n;
    Json doc;
    doc["result"] = std::move(result);
    doc["manifest"] = manifest(sample_size_mode ? "samplesize" : "power", std::move(config), resolve_seed(c.seed),
                               started, {});
    emit(doc, c.output, out);
    return 0;
}

std::string error_kind(const Error& e) {
    if (dynamic_cast<const SingularInformation*>(&e)) return "SingularInformation";
    if (dynamic_cast<const NoEffect*>(&e)) return "NoEffect";
    if (dynamic_cast<const NoRealRoot*>(&e)) return "NoRealRoot";
    if (dynamic_cast<const DegenerateConstraint*>(&e)) return "DegenerateConstraint";
    if (dynamic_cast<const AllocationError*>(&e)) return "AllocationError";
    if (dynamic_cast<const InsufficientDonors*>(&e)) return "InsufficientDonors";
    if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
    if (dynamic_cast<const SchemaError*>(&e)) return "SchemaError";
    if (dynamic_cast<const InvariantError*>(&e)) return "InvariantError";
    if (dynamic_cast<const IndexError*>(&e)) return "IndexError";
    if (dynamic_cast<const UsageError*>(&e)) return "UsageError";
    if (dynamic_cast<const NotPositiveDefinite*>(&e)) return "NotPositiveDefinite";
    if (dynamic_cast<const NoConvergence*>(&e)) return "NoConvergence";
    if (dynamic_cast<const RankDeficient*>(&e)) return "RankDeficient";
    return "Error";
}

struct RunFlags {
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::size_t threads = 1;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw UsageError("cannot write " + path.string());
    f << text;
}

int cmd_explore(ExploreConfig cfg, const RunFlags& r, std::ostream& out) {
    const std::string started = utc_now();
    cfg.seed = resolve_seed(r.seed);
    cfg.threads = r.threads;
    const ExploreReport rep = explore(cfg);
    fs::create_directories(r.out_dir);
    const fs::path csv = fs::path(r.out_dir) / "explore.csv";
    const fs::path summary = fs::path(r.out_dir) / "explore_summary.json";
    const fs::path man = fs::path(r.out_dir) / "explore_manifest.json";
    std::ostringstream s;
    write_explore_csv(s, rep);
    write_text(csv, s.str());
    const Json sj = summary_json(rep);
    write_text(summary, sj.dump(2) + "\n");
    Json config = to_json(cfg);
    config["threads"] = cfg.threads;
    const Json mj = manifest("explore", std::move(config), cfg.seed, started,
                             {csv.string(), summary.string(), man.string()});
    write_text(man, mj.dump(2) + "\n");
    out << sj.dump(2) << '\n';
    return 0;
}

int cmd_simulate(SimConfig cfg, const RunFlags& r, std::ostream& out) {
    const std::string started = utc_now();
    cfg.seed = resolve_seed(r.seed);
    cfg.threads = r.threads;
    const SimReport rep = simulate(cfg);
    fs::create_directories(r.out_dir);
    const fs::path csv = fs::path(r.out_dir) / "simulate.csv";
    const fs::path summary = fs::path(r.out_dir) / "simulate_summary.json";
    const fs::path man = fs::path(r.out_dir) / "simulate_manifest.json";
    std::ostringstream s;
    write_simulate_csv(s, rep);
    write_text(csv, s.str());
    const Json sj = summary_json(rep);
    write_text(summary, sj.dump(2) + "\n");
    Json config = to_json(cfg);
    config["threads"] = cfg.threads;
    const Json mj = manifest("simulate", std::move(config), cfg.seed, started,
                             {csv.string(), summary.string(), man.string()});
    write_text(man, mj.dump(2) + "\n");
    out << sj.dump(2) << '\n';
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Power analysis and sample-size determination for regression under multiple matrix sampling",
                 "matrixpower"};
    app.set_version_flag("--version", MATRIXPOWER_VERSION);
    app.require_subcommand(1);

    Common common;
    PowerFlags pf;
    double n_asym = 1000.0;

    auto* validate = app.add_subcommand("validate", "Check that every variable pair is observed on some form");
    validate->add_option("design", common.design_file, "Design document (JSON)");
    validate->add_flag("--bigfive", common.bigfive, "Validate the built-in Big Five design");
    validate->add_option("--seed", common.seed, "Random seed (recorded only)");
    validate->add_option("-o,--output", common.output, "Write the JSON result here instead of stdout");

    auto* asym = app.add_subcommand("asymptotics", "Asymptotic covariance, standard errors and FMI of the slopes");
    add_common(asym, common, true);
    asym->add_option("--n", n_asym, "Total sample size")->capture_default_str();

    auto* power = app.add_subcommand("power", "Power of a Wald test at a given sample size");
    add_common(power, common, true);
    add_power_flags(power, pf, true);

    auto* ssize = app.add_subcommand("samplesize", "Smallest sample size reaching the target power");
    add_common(ssize, common, true);
    add_power_flags(ssize, pf, false);

    ExploreConfig ecfg;
    RunFlags run;
    auto* expl = app.add_subcommand("explore", "Sample sizes and FMI over random regression parameters");
    expl->add_option("--draws", ecfg.draws, "Number of beta draws")->capture_default_str();
    expl->add_option("--r2", ecfg.r2, "Population R^2")->capture_default_str();
    expl->add_option("--delta", ecfg.delta, "R^2 increase to detect")->capture_default_str();
    expl->add_option("--alpha", ecfg.alpha, "Test size")->capture_default_str();
    expl->add_option("--power", ecfg.power, "Target power")->capture_default_str();
    expl->add_option("--n-reference", ecfg.n_reference, "Sample size label for FMI")->capture_default_str();

    SimConfig scfg;
    auto* sim = app.add_subcommand("simulate", "Monte Carlo comparison of complete-data, EM and MI estimators");
    sim->add_option("--n", scfg.n, "Rows per replicate")->capture_default_str();
    sim->add_option("--reps", scfg.reps, "Replicates")->capture_default_str();
    sim->add_option("--m-small", scfg.m_small, "Imputations in the small pool")->capture_default_str();
    sim->add_option("--m-large", scfg.m_large, "Imputations in the large pool")->capture_default_str();
    sim->add_option("--methods", scfg.methods, "Subset of complete, em, mi-mvn, mi-pmm")
        ->check(CLI::IsMember({"complete", "em", "mi-mvn", "mi-pmm"}))
        ->delimiter(',');
    sim->add_option("--k-donors", scfg.pmm.k_donors, "PMM donor pool size")->capture_default_str();
    sim->add_option("--cycles", scfg.pmm.cycles, "PMM chained-equation cycles")->capture_default_str();

    for (auto* cmd : {expl, sim}) {
        cmd->add_option("--out-dir", run.out_dir, "Directory for CSV, summary and manifest")->capture_default_str();
        cmd->add_option("--seed", run.seed, "Random seed (default: MATRIXPOWER_SEED or 1)");
        cmd->add_option("--threads", run.threads, "Worker threads; results do not depend on it")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*validate) {
            if (common.design_file.empty() && !common.bigfive) throw UsageError("validate needs a design file or --bigfive");
            return cmd_validate(common, out);
        }
        if (*asym) return cmd_asymptotics(common, n_asym, out);
        if (*power) return cmd_power(common, pf, false, out);
        if (*ssize) return cmd_power(common, pf, true, out);
        if (*expl) return cmd_explore(ecfg, run, out);
        if (*sim) return cmd_simulate(scfg, run, out);
    } catch (const Error& e) {
        err << "error: " << error_kind(e) << ": " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 3;
    }
    return 1;
}

}  // namespace matrixpower
