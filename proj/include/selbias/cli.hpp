#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "selbias/bias.hpp"
#include "selbias/envelope.hpp"
#include "selbias/errors.hpp"
#include "selbias/model.hpp"
#include "selbias/simulate.hpp"
#include "selbias/truncmvn.hpp"
#include "selbias/validate.hpp"

namespace selbias::cli {

namespace detail {

// --gamma/--eta accept either the plain value or the squared form (--gamma2,
// --eta2); exactly one of each pair. The squared forms are converted at the
// boundary, so the library only ever sees plain coefficients.
struct ModelFlags {
    int arms = 0;
    std::optional<double> gamma, gamma2, eta, eta2;
    double sigma = 0.0;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--p", arms, "number of treatment arms")->required();
        auto* g = cmd->add_option("--gamma", gamma, "mean-structure coefficient in [0,1]");
        auto* g2 = cmd->add_option("--gamma2", gamma2, "squared form of --gamma");
        auto* e = cmd->add_option("--eta", eta, "noise-structure coefficient in [0,1]");
        auto* e2 = cmd->add_option("--eta2", eta2, "squared form of --eta");
        g->excludes(g2);
        e->excludes(e2);
        cmd->add_option("--sigma", sigma, "sampling noise scale, > 0")->required();
    }

    ModelParams to_params() const {
        if (!gamma && !gamma2)
            throw CLI::RequiredError("--gamma or --gamma2");
        if (!eta && !eta2)
            throw CLI::RequiredError("--eta or --eta2");
        auto resolve = [](std::optional<double> plain, std::optional<double> squared,
                          const char* flag) {
            if (plain) return *plain;
            if (*squared < 0.0)
                throw CLI::ValidationError(std::string(flag) + ": squared value must be >= 0");
            return std::sqrt(*squared);
        };
        return ModelParams(arms, resolve(gamma, gamma2, "--gamma2"),
                           resolve(eta, eta2, "--eta2"), sigma);
    }
};

inline std::vector<double> parse_double_list(const std::string& text, const char* flag) {
    std::vector<double> values;
    std::stringstream stream(text);
    std::string token;
    while (std::getline(stream, token, ',')) {
        try {
            values.push_back(std::stod(token));
        } catch (const std::exception&) {
            throw CLI::ValidationError(std::string(flag) + ": cannot parse '" + token + "'");
        }
    }
    if (values.empty()) throw CLI::ValidationError(std::string(flag) + ": empty list");
    return values;
}

inline std::vector<int> parse_int_list(const std::string& text, const char* flag) {
    std::vector<int> values;
    for (double v : parse_double_list(text, flag)) {
        if (v != std::floor(v))
            throw CLI::ValidationError(std::string(flag) + ": expected integers");
        values.push_back(static_cast<int>(v));
    }
    return values;
}

// start:stop:step, inclusive of stop when it lands on the lattice (within
// half a step's rounding slack).
inline std::vector<double> parse_grid(const std::string& text, const char* flag) {
    std::vector<std::string> parts;
    std::stringstream stream(text);
    std::string token;
    while (std::getline(stream, token, ':')) parts.push_back(token);
    if (parts.size() != 3)
        throw CLI::ValidationError(std::string(flag) + ": expected start:stop:step");
    double start, stop, step;
    try {
        start = std::stod(parts[0]);
        stop = std::stod(parts[1]);
        step = std::stod(parts[2]);
    } catch (const std::exception&) {
        throw CLI::ValidationError(std::string(flag) + ": cannot parse '" + text + "'");
    }
    if (!(step > 0.0)) throw CLI::ValidationError(std::string(flag) + ": step must be > 0");
    std::vector<double> values;
    for (int i = 0;; ++i) {
        const double v = start + i * step;
        if (v > stop + 1e-9 * step) break;
        values.push_back(v);
    }
    return values;
}

inline Eigen::VectorXd to_vector(const std::vector<double>& values) {
    return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                             static_cast<Eigen::Index>(values.size()));
}

inline Eigen::MatrixXd read_csv_matrix(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw invalid_params("moments: cannot open matrix file '" + path + "'");
    std::vector<std::vector<double>> data;
    std::string line;
    while (std::getline(file, line)) {
        if (line.empty()) continue;
        data.push_back(parse_double_list(line, "--omega-file"));
        if (data.back().size() != data.front().size())
            throw invalid_params("moments: ragged rows in matrix file '" + path + "'");
    }
    if (data.empty()) throw invalid_params("moments: empty matrix file '" + path + "'");
    Eigen::MatrixXd matrix(data.size(), data.front().size());
    for (std::size_t i = 0; i < data.size(); ++i)
        for (std::size_t j = 0; j < data[i].size(); ++j)
            matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[i][j];
    return matrix;
}

inline nlohmann::ordered_json echo_params(const ModelParams& params) {
    nlohmann::ordered_json echo;
    echo["p"] = params.arms();
    echo["gamma"] = params.gamma();
    echo["eta"] = params.eta();
    echo["sigma"] = params.sigma();
    return echo;
}

inline void append_report_row(OutputEnvelope& envelope, const BiasReport& report,
                              std::optional<std::int64_t> case_index = {}) {
    std::vector<Cell> row;
    if (case_index) row.emplace_back(*case_index);
    row.emplace_back(static_cast<std::int64_t>(report.params.arms()));
    row.emplace_back(report.params.gamma());
    row.emplace_back(report.params.eta());
    row.emplace_back(report.params.sigma());
    row.emplace_back(report.xp);
    row.emplace_back(report.naive_mean);
    row.emplace_back(report.delta);
    row.emplace_back(report.lambda);
    row.emplace_back(report.alpha);
    row.emplace_back(report.marginal_density_value);
    envelope.rows.push_back(std::move(row));
}

inline const std::vector<std::string> report_columns = {
    "p",     "gamma", "eta",    "sigma", "xp",
    "naive", "delta", "lambda", "alpha", "marginal_density"};

}  // namespace detail

/// Parses argv-style arguments (program name excluded), executes one
/// subcommand, and writes a serialized OutputEnvelope to `out`. Returns 0 on
/// success, 2 on usage errors, 3 on numeric or domain errors (message on
/// `err`).
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Selection-adjusted posterior means for treatment selection"};
    app.set_help_all_flag("--help-all");
    app.require_subcommand(1);

    std::string format = "json";
    const auto add_format = [&format](CLI::App* cmd) {
        cmd->add_option("--format", format, "output format")
            ->check(CLI::IsMember({"csv", "json"}))
            ->capture_default_str();
    };
    double tol = 1e-10;
    const auto add_tol = [&tol](CLI::App* cmd) {
        cmd->add_option("--tol", tol, "quadrature absolute tolerance")->capture_default_str();
    };

    // bias
    auto* bias_cmd = app.add_subcommand(
        "bias", "selection bias and post-selection mean for one observed maximum");
    detail::ModelFlags bias_flags;
    bias_flags.add_to(bias_cmd);
    double bias_xp = 0.0;
    bias_cmd->add_option("--xp", bias_xp, "value of the largest observation")->required();
    add_format(bias_cmd);
    add_tol(bias_cmd);

    // table
    auto* table_cmd =
        app.add_subcommand("table", "grid of bias reports over arms, thresholds, and cases");
    std::string table_p = "3,5,10", table_xp = "0:6:1";
    double table_sigma = 1.0;
    std::vector<std::string> table_cases;
    table_cmd->add_option("--p", table_p, "comma-separated arm counts")->capture_default_str();
    table_cmd->add_option("--xp", table_xp, "grid start:stop:step")->capture_default_str();
    table_cmd->add_option("--sigma", table_sigma, "sampling noise scale")->capture_default_str();
    table_cmd->add_option("--case", table_cases, "gamma^2,eta^2 pair (repeatable)")->required();
    add_format(table_cmd);
    add_tol(table_cmd);

    // exceed
    auto* exceed_cmd =
        app.add_subcommand("exceed", "probability that the largest observation exceeds x");
    detail::ModelFlags exceed_flags;
    exceed_flags.add_to(exceed_cmd);
    double exceed_x = 0.0;
    exceed_cmd->add_option("--x", exceed_x, "threshold")->required();
    add_format(exceed_cmd);
    add_tol(exceed_cmd);

    // simulate
    auto* sim_cmd = app.add_subcommand(
        "simulate", "sample the hierarchical model and report winner pairs or binned summaries");
    detail::ModelFlags sim_flags;
    sim_flags.add_to(sim_cmd);
    std::int64_t sim_reps = 5000;
    std::uint64_t sim_seed = 0;
    double sim_bin_width = 0.25;
    bool sim_with_regression = false, sim_summary = false;
    sim_cmd->add_option("--reps", sim_reps, "number of replications")->capture_default_str();
    sim_cmd->add_option("--seed", sim_seed, "RNG seed")->capture_default_str();
    sim_cmd->add_option("--bin-width", sim_bin_width, "bin width for --summary")
        ->capture_default_str();
    sim_cmd->add_flag("--with-regression", sim_with_regression,
                      "fit least squares to the winner pairs");
    sim_cmd->add_flag("--summary", sim_summary, "emit binned conditional means instead of pairs");
    add_format(sim_cmd);

    // moments
    auto* moments_cmd = app.add_subcommand(
        "moments", "normalizing constant, bound densities, and means of a truncated Gaussian");
    std::string moments_theta, moments_upper, moments_omega, moments_omega_file;
    std::uint64_t moments_seed = 0;
    auto* omega_opt = moments_cmd->add_option("--omega", moments_omega,
                                              "equicorrelated covariance as indep,shared");
    auto* omega_file_opt = moments_cmd->add_option("--omega-file", moments_omega_file,
                                                   "CSV file holding the full covariance matrix");
    omega_opt->excludes(omega_file_opt);
    moments_cmd->add_option("--theta", moments_theta, "comma-separated mean vector")->required();
    moments_cmd->add_option("--upper", moments_upper, "comma-separated upper truncation bounds")
        ->required();
    moments_cmd->add_option("--seed", moments_seed, "RNG seed for the QMC path")
        ->capture_default_str();
    add_format(moments_cmd);
    add_tol(moments_cmd);

    // validate
    auto* validate_cmd =
        app.add_subcommand("validate", "run the oracle suite; exit 0 only if every check passes");
    std::uint64_t validate_seed = 1;
    std::string validate_level = "quick";
    validate_cmd->add_option("--seed", validate_seed, "RNG seed")->capture_default_str();
    validate_cmd->add_option("--level", validate_level, "validation level")
        ->check(CLI::IsMember({"quick", "full"}))
        ->capture_default_str();
    add_format(validate_cmd);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& parse_error) {
        err << "selbias: " << parse_error.what() << "\n";
        return 2;
    }

    const auto started = std::chrono::steady_clock::now();
    OutputEnvelope envelope;
    int validation_failures = 0;
    try {
        QuadratureConfig quad;
        quad.abs_tol = tol;

        if (*bias_cmd) {
            const ModelParams params = bias_flags.to_params();
            const BiasReport report = selection_bias(params, bias_xp, quad);
            envelope.command = "bias";
            envelope.params = detail::echo_params(params);
            envelope.params["xp"] = bias_xp;
            envelope.columns = detail::report_columns;
            detail::append_report_row(envelope, report);
        } else if (*table_cmd) {
            std::vector<std::pair<double, double>> cases;
            for (const std::string& text : table_cases) {
                const std::vector<double> pair = detail::parse_double_list(text, "--case");
                if (pair.size() != 2)
                    throw CLI::ValidationError("--case: expected gamma^2,eta^2");
                if (pair[0] < 0.0 || pair[1] < 0.0)
                    throw CLI::ValidationError("--case: squared values must be >= 0");
                cases.emplace_back(std::sqrt(pair[0]), std::sqrt(pair[1]));
            }
            const std::vector<int> arms_list = detail::parse_int_list(table_p, "--p");
            const std::vector<double> xp_list = detail::parse_grid(table_xp, "--xp");
            const std::vector<BiasReport> rows =
                bias_table(table_sigma, arms_list, xp_list, cases, quad);

            envelope.command = "table";
            envelope.params["sigma"] = table_sigma;
            envelope.params["p"] = table_p;
            envelope.params["xp"] = table_xp;
            envelope.params["cases"] = table_cases;
            envelope.columns = detail::report_columns;
            envelope.columns.insert(envelope.columns.begin(), "case");
            const std::size_t per_case = arms_list.size() * xp_list.size();
            for (std::size_t i = 0; i < rows.size(); ++i)
                detail::append_report_row(envelope, rows[i],
                                          static_cast<std::int64_t>(1 + i / per_case));
        } else if (*exceed_cmd) {
            const ModelParams params = exceed_flags.to_params();
            const double probability = max_exceedance_probability(params, exceed_x, quad);
            envelope.command = "exceed";
            envelope.params = detail::echo_params(params);
            envelope.params["x"] = exceed_x;
            envelope.columns = {"p", "gamma", "eta", "sigma", "x", "prob_max_exceeds"};
            envelope.rows.push_back({static_cast<std::int64_t>(params.arms()), params.gamma(),
                                     params.eta(), params.sigma(), exceed_x, probability});
        } else if (*sim_cmd) {
            const ModelParams params = sim_flags.to_params();
            SimConfig cfg{params, sim_reps, sim_seed, sim_bin_width};
            const std::vector<WinnerPair> pairs = winner_pairs(cfg);
            envelope.command = "simulate";
            envelope.params = detail::echo_params(params);
            envelope.params["reps"] = sim_reps;
            envelope.params["seed"] = sim_seed;
            envelope.params["bin_width"] = sim_bin_width;
            envelope.diagnostics["seed"] = sim_seed;

            std::optional<RegressionLine> line;
            if (sim_with_regression) {
                line = regression_fit(pairs);
                envelope.diagnostics["regression"] = {{"intercept", line->intercept},
                                                      {"slope", line->slope}};
            }
            if (sim_summary) {
                QuadratureConfig summary_quad;  // default tolerance for the exact curve
                envelope.columns = {"bin_center", "count", "mu_mean", "mu_std_error",
                                    "exact_lambda"};
                if (line) envelope.columns.push_back("regression_prediction");
                for (const BinSummary& bin : binned_conditional_mean(pairs, sim_bin_width)) {
                    std::vector<Cell> row{bin.center, bin.count, bin.mean, bin.std_error,
                                          post_selection_mean(params, bin.center, summary_quad)};
                    if (line) row.emplace_back(line->predict(bin.center));
                    envelope.rows.push_back(std::move(row));
                }
            } else {
                envelope.columns = {"rep", "winner_index", "x_star", "mu_star"};
                for (std::size_t i = 0; i < pairs.size(); ++i)
                    envelope.rows.push_back({static_cast<std::int64_t>(i),
                                             static_cast<std::int64_t>(pairs[i].winner_index),
                                             pairs[i].x_star, pairs[i].mu_star});
            }
        } else if (*moments_cmd) {
            const Eigen::VectorXd theta =
                detail::to_vector(detail::parse_double_list(moments_theta, "--theta"));
            const Eigen::VectorXd upper =
                detail::to_vector(detail::parse_double_list(moments_upper, "--upper"));
            std::optional<GaussianSpec> base;
            if (!moments_omega.empty()) {
                const std::vector<double> cd =
                    detail::parse_double_list(moments_omega, "--omega");
                if (cd.size() != 2)
                    throw CLI::ValidationError("--omega: expected indep,shared");
                base = GaussianSpec::equicorrelated(theta, cd[0], cd[1]);
            } else if (!moments_omega_file.empty()) {
                base = GaussianSpec(theta, detail::read_csv_matrix(moments_omega_file));
            } else {
                throw CLI::RequiredError("--omega or --omega-file");
            }
            QmcConfig qmc;
            qmc.seed = moments_seed;
            TruncatedAboveSpec spec(std::move(*base), upper, quad, qmc);
            const Eigen::VectorXd means = truncated_mean(spec);

            envelope.command = "moments";
            envelope.params["theta"] = moments_theta;
            envelope.params["omega"] =
                moments_omega.empty() ? moments_omega_file : moments_omega;
            envelope.params["upper"] = moments_upper;
            envelope.diagnostics["seed"] = moments_seed;
            envelope.columns = {"k",     "theta",           "upper",
                                "alpha", "density_at_bound", "truncated_mean"};
            for (Eigen::Index k = 0; k < spec.dim(); ++k)
                envelope.rows.push_back(
                    {static_cast<std::int64_t>(k), theta[k], upper[k], spec.alpha(),
                     marginal_density(spec, k, spec.centered_bound(k)), means[k]});
        } else if (*validate_cmd) {
            const ValidationLevel level =
                validate_level == "full" ? ValidationLevel::full : ValidationLevel::quick;
            envelope.command = "validate";
            envelope.params["seed"] = validate_seed;
            envelope.params["level"] = validate_level;
            envelope.diagnostics["seed"] = validate_seed;
            envelope.columns = {"check", "passed", "detail"};
            for (const CheckResult& check : run_validation(validate_seed, level)) {
                if (!check.passed) ++validation_failures;
                envelope.rows.push_back({check.name,
                                         std::string(check.passed ? "pass" : "fail"),
                                         check.detail});
            }
        }
    } catch (const CLI::ParseError& parse_error) {
        err << "selbias: " << parse_error.what() << "\n";
        return 2;
    } catch (const std::exception& failure) {
        err << "selbias: " << failure.what() << "\n";
        return 3;
    }

    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
    envelope.diagnostics["abs_tol"] = tol;
    envelope.diagnostics["runtime_seconds"] = elapsed.count();
    if (format == "csv")
        envelope.write_csv(out);
    else
        envelope.write_json(out);

    if (validation_failures > 0) {
        err << "selbias: validate: " << validation_failures << " check(s) failed\n";
        return 3;
    }
    return 0;
}

}  // namespace selbias::cli
