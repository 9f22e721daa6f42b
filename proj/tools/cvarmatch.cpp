// Command-line front end: simulate, estimate, sweep, thresholds, verify.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cvarmatch/cvarmatch.hpp"

using namespace cvarmatch;

namespace {

struct EstimateOptions {
    SolverConfig solver;
    InitPolicy pi0_policy = InitPolicy::Uniform;
    bool warm_start = false;
};

// Optional JSON for `estimate`: {"solver": {...}, "pi0_policy": "...", "warm_start": bool}.
EstimateOptions load_estimate_options(const std::string& path) {
    EstimateOptions opts;
    if (path.empty()) return opts;
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config must be a JSON object");
    detail::reject_unknown_keys(root, {"solver", "pi0_policy", "warm_start"}, "");
    if (root.contains("solver")) detail::apply_solver_section(root["solver"], opts.solver, "solver");
    if (root.contains("pi0_policy")) {
        opts.pi0_policy = parse_init_policy(detail::as_string(root["pi0_policy"], "pi0_policy"));
    }
    if (root.contains("warm_start")) opts.warm_start = detail::as_bool(root["warm_start"], "warm_start");
    opts.solver.validate();
    return opts;
}

std::string join_one_based(const Permutation& p) {
    std::string out;
    for (int v : p.one_based()) {
        if (!out.empty()) out += ' ';
        out += std::to_string(v);
    }
    return out;
}

int run_simulate(int d, int T, double theta, double sigma, std::uint64_t seed, const std::string& pi_kind,
                 const std::string& out) {
    const CvarInstance inst = simulate_instance(d, T, theta, sigma, seed, parse_permutation_kind(pi_kind));
    if (out.empty()) {
        std::cout << "d=" << d << " T=" << T << " theta=" << theta << " sigma=" << sigma
                  << " seed=" << seed << "\npi_star: " << join_one_based(inst.pi_star) << "\n";
        return 0;
    }
    save_instance(inst, out);
    std::cout << "wrote instance to " << out << "\n";
    return 0;
}

int run_estimate(const std::string& algo, const std::string& relaxation, std::optional<double> sigma_opt,
                 int K, const std::string& config, const std::string& instance_dir) {
    const CvarInstance inst = load_instance(instance_dir);
    const EstimateOptions opts = load_estimate_options(config);
    const RelaxationKind kind = RelaxationKind::parse(relaxation);
    const double sigma = sigma_opt.value_or(inst.sigma);

    EstimationResult res;
    if (algo == "la") {
        res = estimate_la(inst.X, inst.X_sharp);
    } else if (algo == "noiseless") {
        res = estimate_noiseless(inst.X, inst.X_sharp);
    } else if (algo == "relaxmle") {
        res = relax_mle_round(inst.X, inst.X_sharp, inst.A_star, kind, opts.solver);
    } else if (algo == "altmin") {
        const Permutation pi0 = initial_permutation(opts.pi0_policy, inst.X, inst.X_sharp, inst.seed);
        res = alternating_minimization(inst.X, inst.X_sharp, sigma, pi0, K, kind, opts.solver,
                                       opts.warm_start);
    } else if (algo == "afirst") {
        res = estimate_a_first(inst.X, inst.X_sharp, kind, opts.solver);
    } else {
        throw ConfigError("unknown algorithm '" + algo + "'");
    }

    std::cout << "algorithm: " << res.algorithm_tag << "\n";
    std::cout << "pi_hat: " << join_one_based(res.pi_hat) << "\n";
    if (inst.pi_star.size() == res.pi_hat.size()) {
        std::cout << "recovery_fraction: " << format_real(recovery_fraction(res.pi_hat, inst.pi_star)) << "\n";
    }
    if (res.A_hat) {
        std::cout << "mse_A: " << format_real(mse_system_matrix(*res.A_hat, inst.A_star)) << "\n";
    }
    if (res.rank_deficient) std::cout << "warning: rank-deficient Gram matrix in the A-update\n";
    std::cout << "objective_final: " << format_real(res.objective_final) << "\n";
    std::cout << "iterations: " << res.iterations << "\n";
    std::cout << "wall_time_ms: " << format_real(res.wall_time_ms) << "\n";
    return 0;
}

int run_sweep(const std::string& config, const std::string& out, std::optional<int> workers) {
    ExperimentConfig cfg = parse_config(config);
    if (workers) cfg.workers = *workers;
    cfg.validate();
    const auto records = run_experiment(cfg);
    write_csv(records, out);
    int failed = 0;
    for (const auto& r : records) failed += r.status != "ok";
    std::cout << "wrote " << records.size() << " rows to " << out;
    if (failed) std::cout << " (" << failed << " failed)";
    std::cout << "\n";
    return 0;
}

int run_thresholds(int d, int T, double rho, double c, const std::string& regime,
                   std::optional<double> sigma) {
    std::printf("d=%d T=%d rho=%g c=%g\n", d, T, rho, c);
    const std::pair<const char*, Regime> rows[] = {{"exact", Regime::ExactRecovery},
                                                   {"constant", Regime::ConstantError},
                                                   {"sublinear", Regime::SublinearError}};
    const Regime wanted = regime == "all" ? Regime::ExactRecovery : parse_regime(regime);
    for (const auto& [name, r] : rows) {
        if (regime != "all" && r != wanted) continue;
        const double s2 = threshold_sigma_squared({d, T, rho, c, r});
        std::printf("%-9s sigma^2 <= %s  (sigma <= %s)\n", name, format_real(s2).c_str(),
                    format_real(std::sqrt(s2)).c_str());
    }
    if (sigma) {
        std::printf("expected mismatches bound at sigma=%g (constant 1): %s\n", *sigma,
                    format_real(expected_error_bound(d, T, rho, *sigma)).c_str());
    }
    return 0;
}

int run_verify(int trials, std::uint64_t seed) {
    const auto reports = run_verification_suite(trials, seed);
    bool ok = true;
    std::printf("%-44s %7s %8s %14s  %s\n", "check", "trials", "failures", "worst slack", "result");
    for (const auto& r : reports) {
        std::printf("%-44s %7d %8d %14.6g  %s\n", r.name.c_str(), r.trials, r.failures, r.worst_slack,
                    r.passed() ? "PASS" : "FAIL");
        ok = ok && r.passed();
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Planted matching for correlated VAR(1) time series"};
    app.require_subcommand(1);

    int d = 5, T = 50;
    double theta = 0.5, sigma = 0.0;
    std::uint64_t seed = 0;
    std::string out, pi_kind = "uniform";
    auto* sim = app.add_subcommand("simulate", "Generate one instance");
    sim->add_option("--d", d, "dimension")->required();
    sim->add_option("--T", T, "series length")->required();
    sim->add_option("--theta", theta, "spectral norm of A*");
    sim->add_option("--sigma", sigma, "noise level");
    sim->add_option("--seed", seed, "instance seed");
    sim->add_option("--pi-star", pi_kind, "uniform | identity");
    sim->add_option("--out", out, "directory for the instance dump");

    std::string algo = "la", relaxation = "birkhoff", config, instance_dir;
    std::optional<double> est_sigma;
    int K = 5;
    auto* est = app.add_subcommand("estimate", "Run one estimator on a dumped instance");
    est->add_option("--algo", algo, "la | relaxmle | altmin | afirst | noiseless");
    est->add_option("--relaxation", relaxation, "hyperplane | simplex | birkhoff | fw");
    est->add_option("--sigma", est_sigma, "noise level (default: the instance's)");
    est->add_option("--K", K, "alternating minimization rounds");
    est->add_option("--config", config, "JSON with solver settings");
    est->add_option("--instance", instance_dir, "instance directory")->required();

    std::string sweep_config, sweep_out = "results.csv";
    std::optional<int> workers;
    auto* sweep = app.add_subcommand("sweep", "Monte-Carlo grid experiment");
    sweep->add_option("--config", sweep_config, "experiment JSON")->required();
    sweep->add_option("--out", sweep_out, "output CSV");
    sweep->add_option("--workers", workers, "worker threads");

    int th_d = 1, th_T = 2;
    double rho = 0.0, c = 1.0;
    std::string regime = "all";
    std::optional<double> th_sigma;
    auto* th = app.add_subcommand("thresholds", "Noise thresholds for the LA estimator");
    th->add_option("--d", th_d, "dimension")->required();
    th->add_option("--T", th_T, "series length")->required();
    th->add_option("--rho", rho, "||A*||_2, in [0, 1)");
    th->add_option("--c", c, "exponent constant");
    th->add_option("--regime", regime, "exact | constant | sublinear | all");
    th->add_option("--sigma", th_sigma, "also evaluate the expected-mismatch bound");

    int trials = 200;
    std::uint64_t verify_seed = 1;
    auto* ver = app.add_subcommand("verify", "Randomized checks of the cycle lemmas");
    ver->add_option("--trials", trials, "random draws per check");
    ver->add_option("--seed", verify_seed, "suite seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) return run_simulate(d, T, theta, sigma, seed, pi_kind, out);
        if (*est) return run_estimate(algo, relaxation, est_sigma, K, config, instance_dir);
        if (*sweep) return run_sweep(sweep_config, sweep_out, workers);
        if (*th) return run_thresholds(th_d, th_T, rho, c, regime, th_sigma);
        if (*ver) return run_verify(trials, verify_seed);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
