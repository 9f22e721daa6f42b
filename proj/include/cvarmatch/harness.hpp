#pragma once

// Monte-Carlo sweeps over (theta, sigma) grids, metrics and CSV output.
// Output rows depend only on the configuration: every instance seed is derived
// from (base_seed, theta index, sigma index, run index), and rows are sorted
// canonically by (seed, algorithm) before writing.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cvarmatch/errors.hpp"
#include "cvarmatch/estimators.hpp"
#include "cvarmatch/model.hpp"
#include "cvarmatch/relaxations.hpp"
#include "cvarmatch/rng.hpp"

namespace cvarmatch {

/// ⟨Pi_hat, Pi*⟩_F / T.
inline double recovery_fraction(const Permutation& pi_hat, const Permutation& pi_star) {
    if (pi_hat.size() != pi_star.size()) throw DimensionError("recovery_fraction: size mismatch");
    int agree = 0;
    for (int t = 0; t < pi_hat.size(); ++t) agree += pi_hat(t) == pi_star(t);
    return static_cast<double>(agree) / pi_hat.size();
}

/// ||A_hat - A*||_F^2 / d.
inline double mse_system_matrix(const SystemMatrix& a_hat, const SystemMatrix& a_star) {
    if (a_hat.dim() != a_star.dim()) throw DimensionError("mse_system_matrix: dimension mismatch");
    return (a_hat.matrix() - a_star.matrix()).squaredNorm() / a_hat.dim();
}

enum class APolicy { Known, AltMin, AFirst };

inline APolicy parse_a_policy(const std::string& s) {
    if (s == "known") return APolicy::Known;
    if (s == "altmin") return APolicy::AltMin;
    if (s == "a_first") return APolicy::AFirst;
    throw ConfigError("unknown a_policy '" + s + "' (expected known | altmin | a_first)");
}

enum class AlgorithmFamily { LA, Noiseless, RelaxMLE, AltMin, AFirst };

/// One entry of the `algorithms` list: la | noiseless | relaxmle | altmin | afirst,
/// the last three optionally suffixed with -hyperplane | -simplex | -birkhoff | -fw.
struct AlgorithmSpec {
    AlgorithmFamily family = AlgorithmFamily::LA;
    std::optional<RelaxationKind> relaxation;

    static AlgorithmSpec parse(const std::string& name) {
        const auto dash = name.find('-');
        const std::string head = name.substr(0, dash);
        AlgorithmSpec spec;
        if (head == "la") spec.family = AlgorithmFamily::LA;
        else if (head == "noiseless") spec.family = AlgorithmFamily::Noiseless;
        else if (head == "relaxmle") spec.family = AlgorithmFamily::RelaxMLE;
        else if (head == "altmin") spec.family = AlgorithmFamily::AltMin;
        else if (head == "afirst") spec.family = AlgorithmFamily::AFirst;
        else throw ConfigError("unknown algorithm '" + name + "'");
        if (dash != std::string::npos) {
            if (spec.family == AlgorithmFamily::LA || spec.family == AlgorithmFamily::Noiseless) {
                throw ConfigError("algorithm '" + head + "' takes no relaxation suffix");
            }
            spec.relaxation = RelaxationKind::parse(name.substr(dash + 1));
        }
        return spec;
    }

    bool uses_relaxation() const {
        return family != AlgorithmFamily::LA && family != AlgorithmFamily::Noiseless;
    }
};

struct ExperimentConfig {
    int d = 0;
    int T = 0;
    std::vector<double> theta_grid{0.5};
    std::vector<double> sigma_grid;
    std::vector<std::string> algorithms;
    int mc_runs = 30;
    std::uint64_t base_seed = 0;
    int K = 5;
    RelaxationKind relaxation = RelaxationKind::birkhoff();
    SolverConfig solver;
    InitPolicy pi0_policy = InitPolicy::Uniform;
    APolicy a_policy = APolicy::Known;
    PermutationKind pi_star = PermutationKind::Uniform;
    bool warm_start = false;
    /// When false the runtime column is left empty so reruns are byte-identical.
    bool record_runtime = true;
    int workers = 1;

    void validate() const {
        if (d < 1) throw ConfigError("d must be positive");
        if (T < 1) throw ConfigError("T must be positive");
        if (theta_grid.empty()) throw ConfigError("theta_grid must be nonempty");
        if (sigma_grid.empty()) throw ConfigError("sigma_grid must be nonempty");
        if (algorithms.empty()) throw ConfigError("algorithms must be nonempty");
        for (double v : theta_grid) {
            if (!(v >= 0.0)) throw ConfigError("theta_grid entries must be nonnegative");
        }
        for (double v : sigma_grid) {
            if (!(v >= 0.0)) throw ConfigError("sigma_grid entries must be nonnegative");
        }
        for (const auto& a : algorithms) AlgorithmSpec::parse(a);
        if (mc_runs < 1) throw ConfigError("mc_runs must be at least 1");
        if (K < 0) throw ConfigError("K must be nonnegative");
        if (workers < 1) throw ConfigError("workers must be at least 1");
        solver.validate();
    }
};

namespace detail {

using nlohmann::json;

inline std::string key_path(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                                const std::string& prefix) {
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key())) {
            throw ConfigError("unknown key '" + key_path(prefix, item.key()) + "'");
        }
    }
}

inline const json& require_key(const json& obj, const std::string& key, const std::string& prefix) {
    if (!obj.contains(key)) throw ConfigError("missing required key '" + key_path(prefix, key) + "'");
    return obj.at(key);
}

inline int as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ConfigError("key '" + path + "' must be an integer");
    return v.get<int>();
}

inline double as_real(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError("key '" + path + "' must be a number");
    return v.get<double>();
}

inline bool as_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) throw ConfigError("key '" + path + "' must be a boolean");
    return v.get<bool>();
}

inline std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError("key '" + path + "' must be a string");
    return v.get<std::string>();
}

inline std::vector<double> as_real_list(const json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigError("key '" + path + "' must be a list of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(as_real(v[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
}

inline std::vector<std::string> as_string_list(const json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigError("key '" + path + "' must be a list of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(as_string(v[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
}

/// Applies any keys present in a `solver` object on top of `cfg`.
inline void apply_solver_section(const json& obj, SolverConfig& cfg, const std::string& prefix) {
    if (!obj.is_object()) throw ConfigError("key '" + prefix + "' must be an object");
    reject_unknown_keys(obj, {"gamma", "max_iters", "rel_obj_tol", "dykstra_max_iters", "dykstra_tol"},
                        prefix);
    if (obj.contains("gamma")) cfg.gamma = as_real(obj["gamma"], prefix + ".gamma");
    if (obj.contains("max_iters")) cfg.max_iters = as_int(obj["max_iters"], prefix + ".max_iters");
    if (obj.contains("rel_obj_tol")) {
        cfg.rel_obj_tol = as_real(obj["rel_obj_tol"], prefix + ".rel_obj_tol");
    }
    if (obj.contains("dykstra_max_iters")) {
        cfg.dykstra_max_iters = as_int(obj["dykstra_max_iters"], prefix + ".dykstra_max_iters");
    }
    if (obj.contains("dykstra_tol")) {
        cfg.dykstra_tol = as_real(obj["dykstra_tol"], prefix + ".dykstra_tol");
    }
}

template <typename F>
auto with_path(const std::string& path, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError("key '" + path + "': " + e.what());
    }
}

}  // namespace detail

/// Builds a configuration from JSON text. Required keys: d, T, sigma_grid,
/// algorithms. Unknown keys and type mismatches raise ConfigError naming the key path.
inline ExperimentConfig parse_config_text(const std::string& text) {
    using detail::json;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config must be a JSON object");
    detail::reject_unknown_keys(root,
                                {"d", "T", "theta_grid", "sigma_grid", "algorithms", "mc_runs",
                                 "base_seed", "K", "relaxation", "solver", "pi0_policy", "a_policy",
                                 "pi_star", "warm_start", "record_runtime", "workers"},
                                "");
    ExperimentConfig cfg;
    cfg.d = detail::as_int(detail::require_key(root, "d", ""), "d");
    cfg.T = detail::as_int(detail::require_key(root, "T", ""), "T");
    cfg.sigma_grid = detail::as_real_list(detail::require_key(root, "sigma_grid", ""), "sigma_grid");
    cfg.algorithms = detail::as_string_list(detail::require_key(root, "algorithms", ""), "algorithms");
    if (root.contains("theta_grid")) cfg.theta_grid = detail::as_real_list(root["theta_grid"], "theta_grid");
    if (root.contains("mc_runs")) cfg.mc_runs = detail::as_int(root["mc_runs"], "mc_runs");
    if (root.contains("base_seed")) {
        const json& v = root["base_seed"];
        if (!v.is_number_unsigned()) throw ConfigError("key 'base_seed' must be a nonnegative integer");
        cfg.base_seed = v.get<std::uint64_t>();
    }
    if (root.contains("K")) cfg.K = detail::as_int(root["K"], "K");
    if (root.contains("relaxation")) {
        const std::string name = detail::as_string(root["relaxation"], "relaxation");
        cfg.relaxation = detail::with_path("relaxation", [&] { return RelaxationKind::parse(name); });
    }
    if (root.contains("solver")) detail::apply_solver_section(root["solver"], cfg.solver, "solver");
    if (root.contains("pi0_policy")) {
        const std::string name = detail::as_string(root["pi0_policy"], "pi0_policy");
        cfg.pi0_policy = detail::with_path("pi0_policy", [&] { return parse_init_policy(name); });
    }
    if (root.contains("a_policy")) {
        const std::string name = detail::as_string(root["a_policy"], "a_policy");
        cfg.a_policy = detail::with_path("a_policy", [&] { return parse_a_policy(name); });
    }
    if (root.contains("pi_star")) {
        const std::string name = detail::as_string(root["pi_star"], "pi_star");
        cfg.pi_star = detail::with_path("pi_star", [&] { return parse_permutation_kind(name); });
    }
    if (root.contains("warm_start")) cfg.warm_start = detail::as_bool(root["warm_start"], "warm_start");
    if (root.contains("record_runtime")) {
        cfg.record_runtime = detail::as_bool(root["record_runtime"], "record_runtime");
    }
    if (root.contains("workers")) cfg.workers = detail::as_int(root["workers"], "workers");
    cfg.validate();
    return cfg;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline ExperimentConfig parse_config(const std::string& path) {
    return parse_config_text(read_text_file(path));
}

struct ExperimentRecord {
    std::uint64_t seed = 0;
    int d = 0;
    int T = 0;
    double theta = 0.0;
    double sigma = 0.0;
    std::string algorithm;
    /// Relaxation name, empty for LA and Noiseless.
    std::string relaxation;
    std::optional<double> recovery_fraction;
    std::optional<double> mse_A;
    std::optional<int> iterations;
    std::optional<double> objective_final;
    std::optional<double> runtime_ms;
    std::string status = "ok";
};

/// Runs one configured algorithm on one instance.
inline EstimationResult run_algorithm(const AlgorithmSpec& spec, const CvarInstance& inst,
                                      const ExperimentConfig& cfg) {
    const RelaxationKind kind = spec.relaxation.value_or(cfg.relaxation);
    const auto altmin = [&] {
        const Permutation pi0 = initial_permutation(cfg.pi0_policy, inst.X, inst.X_sharp, inst.seed);
        return alternating_minimization(inst.X, inst.X_sharp, inst.sigma, pi0, cfg.K, kind,
                                        cfg.solver, cfg.warm_start);
    };
    switch (spec.family) {
        case AlgorithmFamily::LA: return estimate_la(inst.X, inst.X_sharp);
        case AlgorithmFamily::Noiseless: return estimate_noiseless(inst.X, inst.X_sharp);
        case AlgorithmFamily::RelaxMLE:
            switch (cfg.a_policy) {
                case APolicy::Known:
                    return relax_mle_round(inst.X, inst.X_sharp, inst.A_star, kind, cfg.solver);
                case APolicy::AltMin: return altmin();
                case APolicy::AFirst: return estimate_a_first(inst.X, inst.X_sharp, kind, cfg.solver);
            }
            break;
        case AlgorithmFamily::AltMin: return altmin();
        case AlgorithmFamily::AFirst: return estimate_a_first(inst.X, inst.X_sharp, kind, cfg.solver);
    }
    throw ConfigError("run_algorithm: unhandled algorithm");
}

/// Algorithm column value, e.g. LA, RelaxMLE-Birkhoff, AltMin-Simplex, A-First-FW.
inline std::string spec_tag(const AlgorithmSpec& spec, const RelaxationKind& kind, APolicy a_policy) {
    switch (spec.family) {
        case AlgorithmFamily::LA: return "LA";
        case AlgorithmFamily::Noiseless: return "Noiseless";
        case AlgorithmFamily::RelaxMLE:
            if (a_policy == APolicy::AltMin) return "AltMin-" + kind.tag();
            if (a_policy == APolicy::AFirst) return "A-First-" + kind.tag();
            return "RelaxMLE-" + kind.tag();
        case AlgorithmFamily::AltMin: return "AltMin-" + kind.tag();
        case AlgorithmFamily::AFirst: return "A-First-" + kind.tag();
    }
    return "?";
}

inline std::uint64_t instance_seed(std::uint64_t base_seed, std::size_t theta_index,
                                   std::size_t sigma_index, int run) {
    return derive_seed({base_seed, static_cast<std::uint64_t>(theta_index),
                        static_cast<std::uint64_t>(sigma_index), static_cast<std::uint64_t>(run)});
}

inline bool record_less(const ExperimentRecord& a, const ExperimentRecord& b) {
    if (a.seed != b.seed) return a.seed < b.seed;
    return a.algorithm < b.algorithm;
}

/// One row per (grid cell, run, algorithm); all algorithms of a run share one
/// instance. Estimator failures become rows with status "error: ..." and empty
/// metrics. Rows come back in canonical order whatever the worker count.
inline std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<AlgorithmSpec> specs;
    for (const auto& name : cfg.algorithms) specs.push_back(AlgorithmSpec::parse(name));

    struct Task {
        std::size_t theta_index;
        std::size_t sigma_index;
        int run;
    };
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < cfg.theta_grid.size(); ++i)
        for (std::size_t j = 0; j < cfg.sigma_grid.size(); ++j)
            for (int r = 0; r < cfg.mc_runs; ++r) tasks.push_back({i, j, r});

    std::vector<std::vector<ExperimentRecord>> slots(tasks.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t k = next++; k < tasks.size(); k = next++) {
            const Task& task = tasks[k];
            const double theta = cfg.theta_grid[task.theta_index];
            const double sigma = cfg.sigma_grid[task.sigma_index];
            const std::uint64_t seed =
                instance_seed(cfg.base_seed, task.theta_index, task.sigma_index, task.run);
            const CvarInstance inst = simulate_instance(cfg.d, cfg.T, theta, sigma, seed, cfg.pi_star);
            for (const AlgorithmSpec& spec : specs) {
                ExperimentRecord rec;
                rec.seed = seed;
                rec.d = cfg.d;
                rec.T = cfg.T;
                rec.theta = theta;
                rec.sigma = sigma;
                const RelaxationKind kind = spec.relaxation.value_or(cfg.relaxation);
                rec.algorithm = spec_tag(spec, kind, cfg.a_policy);
                if (spec.uses_relaxation()) rec.relaxation = kind.name();
                try {
                    const EstimationResult res = run_algorithm(spec, inst, cfg);
                    rec.recovery_fraction = recovery_fraction(res.pi_hat, inst.pi_star);
                    if (res.A_hat) rec.mse_A = mse_system_matrix(*res.A_hat, inst.A_star);
                    rec.iterations = res.iterations;
                    rec.objective_final = res.objective_final;
                    if (cfg.record_runtime) rec.runtime_ms = res.wall_time_ms;
                } catch (const std::exception& e) {
                    rec.status = std::string("error: ") + e.what();
                }
                slots[k].push_back(std::move(rec));
            }
        }
    };
    const int nthreads = std::min<int>(cfg.workers, static_cast<int>(tasks.size()));
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::vector<ExperimentRecord> out;
    for (auto& slot : slots)
        for (auto& rec : slot) out.push_back(std::move(rec));
    std::stable_sort(out.begin(), out.end(), record_less);
    return out;
}

inline constexpr const char* kCsvHeader =
    "seed,d,T,theta,sigma,algorithm,relaxation,recovery_fraction,mse_A,iterations,objective_final,"
    "runtime_ms,status";

/// %#.9g: nine significant digits, trailing zeros kept.
inline std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%#.9g", v);
    return buf;
}

namespace detail {

inline std::string csv_safe(std::string s) {
    for (char& c : s) {
        if (c == ',') c = ';';
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

inline std::string opt_real(const std::optional<double>& v) { return v ? format_real(*v) : ""; }

}  // namespace detail

inline std::string format_record(const ExperimentRecord& r) {
    std::string line = std::to_string(r.seed) + "," + std::to_string(r.d) + "," +
                       std::to_string(r.T) + "," + format_real(r.theta) + "," +
                       format_real(r.sigma) + "," + detail::csv_safe(r.algorithm) + "," +
                       detail::csv_safe(r.relaxation) + "," + detail::opt_real(r.recovery_fraction) +
                       "," + detail::opt_real(r.mse_A) + "," +
                       (r.iterations ? std::to_string(*r.iterations) : std::string()) + "," +
                       detail::opt_real(r.objective_final) + "," + detail::opt_real(r.runtime_ms) +
                       "," + detail::csv_safe(r.status);
    return line;
}

/// Header plus one line per record, '\n' line endings, canonical row order.
inline std::string format_csv(std::vector<ExperimentRecord> records) {
    std::stable_sort(records.begin(), records.end(), record_less);
    std::string out = std::string(kCsvHeader) + "\n";
    for (const auto& r : records) out += format_record(r) + "\n";
    return out;
}

inline void write_csv(const std::vector<ExperimentRecord>& records, const std::string& path) {
    if (records.empty()) throw DomainError("write_csv: no records to write");
    const std::string text = format_csv(records);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw IoError("write to '" + path + "' failed");
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::optional<double> parse_opt_real(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return std::stod(s);
}

}  // namespace detail

inline std::vector<ExperimentRecord> read_csv(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) {
        throw IoError("'" + path + "' does not start with the expected CSV header");
    }
    std::vector<ExperimentRecord> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 13) {
            throw IoError("'" + path + "' line " + std::to_string(lineno) + ": expected 13 fields");
        }
        try {
            ExperimentRecord r;
            r.seed = std::stoull(f[0]);
            r.d = std::stoi(f[1]);
            r.T = std::stoi(f[2]);
            r.theta = std::stod(f[3]);
            r.sigma = std::stod(f[4]);
            r.algorithm = f[5];
            r.relaxation = f[6];
            r.recovery_fraction = detail::parse_opt_real(f[7]);
            r.mse_A = detail::parse_opt_real(f[8]);
            if (!f[9].empty()) r.iterations = std::stoi(f[9]);
            r.objective_final = detail::parse_opt_real(f[10]);
            r.runtime_ms = detail::parse_opt_real(f[11]);
            r.status = f[12];
            out.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw IoError("'" + path + "' line " + std::to_string(lineno) + ": malformed field");
        }
    }
    return out;
}

}  // namespace cvarmatch
