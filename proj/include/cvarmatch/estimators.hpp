#pragma once

// Estimators of the hidden matching (and optionally of A). Every estimator
// reports pi_hat with the library convention: x_sharp_t came from base index
// pi_hat(t).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "cvarmatch/assignment.hpp"
#include "cvarmatch/errors.hpp"
#include "cvarmatch/linalg.hpp"
#include "cvarmatch/model.hpp"
#include "cvarmatch/relaxations.hpp"
#include "cvarmatch/rng.hpp"

namespace cvarmatch {

struct EstimationResult {
    Permutation pi_hat;
    std::optional<SystemMatrix> A_hat;
    /// Relaxed objective f at the rounded permutation (LA: the assignment value).
    double objective_final = 0.0;
    /// Total first-order solver steps spent (0 for direct methods).
    int iterations = 0;
    double wall_time_ms = 0.0;
    std::string algorithm_tag;
    /// Set when an A-update hit a rank-deficient Gram matrix.
    bool rank_deficient = false;
};

namespace detail {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

/// W = X#^T X, so W(t, t') = <x#_t, x_t'>.
inline Matrix similarity_matrix(const TimeSeriesMatrix& x, const TimeSeriesMatrix& x_sharp) {
    linalg::require_same_shape(x, x_sharp, "similarity_matrix");
    return x_sharp.transpose() * x;
}

inline EstimationResult estimate_la(const TimeSeriesMatrix& x, const TimeSeriesMatrix& x_sharp) {
    detail::Stopwatch clock;
    const AssignmentResult lap = solve_lap_max(similarity_matrix(x, x_sharp));
    EstimationResult res;
    res.pi_hat = lap.permutation;
    res.objective_final = lap.objective_value;
    res.algorithm_tag = "LA";
    res.wall_time_ms = clock.elapsed_ms();
    return res;
}

inline constexpr double kNoiselessTol = 1e-9;

/// Pairs every column of X# with the unique column of X equal to it within
/// 1e-9 in every coordinate.
inline Permutation noiseless_match(const TimeSeriesMatrix& x, const TimeSeriesMatrix& x_sharp) {
    linalg::require_same_shape(x, x_sharp, "noiseless_match");
    const int T = static_cast<int>(x.cols());
    std::vector<int> images(T, -1);
    std::vector<char> taken(T, 0);
    for (int t = 0; t < T; ++t) {
        for (int s = 0; s < T; ++s) {
            if ((x_sharp.col(t) - x.col(s)).cwiseAbs().maxCoeff() > kNoiselessTol) continue;
            if (images[t] != -1 || taken[s]) {
                throw DegenerateInstanceError("noiseless_match: column " + std::to_string(t + 1) +
                                              " has an ambiguous exact match");
            }
            images[t] = s;
            taken[s] = 1;
        }
        if (images[t] == -1) {
            throw DegenerateInstanceError("noiseless_match: column " + std::to_string(t + 1) +
                                          " of X_sharp matches no column of X");
        }
    }
    return Permutation(std::move(images));
}

inline EstimationResult estimate_noiseless(const TimeSeriesMatrix& x,
                                           const TimeSeriesMatrix& x_sharp) {
    detail::Stopwatch clock;
    EstimationResult res;
    res.pi_hat = noiseless_match(x, x_sharp);
    res.algorithm_tag = "Noiseless";
    res.wall_time_ms = clock.elapsed_ms();
    return res;
}

/// Nearest permutation in the sense max_pi <Pi, Pi_rel>.
inline Permutation round_to_permutation(const Matrix& pi_rel) {
    return solve_lap_max(pi_rel).permutation;
}

/// Relaxed solve followed by rounding. `start` defaults to the barycenter J/T.
inline EstimationResult relax_mle_round(const TimeSeriesMatrix& x, const TimeSeriesMatrix& x_sharp,
                                        const SystemMatrix& a, const RelaxationKind& kind,
                                        const SolverConfig& cfg,
                                        const std::optional<Matrix>& start = std::nullopt,
                                        Matrix* relaxed_point = nullptr) {
    detail::Stopwatch clock;
    const RelaxedObjective f(x, x_sharp, a);
    const SolveTrace trace = solve_relaxed(kind, f, cfg, start ? *start : barycenter(f.T()));
    EstimationResult res;
    res.pi_hat = round_to_permutation(trace.final_point);
    res.objective_final = f.value(res.pi_hat.matrix());
    res.iterations = trace.iterations_used;
    res.algorithm_tag = "RelaxMLE-" + kind.tag();
    if (relaxed_point) *relaxed_point = trace.final_point;
    res.wall_time_ms = clock.elapsed_ms();
    return res;
}

/// ||X - A X S||_F^2 + sigma^{-2} ||X# Pi - A X# Pi S - (X - A X S)||_F^2.
inline double joint_objective(const TimeSeriesMatrix& x, const TimeSeriesMatrix& x_sharp,
                              const Matrix& a, const Permutation& pi, double sigma) {
    if (!(sigma > 0.0)) throw DomainError("joint_objective: sigma must be positive");
    const double base = (x - a * linalg::times_shift(x)).squaredNorm();
    const double coupled = RelaxedObjective(x, x_sharp, SystemMatrix(a)).value(pi.matrix());
    return base + coupled / (sigma * sigma);
}

struct AUpdateResult {
    SystemMatrix A;
    /// The Gram matrix had numeric rank below d; A is then the minimum-norm solution.
    bool rank_deficient = false;
};

namespace detail {

/// N G^dagger together with the rank check on G.
inline AUpdateResult solve_normal_equations(const Matrix& cross, const Matrix& gram) {
    AUpdateResult res{SystemMatrix(cross * linalg::pseudo_inverse(gram)), false};
    const SymmetricPsdMatrix g(gram);
    res.rank_deficient = g.lambda_max() <= 0.0 || linalg::numeric_rank(g) < g.dim();
    return res;
}

}  // namespace detail

/// Least squares for x_{t+1} = A x_t from X alone: A = X (XS)^T [(XS)(XS)^T]^dagger.
inline AUpdateResult ols_system_matrix(const TimeSeriesMatrix& x) {
    linalg::require_nonempty(x, "ols_system_matrix");
    if (x.cols() < 2) throw DimensionError("ols_system_matrix: T must be at least 2");
    const Matrix xs = linalg::times_shift(x);
    return detail::solve_normal_equations(x * xs.transpose(), xs * xs.transpose());
}

/// Exact minimizer over A of joint_objective at fixed Pi.
inline AUpdateResult a_update(const TimeSeriesMatrix& x, const TimeSeriesMatrix& x_sharp,
                              const Permutation& pi, double sigma) {
    linalg::require_same_shape(x, x_sharp, "a_update");
    if (!(sigma > 0.0)) {
        throw DomainError("a_update: sigma must be positive; use noiseless_match for sigma = 0");
    }
    if (pi.size() != x.cols()) throw DimensionError("a_update: permutation size differs from T");
    const double w = 1.0 / (sigma * sigma);
    const Matrix xs = linalg::times_shift(x);
    const Matrix gap = x_sharp * pi.matrix() - x;
    const Matrix gap_s = linalg::times_shift(gap);
    const Matrix cross = x * xs.transpose() + w * gap * gap_s.transpose();
    const Matrix gram = xs * xs.transpose() + w * gap_s * gap_s.transpose();
    return detail::solve_normal_equations(cross, gram);
}

enum class InitPolicy { Identity, Uniform, LaWarm };

inline InitPolicy parse_init_policy(const std::string& s) {
    if (s == "identity") return InitPolicy::Identity;
    if (s == "uniform") return InitPolicy::Uniform;
    if (s == "la_warm") return InitPolicy::LaWarm;
    throw ConfigError("unknown pi0 policy '" + s + "'");
}

/// Pi0 for alternating minimization; the uniform draw uses the Initialization
/// substream of `seed`.
inline Permutation initial_permutation(InitPolicy policy, const TimeSeriesMatrix& x,
                                       const TimeSeriesMatrix& x_sharp, std::uint64_t seed) {
    const int T = static_cast<int>(x.cols());
    switch (policy) {
        case InitPolicy::Identity: return Permutation::identity(T);
        case InitPolicy::Uniform: {
            CounterRng rng(seed, Substream::Initialization);
            return sample_permutation(T, PermutationKind::Uniform, rng);
        }
        case InitPolicy::LaWarm: return estimate_la(x, x_sharp).pi_hat;
    }
    return Permutation::identity(T);
}

/// K rounds of (A-update at Pi^{k-1}, relaxed solve + rounding at A^k).
/// The relaxed solve starts at the barycenter each round unless `warm_start`,
/// in which case round k > 1 starts at the previous round's relaxed point.
/// With sigma = 0 the A-step uses ols_system_matrix, the limit in which the
/// coupled term forces X# Pi = X.
inline EstimationResult alternating_minimization(const TimeSeriesMatrix& x,
                                                 const TimeSeriesMatrix& x_sharp, double sigma,
                                                 const Permutation& pi0, int K,
                                                 const RelaxationKind& kind,
                                                 const SolverConfig& cfg,
                                                 bool warm_start = false) {
    detail::Stopwatch clock;
    linalg::require_same_shape(x, x_sharp, "alternating_minimization");
    if (!(sigma >= 0.0)) throw DomainError("alternating_minimization: sigma must be nonnegative");
    if (K < 0) throw DomainError("alternating_minimization: K must be nonnegative");
    if (pi0.size() != x.cols()) {
        throw DimensionError("alternating_minimization: Pi0 size differs from T");
    }

    EstimationResult res;
    res.pi_hat = pi0;
    res.algorithm_tag = "AltMin-" + kind.tag();
    std::optional<Matrix> start;
    for (int k = 1; k <= K; ++k) {
        const AUpdateResult a = sigma > 0.0 ? a_update(x, x_sharp, res.pi_hat, sigma)
                                            : ols_system_matrix(x);
        res.rank_deficient = res.rank_deficient || a.rank_deficient;
        Matrix relaxed;
        const EstimationResult step = relax_mle_round(x, x_sharp, a.A, kind, cfg,
                                                      warm_start ? start : std::nullopt, &relaxed);
        if (warm_start) start = std::move(relaxed);
        res.pi_hat = step.pi_hat;
        res.A_hat = a.A;
        res.objective_final = step.objective_final;
        res.iterations += step.iterations;
    }
    res.wall_time_ms = clock.elapsed_ms();
    return res;
}

/// OLS estimate of A from X alone, then relax_mle_round with it.
inline EstimationResult estimate_a_first(const TimeSeriesMatrix& x, const TimeSeriesMatrix& x_sharp,
                                         const RelaxationKind& kind, const SolverConfig& cfg) {
    detail::Stopwatch clock;
    linalg::require_same_shape(x, x_sharp, "estimate_a_first");
    const AUpdateResult a = ols_system_matrix(x);
    EstimationResult res = relax_mle_round(x, x_sharp, a.A, kind, cfg);
    res.A_hat = a.A;
    res.rank_deficient = a.rank_deficient;
    res.algorithm_tag = "A-First-" + kind.tag();
    res.wall_time_ms = clock.elapsed_ms();
    return res;
}

}  // namespace cvarmatch
