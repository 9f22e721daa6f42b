#pragma once

// Relaxed maximum-likelihood problem for the matching given a system matrix A:
//
//   minimize  f(Pi) = || X# Pi - A X# Pi S - (X - A X S) ||_F^2   over Pi in K,
//
// where S is the upper shift and K is a convex superset of the permutation
// matrices (hyperplane, simplex or Birkhoff polytope). First-order solvers start
// at the barycenter J/T.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cvarmatch/assignment.hpp"
#include "cvarmatch/errors.hpp"
#include "cvarmatch/linalg.hpp"
#include "cvarmatch/model.hpp"

namespace cvarmatch {

enum class FeasibleSet { Hyperplane, Simplex, Birkhoff };
enum class SolverKind { PGD, EntropicMD, BirkhoffPGD, FrankWolfe };

/// A feasible set together with the solver bound to it. Only the pairings
/// hyperplane/PGD, simplex/entropic MD, Birkhoff/{projected gradient, Frank-Wolfe}
/// can be constructed.
class RelaxationKind {
public:
    RelaxationKind(FeasibleSet set, SolverKind solver) : set_(set), solver_(solver) {
        const bool ok = (set == FeasibleSet::Hyperplane && solver == SolverKind::PGD) ||
                        (set == FeasibleSet::Simplex && solver == SolverKind::EntropicMD) ||
                        (set == FeasibleSet::Birkhoff && (solver == SolverKind::BirkhoffPGD ||
                                                          solver == SolverKind::FrankWolfe));
        if (!ok) throw ConfigError("RelaxationKind: solver is not valid for this feasible set");
    }

    static RelaxationKind hyperplane() { return {FeasibleSet::Hyperplane, SolverKind::PGD}; }
    static RelaxationKind simplex() { return {FeasibleSet::Simplex, SolverKind::EntropicMD}; }
    static RelaxationKind birkhoff() { return {FeasibleSet::Birkhoff, SolverKind::BirkhoffPGD}; }
    static RelaxationKind frank_wolfe() { return {FeasibleSet::Birkhoff, SolverKind::FrankWolfe}; }

    /// Accepts hyperplane | simplex | birkhoff | fw.
    static RelaxationKind parse(const std::string& name) {
        if (name == "hyperplane") return hyperplane();
        if (name == "simplex") return simplex();
        if (name == "birkhoff") return birkhoff();
        if (name == "fw" || name == "frank-wolfe") return frank_wolfe();
        throw ConfigError("unknown relaxation '" + name + "'");
    }

    FeasibleSet set() const { return set_; }
    SolverKind solver() const { return solver_; }

    /// hyperplane | simplex | birkhoff | fw
    std::string name() const {
        switch (solver_) {
            case SolverKind::PGD: return "hyperplane";
            case SolverKind::EntropicMD: return "simplex";
            case SolverKind::BirkhoffPGD: return "birkhoff";
            case SolverKind::FrankWolfe: return "fw";
        }
        return "?";
    }

    /// Hyperplane | Simplex | Birkhoff | FW, used in algorithm tags.
    std::string tag() const {
        switch (solver_) {
            case SolverKind::PGD: return "Hyperplane";
            case SolverKind::EntropicMD: return "Simplex";
            case SolverKind::BirkhoffPGD: return "Birkhoff";
            case SolverKind::FrankWolfe: return "FW";
        }
        return "?";
    }

    bool operator==(const RelaxationKind& o) const {
        return set_ == o.set_ && solver_ == o.solver_;
    }

private:
    FeasibleSet set_;
    SolverKind solver_;
};

struct SolverConfig {
    double gamma = 1.0;
    int max_iters = 300;
    double rel_obj_tol = 1e-10;
    int dykstra_max_iters = 1000;
    double dykstra_tol = 1e-9;

    void validate() const {
        if (!(gamma > 0.0)) throw ConfigError("solver.gamma must be positive");
        if (max_iters < 0) throw ConfigError("solver.max_iters must be nonnegative");
        if (!(rel_obj_tol > 0.0)) throw ConfigError("solver.rel_obj_tol must be positive");
        if (dykstra_max_iters < 1) throw ConfigError("solver.dykstra_max_iters must be positive");
        if (!(dykstra_tol > 0.0)) throw ConfigError("solver.dykstra_tol must be positive");
    }
};

struct SolveTrace {
    Matrix final_point;
    /// f at the starting point followed by f after every step.
    std::vector<double> objective_history;
    int iterations_used = 0;
    /// Birkhoff projections that hit dykstra_max_iters before reaching dykstra_tol.
    int projection_failures = 0;
};

/// f(Pi) and its gradient for fixed (X, X#, A). The constant part X - A X S is
/// computed once per instance.
class RelaxedObjective {
public:
    RelaxedObjective(const TimeSeriesMatrix& x, const TimeSeriesMatrix& x_sharp,
                     const SystemMatrix& a)
        : x_sharp_(x_sharp), a_(a.matrix()) {
        linalg::require_same_shape(x, x_sharp, "RelaxedObjective");
        if (a.dim() != x.rows()) {
            throw DimensionError("RelaxedObjective: system matrix dimension differs from d");
        }
        target_ = x - a_ * linalg::times_shift(x);
    }

    int T() const { return static_cast<int>(x_sharp_.cols()); }

    /// X# D - A X# D S, the linear part of the residual.
    Matrix linear_part(const Matrix& d) const {
        const Matrix xd = x_sharp_ * d;
        return xd - a_ * linalg::times_shift(xd);
    }

    Matrix residual(const Matrix& pi) const {
        check_point(pi);
        return linear_part(pi) - target_;
    }

    double value(const Matrix& pi) const { return residual(pi).squaredNorm(); }

    /// 2 X#^T (R - A^T R S^T).
    Matrix gradient_from_residual(const Matrix& r) const {
        const Matrix q = r - linalg::times_shift_transpose(a_.transpose() * r);
        return 2.0 * x_sharp_.transpose() * q;
    }

    Matrix gradient(const Matrix& pi) const { return gradient_from_residual(residual(pi)); }

private:
    void check_point(const Matrix& pi) const {
        if (pi.rows() != T() || pi.cols() != T()) {
            throw DimensionError("relaxed objective: point must be " + std::to_string(T()) + "x" +
                                 std::to_string(T()));
        }
    }

    Matrix x_sharp_;
    Matrix a_;
    Matrix target_;
};

inline double objective_value(const Matrix& pi, const TimeSeriesMatrix& x,
                              const TimeSeriesMatrix& x_sharp, const SystemMatrix& a) {
    return RelaxedObjective(x, x_sharp, a).value(pi);
}

inline Matrix objective_gradient(const Matrix& pi, const TimeSeriesMatrix& x,
                                 const TimeSeriesMatrix& x_sharp, const SystemMatrix& a) {
    return RelaxedObjective(x, x_sharp, a).gradient(pi);
}

/// Euclidean projection onto { Z : 1^T Z 1 = T }.
inline Matrix project_hyperplane(const Matrix& z) {
    linalg::require_square(z, "project_hyperplane");
    const double n = static_cast<double>(z.rows());
    return z.array() - (z.sum() - n) / (n * n);
}

inline constexpr double kMdFloor = 1e-300;

/// Multiplicative-weights step on { Z >= 0 : 1^T Z 1 = T }:
/// Pi <- T * (Pi .* exp(-gamma grad)) / ||Pi .* exp(-gamma grad)||_1.
inline Matrix entropic_md_step(const Matrix& pi, const Matrix& grad, double gamma_k) {
    linalg::require_square(pi, "entropic_md_step");
    linalg::require_same_shape(pi, grad, "entropic_md_step");
    if ((pi.array() <= 0.0).any()) {
        throw DomainError("entropic_md_step: iterate must be entrywise positive");
    }
    // Shifting the exponent by its maximum leaves the normalized result unchanged.
    const Eigen::ArrayXXd expo = -gamma_k * grad.array();
    const Eigen::ArrayXXd w = pi.array() * (expo - expo.maxCoeff()).exp();
    const double n = static_cast<double>(pi.rows());
    Eigen::ArrayXXd out = n * w / w.sum();
    out = out.max(kMdFloor);
    return out.matrix();
}

struct ProjectionResult {
    Matrix point;
    int iterations = 0;
    bool converged = false;
    /// Largest row/column sum deviation of `point` (entries are nonnegative by construction).
    double max_violation = 0.0;
};

/// Euclidean projection onto the Birkhoff polytope by Dykstra's alternating
/// projections between the unit-marginal affine set and the nonnegative orthant.
/// Stops once row and column sums are within dykstra_tol; running out of
/// iterations is reported through `converged`, not thrown.
///
/// The correction term of the affine set is always normal to it and so never
/// changes its projection; only the orthant correction q is carried. One fused
/// pass per iteration applies both projections and accumulates the marginals.
inline ProjectionResult project_birkhoff_dykstra(const Matrix& z, const SolverConfig& cfg) {
    linalg::require_square(z, "project_birkhoff_dykstra");
    const Eigen::Index n = z.rows();
    const double inv_n = 1.0 / static_cast<double>(n);

    ProjectionResult res;
    Matrix x = z;
    Matrix q = Matrix::Zero(n, n);
    std::vector<double> row_sum(n), col_sum(n), row_shift(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            row_sum[i] += x(i, j);
            col_sum[j] += x(i, j);
        }
    }

    for (int it = 1; it <= cfg.dykstra_max_iters; ++it) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            total += row_sum[i];
            row_shift[i] = (1.0 - row_sum[i]) * inv_n;
            row_sum[i] = 0.0;
        }
        const double total_shift = (static_cast<double>(n) - total) * inv_n * inv_n;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double shift_j = (1.0 - col_sum[j]) * inv_n - total_shift;
            double* __restrict xc = x.data() + j * n;
            double* __restrict qc = q.data() + j * n;
            double* __restrict rs = row_sum.data();
            const double* __restrict sh = row_shift.data();
            for (Eigen::Index i = 0; i < n; ++i) {
                const double w = xc[i] + qc[i] + sh[i] + shift_j;
                const double clipped = w > 0.0 ? w : 0.0;
                qc[i] = w - clipped;
                xc[i] = clipped;
                rs[i] += clipped;
            }
            col_sum[j] = x.col(j).sum();
        }
        double violation = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            violation = std::max(violation, std::abs(row_sum[i] - 1.0));
            violation = std::max(violation, std::abs(col_sum[i] - 1.0));
        }
        res.iterations = it;
        res.max_violation = violation;
        if (violation <= cfg.dykstra_tol) {
            res.converged = true;
            break;
        }
    }
    res.point = std::move(x);
    return res;
}

struct FrankWolfeStep {
    Permutation vertex;
    double step_size = 0.0;
};

/// Linear minimization over the Birkhoff polytope (a permutation matrix, found as
/// the assignment maximizing <-grad, V>) plus exact line search of the quadratic
/// along Pi + eta (V - Pi), clipped to [0, 1].
inline FrankWolfeStep frank_wolfe_step(const RelaxedObjective& f, const Matrix& pi,
                                       const Matrix& grad) {
    linalg::require_same_shape(pi, grad, "frank_wolfe_step");
    FrankWolfeStep step;
    step.vertex = solve_lap_max(-grad).permutation;
    const Matrix dir = step.vertex.matrix() - pi;
    const Matrix ld = f.linear_part(dir);
    const double curvature = ld.squaredNorm();
    const double slope = f.residual(pi).cwiseProduct(ld).sum();
    if (curvature > 0.0) {
        step.step_size = std::clamp(-slope / curvature, 0.0, 1.0);
    } else {
        step.step_size = slope < 0.0 ? 1.0 : 0.0;
    }
    return step;
}

inline constexpr double kGradNormFloor = 1e-4;

/// gamma * log(k+1) / ((grad_norm v 1e-4) * sqrt(k+1)).
inline double learning_rate(int k, double gamma, double grad_norm) {
    if (k < 1) throw DomainError("learning_rate: k must be at least 1");
    if (!(gamma > 0.0)) throw ConfigError("learning_rate: gamma must be positive");
    const double kp1 = static_cast<double>(k) + 1.0;
    return gamma * std::log(kp1) / (std::max(grad_norm, kGradNormFloor) * std::sqrt(kp1));
}

/// The norm the step-size rule uses for a given solver: max-entry for mirror
/// descent, Frobenius (the Euclidean norm of the vectorized matrix) otherwise.
inline double step_norm(const Matrix& grad, const RelaxationKind& kind) {
    if (kind.solver() == SolverKind::EntropicMD) return grad.cwiseAbs().maxCoeff();
    return grad.norm();
}

inline double learning_rate(int k, double gamma, double grad_norm, const RelaxationKind&) {
    return learning_rate(k, gamma, grad_norm);
}

inline Matrix barycenter(int T) {
    return Matrix::Constant(T, T, 1.0 / static_cast<double>(T));
}

/// Runs the solver bound to `kind` from `start` for at most cfg.max_iters steps,
/// stopping when |f_k - f_{k-1}| <= rel_obj_tol * f_{k-1}.
inline SolveTrace solve_relaxed(const RelaxationKind& kind, const RelaxedObjective& f,
                                const SolverConfig& cfg, Matrix start) {
    cfg.validate();
    SolveTrace trace;
    Matrix pi = std::move(start);
    Matrix r = f.residual(pi);
    double value = r.squaredNorm();
    trace.objective_history.push_back(value);

    for (int k = 1; k <= cfg.max_iters; ++k) {
        const Matrix grad = f.gradient_from_residual(r);
        switch (kind.solver()) {
            case SolverKind::PGD: {
                const double rate = learning_rate(k, cfg.gamma, step_norm(grad, kind));
                pi = project_hyperplane(pi - rate * grad);
                break;
            }
            case SolverKind::EntropicMD: {
                const double rate = learning_rate(k, cfg.gamma, step_norm(grad, kind));
                pi = entropic_md_step(pi, grad, rate);
                break;
            }
            case SolverKind::BirkhoffPGD: {
                const double rate = learning_rate(k, cfg.gamma, step_norm(grad, kind));
                ProjectionResult proj = project_birkhoff_dykstra(pi - rate * grad, cfg);
                if (!proj.converged) ++trace.projection_failures;
                pi = std::move(proj.point);
                break;
            }
            case SolverKind::FrankWolfe: {
                const FrankWolfeStep step = frank_wolfe_step(f, pi, grad);
                pi += step.step_size * (step.vertex.matrix() - pi);
                break;
            }
        }
        r = f.residual(pi);
        const double next = r.squaredNorm();
        trace.objective_history.push_back(next);
        trace.iterations_used = k;
        const double change = std::abs(value - next);
        value = next;
        if (change <= cfg.rel_obj_tol * std::abs(trace.objective_history[k - 1])) break;
    }
    trace.final_point = std::move(pi);
    return trace;
}

inline SolveTrace solve_relaxed(const RelaxationKind& kind, const TimeSeriesMatrix& x,
                                const TimeSeriesMatrix& x_sharp, const SystemMatrix& a,
                                const SolverConfig& cfg) {
    RelaxedObjective f(x, x_sharp, a);
    return solve_relaxed(kind, f, cfg, barycenter(f.T()));
}

}  // namespace cvarmatch
