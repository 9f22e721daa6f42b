#pragma once

// Recovery thresholds for the LA estimator and the matrices behind the
// augmenting-cycle analysis, with numerical checks of the supporting lemmas.
//
// Time indices in this header are 1-based, as in the cycle notation
// (i_1, ..., i_t) with i_1 the largest index.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "cvarmatch/assignment.hpp"
#include "cvarmatch/errors.hpp"
#include "cvarmatch/linalg.hpp"
#include "cvarmatch/model.hpp"
#include "cvarmatch/rng.hpp"

namespace cvarmatch {

/// Cycle (i_1, ..., i_t) of distinct 1-based time indices with i_1 maximal.
/// Edge k joins i_k and i_{k+1}; edge t closes the cycle between i_1 and i_t.
class CycleSpec {
public:
    explicit CycleSpec(std::vector<int> indices) : indices_(std::move(indices)) {
        if (indices_.size() < 2) throw DomainError("CycleSpec: a cycle needs at least 2 indices");
        std::vector<int> sorted = indices_;
        std::sort(sorted.begin(), sorted.end());
        if (sorted.front() < 1) throw DomainError("CycleSpec: indices are 1-based");
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            throw DomainError("CycleSpec: indices must be distinct");
        }
        if (indices_.front() != sorted.back()) {
            throw DomainError("CycleSpec: the first index must be the largest");
        }
    }

    int t() const { return static_cast<int>(indices_.size()); }
    int i1() const { return indices_.front(); }
    const std::vector<int>& indices() const { return indices_; }

    /// (alpha_k, beta_k) = (max, min) of the k-th edge; alpha_k > beta_k >= 1.
    std::vector<std::pair<int, int>> edges() const {
        std::vector<std::pair<int, int>> out;
        out.reserve(indices_.size());
        for (std::size_t k = 0; k + 1 < indices_.size(); ++k) {
            out.emplace_back(std::max(indices_[k], indices_[k + 1]),
                             std::min(indices_[k], indices_[k + 1]));
        }
        out.emplace_back(indices_.front(), indices_.back());
        return out;
    }

    /// Same edge set traversed the other way: (i_1, i_t, ..., i_2).
    CycleSpec reversed() const {
        std::vector<int> r{indices_.front()};
        r.insert(r.end(), indices_.rbegin(), indices_.rend() - 1);
        return CycleSpec(std::move(r));
    }

private:
    std::vector<int> indices_;
};

namespace detail {

inline void require_stable(const SystemMatrix& a, const char* what) {
    if (!(a.spectral_norm() < 1.0)) {
        throw DomainError(std::string(what) + ": requires ||A||_2 < 1");
    }
}

/// Powers A^0 .. A^n.
inline std::vector<Matrix> powers(const Matrix& a, int n) {
    std::vector<Matrix> out;
    out.reserve(n + 1);
    out.push_back(Matrix::Identity(a.rows(), a.cols()));
    for (int k = 1; k <= n; ++k) out.push_back(a * out.back());
    return out;
}

/// log det of a symmetric positive definite matrix via Cholesky.
inline double log_det_spd(const Matrix& m) {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) throw NotPsdError("log_det_spd: matrix is not positive definite");
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace detail

/// P = [P_{i_1} ... P_{i_t}] (i_1 d x t d); block row j of P_r is A^{r-j} for j <= r, else 0.
inline Matrix build_P(const SystemMatrix& a, const CycleSpec& cycle) {
    const int d = a.dim();
    const int i1 = cycle.i1();
    const std::vector<Matrix> pw = detail::powers(a.matrix(), i1);
    Matrix p = Matrix::Zero(i1 * d, cycle.t() * d);
    for (int k = 0; k < cycle.t(); ++k) {
        const int r = cycle.indices()[k];
        for (int j = 1; j <= r; ++j) p.block((j - 1) * d, k * d, d, d) = pw[r - j];
    }
    return p;
}

/// i_1 d x d block column with block row j equal to A^{alpha-j} - A^{beta-j}
/// for j <= beta, A^{alpha-j} for beta < j <= alpha, and 0 below.
inline Matrix build_B(const SystemMatrix& a, int alpha, int beta, int i1) {
    if (!(i1 >= alpha && alpha > beta && beta >= 1)) {
        throw DomainError("build_B: requires i1 >= alpha > beta >= 1");
    }
    const int d = a.dim();
    const std::vector<Matrix> pw = detail::powers(a.matrix(), alpha);
    Matrix b = Matrix::Zero(i1 * d, d);
    for (int j = 1; j <= alpha; ++j) {
        Matrix blk = pw[alpha - j];
        if (j <= beta) blk -= pw[beta - j];
        b.block((j - 1) * d, 0, d, d) = blk;
    }
    return b;
}

/// L = sum over edges of B(alpha_k, beta_k) B(alpha_k, beta_k)^T.
inline SymmetricPsdMatrix build_L(const SystemMatrix& a, const CycleSpec& cycle) {
    const int n = cycle.i1() * a.dim();
    Matrix l = Matrix::Zero(n, n);
    for (const auto& [alpha, beta] : cycle.edges()) {
        const Matrix b = build_B(a, alpha, beta, cycle.i1());
        l += b * b.transpose();
    }
    return SymmetricPsdMatrix(l);
}

/// G(n) = sum_{l=0}^{n-1} (A^l)^T A^l.
inline Matrix power_gram(const Matrix& a, int n) {
    Matrix g = Matrix::Zero(a.rows(), a.cols());
    Matrix pw = Matrix::Identity(a.rows(), a.cols());
    for (int l = 0; l < n; ++l) {
        g += pw.transpose() * pw;
        pw = a * pw;
    }
    return g;
}

/// log det(P^T P) by the product formula: with the indices sorted decreasingly
/// as j_1 > ... > j_t, the sum over k < t of log det G(j_k - j_{k+1}), plus log det G(j_t).
inline double log_det_ptp_formula(const SystemMatrix& a, const CycleSpec& cycle) {
    std::vector<int> j = cycle.indices();
    std::sort(j.begin(), j.end(), std::greater<>());
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < j.size(); ++k) {
        acc += detail::log_det_spd(power_gram(a.matrix(), j[k] - j[k + 1]));
    }
    acc += detail::log_det_spd(power_gram(a.matrix(), j.back()));
    return acc;
}

inline double det_ptp_formula(const SystemMatrix& a, const CycleSpec& cycle) {
    return std::exp(log_det_ptp_formula(a, cycle));
}

struct BoundCheck {
    double value = 0.0;
    double bound = 0.0;
    bool holds = false;
};

/// lambda_1(P^T P) against 1 / (1 - ||A||_2)^2.
inline BoundCheck gershgorin_bound_check(const SystemMatrix& a, const CycleSpec& cycle) {
    detail::require_stable(a, "gershgorin_bound_check");
    const Matrix p = build_P(a, cycle);
    const SymmetricPsdMatrix ptp(p.transpose() * p);
    const double rho = a.spectral_norm();
    BoundCheck out;
    out.value = ptp.lambda_max();
    out.bound = 1.0 / ((1.0 - rho) * (1.0 - rho));
    out.holds = out.value <= out.bound * (1.0 + 1e-12);
    return out;
}

struct LogBoundCheck {
    double log_lhs = 0.0;
    double log_rhs = 0.0;
    bool holds = false;
    double lhs() const { return std::exp(log_lhs); }
    double rhs() const { return std::exp(log_rhs); }
};

/// det(gamma L + I)^{-1/2} against ((1-rho)^5 / (4 sigma^2) + 1)^{-(t-1) d / 2},
/// gamma = (1-rho)^3 / (4 sigma^2), both sides in log form.
inline LogBoundCheck det_bound_inequality_check(const SystemMatrix& a, const CycleSpec& cycle,
                                                double sigma) {
    detail::require_stable(a, "det_bound_inequality_check");
    if (!(sigma > 0.0)) throw DomainError("det_bound_inequality_check: sigma must be positive");
    const double rho = a.spectral_norm();
    const double s2 = sigma * sigma;
    const double gamma = std::pow(1.0 - rho, 3) / (4.0 * s2);
    const SymmetricPsdMatrix l = build_L(a, cycle);
    double logdet = 0.0;
    for (Eigen::Index k = 0; k < l.eigenvalues().size(); ++k) {
        logdet += std::log1p(gamma * std::max(l.eigenvalues()(k), 0.0));
    }
    LogBoundCheck out;
    out.log_lhs = -0.5 * logdet;
    out.log_rhs = -0.5 * (cycle.t() - 1) * a.dim() * std::log1p(std::pow(1.0 - rho, 5) / (4.0 * s2));
    out.holds = out.log_lhs <= out.log_rhs + 1e-10 * std::max(1.0, std::abs(out.log_rhs));
    return out;
}

struct VarianceCheck {
    double sigma1_sq = 0.0;
    double sigma2_sq = 0.0;
    double bound = 0.0;
    bool holds = false;
    double total() const { return sigma1_sq + sigma2_sq; }
};

/// The two quadratic forms in y behind the conditional variance of a 2-cycle
/// (a, b), a > b, and the bound 5 ||y||^2 / (1 - ||A||_2^2).
inline VarianceCheck two_cycle_variance(const SystemMatrix& a, const Vector& y, int ia, int ib) {
    detail::require_stable(a, "two_cycle_variance");
    if (!(ia > ib && ib >= 1)) throw DomainError("two_cycle_variance: requires a > b >= 1");
    if (y.size() != a.dim()) throw DimensionError("two_cycle_variance: y must have length d");
    const int gap = ia - ib;
    const std::vector<Matrix> pw = detail::powers(a.matrix(), std::max(gap, ib));
    const Matrix lead = pw[gap] - Matrix::Identity(a.dim(), a.dim());
    Matrix m1 = Matrix::Zero(a.dim(), a.dim());
    for (int i = 0; i < ib; ++i) {
        const Matrix c = pw[i] * lead;
        m1 += c * c.transpose();
    }
    Matrix m2 = Matrix::Zero(a.dim(), a.dim());
    for (int i = 1; i <= gap; ++i) m2 += pw[gap - i] * pw[gap - i].transpose();

    VarianceCheck out;
    out.sigma1_sq = y.dot(m1 * y);
    out.sigma2_sq = y.dot(m2 * y);
    const double rho = a.spectral_norm();
    out.bound = 5.0 * y.squaredNorm() / (1.0 - rho * rho);
    out.holds = out.total() <= out.bound * (1.0 + 1e-12) + 1e-300;
    return out;
}

inline constexpr double kAugmentingSlack = 1e-9;

/// sum_k W(i_k, i_{k+1}) >= sum_k W(i_k, i_k) - 1e-9 with i_{t+1} = i_1.
/// Indices are 0-based rows/columns of W.
inline bool is_augmenting_cycle(const Matrix& w, const std::vector<int>& cycle) {
    linalg::require_square(w, "is_augmenting_cycle");
    if (cycle.empty()) throw DomainError("is_augmenting_cycle: empty cycle");
    std::vector<char> seen(w.rows(), 0);
    for (int i : cycle) {
        if (i < 0 || i >= w.rows()) throw DomainError("is_augmenting_cycle: index out of range");
        if (seen[i]) throw DomainError("is_augmenting_cycle: repeated index");
        seen[i] = 1;
    }
    double off = 0.0;
    double diag = 0.0;
    const std::size_t t = cycle.size();
    for (std::size_t k = 0; k < t; ++k) {
        off += w(cycle[k], cycle[(k + 1) % t]);
        diag += w(cycle[k], cycle[k]);
    }
    return off >= diag - kAugmentingSlack;
}

/// |{t : pi_hat(t) != pi_star(t)}|.
inline int mismatch_count(const Permutation& pi_hat, const Permutation& pi_star) {
    if (pi_hat.size() != pi_star.size()) throw DimensionError("mismatch_count: size mismatch");
    int n = 0;
    for (int t = 0; t < pi_hat.size(); ++t) n += pi_hat(t) != pi_star(t);
    return n;
}

enum class Regime { ExactRecovery, ConstantError, SublinearError };

inline Regime parse_regime(const std::string& s) {
    if (s == "exact") return Regime::ExactRecovery;
    if (s == "constant") return Regime::ConstantError;
    if (s == "sublinear") return Regime::SublinearError;
    throw ConfigError("unknown regime '" + s + "' (expected exact | constant | sublinear)");
}

struct ThresholdQuery {
    int d = 1;
    int T = 2;
    /// Stands for ||A*||_2.
    double rho = 0.0;
    /// Explicit value for the asymptotic exponent constant.
    double c = 1.0;
    Regime regime = Regime::ExactRecovery;
};

/// sigma^2 = (1-rho)^5 / (4 (s0^c T^{p/d} - 1)), s0 = 2^{1/d}, p = 4 for the
/// exact and constant-error regimes and p = 2 for the sublinear one.
inline double threshold_sigma_squared(const ThresholdQuery& q) {
    if (q.d < 1) throw DomainError("threshold_sigma_squared: d must be positive");
    if (q.T < 2) throw DomainError("threshold_sigma_squared: T must be at least 2");
    if (!(q.rho >= 0.0 && q.rho < 1.0)) throw DomainError("threshold_sigma_squared: rho must lie in [0, 1)");
    if (!(q.c > 0.0)) throw DomainError("threshold_sigma_squared: c must be positive");
    const double p = q.regime == Regime::SublinearError ? 2.0 : 4.0;
    const double s0 = std::pow(2.0, 1.0 / q.d);
    const double denom = 4.0 * (std::pow(s0, q.c) * std::pow(static_cast<double>(q.T), p / q.d) - 1.0);
    if (!(denom > 0.0)) {
        throw DegenerateRegimeError("threshold_sigma_squared: s0^c T^(p/d) must exceed 1");
    }
    return std::pow(1.0 - q.rho, 5) / denom;
}

/// ((1-rho)^5 / (4 sigma^2) + 1)^{-d/2} T^2, with the implied constant set to 1.
inline double expected_error_bound(int d, int T, double rho, double sigma) {
    if (d < 1 || T < 1) throw DomainError("expected_error_bound: d and T must be positive");
    if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("expected_error_bound: rho must lie in [0, 1)");
    if (!(sigma > 0.0)) throw DomainError("expected_error_bound: sigma must be positive");
    const double base = std::pow(1.0 - rho, 5) / (4.0 * sigma * sigma) + 1.0;
    return std::exp(-0.5 * d * std::log(base)) * static_cast<double>(T) * T;
}

// ---------------------------------------------------------------------------
// Randomized verification suite.

struct RandomCycleDraw {
    SystemMatrix A;
    CycleSpec cycle;
    double sigma;
};

/// d in 1..3, t in 2..6, i_1 in t..12, interior order random, ||A||_2 uniform in [0, 0.9],
/// sigma log-uniform in [0.05, 5].
inline RandomCycleDraw draw_random_cycle(CounterRng& rng) {
    const int d = 1 + static_cast<int>(rng.below(3));
    const int t = 2 + static_cast<int>(rng.below(5));
    const int i1 = t + static_cast<int>(rng.below(static_cast<std::uint64_t>(12 - t + 1)));
    std::vector<int> pool(i1 - 1);
    for (int k = 0; k < i1 - 1; ++k) pool[k] = k + 1;
    for (int k = 0; k < t - 1; ++k) {
        const int j = k + static_cast<int>(rng.below(static_cast<std::uint64_t>(pool.size() - k)));
        std::swap(pool[k], pool[j]);
    }
    std::vector<int> idx{i1};
    idx.insert(idx.end(), pool.begin(), pool.begin() + (t - 1));
    const double rho = 0.9 * rng.uniform();
    SystemMatrix a = sample_system_matrix(d, rho, rng);
    const double sigma = 0.05 * std::pow(100.0, rng.uniform());
    return {std::move(a), CycleSpec(std::move(idx)), sigma};
}

struct LemmaReport {
    std::string name;
    int trials = 0;
    int failures = 0;
    /// Smallest margin by which the claim held (negative when it failed).
    double worst_slack = std::numeric_limits<double>::infinity();

    void record(bool ok, double slack) {
        ++trials;
        if (!ok) ++failures;
        worst_slack = std::min(worst_slack, slack);
    }
    bool passed() const { return failures == 0; }
};

/// Runs every lemma check on `trials` random draws from `seed`.
inline std::vector<LemmaReport> run_verification_suite(int trials, std::uint64_t seed) {
    if (trials < 1) throw DomainError("run_verification_suite: trials must be positive");
    LemmaReport det_ptp{"det(P^T P) product formula (rel 1e-8)"};
    LemmaReport gersh{"lambda_1(P^T P) <= (1-rho)^-2"};
    LemmaReport rank{"rank L = (t-1)d, rank P^T P = td"};
    LemmaReport tree{"det*(L_Ct) = t^2 (rel 1e-8)"};
    LemmaReport detstar{"det*(L) >= t^2d (1-rho)^2d"};
    LemmaReport prop{"det(gamma L + I)^-1/2 inequality"};
    LemmaReport var{"2-cycle variance <= 5|y|^2/(1-rho^2)"};
    LemmaReport decomp{"L = P (L_Ct x I) P^T (rel 1e-10)"};
    LemmaReport reorder{"L invariant under interior reversal"};

    CounterRng rng(seed, Substream::Verification);
    for (int trial = 0; trial < trials; ++trial) {
        const RandomCycleDraw draw = draw_random_cycle(rng);
        const SystemMatrix& a = draw.A;
        const CycleSpec& cyc = draw.cycle;
        const int d = a.dim();
        const int t = cyc.t();
        const double rho = a.spectral_norm();

        const Matrix p = build_P(a, cyc);
        const Matrix ptp = p.transpose() * p;
        const double direct = detail::log_det_spd(ptp);
        const double err = std::abs(std::expm1(log_det_ptp_formula(a, cyc) - direct));
        det_ptp.record(err <= 1e-8, 1e-8 - err);

        const BoundCheck g = gershgorin_bound_check(a, cyc);
        gersh.record(g.holds, g.bound - g.value);

        const SymmetricPsdMatrix l = build_L(a, cyc);
        const int rank_l = linalg::numeric_rank(l);
        const int rank_ptp = linalg::numeric_rank(SymmetricPsdMatrix(ptp));
        const bool ranks_ok = rank_l == (t - 1) * d && rank_ptp == t * d;
        rank.record(ranks_ok, ranks_ok ? 0.0 : -1.0);

        const SymmetricPsdMatrix lc = linalg::cycle_laplacian(t);
        const double tree_err =
            std::abs(linalg::pseudo_determinant(lc) - static_cast<double>(t) * t) / (t * t);
        tree.record(tree_err <= 1e-8, 1e-8 - tree_err);

        const double log_lower = 2.0 * d * (std::log(static_cast<double>(t)) + std::log1p(-rho));
        const double log_detstar = linalg::log_pseudo_determinant(l);
        detstar.record(log_detstar >= log_lower - 1e-9, log_detstar - log_lower);

        const LogBoundCheck pc = det_bound_inequality_check(a, cyc, draw.sigma);
        prop.record(pc.holds, pc.log_rhs - pc.log_lhs);

        Vector y(d);
        for (int i = 0; i < d; ++i) y(i) = rng.gaussian();
        const std::vector<int> sorted = [&] {
            std::vector<int> s = cyc.indices();
            std::sort(s.begin(), s.end(), std::greater<>());
            return s;
        }();
        const VarianceCheck vc = two_cycle_variance(a, y, sorted[0], sorted[1]);
        var.record(vc.holds, vc.bound - vc.total());

        const Matrix via_p = p * linalg::kron(lc.matrix(), Matrix::Identity(d, d)) * p.transpose();
        const double scale = std::max(1.0, l.matrix().norm());
        const double dec_err = (l.matrix() - via_p).norm() / scale;
        decomp.record(dec_err <= 1e-10, 1e-10 - dec_err);

        const double re_err = (build_L(a, cyc.reversed()).matrix() - l.matrix()).cwiseAbs().maxCoeff();
        reorder.record(re_err <= 1e-12 * scale, 1e-12 * scale - re_err);
    }

    // Equality cases of the product formula.
    for (int d = 1; d <= 3; ++d) {
        for (int t = 2; t <= 6; ++t) {
            std::vector<int> desc(t);
            for (int k = 0; k < t; ++k) desc[k] = t - k;
            const CycleSpec chain(desc);
            CounterRng arng(seed, 100 + 10 * d + t);
            const SystemMatrix a = sample_system_matrix(d, 0.7, arng);
            const double v = det_ptp_formula(a, chain);
            det_ptp.record(v == 1.0, v == 1.0 ? 0.0 : -std::abs(v - 1.0));
            std::vector<int> spread{12, 7, 3};
            const double z = det_ptp_formula(SystemMatrix::zero(d), CycleSpec(spread));
            det_ptp.record(z == 1.0, z == 1.0 ? 0.0 : -std::abs(z - 1.0));
        }
    }
    return {det_ptp, gersh, rank, tree, detstar, prop, var, decomp, reorder};
}

}  // namespace cvarmatch
