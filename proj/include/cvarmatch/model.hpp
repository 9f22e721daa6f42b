#pragma once

// VAR(1) trajectories and correlated (permuted, noisy) copies of them.
//
// Permutation convention used throughout the library: the matrix view of pi has
// row t equal to the indicator of pi(t). With that convention X_sharp = X' Pi^T,
// i.e. column t of X_sharp is column pi(t) of X', and X_sharp Pi = X'.
// Estimators report pi_hat with the same meaning: x_sharp_t came from base index
// pi_hat(t).

#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "cvarmatch/errors.hpp"
#include "cvarmatch/linalg.hpp"
#include "cvarmatch/rng.hpp"

namespace cvarmatch {

/// d x T matrix whose columns are consecutive observations.
using TimeSeriesMatrix = Matrix;

class Permutation {
public:
    Permutation() = default;

    /// Zero-based images; throws unless `images` is a bijection on {0..n-1}.
    explicit Permutation(std::vector<int> images) : map_(std::move(images)) {
        std::vector<char> seen(map_.size(), 0);
        for (int v : map_) {
            if (v < 0 || static_cast<std::size_t>(v) >= map_.size() || seen[v]) {
                throw DomainError("Permutation: mapping is not a bijection");
            }
            seen[v] = 1;
        }
    }

    static Permutation identity(int n) {
        std::vector<int> m(n);
        std::iota(m.begin(), m.end(), 0);
        return Permutation(std::move(m));
    }

    static Permutation from_one_based(const std::vector<int>& images) {
        std::vector<int> m(images.size());
        for (std::size_t i = 0; i < images.size(); ++i) m[i] = images[i] - 1;
        return Permutation(std::move(m));
    }

    int size() const { return static_cast<int>(map_.size()); }
    int operator()(int t) const { return map_[t]; }
    const std::vector<int>& images() const { return map_; }

    std::vector<int> one_based() const {
        std::vector<int> out(map_.size());
        for (std::size_t i = 0; i < map_.size(); ++i) out[i] = map_[i] + 1;
        return out;
    }

    Permutation inverse() const {
        std::vector<int> inv(map_.size());
        for (std::size_t i = 0; i < map_.size(); ++i) inv[map_[i]] = static_cast<int>(i);
        return Permutation(std::move(inv));
    }

    /// (this o other)(t) = this(other(t)).
    Permutation compose(const Permutation& other) const {
        if (other.size() != size()) throw DimensionError("Permutation::compose: size mismatch");
        std::vector<int> out(map_.size());
        for (std::size_t i = 0; i < map_.size(); ++i) out[i] = map_[other.map_[i]];
        return Permutation(std::move(out));
    }

    /// Row t is e_{pi(t)}^T.
    Matrix matrix() const {
        Matrix m = Matrix::Zero(size(), size());
        for (int t = 0; t < size(); ++t) m(t, map_[t]) = 1.0;
        return m;
    }

    bool operator==(const Permutation& o) const { return map_ == o.map_; }

private:
    std::vector<int> map_;
};

class SystemMatrix {
public:
    SystemMatrix() = default;
    explicit SystemMatrix(Matrix a) : a_(std::move(a)) {
        linalg::require_square(a_, "SystemMatrix");
        linalg::require_finite(a_, "SystemMatrix");
        norm_ = linalg::spectral_norm(a_);
    }

    static SystemMatrix zero(int d) { return SystemMatrix(Matrix::Zero(d, d)); }

    const Matrix& matrix() const { return a_; }
    int dim() const { return static_cast<int>(a_.rows()); }
    double spectral_norm() const { return norm_; }

private:
    Matrix a_;
    double norm_ = 0.0;
};

/// One realization of the correlated model.
struct CvarInstance {
    TimeSeriesMatrix X;
    TimeSeriesMatrix X_sharp;
    /// Independent copy used to perturb X; kept so tests can rebuild X'.
    TimeSeriesMatrix X_tilde;
    SystemMatrix A_star;
    Permutation pi_star;
    double sigma = 0.0;
    double theta = 0.0;
    std::uint64_t seed = 0;

    int d() const { return static_cast<int>(X.rows()); }
    int T() const { return static_cast<int>(X.cols()); }
};

enum class PermutationKind { Uniform, Identity };

inline PermutationKind parse_permutation_kind(const std::string& s) {
    if (s == "uniform") return PermutationKind::Uniform;
    if (s == "identity") return PermutationKind::Identity;
    throw ConfigError("unknown permutation kind '" + s + "'");
}

/// A = theta * A' / ||A'||_2 with A' standard Gaussian; theta = 0 gives the zero matrix.
inline SystemMatrix sample_system_matrix(int d, double theta, CounterRng& rng) {
    if (d < 1) throw DimensionError("sample_system_matrix: d must be positive");
    if (!(theta >= 0.0)) throw DomainError("sample_system_matrix: theta must be nonnegative");
    Matrix raw(d, d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i) raw(i, j) = rng.gaussian();
    if (theta == 0.0) return SystemMatrix::zero(d);
    return SystemMatrix(theta * raw / linalg::spectral_norm(raw));
}

/// x_1 = xi_1, x_{t+1} = A x_t + xi_{t+1}.
inline TimeSeriesMatrix generate_var(const SystemMatrix& a, int T, CounterRng& rng) {
    if (T < 1) throw DimensionError("generate_var: T must be positive");
    const int d = a.dim();
    TimeSeriesMatrix x(d, T);
    for (int t = 0; t < T; ++t) {
        Vector xi(d);
        for (int i = 0; i < d; ++i) xi(i) = rng.gaussian();
        if (t == 0) {
            x.col(0) = xi;
        } else {
            x.col(t) = a.matrix() * x.col(t - 1) + xi;
        }
    }
    return x;
}

/// Fisher-Yates draw, or the identity.
inline Permutation sample_permutation(int T, PermutationKind kind, CounterRng& rng) {
    if (T < 1) throw DimensionError("sample_permutation: T must be positive");
    Permutation id = Permutation::identity(T);
    if (kind == PermutationKind::Identity) return id;
    std::vector<int> m = id.images();
    for (int i = T - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
        std::swap(m[i], m[j]);
    }
    return Permutation(std::move(m));
}

/// Builds X from `base_rng`, the independent copy from `tilde_rng`, then
/// x_sharp_t = x_{pi(t)} + sigma * x_tilde_{pi(t)}.
inline CvarInstance generate_cvar(const SystemMatrix& a, const Permutation& pi_star, double sigma,
                                  int T, CounterRng& base_rng, CounterRng& tilde_rng) {
    if (!(sigma >= 0.0)) throw DomainError("generate_cvar: sigma must be nonnegative");
    if (pi_star.size() != T) throw DimensionError("generate_cvar: permutation size differs from T");
    CvarInstance inst;
    inst.X = generate_var(a, T, base_rng);
    inst.X_tilde = generate_var(a, T, tilde_rng);
    const TimeSeriesMatrix x_prime = inst.X + sigma * inst.X_tilde;
    inst.X_sharp.resize(inst.X.rows(), T);
    for (int t = 0; t < T; ++t) inst.X_sharp.col(t) = x_prime.col(pi_star(t));
    inst.A_star = a;
    inst.pi_star = pi_star;
    inst.sigma = sigma;
    inst.theta = a.spectral_norm();
    return inst;
}

inline CvarInstance generate_cvar(const SystemMatrix& a, const Permutation& pi_star, double sigma,
                                  int T, std::uint64_t seed) {
    CounterRng base(seed, Substream::Base);
    CounterRng tilde(seed, Substream::Tilde);
    CvarInstance inst = generate_cvar(a, pi_star, sigma, T, base, tilde);
    inst.seed = seed;
    return inst;
}

/// Full instance from a single seed: system matrix, hidden matching and both series.
inline CvarInstance simulate_instance(int d, int T, double theta, double sigma, std::uint64_t seed,
                                      PermutationKind kind = PermutationKind::Uniform) {
    CounterRng a_rng(seed, Substream::SystemMatrix);
    CounterRng p_rng(seed, Substream::Permutation);
    SystemMatrix a = sample_system_matrix(d, theta, a_rng);
    Permutation pi = sample_permutation(T, kind, p_rng);
    CvarInstance inst = generate_cvar(a, pi, sigma, T, seed);
    inst.theta = theta;
    return inst;
}

}  // namespace cvarmatch
