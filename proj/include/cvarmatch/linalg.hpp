#pragma once

// Dense kernels shared by the rest of the library. Everything here is a pure
// function of its arguments; all factorizations are exact dense ones.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cvarmatch/errors.hpp"

namespace cvarmatch {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kDefaultRankTol = 1e-8;
inline constexpr double kPsdTol = 1e-10;

namespace linalg {

inline void require_nonempty(const Matrix& m, const char* what) {
    if (m.rows() == 0 || m.cols() == 0) {
        throw DimensionError(std::string(what) + ": empty matrix");
    }
}

inline void require_square(const Matrix& m, const char* what) {
    require_nonempty(m, what);
    if (m.rows() != m.cols()) {
        throw DimensionError(std::string(what) + ": expected a square matrix, got " +
                             std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

inline void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) {
        throw DomainError(std::string(what) + ": matrix has non-finite entries");
    }
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) +
                             "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                             "x" + std::to_string(b.cols()));
    }
}

/// Largest singular value.
inline double spectral_norm(const Matrix& m) {
    require_nonempty(m, "spectral_norm");
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

/// Moore-Penrose pseudo-inverse. Singular values at or below
/// max(rows, cols) * eps * sigma_max are treated as zero.
inline Matrix pseudo_inverse(const Matrix& m) {
    require_nonempty(m, "pseudo_inverse");
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const double cutoff = static_cast<double>(std::max(m.rows(), m.cols())) *
                          std::numeric_limits<double>::epsilon() * s(0);
    Vector s_inv = Vector::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > cutoff) s_inv(i) = 1.0 / s(i);
    }
    return svd.matrixV() * s_inv.asDiagonal() * svd.matrixU().transpose();
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
    require_nonempty(a, "kron");
    require_nonempty(b, "kron");
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

/// Integer matrix power, A^0 = I.
inline Matrix matrix_power(const Matrix& a, int p) {
    require_square(a, "matrix_power");
    if (p < 0) throw DomainError("matrix_power: negative exponent");
    Matrix result = Matrix::Identity(a.rows(), a.cols());
    Matrix base = a;
    while (p > 0) {
        if (p & 1) result = result * base;
        p >>= 1;
        if (p > 0) base = base * base;
    }
    return result;
}

/// T x T upper shift: ones on the first superdiagonal.
inline Matrix shift_matrix(Eigen::Index T) {
    if (T < 1) throw DimensionError("shift_matrix: T must be positive");
    Matrix s = Matrix::Zero(T, T);
    for (Eigen::Index i = 0; i + 1 < T; ++i) s(i, i + 1) = 1.0;
    return s;
}

/// M * S without forming S: column j becomes column j-1, column 0 becomes zero.
inline Matrix times_shift(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    if (m.cols() == 0) return out;
    out.col(0).setZero();
    out.rightCols(m.cols() - 1) = m.leftCols(m.cols() - 1);
    return out;
}

/// M * S^T: column j becomes column j+1, the last column becomes zero.
inline Matrix times_shift_transpose(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    if (m.cols() == 0) return out;
    out.leftCols(m.cols() - 1) = m.rightCols(m.cols() - 1);
    out.col(m.cols() - 1).setZero();
    return out;
}

}  // namespace linalg

/// Symmetric positive semidefinite matrix with its spectrum computed once.
/// The input is symmetrized as (M + M^T) / 2, so entry(i, j) == entry(j, i) exactly.
class SymmetricPsdMatrix {
public:
    explicit SymmetricPsdMatrix(const Matrix& m) {
        linalg::require_square(m, "SymmetricPsdMatrix");
        linalg::require_finite(m, "SymmetricPsdMatrix");
        data_ = 0.5 * (m + m.transpose());
        Eigen::SelfAdjointEigenSolver<Matrix> eig(data_, Eigen::EigenvaluesOnly);
        eigenvalues_ = eig.eigenvalues();  // ascending
        const double scale = eigenvalues_.cwiseAbs().maxCoeff();
        if (eigenvalues_(0) < -kPsdTol * scale) {
            throw NotPsdError("SymmetricPsdMatrix: eigenvalue " + std::to_string(eigenvalues_(0)) +
                              " is negative beyond tolerance");
        }
    }

    const Matrix& matrix() const { return data_; }
    Eigen::Index dim() const { return data_.rows(); }
    /// Ascending.
    const Vector& eigenvalues() const { return eigenvalues_; }
    double lambda_max() const { return eigenvalues_(eigenvalues_.size() - 1); }
    double lambda_min() const { return eigenvalues_(0); }

private:
    Matrix data_;
    Vector eigenvalues_;
};

namespace linalg {

inline void check_rank_tol(double rank_tol) {
    if (!(rank_tol > 0.0 && rank_tol < 1.0)) {
        throw DomainError("rank_tol must lie in (0, 1)");
    }
}

inline int numeric_rank(const SymmetricPsdMatrix& s, double rank_tol = kDefaultRankTol) {
    check_rank_tol(rank_tol);
    const double cut = rank_tol * s.lambda_max();
    int r = 0;
    for (Eigen::Index i = 0; i < s.eigenvalues().size(); ++i) {
        if (s.eigenvalues()(i) > cut) ++r;
    }
    return r;
}

/// Log of the product of eigenvalues above rank_tol * lambda_max; 0 for the zero matrix.
inline double log_pseudo_determinant(const SymmetricPsdMatrix& s,
                                     double rank_tol = kDefaultRankTol) {
    check_rank_tol(rank_tol);
    const double cut = rank_tol * s.lambda_max();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < s.eigenvalues().size(); ++i) {
        const double l = s.eigenvalues()(i);
        if (l > cut) acc += std::log(l);
    }
    return acc;
}

inline double pseudo_determinant(const SymmetricPsdMatrix& s, double rank_tol = kDefaultRankTol) {
    return std::exp(log_pseudo_determinant(s, rank_tol));
}

/// Laplacian of the t-cycle, built as D D^T from the incidence matrix of the
/// directed cycle 1 -> 2 -> ... -> t together with the closing edge 1 -> t.
/// For t = 2 the two edges are parallel.
inline SymmetricPsdMatrix cycle_laplacian(int t) {
    if (t < 2) throw DomainError("cycle_laplacian: t must be at least 2");
    Matrix incidence = Matrix::Zero(t, t);
    for (int k = 0; k + 1 < t; ++k) {
        incidence(k, k) = 1.0;
        incidence(k + 1, k) = -1.0;
    }
    incidence(0, t - 1) = 1.0;
    incidence(t - 1, t - 1) = -1.0;
    return SymmetricPsdMatrix(incidence * incidence.transpose());
}

}  // namespace linalg
}  // namespace cvarmatch
