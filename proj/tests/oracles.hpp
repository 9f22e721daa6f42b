#pragma once

// Reference computations that the tests and the acceptance runner compare the
// library against. Each one takes a different route from the code under test:
// explicit sums, dual solves or dense factorizations.

#include <algorithm>
#include <functional>
#include <utility>
#include <vector>

#include "cvarmatch/cvarmatch.hpp"

namespace cvarmatch::oracles {

// Column-by-column evaluation of
//   sum_t || (X# Pi)_t - A (X# Pi)_{t-1} - (x_t - A x_{t-1}) ||^2,
// where the predecessor terms are absent for the first column.
inline double objective_sum_form(const Matrix& pi, const Matrix& x, const Matrix& xs, const Matrix& a) {
    const Matrix y = xs * pi;
    double acc = 0.0;
    for (Eigen::Index t = 0; t < x.cols(); ++t) {
        Vector r = y.col(t) - x.col(t);
        if (t > 0) r -= a * (y.col(t - 1) - x.col(t - 1));
        acc += r.squaredNorm();
    }
    return acc;
}

// Solves sum_j max(c_j + s, 0) = 1 for s exactly.
inline double unit_mass_shift(std::vector<double> c) {
    std::sort(c.begin(), c.end(), std::greater<>());
    double prefix = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
        prefix += c[k];
        const double s = (1.0 - prefix) / static_cast<double>(k + 1);
        const bool next_off = k + 1 == c.size() || c[k + 1] + s <= 0.0;
        if (c[k] + s > 0.0 && next_off) return s;
    }
    return (1.0 - prefix) / static_cast<double>(c.size());
}

// Euclidean projection onto the Birkhoff polytope through its dual: the
// minimizer is Y_ij = max(Z_ij + a_i + b_j, 0). Exact block coordinate ascent
// on (a, b), then an active-set polish that solves the marginal equations on
// the identified support.
inline Matrix birkhoff_projection_oracle(const Matrix& z) {
    const int n = static_cast<int>(z.rows());
    Vector a = Vector::Zero(n), b = Vector::Zero(n);
    const auto primal = [&] {
        Matrix y(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) y(i, j) = std::max(z(i, j) + a(i) + b(j), 0.0);
        return y;
    };
    for (int it = 0; it < 200000; ++it) {
        for (int i = 0; i < n; ++i) {
            std::vector<double> c(n);
            for (int j = 0; j < n; ++j) c[j] = z(i, j) + b(j);
            a(i) = unit_mass_shift(c);
        }
        for (int j = 0; j < n; ++j) {
            std::vector<double> c(n);
            for (int i = 0; i < n; ++i) c[i] = z(i, j) + a(i);
            b(j) = unit_mass_shift(c);
        }
        const Matrix y = primal();
        const double viol = (y.rowwise().sum().array() - 1.0).abs().maxCoeff();
        if (viol < 1e-13) break;
    }

    Matrix y = primal();
    std::vector<std::pair<int, int>> support;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (y(i, j) > 1e-12) support.emplace_back(i, j);
    Matrix sys = Matrix::Zero(2 * n, 2 * n);
    Vector rhs = Vector::Ones(2 * n);
    for (const auto& [i, j] : support) {
        sys(i, i) += 1.0;
        sys(i, n + j) += 1.0;
        rhs(i) -= z(i, j);
        sys(n + j, i) += 1.0;
        sys(n + j, n + j) += 1.0;
        rhs(n + j) -= z(i, j);
    }
    const Vector ab = sys.completeOrthogonalDecomposition().solve(rhs);
    Matrix polished = Matrix::Zero(n, n);
    for (const auto& [i, j] : support) polished(i, j) = z(i, j) + ab(i) + ab(n + j);
    return polished;
}

// ||X - A X S||^2 + sigma^-2 ||X# Pi - A X# Pi S - (X - A X S)||^2, column by column.
inline double joint_objective_sum_form(const Matrix& x, const Matrix& xs, const Matrix& a, const Matrix& pi,
                                double sigma) {
    const Matrix y = xs * pi;
    double base = 0.0, coupled = 0.0;
    for (Eigen::Index t = 0; t < x.cols(); ++t) {
        Vector e = x.col(t);
        Vector r = y.col(t) - x.col(t);
        if (t > 0) {
            e -= a * x.col(t - 1);
            r -= a * (y.col(t - 1) - x.col(t - 1));
        }
        base += e.squaredNorm();
        coupled += r.squaredNorm();
    }
    return base + coupled / (sigma * sigma);
}

inline Matrix central_difference_in_a(const Matrix& x, const Matrix& xs, const Matrix& a, const Matrix& pi,
                               double sigma, double h) {
    Matrix g(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            Matrix up = a, dn = a;
            up(i, j) += h;
            dn(i, j) -= h;
            g(i, j) = (joint_objective_sum_form(x, xs, up, pi, sigma) -
                       joint_objective_sum_form(x, xs, dn, pi, sigma)) /
                      (2 * h);
        }
    }
    return g;
}

// Block column r: block row j is A^{r-j} for j <= r, zero below.
inline Matrix power_column(const Matrix& a, int r, int rows) {
    const int d = static_cast<int>(a.rows());
    Matrix col = Matrix::Zero(rows * d, d);
    for (int j = 1; j <= r; ++j) col.block((j - 1) * d, 0, d, d) = linalg::matrix_power(a, r - j);
    return col;
}

// Coefficient of xi_j in x_a - x_b for the recursion started at x_1 = xi_1.
inline Matrix innovation_coefficient(const Matrix& a, int ia, int ib, int j) {
    Matrix c = Matrix::Zero(a.rows(), a.cols());
    if (j <= ia) c += linalg::matrix_power(a, ia - j);
    if (j <= ib) c -= linalg::matrix_power(a, ib - j);
    return c;
}

inline double log_abs_det(const Matrix& m) {
    const Eigen::PartialPivLU<Matrix> lu(m);
    return lu.matrixLU().diagonal().cwiseAbs().array().log().sum();
}

}  // namespace cvarmatch::oracles
