#pragma once

// Linear assignment in the maximization form  max_pi sum_t W(t, pi(t)).

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "cvarmatch/errors.hpp"
#include "cvarmatch/linalg.hpp"
#include "cvarmatch/model.hpp"

namespace cvarmatch {

struct AssignmentResult {
    Permutation permutation;
    double objective_value = 0.0;
};

/// sum_t W(t, pi(t)), always summed in increasing t.
inline double assignment_value(const Matrix& w, const Permutation& pi) {
    double acc = 0.0;
    for (int t = 0; t < pi.size(); ++t) acc += w(t, pi(t));
    return acc;
}

/// Exact O(T^3) Hungarian method (shortest augmenting paths with potentials).
/// Maximization runs as minimization of -W; rows are inserted in increasing
/// order and ties resolve to the lowest column index, so results are deterministic.
inline AssignmentResult solve_lap_max(const Matrix& w) {
    linalg::require_square(w, "solve_lap_max");
    linalg::require_finite(w, "solve_lap_max");
    const int n = static_cast<int>(w.rows());
    constexpr double inf = std::numeric_limits<double>::infinity();

    // 1-based arrays; column 0 is the virtual source.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> match(n + 1, 0), way(n + 1, 0);
    std::vector<double> minv(n + 1);
    std::vector<char> used(n + 1);

    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = match[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = -w(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> row_to_col(n);
    for (int j = 1; j <= n; ++j) row_to_col[match[j] - 1] = j - 1;
    AssignmentResult res{Permutation(std::move(row_to_col)), 0.0};
    res.objective_value = assignment_value(w, res.permutation);
    return res;
}

inline constexpr int kBruteForceMaxSize = 9;

/// Exhaustive search; among tied maxima the lexicographically smallest permutation wins.
inline AssignmentResult brute_force_lap(const Matrix& w) {
    linalg::require_square(w, "brute_force_lap");
    const int n = static_cast<int>(w.rows());
    if (n > kBruteForceMaxSize) {
        throw SizeGuardError("brute_force_lap: T=" + std::to_string(n) + " exceeds " +
                             std::to_string(kBruteForceMaxSize));
    }
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best = perm;
    double best_value = -std::numeric_limits<double>::infinity();
    do {
        double acc = 0.0;
        for (int t = 0; t < n; ++t) acc += w(t, perm[t]);
        if (acc > best_value) {
            best_value = acc;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return {Permutation(std::move(best)), best_value};
}

struct CycleDecomposition {
    /// Each cycle is zero-based, starts at its largest element and follows the map.
    std::vector<std::vector<int>> cycles;
    std::vector<int> fixed_points;
};

/// Cycles of p o reference^{-1}, acting on the index set of reference's images.
/// Every element of {0..T-1} appears exactly once across cycles and fixed points.
inline CycleDecomposition permutation_cycles(const Permutation& p, const Permutation& reference) {
    if (p.size() != reference.size()) {
        throw DimensionError("permutation_cycles: size mismatch");
    }
    const Permutation sigma = p.compose(reference.inverse());
    const int n = sigma.size();
    CycleDecomposition out;
    std::vector<char> seen(n, 0);
    // Scanning from the top makes the first unseen element of each cycle its maximum.
    for (int start = n - 1; start >= 0; --start) {
        if (seen[start]) continue;
        if (sigma(start) == start) {
            seen[start] = 1;
            continue;
        }
        std::vector<int> cycle;
        int cur = start;
        while (!seen[cur]) {
            seen[cur] = 1;
            cycle.push_back(cur);
            cur = sigma(cur);
        }
        out.cycles.push_back(std::move(cycle));
    }
    for (int i = 0; i < n; ++i) {
        if (sigma(i) == i) out.fixed_points.push_back(i);
    }
    std::reverse(out.cycles.begin(), out.cycles.end());
    return out;
}

}  // namespace cvarmatch
