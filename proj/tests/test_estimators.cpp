#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "test_support.hpp"

using namespace cvarmatch;
using namespace cvarmatch::oracles;
using cvarmatch::testing::gaussian_matrix;

TEST(SimilarityMatrix, EntriesAreInnerProducts) {
    const CvarInstance inst = simulate_instance(4, 12, 0.5, 1.0, 3);
    const Matrix w = similarity_matrix(inst.X, inst.X_sharp);
    for (int t = 0; t < 12; ++t)
        for (int u = 0; u < 12; ++u) EXPECT_NEAR(w(t, u), inst.X_sharp.col(t).dot(inst.X.col(u)), 1e-12);
}

TEST(EstimateLa, ZeroNoiseRecoversTruth) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const CvarInstance inst = simulate_instance(3, 40, 0.5, 0.0, s);
        const EstimationResult r = estimate_la(inst.X, inst.X_sharp);
        EXPECT_EQ(r.pi_hat, inst.pi_star);
        EXPECT_EQ(r.algorithm_tag, "LA");
        EXPECT_GE(r.wall_time_ms, 0.0);
    }
}

TEST(EstimateLa, EasyRegimeWithZeroSystem) {
    double mean = 0.0;
    for (std::uint64_t s = 0; s < 30; ++s) {
        const CvarInstance inst = simulate_instance(50, 5, 0.0, 0.1, s);
        mean += recovery_fraction(estimate_la(inst.X, inst.X_sharp).pi_hat, inst.pi_star) / 30.0;
    }
    EXPECT_GE(mean, 0.99);
}

TEST(EstimateLa, InvariantUnderCommonOrthogonalTransform) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const CvarInstance inst = simulate_instance(4, 30, 0.5, 1.0, s);
        const Matrix q = gaussian_matrix(4, 4, s + 7).householderQr().householderQ();
        EXPECT_EQ(estimate_la(q * inst.X, q * inst.X_sharp).pi_hat, estimate_la(inst.X, inst.X_sharp).pi_hat);
    }
}

TEST(EstimateLa, DimensionMismatchThrows) {
    EXPECT_THROW(estimate_la(Matrix::Zero(2, 4), Matrix::Zero(2, 5)), DimensionError);
}

TEST(NoiselessMatch, Examples) {
    const CvarInstance inst = simulate_instance(3, 25, 0.5, 0.0, 4);
    EXPECT_EQ(noiseless_match(inst.X, inst.X_sharp), inst.pi_star);
    EXPECT_EQ(estimate_noiseless(inst.X, inst.X_sharp).algorithm_tag, "Noiseless");
    EXPECT_EQ(noiseless_match(inst.X, inst.X), Permutation::identity(25));

    const CvarInstance noisy = simulate_instance(3, 25, 0.5, 0.5, 4);
    EXPECT_THROW(noiseless_match(noisy.X, noisy.X_sharp), DegenerateInstanceError);

    Matrix dup = inst.X;
    dup.col(1) = dup.col(0);
    EXPECT_THROW(noiseless_match(dup, dup), DegenerateInstanceError);
}

TEST(RoundToPermutation, Examples) {
    const Permutation p = Permutation::from_one_based({3, 1, 2, 5, 4});
    EXPECT_EQ(round_to_permutation(p.matrix()), p);
    const Permutation tie = round_to_permutation(barycenter(6));
    for (int rep = 0; rep < 3; ++rep) EXPECT_EQ(round_to_permutation(barycenter(6)), tie);
}

TEST(RoundToPermutation, AttainsExhaustiveMaximum) {
    CounterRng rng(3, 3);
    for (int rep = 0; rep < 50; ++rep) {
        const int n = 1 + static_cast<int>(rng.below(7));
        const Matrix m = gaussian_matrix(n, n, rng);
        EXPECT_NEAR(assignment_value(m, round_to_permutation(m)), brute_force_lap(m).objective_value, 1e-12);
    }
}

TEST(RelaxMleRound, ZeroNoiseBirkhoffRecoversTruth) {
    for (std::uint64_t s = 0; s < 3; ++s) {
        const CvarInstance inst = simulate_instance(4, 25, 0.5, 0.0, s);
        const EstimationResult r =
            relax_mle_round(inst.X, inst.X_sharp, inst.A_star, RelaxationKind::birkhoff(), SolverConfig{});
        EXPECT_EQ(r.pi_hat, inst.pi_star);
        EXPECT_EQ(r.algorithm_tag, "RelaxMLE-Birkhoff");
        EXPECT_LE(r.objective_final, 1e-18);
    }
}

TEST(RelaxMleRound, ZeroSystemAgreesWithLa) {
    int agree = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const CvarInstance inst = simulate_instance(5, 20, 0.0, 0.3, s);
        const EstimationResult r = relax_mle_round(inst.X, inst.X_sharp, SystemMatrix::zero(5),
                                                   RelaxationKind::birkhoff(), SolverConfig{});
        agree += r.pi_hat == estimate_la(inst.X, inst.X_sharp).pi_hat;
    }
    EXPECT_EQ(agree, 10);
}

TEST(RelaxMleRound, ZeroIterationsRoundsBarycenter) {
    const CvarInstance inst = simulate_instance(3, 9, 0.5, 1.0, 1);
    SolverConfig cfg;
    cfg.max_iters = 0;
    const EstimationResult r = relax_mle_round(inst.X, inst.X_sharp, inst.A_star, RelaxationKind::simplex(), cfg);
    EXPECT_EQ(r.pi_hat, round_to_permutation(barycenter(9)));
    EXPECT_EQ(r.iterations, 0);
}

TEST(RelaxMleRound, DescentFromTruth) {
    for (const RelaxationKind& kind : {RelaxationKind::birkhoff(), RelaxationKind::frank_wolfe()}) {
        for (std::uint64_t s = 0; s < 5; ++s) {
            const CvarInstance inst = simulate_instance(4, 15, 0.5, 1.0, s);
            const Matrix truth = inst.pi_star.matrix();
            Matrix relaxed;
            relax_mle_round(inst.X, inst.X_sharp, inst.A_star, kind, SolverConfig{}, truth, &relaxed);
            const RelaxedObjective f(inst.X, inst.X_sharp, inst.A_star);
            EXPECT_LE(f.value(relaxed), f.value(truth) + 1e-6) << kind.name() << " seed " << s;
        }
    }
}

TEST(RelaxMleRound, ObjectiveFinalIsValueAtRoundedPermutation) {
    const CvarInstance inst = simulate_instance(3, 12, 0.5, 1.0, 6);
    const EstimationResult r =
        relax_mle_round(inst.X, inst.X_sharp, inst.A_star, RelaxationKind::hyperplane(), SolverConfig{});
    EXPECT_NEAR(r.objective_final,
                objective_value(r.pi_hat.matrix(), inst.X, inst.X_sharp, inst.A_star), 1e-9);
}

TEST(AUpdate, CollapsesToOlsWhenCouplingVanishes) {
    const CvarInstance inst = simulate_instance(3, 40, 0.5, 0.0, 2);
    const AUpdateResult a = a_update(inst.X, inst.X_sharp, inst.pi_star, 1e-6);
    const Matrix xs = linalg::times_shift(inst.X);
    const Matrix ols = inst.X * xs.transpose() * (xs * xs.transpose()).inverse();
    EXPECT_LE((a.A.matrix() - ols).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((ols_system_matrix(inst.X).A.matrix() - ols).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_FALSE(a.rank_deficient);
}

TEST(AUpdate, StationaryPoint) {
    CounterRng rng(17, 3);
    for (int rep = 0; rep < 50; ++rep) {
        const int d = 1 + static_cast<int>(rng.below(4));
        const int T = 5 + static_cast<int>(rng.below(20));
        const double sigma = 0.3 + 1.7 * rng.uniform();
        const CvarInstance inst = simulate_instance(d, T, 0.6, sigma, 300 + rep);
        const Permutation pi = sample_permutation(T, PermutationKind::Uniform, rng);
        const Matrix a = a_update(inst.X, inst.X_sharp, pi, sigma).A.matrix();
        // The objective is quadratic in A, so central differences carry rounding error only.
        const Matrix g = central_difference_in_a(inst.X, inst.X_sharp, a, pi.matrix(), sigma, 1e-3);
        EXPECT_LE(g.norm(), 1e-6 * (1.0 + a.norm())) << "rep " << rep;
    }
}

TEST(AUpdate, ScalarWeightedLeastSquares) {
    const CvarInstance inst = simulate_instance(1, 30, 0.7, 0.8, 9);
    const Permutation pi = Permutation::identity(30);
    const double w = 1.0 / (0.8 * 0.8);
    double num = 0.0, den = 0.0;
    for (int t = 1; t < 30; ++t) {
        const double x_now = inst.X(0, t), x_prev = inst.X(0, t - 1);
        const double g_now = inst.X_sharp(0, t) - x_now, g_prev = inst.X_sharp(0, t - 1) - x_prev;
        num += x_now * x_prev + w * g_now * g_prev;
        den += x_prev * x_prev + w * g_prev * g_prev;
    }
    EXPECT_NEAR(a_update(inst.X, inst.X_sharp, pi, 0.8).A.matrix()(0, 0), num / den, 1e-12);
}

TEST(AUpdate, ExactMinimizerAtFixedPermutation) {
    CounterRng rng(4, 3);
    for (int rep = 0; rep < 20; ++rep) {
        const CvarInstance inst = simulate_instance(3, 20, 0.5, 1.0, 40 + rep);
        const Permutation pi = sample_permutation(20, PermutationKind::Uniform, rng);
        const Matrix a_hat = a_update(inst.X, inst.X_sharp, pi, 1.0).A.matrix();
        const double best = joint_objective(inst.X, inst.X_sharp, a_hat, pi, 1.0);
        EXPECT_NEAR(best, joint_objective_sum_form(inst.X, inst.X_sharp, a_hat, pi.matrix(), 1.0), 1e-9 * best);
        for (int k = 0; k < 5; ++k) {
            const Matrix other = a_hat + 0.1 * gaussian_matrix(3, 3, rng);
            EXPECT_LE(best, joint_objective(inst.X, inst.X_sharp, other, pi, 1.0) + 1e-9);
        }
        EXPECT_LE(best, joint_objective(inst.X, inst.X_sharp, inst.A_star.matrix(), pi, 1.0) + 1e-9);
    }
}

TEST(AUpdate, RankDeficiencyIsFlagged) {
    // Without noise the coupled term vanishes at the truth and the Gram matrix has rank T - 1 < d.
    const CvarInstance inst = simulate_instance(6, 4, 0.5, 0.0, 1);
    const AUpdateResult a = a_update(inst.X, inst.X_sharp, inst.pi_star, 1.0);
    EXPECT_TRUE(a.rank_deficient);
    EXPECT_TRUE(a.A.matrix().allFinite());
}

TEST(AUpdate, Errors) {
    const CvarInstance inst = simulate_instance(2, 6, 0.5, 1.0, 1);
    EXPECT_THROW(a_update(inst.X, inst.X_sharp, inst.pi_star, 0.0), DomainError);
    EXPECT_THROW(a_update(inst.X, inst.X_sharp, Permutation::identity(5), 1.0), DimensionError);
    EXPECT_THROW(ols_system_matrix(Matrix::Zero(2, 1)), DimensionError);
}

TEST(AlternatingMinimization, ZeroRoundsReturnsStart) {
    const CvarInstance inst = simulate_instance(3, 10, 0.5, 1.0, 2);
    const Permutation pi0 = Permutation::from_one_based({2, 1, 3, 4, 5, 6, 7, 8, 10, 9});
    const EstimationResult r =
        alternating_minimization(inst.X, inst.X_sharp, 1.0, pi0, 0, RelaxationKind::simplex(), SolverConfig{});
    EXPECT_EQ(r.pi_hat, pi0);
    EXPECT_FALSE(r.A_hat.has_value());
    EXPECT_EQ(r.algorithm_tag, "AltMin-Simplex");
}

TEST(AlternatingMinimization, EachAStepLowersJointObjective) {
    const CvarInstance inst = simulate_instance(3, 20, 0.5, 0.7, 5);
    const Permutation pi0 = initial_permutation(InitPolicy::Uniform, inst.X, inst.X_sharp, inst.seed);
    Permutation pi_prev = pi0;
    std::optional<Matrix> a_prev;
    for (int k = 1; k <= 5; ++k) {
        const EstimationResult r = alternating_minimization(inst.X, inst.X_sharp, 0.7, pi0, k,
                                                            RelaxationKind::hyperplane(), SolverConfig{});
        const Matrix a_k = r.A_hat->matrix();
        const double after = joint_objective(inst.X, inst.X_sharp, a_k, pi_prev, 0.7);
        const Matrix before_a = a_prev ? *a_prev : inst.A_star.matrix();
        EXPECT_LE(after, joint_objective(inst.X, inst.X_sharp, before_a, pi_prev, 0.7) + 1e-9) << "k=" << k;
        a_prev = a_k;
        pi_prev = r.pi_hat;
    }
}

TEST(AlternatingMinimization, ZeroNoiseRecoversTruth) {
    for (std::uint64_t s = 0; s < 3; ++s) {
        const CvarInstance inst = simulate_instance(4, 20, 0.5, 0.0, s);
        const Permutation pi0 = initial_permutation(InitPolicy::Uniform, inst.X, inst.X_sharp, inst.seed);
        const EstimationResult r =
            alternating_minimization(inst.X, inst.X_sharp, 0.0, pi0, 2, RelaxationKind::simplex(), SolverConfig{});
        EXPECT_EQ(r.pi_hat, inst.pi_star);
    }
}

TEST(AlternatingMinimization, WarmStartIsDeterministic) {
    const CvarInstance inst = simulate_instance(3, 15, 0.5, 0.5, 8);
    const Permutation pi0 = initial_permutation(InitPolicy::Identity, inst.X, inst.X_sharp, 0);
    const auto run = [&] {
        return alternating_minimization(inst.X, inst.X_sharp, 0.5, pi0, 3, RelaxationKind::frank_wolfe(),
                                        SolverConfig{}, true);
    };
    const EstimationResult a = run(), b = run();
    EXPECT_EQ(a.pi_hat, b.pi_hat);
    EXPECT_EQ(a.A_hat->matrix(), b.A_hat->matrix());
    EXPECT_EQ(a.iterations, b.iterations);
}

TEST(AlternatingMinimization, ParityWithLa) {
    double la = 0.0, alt = 0.0;
    for (std::uint64_t s = 0; s < 30; ++s) {
        const CvarInstance inst = simulate_instance(5, 50, 0.5, 0.5, 1000 + s);
        la += recovery_fraction(estimate_la(inst.X, inst.X_sharp).pi_hat, inst.pi_star) / 30.0;
        const Permutation pi0 = initial_permutation(InitPolicy::Uniform, inst.X, inst.X_sharp, inst.seed);
        const EstimationResult r = alternating_minimization(inst.X, inst.X_sharp, 0.5, pi0, 5,
                                                            RelaxationKind::hyperplane(), SolverConfig{});
        alt += recovery_fraction(r.pi_hat, inst.pi_star) / 30.0;
    }
    EXPECT_LE(std::abs(la - alt), 0.05) << "LA " << la << " AltMin " << alt;
}

TEST(InitialPermutation, Policies) {
    const CvarInstance inst = simulate_instance(3, 12, 0.5, 0.2, 3);
    EXPECT_EQ(initial_permutation(InitPolicy::Identity, inst.X, inst.X_sharp, 1), Permutation::identity(12));
    EXPECT_EQ(initial_permutation(InitPolicy::Uniform, inst.X, inst.X_sharp, 1),
              initial_permutation(InitPolicy::Uniform, inst.X, inst.X_sharp, 1));
    EXPECT_NE(initial_permutation(InitPolicy::Uniform, inst.X, inst.X_sharp, 1),
              initial_permutation(InitPolicy::Uniform, inst.X, inst.X_sharp, 2));
    EXPECT_EQ(initial_permutation(InitPolicy::LaWarm, inst.X, inst.X_sharp, 1),
              estimate_la(inst.X, inst.X_sharp).pi_hat);
    EXPECT_EQ(parse_init_policy("la_warm"), InitPolicy::LaWarm);
    EXPECT_THROW(parse_init_policy("random"), ConfigError);
}

TEST(EstimateAFirst, ZeroNoiseRecoversTruth) {
    for (std::uint64_t s = 0; s < 3; ++s) {
        const CvarInstance inst = simulate_instance(4, 20, 0.5, 0.0, s);
        const EstimationResult r = estimate_a_first(inst.X, inst.X_sharp, RelaxationKind::frank_wolfe(), SolverConfig{});
        EXPECT_EQ(r.pi_hat, inst.pi_star);
        EXPECT_EQ(r.algorithm_tag, "A-First-FW");
        ASSERT_TRUE(r.A_hat.has_value());
    }
}

TEST(EstimateAFirst, OlsErrorShrinksWithT) {
    double mse[3] = {0, 0, 0};
    const int lengths[3] = {10, 50, 200};
    for (int k = 0; k < 3; ++k) {
        for (std::uint64_t s = 0; s < 30; ++s) {
            const CvarInstance inst = simulate_instance(5, lengths[k], 0.5, 0.5, s);
            mse[k] += mse_system_matrix(ols_system_matrix(inst.X).A, inst.A_star) / 30.0;
        }
    }
    EXPECT_GT(mse[0], mse[1]);
    EXPECT_GT(mse[1], mse[2]);
}

TEST(EstimateAFirst, CloseToKnownSystemAtSmallNoise) {
    double first = 0.0, known = 0.0;
    for (std::uint64_t s = 0; s < 30; ++s) {
        const CvarInstance inst = simulate_instance(5, 50, 0.5, 0.2, 2000 + s);
        const RelaxationKind kind = RelaxationKind::hyperplane();
        first += recovery_fraction(estimate_a_first(inst.X, inst.X_sharp, kind, SolverConfig{}).pi_hat,
                                   inst.pi_star) / 30.0;
        known += recovery_fraction(relax_mle_round(inst.X, inst.X_sharp, inst.A_star, kind, SolverConfig{}).pi_hat,
                                   inst.pi_star) / 30.0;
    }
    EXPECT_LE(std::abs(first - known), 0.05) << "A-first " << first << " known " << known;
}

TEST(Estimators, Deterministic) {
    const CvarInstance inst = simulate_instance(3, 14, 0.5, 0.8, 12);
    for (const RelaxationKind& kind : {RelaxationKind::hyperplane(), RelaxationKind::simplex(),
                                       RelaxationKind::birkhoff(), RelaxationKind::frank_wolfe()}) {
        const EstimationResult a = relax_mle_round(inst.X, inst.X_sharp, inst.A_star, kind, SolverConfig{});
        const EstimationResult b = relax_mle_round(inst.X, inst.X_sharp, inst.A_star, kind, SolverConfig{});
        EXPECT_EQ(a.pi_hat, b.pi_hat);
        EXPECT_EQ(a.objective_final, b.objective_final);
        EXPECT_EQ(a.iterations, b.iterations);
    }
}
