#include <iostream>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include <gsrl/gsrl.hpp>

#include "oracles.hpp"
#include "support.hpp"

using namespace gsrl;
using namespace gsrl::diagnostics;
using testing_support::random_matrix;

namespace {

/// n x p design with X'X / n = I.
Matrix orthonormal_design(Index n, Index p, std::uint64_t seed)
{
    Eigen::HouseholderQR<Matrix> qr(random_matrix(n, p, seed));
    const Matrix q = qr.householderQ() * Matrix::Identity(n, p);
    return std::sqrt(static_cast<double>(n)) * q;
}

/// Design whose Gram matrix X'X / n equals the given positive definite matrix.
Matrix design_with_gram(const Matrix& gram, Index n, std::uint64_t seed)
{
    const Matrix q = orthonormal_design(n, gram.cols(), seed);
    const Matrix l = gram.llt().matrixU();
    return q * l;
}

} // namespace

TEST(Gir, OrthonormalDesignIsZeroAndXiIsOne)
{
    const Matrix X = orthonormal_design(40, 9, 1);
    const GsrlProblem pr(X, Vector::Ones(40), GroupPartition::equal(9, 3));
    const auto rep = gir_bound(pr, {0, 2});
    EXPECT_TRUE(rep.s11_invertible);
    EXPECT_NEAR(rep.gir_upper_bound, 0.0, 1e-12);
    EXPECT_NEAR(rep.gir_ascent_estimate, 0.0, 1e-12);
    EXPECT_NEAR(xi_inf_bound(pr, {0, 2}), 1.0, 1e-12);
    EXPECT_NEAR(rep.xi_ascent_estimate, 1.0, 1e-9);
}

TEST(Gir, TwoSingletonsGiveAbsoluteCorrelation)
{
    for (double rho : {-0.7, 0.2, 0.55}) {
        Matrix g(2, 2);
        g << 1, rho, rho, 1;
        const Matrix X = design_with_gram(g, 30, 2);
        const auto rep = analyze_design(X, GroupPartition::singletons(2), {0});
        EXPECT_NEAR(rep.gir_upper_bound, std::abs(rho), 1e-12);
        EXPECT_NEAR(rep.gir_ascent_estimate, std::abs(rho), 1e-12);
    }
}

TEST(Gir, SingletonGroupsMatchSignEnumeration)
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const Index p = 12;
        const Index s = 1 + static_cast<Index>(rng() % 8);
        const Matrix X = sim::toeplitz_sample(60, p, 0.6, rng());
        std::vector<Index> support(static_cast<std::size_t>(p));
        std::iota(support.begin(), support.end(), Index{0});
        std::shuffle(support.begin(), support.end(), rng);
        support.resize(static_cast<std::size_t>(s));
        const auto rep = analyze_design(X, GroupPartition::singletons(p), support);
        const auto& b = rep.blocks;
        const Matrix m = b.s21 * b.s11.inverse();
        const double exact = oracle::sign_enumeration(m);
        EXPECT_NEAR(rep.gir_ascent_estimate, exact, 1e-6);
        EXPECT_NEAR(rep.gir_upper_bound, exact, 1e-9);
        EXPECT_LE(rep.gir_ascent_estimate, rep.gir_upper_bound + 1e-12);
    }
}

TEST(Gir, GroupedEstimateNeverExceedsBound)
{
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix X = sim::toeplitz_sample(80, 18, 0.5, rng());
        const auto part = GroupPartition::equal(18, 3);
        const auto rep = analyze_design(X, part, {0, 2, 3});
        EXPECT_GT(rep.gir_ascent_estimate, 0.0);
        EXPECT_LE(rep.gir_ascent_estimate, rep.gir_upper_bound + 1e-12);
        EXPECT_LE(rep.xi_ascent_estimate, rep.xi_inf_bound + 1e-12);
    }
}

TEST(Gir, AscentIsNondecreasing)
{
    const Matrix X = sim::toeplitz_sample(80, 18, 0.5, 5);
    const auto hist = gir_ascent_history(X, GroupPartition::equal(18, 3), {0, 1, 4}, 2);
    ASSERT_GE(hist.size(), 2u);
    for (std::size_t i = 1; i < hist.size(); ++i) EXPECT_GE(hist[i], hist[i - 1] - 1e-15);
}

TEST(Xi, DiagonalGramGivesLargestInverseEntry)
{
    Vector d(3);
    d << 0.5, 2.0, 1.25;
    Matrix g = Matrix::Identity(4, 4);
    g.topLeftCorner(3, 3) = d.asDiagonal();
    const Matrix X = design_with_gram(g, 20, 6);
    const GsrlProblem pr(X, Vector::Ones(20), GroupPartition::singletons(4));
    EXPECT_NEAR(xi_inf_bound(pr, {0, 1, 2}), 2.0, 1e-12);
}

TEST(Xi, SingularBlockIsReportedNotThrownByAnalyze)
{
    Matrix X = random_matrix(10, 4, 7);
    X.col(1) = 2.0 * X.col(0);
    const auto rep = analyze_design(X, GroupPartition::singletons(4), {0, 1});
    EXPECT_FALSE(rep.s11_invertible);
    EXPECT_FALSE(rep.notes.empty());
    const GsrlProblem pr(X, Vector::Ones(10), GroupPartition::singletons(4));
    EXPECT_THROW(xi_inf_bound(pr, {0, 1}), InputError);
}

TEST(Support, InvalidGroupIsRejected)
{
    const Matrix X = random_matrix(10, 4, 8);
    EXPECT_THROW(analyze_design(X, GroupPartition::singletons(4), {4}), InputError);
    EXPECT_THROW(analyze_design(X, GroupPartition::singletons(4), {-1}), InputError);
}

TEST(EventFrequency, Extremes)
{
    const Matrix X = random_matrix(30, 6, 9);
    const auto part = GroupPartition::equal(6, 2);
    EXPECT_EQ(event_frequency(X, part, 1e12, 1.0, 200, 1), 1.0);
    EXPECT_EQ(event_frequency(X, part, 0.0, 1.0, 200, 1), 0.0);
}

TEST(EventFrequency, DeterministicGivenSeed)
{
    const Matrix X = random_matrix(30, 6, 10);
    const auto part = GroupPartition::equal(6, 2);
    EXPECT_EQ(event_frequency(X, part, 4.0, 1.0, 300, 5), event_frequency(X, part, 4.0, 1.0, 300, 5));
}

TEST(EventFrequency, CorollaryLevelHoldsWithHighProbability)
{
    const Index n = 200, p = 20;
    const Matrix X = sim::toeplitz_sample(n, p, 0.5, 11);
    const auto part = GroupPartition::equal(p, 2);
    const double alpha = 0.05;
    const auto in = make_tuning_inputs(X, part, alpha);
    const double lam = lambda_corollary(in, NoiseEvent::a);
    const Index draws = 2000;
    const double freq = event_frequency(X, part, lam, in.gamma_bar, draws, 12);
    EXPECT_GE(freq, 1.0 - alpha - 3.0 * std::sqrt(alpha * (1 - alpha) / draws));
}

TEST(Cone, MembershipCases)
{
    const auto part = GroupPartition::equal(6, 2);
    Vector on_s = Vector::Zero(6);
    on_s(0) = 1.0;
    EXPECT_TRUE(cone_membership(on_s, part, {0}, 1.5));
    Vector off_s = Vector::Zero(6);
    off_s(4) = 1.0;
    EXPECT_FALSE(cone_membership(off_s, part, {0}, 100.0));
    // Equality: outside mass = 3 = gamma * inside mass.
    Vector edge = Vector::Zero(6);
    edge(0) = 1.0;
    edge(2) = 3.0;
    EXPECT_TRUE(cone_membership(edge, part, {0}, 3.0));
    Vector more = edge;
    more(2) *= 1.0 + 1e-6;
    EXPECT_FALSE(cone_membership(more, part, {0}, 3.0));
    Vector less = edge;
    less(2) *= 1.0 - 1e-6;
    EXPECT_TRUE(cone_membership(less, part, {0}, 3.0));
    EXPECT_THROW(cone_membership(edge, part, {0}, 1.0), InputError);
}

TEST(Sparsity, ScalarAndBoundary)
{
    EXPECT_TRUE(sparsity_condition(1, 100, 1, 10));
    EXPECT_FALSE(sparsity_condition(100, 100, 1, 10));
    EXPECT_THROW(sparsity_condition(1, 100, 0, 10), InputError);
}

TEST(Sparsity, Table2PresetIsEvaluated)
{
    const auto e = sim::table2_preset(60, 1, 1);
    const Matrix X = sim::toeplitz_sample(e.n, e.p, e.rho, 1);
    const auto f = lambda_fdist(make_tuning_inputs(X, e.partition(), 0.01));
    const TrueModel truth(e.beta0, 1.0, e.partition());
    const double limit = e.n * e.n * 0.25 / (f.lambda0 * f.lambda0);
    EXPECT_EQ(sparsity_condition(truth.s_star, e.n, 0.5, f.lambda0), truth.s_star < limit);
    std::cout << "s* = " << truth.s_star << ", n^2 kappa^2 / lambda^2 = " << limit << "\n";
}
