#include <iostream>
#include <random>

#include <gtest/gtest.h>

#include <gsrl/gsrl.hpp>

#include "oracles.hpp"
#include "support.hpp"

using namespace gsrl;
using testing_support::random_matrix;
using testing_support::random_problem;

TEST(SoftThreshold, ZeroInputStaysZero)
{
    EXPECT_EQ(soft_threshold_group(Vector::Zero(3), 0.7).norm(), 0.0);
    EXPECT_EQ(soft_threshold_group(Vector::Zero(3), 0.0).norm(), 0.0);
}

TEST(SoftThreshold, BoundaryMapsToZero)
{
    Vector a(2);
    a << 3, 4;
    EXPECT_EQ(soft_threshold_group(a, 5.0).norm(), 0.0);
}

TEST(SoftThreshold, ShrinksNormByThreshold)
{
    Vector a(2);
    a << 3, 4;
    const Vector out = soft_threshold_group(a, 2.5);
    EXPECT_NEAR(out(0), 1.5, 1e-15);
    EXPECT_NEAR(out(1), 2.0, 1e-15);
    EXPECT_THROW(soft_threshold_group(a, -1.0), InputError);
}

TEST(SoftThreshold, Nonexpansive)
{
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> unif(0.0, 3.0);
    for (int t = 0; t < 2000; ++t) {
        const Index d = 1 + static_cast<Index>(rng() % 6);
        const Vector x = random_matrix(d, 1, rng()).col(0);
        const Vector y = random_matrix(d, 1, rng()).col(0);
        const double lam = unif(rng);
        EXPECT_LE((soft_threshold_group(x, lam) - soft_threshold_group(y, lam)).norm(), (x - y).norm() + 1e-12);
    }
}

TEST(Stisp, HandEvaluatedUpdate)
{
    Matrix u(2, 1);
    u << 0.6, 0.8;
    Vector Y(2);
    Y << 1, 0;
    const GsrlProblem scaled(u, Y, GroupPartition::singletons(1));
    const Vector next = stisp_iterate(scaled, Vector::Zero(1), Vector::Constant(1, 0.5));
    EXPECT_NEAR(next(0), 0.1, 1e-15);
}

TEST(Stisp, LargeThresholdsGiveZero)
{
    const auto pr = random_problem(10, 6, 31);
    const Vector beta = Vector::Constant(6, 0.1);
    const Vector r = pr.Y - pr.X * beta;
    const Vector a = beta + pr.X.transpose() * r;
    Vector lam(pr.q());
    for (Index j = 0; j < pr.q(); ++j) lam(j) = 1.01 * pr.partition.block_norm(a, j) / r.norm();
    EXPECT_EQ(stisp_iterate(pr, beta, lam).norm(), 0.0);
}

TEST(Stisp, KktPointIsFixedPoint)
{
    // One column, objective ||Y - u b|| + lam |b| minimized by golden section.
    Matrix u(3, 1);
    u << 0.5, -0.3, 0.4;
    Vector Y(3);
    Y << 1.0, 0.2, 0.7;
    const double lam = 0.3;
    auto f = [&](double b) { return (Y - u.col(0) * b).norm() + lam * std::abs(b); };
    const double b_gold = oracle::golden_section(f, -20.0, 20.0, 1e-12);
    ASSERT_GT(std::abs(b_gold), 0.1);
    // Off zero the objective is differentiable; refine on its derivative.
    auto df = [&](double b) {
        const Eigen::VectorXd r = Y - u.col(0) * b;
        return -u.col(0).dot(r) / r.norm() + lam * (b > 0 ? 1.0 : -1.0);
    };
    const double b_star = oracle::bisect_increasing(df, b_gold - 1e-5, b_gold + 1e-5);
    const GsrlProblem scaled(u, Y, GroupPartition::singletons(1));
    const Vector next = stisp_iterate(scaled, Vector::Constant(1, b_star), Vector::Constant(1, lam));
    EXPECT_NEAR(next(0), b_star, 1e-10);
}

TEST(Fit, AboveLambdaMaxIsZero)
{
    const auto pr = random_problem(20, 8, 41);
    const auto f = fit(pr, 1.0001 * lambda_max(pr), SolverConfig{});
    EXPECT_EQ(f.beta.norm(), 0.0);
    EXPECT_TRUE(f.support.empty());
    EXPECT_TRUE(f.converged);
    EXPECT_LE(f.kkt_residual, 1e-12);
}

TEST(Fit, OneDimensionalMatchesGoldenSection)
{
    Matrix X(2, 1);
    X << 1.0, 0.5;
    Vector Y(2);
    Y << 2.0, 0.3;
    const double lambda = 0.4;
    auto f = [&](double b) {
        return (Y - X.col(0) * b).norm() / std::sqrt(2.0) + lambda / 2.0 * std::abs(b);
    };
    const double b_star = oracle::golden_section(f, -50.0, 50.0, 1e-12);
    const GsrlProblem pr(X, Y, GroupPartition::singletons(1));
    const auto res = fit(pr, lambda, SolverConfig{});
    EXPECT_TRUE(res.converged);
    EXPECT_NEAR(res.beta(0), b_star, 1e-6);
}

TEST(Fit, ThreeVariablesTwoGroupsMatchesBruteForce)
{
    const Matrix X = random_matrix(6, 3, 51);
    Vector b0(3);
    b0 << 1.5, -1.0, 0.8;
    Vector Y = X * b0 + 0.3 * random_matrix(6, 1, 52).col(0);
    const std::vector<std::vector<int>> groups = {{0, 1}, {2}};
    const GsrlProblem pr(X, Y, GroupPartition({{0, 1}, {2}}, 3));
    for (double lambda : {0.5, 1.5, 3.0}) {
        auto obj = [&](const Vector& b) { return oracle::gsrl_objective(X, Y, groups, b, lambda); };
        const Vector b_or = oracle::nested_minimize(obj, 3, 10.0);
        const auto res = fit(pr, lambda, SolverConfig{});
        EXPECT_TRUE(res.converged);
        EXPECT_NEAR(res.objective, obj(b_or), 1e-4) << "lambda " << lambda;
        EXPECT_LE(res.objective, obj(b_or) + 1e-9);
        EXPECT_LT((res.beta - b_or).cwiseAbs().maxCoeff(), 1e-3);
    }
}

TEST(Fit, ReportedObjectiveMatchesObjectiveValue)
{
    const auto pr = random_problem(25, 12, 53);
    const auto res = fit(pr, 4.0, SolverConfig{});
    EXPECT_NEAR(res.objective, objective_value(pr, res.beta, 4.0), 1e-12);
}

TEST(Fit, ConvergedFitsSatisfyKkt)
{
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
        const auto pr = random_problem(30, 20, 100 + seed);
        for (double frac : {0.8, 0.3, 0.1}) {
            SolverConfig c;
            const auto res = fit(pr, frac * lambda_max(pr), c);
            if (res.converged) {
                EXPECT_LE(res.kkt_residual, c.kkt_tolerance);
                const auto recheck = kkt_check(pr, res.beta, frac * lambda_max(pr));
                ASSERT_TRUE(recheck.has_value());
                EXPECT_LE(*recheck, c.kkt_tolerance * 1.0001);
            }
        }
    }
}

TEST(Fit, MonotoneDescentOfScaledObjective)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto pr = random_problem(20, 40, 200 + seed);
        SolverConfig c;
        c.trace = true;
        const double k = resolve_k(pr, c);
        const Vector lam = scaled_lambdas_for(pr, 0.2 * lambda_max(pr), k);
        const auto res = fit_scaled(pr, lam, k, c);
        const double start = scaled_objective(pr, Vector::Zero(pr.p()), lam, k);
        double prev = start;
        for (double v : res.trace) {
            EXPECT_LE(v, prev + 1e-12);
            prev = v;
        }
    }
}

TEST(Fit, ScalingConsistency)
{
    // Two different step constants K must reach the same minimizer of the
    // unscaled criterion ||r|| + sum_j w_j ||b^j||.
    const auto pr = random_problem(15, 6, 61);
    SolverConfig c;
    c.tolerance = 1e-13;
    c.kkt_tolerance = 1e-11;
    const double k1 = resolve_k(pr, c);
    const double k2 = 1.7 * k1;
    const Vector w = weights_for_lambda(pr.partition, pr.n(), 0.3 * lambda_max(pr));
    const auto a = fit_scaled(pr, w / k1, k1, c);
    const auto b = fit_scaled(pr, w / k2, k2, c);
    ASSERT_TRUE(a.converged);
    ASSERT_TRUE(b.converged);
    EXPECT_LT((a.beta - b.beta).norm(), 1e-8);
}

TEST(Fit, RejectsBadConfiguration)
{
    const auto pr = random_problem(10, 4, 62);
    SolverConfig c;
    c.tolerance = 0.0;
    EXPECT_THROW(fit(pr, 1.0, c), InputError);
    EXPECT_THROW(fit(pr, -1.0, SolverConfig{}), InputError);
    EXPECT_THROW(fit(pr, 1.0, SolverConfig{}, Vector::Zero(3)), InputError);
}

TEST(Fit, InterpolationIsReportedAsExactFit)
{
    // p > n and a tiny lambda: the minimizer interpolates. K = ||X|| keeps the
    // step strictly inside the stable range so the residual floor is reached.
    const auto pr = random_problem(8, 30, 63, 0.5);
    SolverConfig c;
    c.k = linalg::operator_norm(pr.X).norm;
    const auto res = fit(pr, 1e-3 * lambda_max(pr), c);
    EXPECT_EQ(res.status, FitStatus::exact_fit);
    EXPECT_FALSE(res.converged);
    EXPECT_TRUE(std::isnan(res.kkt_residual));
    EXPECT_LE((pr.Y - pr.X * res.beta).norm(), 1e-12 * pr.Y.norm());
}

TEST(Path, DefaultGridHasThirtyOnePoints)
{
    const auto g = path_grid(50, 2.0);
    ASSERT_EQ(g.size(), 31u);
    const double base = std::sqrt(50.0) * 2.0;
    EXPECT_NEAR(g.front() / base, 1.0, 1e-15);
    EXPECT_NEAR(g.back() / base, std::pow(2.0, -6.0), 1e-15);
    for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_NEAR(std::log2(g[i] / base), -0.2 * static_cast<double>(i), 1e-12);
        if (i > 0) EXPECT_LT(g[i], g[i - 1]);
    }
}

TEST(Path, SinglePointEqualsFit)
{
    const auto pr = random_problem(20, 10, 71);
    PathConfig pc;
    pc.grid = {0.4 * lambda_max(pr)};
    const auto path = fit_path(pr, pc, SolverConfig{});
    const auto single = fit(pr, pc.grid[0], SolverConfig{});
    ASSERT_EQ(path.fits.size(), 1u);
    EXPECT_EQ((path.fits[0].beta - single.beta).norm(), 0.0);
}

TEST(Path, RejectsIncreasingGrid)
{
    const auto pr = random_problem(20, 10, 72);
    PathConfig pc;
    pc.grid = {1.0, 2.0};
    EXPECT_THROW(fit_path(pr, pc, SolverConfig{}), InputError);
}

TEST(Path, WarmStartAgreesWithColdStart)
{
    const auto pr = random_problem(30, 15, 73);
    SolverConfig c;
    PathConfig warm;
    warm.grid = path_grid(pr.n(), resolve_k(pr, c));
    PathConfig cold = warm;
    cold.warm_start = false;
    const auto a = fit_path(pr, warm, c);
    const auto b = fit_path(pr, cold, c);
    for (std::size_t i = 0; i < a.fits.size(); ++i) {
        EXPECT_NEAR(a.fits[i].objective, b.fits[i].objective, 1e-8) << "grid point " << i;
    }
}

TEST(Path, SupportSizeAlongTable2PresetPaths)
{
    // Not guaranteed by theory: violations are reported, not failed.
    Index violations = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto e = sim::table2_preset(60, seed, 1);
        const Matrix X = sim::toeplitz_sample(e.n, e.p, e.rho, seed);
        Vector Y = X * e.beta0 + random_matrix(e.n, 1, seed + 99).col(0);
        const GsrlProblem pr(X, Y, e.partition());
        PathConfig pc;
        pc.grid = path_grid(pr.n(), resolve_k(pr, SolverConfig{}));
        const auto path = fit_path(pr, pc, SolverConfig{});
        for (std::size_t i = 1; i < path.fits.size(); ++i) {
            if (path.fits[i].support.size() < path.fits[i - 1].support.size()) ++violations;
        }
    }
    std::cout << "support-size monotonicity violations: " << violations << "\n";
    SUCCEED();
}

TEST(Kkt, ZeroAboveThreshold)
{
    const auto pr = random_problem(20, 8, 81);
    const auto r = kkt_check(pr, Vector::Zero(8), 1.5 * lambda_max(pr));
    ASSERT_TRUE(r.has_value());
    EXPECT_EQ(*r, 0.0);
}

TEST(Kkt, OracleSolutionCertifiesAndPerturbationFails)
{
    Matrix X(3, 1);
    X << 1.0, 0.4, -0.6;
    Vector Y(3);
    Y << 1.2, 0.8, -0.1;
    const double lambda = 0.5;
    auto f = [&](double b) { return (Y - X.col(0) * b).norm() / std::sqrt(3.0) + lambda / 3.0 * std::abs(b); };
    const double b_star = oracle::golden_section(f, -50.0, 50.0, 1e-12);
    const GsrlProblem pr(X, Y, GroupPartition::singletons(1));
    const auto r = kkt_check(pr, Vector::Constant(1, b_star), lambda);
    ASSERT_TRUE(r.has_value());
    EXPECT_LE(*r, 1e-6);
    const auto bad = kkt_check(pr, Vector::Constant(1, b_star + 0.1), lambda);
    ASSERT_TRUE(bad.has_value());
    EXPECT_GT(*bad, SolverConfig{}.kkt_tolerance);
}

TEST(Kkt, InapplicableAtZeroResidual)
{
    Matrix X = Matrix::Identity(2, 2);
    Vector Y(2);
    Y << 1, 2;
    const GsrlProblem pr(X, Y, GroupPartition::singletons(2));
    EXPECT_FALSE(kkt_check(pr, Y, 1.0).has_value());
}

TEST(OperatorNorm, MatchesSingularValue)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Matrix X = random_matrix(20 + 10 * static_cast<Index>(seed), 35, seed);
        const double svd = Eigen::JacobiSVD<Matrix>(X).singularValues()(0);
        const auto pi = linalg::operator_norm(X);
        EXPECT_TRUE(pi.converged);
        EXPECT_NEAR(pi.norm, svd, 1e-6 * svd);
    }
}
