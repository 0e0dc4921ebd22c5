#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "linalg.hpp"

namespace gsrl {

struct SolverConfig
{
    /// Scaling constant; empty selects ||X|| / sqrt(2).
    std::optional<double> k;
    Index max_iterations = 100000;
    /// Threshold on ||b(t+1) - b(t)|| / max(1, ||b(t)||).
    double tolerance = 1e-8;
    double kkt_tolerance = 1e-6;
    /// Residual floor relative to ||Y||.
    double residual_floor = 1e-12;
    /// Record the scaled objective after every iteration.
    bool trace = false;

    void validate() const
    {
        if (k && !(*k > 0.0)) throw InputError("solver: K must be positive");
        if (max_iterations < 1) throw InputError("solver: max_iterations must be positive");
        if (!(tolerance > 0.0)) throw InputError("solver: tolerance must be positive");
        if (!(kkt_tolerance > 0.0)) throw InputError("solver: kkt_tolerance must be positive");
        if (!(residual_floor > 0.0)) throw InputError("solver: residual_floor must be positive");
    }
};

struct PathConfig
{
    /// Strictly decreasing, positive tuning levels.
    std::vector<double> grid;
    bool warm_start = true;

    void validate() const
    {
        if (grid.empty()) throw InputError("path: grid is empty");
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (!(grid[i] > 0.0)) throw InputError("path: grid values must be positive");
            if (i > 0 && !(grid[i] < grid[i - 1])) throw InputError("path: grid must be strictly decreasing");
        }
    }
};

struct SolutionPath
{
    std::vector<double> lambdas;
    std::vector<GsrlFit> fits;
    double k_scale = 0.0;
};

/// Theta(a; t) = a (||a|| - t)_+ / ||a||, with Theta(0; t) = 0.
inline Vector soft_threshold_group(const Vector& a, double threshold)
{
    if (threshold < 0.0) throw InputError("soft threshold: negative threshold");
    const double norm = a.norm();
    if (norm <= threshold) return Vector::Zero(a.size());
    return a * ((norm - threshold) / norm);
}

/// ||X|| / sqrt(2), or the configured override.
inline double resolve_k(const Matrix& X, const SolverConfig& config)
{
    if (config.k) return *config.k;
    return linalg::operator_norm(X).norm / std::sqrt(2.0);
}

inline double resolve_k(const GsrlProblem& problem, const SolverConfig& config)
{
    return resolve_k(problem.X, config);
}

/// Objective of the scaled problem, ||Y - X b|| / K + sum_j lambda_j ||b^j||.
inline double scaled_objective(const GsrlProblem& problem, const Vector& beta, const Vector& scaled_lambdas, double k)
{
    return (problem.Y - problem.X * beta).norm() / k + group_penalty(problem.partition, beta, scaled_lambdas);
}

namespace detail {

/// KKT residual given precomputed X'r and ||r||; weights are the per-group
/// constants of ||r|| + sum_j w_j ||b^j||.
inline double kkt_residual(const GroupPartition& partition, const Vector& xtr, double rnorm, const Vector& beta,
                           const Vector& weights)
{
    double worst = 0.0;
    for (Index j = 0; j < partition.num_groups(); ++j) {
        const auto& g = partition.group(j);
        const double bn = partition.block_norm(beta, j);
        if (bn > 0.0) {
            double s = 0.0;
            for (Index i : g) {
                const double d = xtr(i) / rnorm - weights(j) * beta(i) / bn;
                s += d * d;
            }
            worst = std::max(worst, std::sqrt(s));
        } else {
            worst = std::max(worst, partition.block_norm(xtr, j) / rnorm - weights(j));
        }
    }
    return worst;
}

inline void check_weights(const GsrlProblem& problem, const Vector& weights)
{
    if (weights.size() != problem.q()) {
        throw InputError("dimension mismatch: " + std::to_string(weights.size()) + " group constants for " +
                         std::to_string(problem.q()) + " groups");
    }
    for (Index j = 0; j < weights.size(); ++j) {
        if (!(weights(j) > 0.0)) throw InputError("group constants must be positive");
    }
}

} // namespace detail

/**
 * KKT residual for the criterion  ||Y - X b|| + sum_j w_j ||b^j||.
 *
 * Active groups contribute || (X'r)^j / ||r|| - w_j b^j / ||b^j|| ||, zero
 * groups contribute ( ||(X'r)^j|| / ||r|| - w_j )_+. Returns empty when the
 * residual is exactly zero (certificate inapplicable).
 */
inline std::optional<double> kkt_check_weighted(const GsrlProblem& problem, const Vector& beta, const Vector& weights,
                                                double residual_floor = 0.0)
{
    detail::check_weights(problem, weights);
    if (beta.size() != problem.p()) throw InputError("dimension mismatch: beta length differs from p");
    const Vector r = problem.Y - problem.X * beta;
    const double rn = r.norm();
    if (!(rn > residual_floor)) return std::nullopt;
    const Vector xtr = problem.X.transpose() * r;
    return detail::kkt_residual(problem.partition, xtr, rn, beta, weights);
}

/// KKT residual of the per-observation criterion at tuning level lambda.
inline std::optional<double> kkt_check(const GsrlProblem& problem, const Vector& beta, double lambda,
                                       double residual_floor = 0.0)
{
    if (!(lambda > 0.0)) throw InputError("kkt: lambda must be positive");
    return kkt_check_weighted(problem, beta, weights_for_lambda(problem.partition, problem.n(), lambda), residual_floor);
}

/// One simultaneous S-TISP update on an already scaled problem.
inline Vector stisp_iterate(const GsrlProblem& scaled, const Vector& beta, const Vector& scaled_lambdas,
                            double residual_floor = 0.0)
{
    detail::check_weights(scaled, scaled_lambdas);
    const Vector r = scaled.Y - scaled.X * beta;
    const double rn = r.norm();
    if (!(rn > residual_floor)) throw Error("stisp: residual below floor (exact interpolation)");
    const Vector a = beta + scaled.X.transpose() * r;
    Vector next(beta.size());
    for (Index j = 0; j < scaled.q(); ++j) {
        scaled.partition.scatter(soft_threshold_group(scaled.partition.gather(a, j), scaled_lambdas(j) * rn), j, next);
    }
    return next;
}

/**
 * Fits  ||Y - X b|| / K + sum_j lambda_j ||b^j||  by the S-TISP fixed-point
 * iteration. Scaling by K is applied implicitly; the problem is not copied.
 *
 * Iteration stops once the relative iterate change is below tolerance and
 * the KKT residual (computed from the same X'r the next update needs) is
 * below kkt_tolerance.
 */
inline GsrlFit fit_scaled(const GsrlProblem& problem, const Vector& scaled_lambdas, double k, const SolverConfig& config,
                          const std::optional<Vector>& init = std::nullopt)
{
    config.validate();
    detail::check_weights(problem, scaled_lambdas);
    if (!(k > 0.0)) throw InputError("solver: K must be positive");
    const auto& part = problem.partition;
    const Index q = problem.q();
    const double k2 = k * k;

    Vector beta = init ? *init : Vector::Zero(problem.p());
    if (beta.size() != problem.p()) throw InputError("dimension mismatch: initial beta length differs from p");

    const Vector weights = scaled_lambdas * k;
    const double floor = config.residual_floor * problem.Y.norm();

    GsrlFit fit;
    fit.k_scale = k;
    fit.group_weights = weights;

    Vector r = problem.Y - problem.X * beta;
    double rn = r.norm();
    Vector xtr(problem.p());
    Vector next(problem.p());
    double last_change = std::numeric_limits<double>::infinity();
    Index it = 0;
    for (;;) {
        if (!(rn > floor)) {
            fit.status = FitStatus::exact_fit;
            break;
        }
        xtr.noalias() = problem.X.transpose() * r;
        if (last_change < config.tolerance) {
            const double kkt = detail::kkt_residual(part, xtr, rn, beta, weights);
            fit.kkt_residual = kkt;
            if (kkt <= config.kkt_tolerance) {
                fit.status = FitStatus::converged;
                break;
            }
        }
        if (it == config.max_iterations) {
            fit.status = FitStatus::max_iterations;
            break;
        }
        const double thr_scale = rn / k;
        for (Index j = 0; j < q; ++j) {
            const auto& g = part.group(j);
            double s = 0.0;
            for (Index i : g) {
                const double a = beta(i) + xtr(i) / k2;
                next(i) = a;
                s += a * a;
            }
            const double an = std::sqrt(s);
            const double thr = scaled_lambdas(j) * thr_scale;
            const double shrink = an <= thr ? 0.0 : (an - thr) / an;
            for (Index i : g) next(i) *= shrink;
        }
        last_change = (next - beta).norm() / std::max(1.0, beta.norm());
        beta.swap(next);
        ++it;
        r.noalias() = problem.Y - problem.X * beta;
        rn = r.norm();
        if (config.trace) fit.trace.push_back(rn / k + group_penalty(part, beta, scaled_lambdas));
    }

    if (fit.status != FitStatus::converged && rn > floor) {
        xtr.noalias() = problem.X.transpose() * r;
        fit.kkt_residual = detail::kkt_residual(part, xtr, rn, beta, weights);
    } else if (fit.status == FitStatus::exact_fit) {
        fit.kkt_residual = std::numeric_limits<double>::quiet_NaN();
    }
    fit.iterations = it;
    fit.converged = fit.status == FitStatus::converged;
    fit.objective = (rn + group_penalty(part, beta, weights)) / std::sqrt(static_cast<double>(problem.n()));
    fit.support = part.support(beta);
    fit.beta = std::move(beta);
    return fit;
}

/// lambda_j = (lambda / K) sqrt(T_j / n).
inline Vector scaled_lambdas_for(const GsrlProblem& problem, double lambda, double k)
{
    return weights_for_lambda(problem.partition, problem.n(), lambda) / k;
}

/// Fit at tuning level lambda of  ||Y - Xb|| / sqrt(n) + (lambda/n) sum_j sqrt(T_j) ||b^j||.
inline GsrlFit fit(const GsrlProblem& problem, double lambda, const SolverConfig& config,
                   const std::optional<Vector>& init = std::nullopt, std::optional<double> k = std::nullopt)
{
    if (!(lambda > 0.0)) throw InputError("fit: lambda must be positive");
    const double kk = k ? *k : resolve_k(problem, config);
    GsrlFit f = fit_scaled(problem, scaled_lambdas_for(problem, lambda, kk), kk, config, init);
    f.lambda = lambda;
    return f;
}

/// Smallest lambda at which b = 0 satisfies the KKT conditions.
inline double lambda_max(const GsrlProblem& problem)
{
    const Vector xty = problem.X.transpose() * problem.Y;
    const double yn = problem.Y.norm();
    const double sqrt_n = std::sqrt(static_cast<double>(problem.n()));
    double m = 0.0;
    for (Index j = 0; j < problem.q(); ++j) {
        const double t = std::sqrt(static_cast<double>(problem.partition.size(j)));
        m = std::max(m, sqrt_n * problem.partition.block_norm(xty, j) / (t * yn));
    }
    return m;
}

/// lambda = sqrt(n) K 2^e for e = max_exp, max_exp - step, ..., min_exp (decreasing).
inline std::vector<double> path_grid(Index n, double k, double min_exp = -6.0, double max_exp = 0.0, double step = 0.2)
{
    if (!(step > 0.0) || min_exp > max_exp) throw InputError("path grid: need step > 0 and min_exp <= max_exp");
    const auto count = static_cast<Index>(std::floor((max_exp - min_exp) / step + 1e-9)) + 1;
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(count));
    const double base = std::sqrt(static_cast<double>(n)) * k;
    for (Index i = 0; i < count; ++i) grid.push_back(base * std::exp2(max_exp - step * static_cast<double>(i)));
    return grid;
}

/// Sequential fits along a decreasing grid, warm-started from the previous solution.
inline SolutionPath fit_path(const GsrlProblem& problem, const PathConfig& path, const SolverConfig& config)
{
    path.validate();
    config.validate();
    SolutionPath out;
    out.k_scale = resolve_k(problem, config);
    std::optional<Vector> init;
    for (double lambda : path.grid) {
        GsrlFit f = fit(problem, lambda, config, path.warm_start ? init : std::nullopt, out.k_scale);
        if (path.warm_start) init = f.beta;
        out.lambdas.push_back(lambda);
        out.fits.push_back(std::move(f));
    }
    return out;
}

} // namespace gsrl
