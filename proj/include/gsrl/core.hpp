#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace gsrl {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input or a violated precondition of a public operation.
class InputError : public Error
{
public:
    using Error::Error;
};

/**
 * Partition of the predictor indices {0,...,p-1} into disjoint, nonempty groups.
 *
 * Groups need not be contiguous. The group order is the order given at
 * construction and defines the group index j used everywhere else.
 */
class GroupPartition
{
public:
    GroupPartition() = default;

    GroupPartition(std::vector<std::vector<Index>> groups, Index p)
        : groups_(std::move(groups)), owner_(static_cast<std::size_t>(std::max<Index>(p, 0)), -1)
    {
        if (p < 1) throw InputError("partition: p must be positive");
        if (groups_.empty()) throw InputError("partition: no groups");
        for (std::size_t j = 0; j < groups_.size(); ++j) {
            if (groups_[j].empty()) {
                throw InputError("partition: group " + std::to_string(j) + " is empty");
            }
            for (Index i : groups_[j]) {
                if (i < 0 || i >= p) {
                    throw InputError("groups do not partition columns: index " + std::to_string(i) +
                                     " out of range [0, " + std::to_string(p) + ")");
                }
                auto& o = owner_[static_cast<std::size_t>(i)];
                if (o != -1) {
                    throw InputError("groups do not partition columns: index " + std::to_string(i) +
                                     " appears more than once");
                }
                o = static_cast<Index>(j);
            }
        }
        for (std::size_t i = 0; i < owner_.size(); ++i) {
            if (owner_[i] == -1) {
                throw InputError("groups do not partition columns: index " + std::to_string(i) +
                                 " is missing");
            }
        }
    }

    /// Consecutive groups with the given sizes.
    static GroupPartition contiguous(const std::vector<Index>& sizes)
    {
        std::vector<std::vector<Index>> groups;
        Index next = 0;
        for (Index s : sizes) {
            if (s < 1) throw InputError("partition: group sizes must be positive");
            std::vector<Index> g(static_cast<std::size_t>(s));
            std::iota(g.begin(), g.end(), next);
            next += s;
            groups.push_back(std::move(g));
        }
        return GroupPartition(std::move(groups), next);
    }

    /// p groups of one column each (the ungrouped square-root lasso).
    static GroupPartition singletons(Index p)
    {
        return contiguous(std::vector<Index>(static_cast<std::size_t>(p), 1));
    }

    /// p / size consecutive groups of equal size; size must divide p.
    static GroupPartition equal(Index p, Index size)
    {
        if (size < 1 || p % size != 0) {
            throw InputError("partition: group size " + std::to_string(size) + " does not divide p = " +
                             std::to_string(p));
        }
        return contiguous(std::vector<Index>(static_cast<std::size_t>(p / size), size));
    }

    Index num_groups() const { return static_cast<Index>(groups_.size()); }
    Index dim() const { return static_cast<Index>(owner_.size()); }
    const std::vector<Index>& group(Index j) const { return groups_[static_cast<std::size_t>(j)]; }
    const std::vector<std::vector<Index>>& groups() const { return groups_; }
    Index size(Index j) const { return static_cast<Index>(group(j).size()); }
    Index owner(Index i) const { return owner_[static_cast<std::size_t>(i)]; }

    Index t_min() const
    {
        Index t = dim();
        for (const auto& g : groups_) t = std::min<Index>(t, static_cast<Index>(g.size()));
        return t;
    }

    Index t_max() const
    {
        Index t = 0;
        for (const auto& g : groups_) t = std::max<Index>(t, static_cast<Index>(g.size()));
        return t;
    }

    /// Block v^j of a length-p vector.
    Vector gather(const Vector& v, Index j) const
    {
        const auto& g = group(j);
        Vector out(static_cast<Index>(g.size()));
        for (std::size_t k = 0; k < g.size(); ++k) out(static_cast<Index>(k)) = v(g[k]);
        return out;
    }

    void scatter(const Vector& block, Index j, Vector& v) const
    {
        const auto& g = group(j);
        for (std::size_t k = 0; k < g.size(); ++k) v(g[k]) = block(static_cast<Index>(k));
    }

    double block_norm(const Vector& v, Index j) const
    {
        double s = 0.0;
        for (Index i : group(j)) s += v(i) * v(i);
        return std::sqrt(s);
    }

    /// Columns belonging to the listed groups, in group order.
    std::vector<Index> columns_of(const std::vector<Index>& group_ids) const
    {
        std::vector<Index> cols;
        for (Index j : group_ids) {
            const auto& g = group(j);
            cols.insert(cols.end(), g.begin(), g.end());
        }
        return cols;
    }

    /// Groups with a nonzero block in v.
    std::vector<Index> support(const Vector& v) const
    {
        std::vector<Index> s;
        for (Index j = 0; j < num_groups(); ++j) {
            if (block_norm(v, j) > 0.0) s.push_back(j);
        }
        return s;
    }

private:
    std::vector<std::vector<Index>> groups_;
    std::vector<Index> owner_;
};

/// Design, response and grouping of one regression problem.
struct GsrlProblem
{
    Matrix X;
    Vector Y;
    GroupPartition partition;
    bool normalized = false;

    GsrlProblem() = default;

    GsrlProblem(Matrix x, Vector y, GroupPartition part, bool is_normalized = false)
        : X(std::move(x)), Y(std::move(y)), partition(std::move(part)), normalized(is_normalized)
    {
        validate();
    }

    Index n() const { return X.rows(); }
    Index p() const { return X.cols(); }
    Index q() const { return partition.num_groups(); }

    void validate() const
    {
        if (X.rows() < 2) throw InputError("problem: need at least 2 rows, got " + std::to_string(X.rows()));
        if (X.cols() < 1) throw InputError("problem: need at least 1 column");
        if (Y.size() != X.rows()) {
            throw InputError("dimension mismatch: X has " + std::to_string(X.rows()) + " rows but Y has " +
                             std::to_string(Y.size()) + " entries");
        }
        if (partition.dim() != X.cols()) {
            throw InputError("dimension mismatch: partition covers " + std::to_string(partition.dim()) +
                             " columns but X has " + std::to_string(X.cols()));
        }
        for (Index c = 0; c < X.cols(); ++c) {
            if (X.col(c).squaredNorm() == 0.0) {
                throw InputError("design column " + std::to_string(c) + " is identically zero");
            }
        }
        if (normalized) {
            for (Index c = 0; c < X.cols(); ++c) {
                const double d = X.col(c).squaredNorm() / static_cast<double>(X.rows());
                if (std::abs(d - 1.0) > 1e-10) {
                    throw InputError("problem flagged normalized but Gram diagonal entry " + std::to_string(c) +
                                     " is " + std::to_string(d));
                }
            }
        }
    }

    /// Rows selected by index, same partition.
    GsrlProblem subset_rows(const std::vector<Index>& rows) const
    {
        Matrix xs(static_cast<Index>(rows.size()), p());
        Vector ys(static_cast<Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            xs.row(static_cast<Index>(r)) = X.row(rows[r]);
            ys(static_cast<Index>(r)) = Y(rows[r]);
        }
        GsrlProblem out;
        out.X = std::move(xs);
        out.Y = std::move(ys);
        out.partition = partition;
        out.normalized = false;
        return out;
    }
};

/// Termination state of a solver run.
enum class FitStatus
{
    converged,      ///< iterate change and KKT residual both below tolerance
    max_iterations, ///< iteration budget exhausted
    exact_fit,      ///< residual fell below the floor; KKT certificate inapplicable
};

inline const char* to_string(FitStatus s)
{
    switch (s) {
    case FitStatus::converged: return "converged";
    case FitStatus::max_iterations: return "max_iterations";
    case FitStatus::exact_fit: return "exact_fit";
    }
    return "unknown";
}

/// Result of one penalized fit.
struct GsrlFit
{
    Vector beta;
    /// Tuning level in the per-observation parameterization; empty when the
    /// fit was driven by arbitrary per-group constants.
    std::optional<double> lambda;
    /// Per-group constants w_j of  ||Y - X b|| + sum_j w_j ||b^j||.
    Vector group_weights;
    double objective = 0.0;
    double kkt_residual = 0.0;
    Index iterations = 0;
    bool converged = false;
    FitStatus status = FitStatus::max_iterations;
    std::vector<Index> support;
    double k_scale = 0.0;
    /// Scaled objective after every iteration, when tracing is enabled.
    std::vector<double> trace;
};

/// Ground truth of a simulated model.
struct TrueModel
{
    Vector beta0;
    double sigma = 1.0;
    std::vector<Index> active_set;
    Index s = 0;
    Index s_star = 0;

    TrueModel() = default;

    TrueModel(Vector b, double sig, const GroupPartition& partition) : beta0(std::move(b)), sigma(sig)
    {
        if (beta0.size() != partition.dim()) throw InputError("true model: beta0 length differs from p");
        if (sigma < 0.0) throw InputError("true model: sigma must be nonnegative");
        active_set = partition.support(beta0);
        s = static_cast<Index>(active_set.size());
        for (Index j : active_set) s_star += partition.size(j);
    }
};

/// Column scale factors c_j with X_normalized = X * diag(c).
struct NormalizedDesign
{
    GsrlProblem problem;
    Vector scale;

    /// Coefficients of the normalized problem expressed in original column units.
    Vector to_original(const Vector& beta) const { return beta.cwiseProduct(scale); }
};

inline NormalizedDesign normalize_design(const GsrlProblem& problem)
{
    const double n = static_cast<double>(problem.n());
    Vector scale(problem.p());
    for (Index c = 0; c < problem.p(); ++c) {
        const double sq = problem.X.col(c).squaredNorm();
        if (sq == 0.0) throw InputError("design column " + std::to_string(c) + " is identically zero");
        scale(c) = std::sqrt(n / sq);
    }
    NormalizedDesign out;
    out.problem.X = problem.X * scale.asDiagonal();
    out.problem.Y = problem.Y;
    out.problem.partition = problem.partition;
    out.problem.normalized = true;
    out.scale = std::move(scale);
    return out;
}

inline double group_penalty(const GroupPartition& partition, const Vector& beta, const Vector& weights)
{
    double s = 0.0;
    for (Index j = 0; j < partition.num_groups(); ++j) s += weights(j) * partition.block_norm(beta, j);
    return s;
}

/// Per-group constants sqrt(T_j) lambda / sqrt(n) equivalent to the
/// per-observation parameterization.
inline Vector weights_for_lambda(const GroupPartition& partition, Index n, double lambda)
{
    Vector w(partition.num_groups());
    for (Index j = 0; j < partition.num_groups(); ++j) {
        w(j) = lambda * std::sqrt(static_cast<double>(partition.size(j)) / static_cast<double>(n));
    }
    return w;
}

/// ||Y - X beta||_2 / sqrt(n) + (lambda / n) sum_j sqrt(T_j) ||beta^j||_2.
inline double objective_value(const GsrlProblem& problem, const Vector& beta, double lambda)
{
    if (lambda < 0.0) throw InputError("objective: lambda must be nonnegative");
    if (beta.size() != problem.p()) {
        throw InputError("dimension mismatch: beta has " + std::to_string(beta.size()) + " entries, p = " +
                         std::to_string(problem.p()));
    }
    const double n = static_cast<double>(problem.n());
    double pen = 0.0;
    for (Index j = 0; j < problem.q(); ++j) {
        pen += std::sqrt(static_cast<double>(problem.partition.size(j))) * problem.partition.block_norm(beta, j);
    }
    return (problem.Y - problem.X * beta).norm() / std::sqrt(n) + lambda / n * pen;
}

/// max_j sqrt(n) ||(X' eps)^j||_2 / (sqrt(T_j) ||eps||_2).
inline double noise_statistic_v(const Matrix& X, const GroupPartition& partition, const Vector& eps)
{
    if (eps.size() != X.rows()) throw InputError("dimension mismatch: eps length differs from n");
    if (X.cols() != partition.dim()) throw InputError("dimension mismatch: partition differs from X");
    const double en = eps.norm();
    if (en == 0.0) throw InputError("noise statistic undefined for eps = 0");
    const Vector xte = X.transpose() * eps;
    const double sqrt_n = std::sqrt(static_cast<double>(X.rows()));
    double v = 0.0;
    for (Index j = 0; j < partition.num_groups(); ++j) {
        const double t = std::sqrt(static_cast<double>(partition.size(j)));
        v = std::max(v, sqrt_n * partition.block_norm(xte, j) / (t * en));
    }
    return v;
}

/**
 * Rewrites the multivariate model Z = U A + E (U: n x p, A: p x m) as a
 * grouped univariate problem with design U kron I_m, response vec(Z') and
 * one group of size m per row of A. Coefficient vector is vec(A').
 */
inline GsrlProblem multivariate_to_grouped(const Matrix& U, const Matrix& Z)
{
    const Index n = U.rows();
    const Index p = U.cols();
    const Index m = Z.cols();
    if (n == 0) throw InputError("multivariate: n must be positive");
    if (m == 0) throw InputError("multivariate: m must be positive");
    if (Z.rows() != n) throw InputError("dimension mismatch: U and Z row counts differ");

    Matrix X = Matrix::Zero(n * m, p * m);
    for (Index i = 0; i < n; ++i) {
        for (Index k = 0; k < p; ++k) {
            for (Index c = 0; c < m; ++c) X(i * m + c, k * m + c) = U(i, k);
        }
    }
    Vector Y(n * m);
    for (Index i = 0; i < n; ++i) {
        for (Index c = 0; c < m; ++c) Y(i * m + c) = Z(i, c);
    }
    return GsrlProblem(std::move(X), std::move(Y), GroupPartition::equal(p * m, m));
}

} // namespace gsrl
