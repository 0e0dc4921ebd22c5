#pragma once

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "core.hpp"

namespace gsrl::linalg {

struct PowerIterationResult
{
    double norm = 0.0;
    Index iterations = 0;
    bool converged = false;
};

/**
 * Spectral norm of X by power iteration on the smaller of X'X and XX'.
 *
 * Stops when the relative change of the Rayleigh quotient drops below tol.
 * The start vector is drawn from a fixed seed, so the result is
 * deterministic for a given X.
 */
inline PowerIterationResult operator_norm(const Matrix& X, Index max_iterations = 1000, double tol = 1e-10)
{
    PowerIterationResult out;
    if (X.size() == 0) return out;
    const bool use_gram_cols = X.cols() <= X.rows();
    const Index dim = use_gram_cols ? X.cols() : X.rows();

    std::mt19937_64 rng(0x5eedULL);
    std::normal_distribution<double> normal;
    Vector v(dim);
    for (Index i = 0; i < dim; ++i) v(i) = normal(rng);
    v.normalize();

    Vector w(dim);
    double eig = 0.0;
    for (Index it = 1; it <= max_iterations; ++it) {
        if (use_gram_cols) w.noalias() = X.transpose() * (X * v);
        else w.noalias() = X * (X.transpose() * v);
        const double next = v.dot(w);
        const double wn = w.norm();
        out.iterations = it;
        if (wn == 0.0) {
            eig = 0.0;
            out.converged = true;
            break;
        }
        v = w / wn;
        if (it > 1 && std::abs(next - eig) <= tol * std::abs(next)) {
            eig = next;
            out.converged = true;
            break;
        }
        eig = next;
    }
    out.norm = std::sqrt(std::max(eig, 0.0));
    return out;
}

/// Largest singular value of a small dense block.
inline double block_spectral_norm(const Matrix& B)
{
    if (B.size() == 0) return 0.0;
    const Matrix gram = B.cols() <= B.rows() ? Matrix(B.transpose() * B) : Matrix(B * B.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(es.eigenvalues().maxCoeff(), 0.0));
}

inline Matrix select_columns(const Matrix& X, const std::vector<Index>& cols)
{
    Matrix out(X.rows(), static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = X.col(cols[k]);
    return out;
}

inline Matrix select_block(const Matrix& S, const std::vector<Index>& rows, const std::vector<Index>& cols)
{
    Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) out(static_cast<Index>(r), static_cast<Index>(c)) = S(rows[r], cols[c]);
    }
    return out;
}

struct LeastSquares
{
    Vector coef;
    Index rank = 0;
    bool rank_deficient = false;
};

/// Minimum-norm least squares via complete orthogonal decomposition.
inline LeastSquares least_squares(const Matrix& A, const Vector& b)
{
    LeastSquares out;
    if (A.cols() == 0) return out;
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(A);
    out.coef = cod.solve(b);
    out.rank = cod.rank();
    out.rank_deficient = out.rank < A.cols();
    return out;
}

} // namespace gsrl::linalg
