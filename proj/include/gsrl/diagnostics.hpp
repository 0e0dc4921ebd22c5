#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "core.hpp"
#include "linalg.hpp"

namespace gsrl::diagnostics {

/// Partitioned Gram matrix Sigma = X'X / n with respect to a group support S.
struct GramBlocks
{
    std::vector<Index> support;
    std::vector<Index> complement;
    std::vector<Index> support_cols;
    std::vector<Index> complement_cols;
    Matrix s11; ///< X_S' X_S / n
    Matrix s12; ///< X_S' X_{S^c} / n
    Matrix s21;
    Matrix s22;
};

struct DesignReport
{
    GramBlocks blocks;
    bool s11_invertible = false;
    double s11_min_eigenvalue = 0.0;
    double s11_max_eigenvalue = 0.0;
    double gir_upper_bound = 0.0;
    double gir_ascent_estimate = 0.0;
    double xi_inf_bound = 0.0;
    double xi_ascent_estimate = 0.0;
    std::vector<std::string> notes;
};

struct AscentOptions
{
    Index rounds = 100;
    Index restarts = 5;
    std::uint64_t seed = 2024;
};

inline std::vector<Index> normalize_support(const GroupPartition& partition, std::vector<Index> support)
{
    for (Index j : support) {
        if (j < 0 || j >= partition.num_groups()) {
            throw InputError("support index " + std::to_string(j) + " is not a valid group (q = " +
                             std::to_string(partition.num_groups()) + ")");
        }
    }
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());
    return support;
}

inline GramBlocks gram_blocks(const Matrix& X, const GroupPartition& partition, const std::vector<Index>& support)
{
    GramBlocks b;
    b.support = normalize_support(partition, support);
    for (Index j = 0; j < partition.num_groups(); ++j) {
        if (!std::binary_search(b.support.begin(), b.support.end(), j)) b.complement.push_back(j);
    }
    b.support_cols = partition.columns_of(b.support);
    b.complement_cols = partition.columns_of(b.complement);
    const Matrix xs = linalg::select_columns(X, b.support_cols);
    const Matrix xc = linalg::select_columns(X, b.complement_cols);
    const double n = static_cast<double>(X.rows());
    b.s11 = xs.transpose() * xs / n;
    b.s12 = xs.transpose() * xc / n;
    b.s21 = b.s12.transpose();
    b.s22 = xc.transpose() * xc / n;
    return b;
}

namespace detail {

/// Offsets of each group's columns inside a stacked list of groups.
inline std::vector<Index> offsets(const GroupPartition& partition, const std::vector<Index>& groups)
{
    std::vector<Index> off{0};
    for (Index j : groups) off.push_back(off.back() + partition.size(j));
    return off;
}

/**
 * Alternating ascent for max ||A v|| over v in the product of balls
 * ||v^k|| <= r_k (column blocks of A given by col_off). Returns the best
 * value; `history`, when given, receives the value after each round of the
 * best restart.
 */
inline double product_ball_ascent(const Matrix& A, const std::vector<Index>& col_off, const std::vector<double>& radius,
                                  const AscentOptions& opt, std::mt19937_64& rng, std::vector<double>* history = nullptr)
{
    const Index blocks = static_cast<Index>(radius.size());
    std::normal_distribution<double> normal;
    double best = 0.0;
    for (Index r = 0; r < opt.restarts; ++r) {
        Vector v(A.cols());
        for (Index k = 0; k < blocks; ++k) {
            const Index b0 = col_off[static_cast<std::size_t>(k)];
            const Index len = col_off[static_cast<std::size_t>(k) + 1] - b0;
            Vector seg(len);
            for (Index i = 0; i < len; ++i) seg(i) = normal(rng);
            v.segment(b0, len) = seg.normalized() * radius[static_cast<std::size_t>(k)];
        }
        std::vector<double> hist;
        double value = (A * v).norm();
        hist.push_back(value);
        for (Index round = 0; round < opt.rounds; ++round) {
            const Vector av = A * v;
            const double an = av.norm();
            if (an == 0.0) break;
            const Vector u = av / an;
            const Vector g = A.transpose() * u;
            Vector next = v;
            for (Index k = 0; k < blocks; ++k) {
                const Index b0 = col_off[static_cast<std::size_t>(k)];
                const Index len = col_off[static_cast<std::size_t>(k) + 1] - b0;
                const double gn = g.segment(b0, len).norm();
                if (gn > 0.0) next.segment(b0, len) = g.segment(b0, len) * (radius[static_cast<std::size_t>(k)] / gn);
            }
            const double nv = (A * next).norm();
            // u' A next >= u' A v = ||A v|| and ||A next|| >= u' A next, so the value never drops.
            if (nv < value) break;
            const bool stalled = nv - value <= 1e-15 * std::max(1.0, value);
            v = next;
            value = nv;
            hist.push_back(value);
            if (stalled) break;
        }
        if (value >= best) {
            best = value;
            if (history) *history = hist;
        }
    }
    return best;
}

} // namespace detail

/**
 * Sandwich for the Group Irrepresentable constant
 *
 *   max_{||v^k|| <= sqrt(T_k)} max_{j in S^c} ||(Sigma_21 Sigma_11^{-1} v)^j|| / sqrt(T_j).
 *
 * The upper bound replaces the inner maximum by sum_k sqrt(T_k) ||M_jk||; the
 * estimate is the best alternating-ascent value. Both coincide for singleton
 * groups.
 */
inline DesignReport analyze_design(const Matrix& X, const GroupPartition& partition, const std::vector<Index>& support,
                                   const AscentOptions& opt = {})
{
    if (X.cols() != partition.dim()) throw InputError("dimension mismatch: partition differs from X");
    DesignReport rep;
    rep.blocks = gram_blocks(X, partition, support);
    const auto& b = rep.blocks;
    if (b.support.empty()) {
        rep.s11_invertible = true;
        rep.notes.push_back("empty support: all constants are zero");
        return rep;
    }

    Eigen::SelfAdjointEigenSolver<Matrix> es(b.s11, Eigen::EigenvaluesOnly);
    rep.s11_min_eigenvalue = es.eigenvalues().minCoeff();
    rep.s11_max_eigenvalue = es.eigenvalues().maxCoeff();
    rep.s11_invertible = rep.s11_min_eigenvalue > 1e-12 * std::max(1.0, rep.s11_max_eigenvalue);
    if (!rep.s11_invertible) {
        rep.notes.push_back("Sigma_11 is singular; irrepresentable and xi constants are undefined");
        return rep;
    }

    const Matrix s11_inv = b.s11.ldlt().solve(Matrix::Identity(b.s11.rows(), b.s11.cols()));
    const auto s_off = detail::offsets(partition, b.support);
    const auto c_off = detail::offsets(partition, b.complement);
    std::vector<double> radius;
    for (Index k : b.support) radius.push_back(std::sqrt(static_cast<double>(partition.size(k))));

    std::mt19937_64 rng(opt.seed);

    // Group irrepresentable constant.
    if (!b.complement.empty()) {
        const Matrix m = b.s21 * s11_inv;
        for (std::size_t jj = 0; jj < b.complement.size(); ++jj) {
            const Index r0 = c_off[jj];
            const Index rl = c_off[jj + 1] - r0;
            const double tj = std::sqrt(static_cast<double>(rl));
            double bound = 0.0;
            for (std::size_t kk = 0; kk < b.support.size(); ++kk) {
                const Index c0 = s_off[kk];
                const Index cl = s_off[kk + 1] - c0;
                bound += radius[kk] * linalg::block_spectral_norm(m.block(r0, c0, rl, cl));
            }
            rep.gir_upper_bound = std::max(rep.gir_upper_bound, bound / tj);
            const Matrix rows = m.middleRows(r0, rl);
            const double est = detail::product_ball_ascent(rows, s_off, radius, opt, rng) / tj;
            rep.gir_ascent_estimate = std::max(rep.gir_ascent_estimate, est);
        }
    } else {
        rep.notes.push_back("support covers every group: irrepresentable constant is zero");
    }

    // xi: every coordinate of Sigma_11^{-1} v is a linear functional, so its
    // maximum over the product of balls is the sum of weighted block norms.
    for (std::size_t jj = 0; jj < b.support.size(); ++jj) {
        const Index r0 = s_off[jj];
        const Index rl = s_off[jj + 1] - r0;
        const double tj = std::sqrt(static_cast<double>(rl));
        for (Index i = r0; i < r0 + rl; ++i) {
            double row_bound = 0.0;
            for (std::size_t kk = 0; kk < b.support.size(); ++kk) {
                const Index c0 = s_off[kk];
                const Index cl = s_off[kk + 1] - c0;
                row_bound += radius[kk] * s11_inv.row(i).segment(c0, cl).norm();
            }
            rep.xi_inf_bound = std::max(rep.xi_inf_bound, row_bound / tj);
            const Matrix row = s11_inv.row(i);
            const double est = detail::product_ball_ascent(row, s_off, radius, opt, rng) / tj;
            rep.xi_ascent_estimate = std::max(rep.xi_ascent_estimate, est);
        }
    }
    return rep;
}

inline DesignReport gir_bound(const GsrlProblem& problem, const std::vector<Index>& support, const AscentOptions& opt = {})
{
    return analyze_design(problem.X, problem.partition, support, opt);
}

/// Upper bound of the xi constant (exact: see analyze_design).
inline double xi_inf_bound(const GsrlProblem& problem, const std::vector<Index>& support)
{
    const auto rep = analyze_design(problem.X, problem.partition, support);
    if (!rep.s11_invertible) throw InputError("Sigma_11 is singular");
    return rep.xi_inf_bound;
}

/// Values of the GIR ascent for output group `out_group`, for monotonicity checks.
inline std::vector<double> gir_ascent_history(const Matrix& X, const GroupPartition& partition,
                                              const std::vector<Index>& support, Index out_group,
                                              const AscentOptions& opt = {})
{
    const auto b = gram_blocks(X, partition, support);
    const auto it = std::find(b.complement.begin(), b.complement.end(), out_group);
    if (it == b.complement.end()) throw InputError("output group must lie outside the support");
    const auto s_off = detail::offsets(partition, b.support);
    const auto c_off = detail::offsets(partition, b.complement);
    std::vector<double> radius;
    for (Index k : b.support) radius.push_back(std::sqrt(static_cast<double>(partition.size(k))));
    const Matrix m = b.s21 * b.s11.ldlt().solve(Matrix::Identity(b.s11.rows(), b.s11.cols()));
    const auto jj = static_cast<std::size_t>(it - b.complement.begin());
    const Matrix rows = m.middleRows(c_off[jj], c_off[jj + 1] - c_off[jj]);
    std::mt19937_64 rng(opt.seed);
    std::vector<double> hist;
    detail::product_ball_ascent(rows, s_off, radius, opt, rng, &hist);
    return hist;
}

/// Monte-Carlo frequency of {V <= lambda / divisor} under standard Gaussian noise.
inline double event_frequency(const Matrix& X, const GroupPartition& partition, double lambda, double divisor,
                              Index draws, std::uint64_t seed)
{
    if (draws < 1) throw InputError("event_frequency: draws must be positive");
    if (!(divisor > 0.0)) throw InputError("event_frequency: divisor must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    const double cut = lambda / divisor;
    Index hits = 0;
    Vector eps(X.rows());
    for (Index d = 0; d < draws; ++d) {
        for (Index i = 0; i < eps.size(); ++i) eps(i) = normal(rng);
        if (noise_statistic_v(X, partition, eps) <= cut) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(draws);
}

inline double event_frequency(const GsrlProblem& problem, double lambda, double divisor, Index draws, std::uint64_t seed)
{
    return event_frequency(problem.X, problem.partition, lambda, divisor, draws, seed);
}

/// sum_{j in S^c} sqrt(T_j) ||delta^j|| <= gamma sum_{j in S} sqrt(T_j) ||delta^j||.
inline bool cone_membership(const Vector& delta, const GroupPartition& partition, const std::vector<Index>& support,
                            double gamma)
{
    if (!(gamma > 1.0)) throw InputError("cone_membership: gamma must exceed 1");
    if (delta.size() != partition.dim()) throw InputError("dimension mismatch: delta length differs from p");
    const auto s = normalize_support(partition, support);
    double in = 0.0;
    double out = 0.0;
    for (Index j = 0; j < partition.num_groups(); ++j) {
        const double w = std::sqrt(static_cast<double>(partition.size(j))) * partition.block_norm(delta, j);
        if (std::binary_search(s.begin(), s.end(), j)) in += w;
        else out += w;
    }
    return out <= gamma * in;
}

/// s* < n^2 kappa^2 / lambda^2.
inline bool sparsity_condition(double s_star, double n, double kappa, double lambda)
{
    if (!(s_star > 0.0 && n > 0.0 && kappa > 0.0 && lambda > 0.0)) {
        throw InputError("sparsity_condition: all arguments must be positive");
    }
    return s_star < n * n * kappa * kappa / (lambda * lambda);
}

} // namespace gsrl::diagnostics
