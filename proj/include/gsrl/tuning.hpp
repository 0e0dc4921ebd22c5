#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "dist.hpp"
#include "linalg.hpp"
#include "solver.hpp"

namespace gsrl {

enum class TuningMethod
{
    th_gauss, ///< Gaussian deviation bound
    th_f,     ///< F-distribution bound (recommended in practice)
    th_srl,   ///< ungrouped square-root lasso rule 1.1 Phi^{-1}(1 - 0.05 / (2p))
    cv,
    scv_bic,
};

inline const char* to_string(TuningMethod m)
{
    switch (m) {
    case TuningMethod::th_gauss: return "TH_GAUSS";
    case TuningMethod::th_f: return "TH_F";
    case TuningMethod::th_srl: return "TH_SRL";
    case TuningMethod::cv: return "CV";
    case TuningMethod::scv_bic: return "SCV_BIC";
    }
    return "unknown";
}

/// Design-derived quantities consumed by the closed-form tuning rules.
struct TuningInputs
{
    Index n = 0;
    Index q = 0;
    Index t_min = 0;
    Index t_max = 0;
    /// max_j zeta_j
    double zeta = 0.0;
    /// ||X^j||^2 / n with ||.|| the spectral norm of the column block.
    std::vector<double> zeta_j;
    double alpha = 0.05;
    /// (gamma + 1) / (gamma - 1)
    double gamma_bar = 2.0;
    /// (1 + eta) / (1 - eta)
    std::optional<double> eta_tilde = 3.0;
};

/// Reads n, q, T_min, T_max and the block norms zeta_j off the design.
/// Only X and the partition are consulted; the response never enters.
inline TuningInputs make_tuning_inputs(const Matrix& X, const GroupPartition& partition, double alpha,
                                       double gamma_bar = 2.0, std::optional<double> eta_tilde = 3.0)
{
    if (X.cols() != partition.dim()) throw InputError("dimension mismatch: partition differs from X");
    TuningInputs in;
    in.n = X.rows();
    in.q = partition.num_groups();
    in.t_min = partition.t_min();
    in.t_max = partition.t_max();
    in.alpha = alpha;
    in.gamma_bar = gamma_bar;
    in.eta_tilde = eta_tilde;
    in.zeta_j.reserve(static_cast<std::size_t>(in.q));
    for (Index j = 0; j < in.q; ++j) {
        const double s = linalg::block_spectral_norm(linalg::select_columns(X, partition.group(j)));
        in.zeta_j.push_back(s * s / static_cast<double>(in.n));
    }
    in.zeta = *std::max_element(in.zeta_j.begin(), in.zeta_j.end());
    return in;
}

inline TuningInputs make_tuning_inputs(const GsrlProblem& problem, double alpha, double gamma_bar = 2.0,
                                       std::optional<double> eta_tilde = 3.0)
{
    return make_tuning_inputs(problem.X, problem.partition, alpha, gamma_bar, eta_tilde);
}

namespace detail {

inline void check_alpha(double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
}

inline std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

} // namespace detail

/**
 * Smallest lambda_0 with P(V >= lambda_0) <= alpha under Gaussian noise:
 *
 *   sqrt(2 zeta) n / sqrt(n - T_max) * (1 + sqrt(2 log(2q/alpha) / T_min)),
 *
 * valid when T_max < n and 16 log(2q/alpha) <= n - T_max.
 */
namespace detail {

/// The closed form without its validity conditions; for comparisons only.
inline double lambda_gaussian_formula(const TuningInputs& in)
{
    const double n = static_cast<double>(in.n);
    const double lg = std::log(2.0 * static_cast<double>(in.q) / in.alpha);
    return std::sqrt(2.0 * in.zeta) * n / std::sqrt(n - static_cast<double>(in.t_max)) *
           (1.0 + std::sqrt(2.0 * lg / static_cast<double>(in.t_min)));
}

} // namespace detail

inline double lambda_gaussian(const TuningInputs& in)
{
    detail::check_alpha(in.alpha);
    if (in.t_max >= in.n) {
        throw InputError("precondition T_max < n violated: T_max = " + std::to_string(in.t_max) + ", n = " +
                         std::to_string(in.n));
    }
    const double n = static_cast<double>(in.n);
    const double slack = n - static_cast<double>(in.t_max);
    const double lg = std::log(2.0 * static_cast<double>(in.q) / in.alpha);
    if (16.0 * lg > slack) {
        throw InputError("precondition 16 log(2q/alpha) <= n - T_max violated: 16 log(2q/alpha) = " +
                         detail::fmt(16.0 * lg) + " > n - T_max = " + detail::fmt(slack));
    }
    return detail::lambda_gaussian_formula(in);
}

enum class NoiseEvent
{
    a,  ///< V <= lambda / gamma_bar
    a1, ///< V <= lambda / max(gamma_bar, 2 eta_tilde)
};

/// lambda_gaussian inflated by gamma_bar (event A) or max(gamma_bar, 2 eta_tilde) (event A1).
inline double lambda_corollary(const TuningInputs& in, NoiseEvent event)
{
    if (!(in.gamma_bar > 0.0)) throw InputError("gamma_bar must be positive");
    double mult = in.gamma_bar;
    if (event == NoiseEvent::a1) {
        if (!in.eta_tilde) throw InputError("eta_tilde is required for event A1");
        if (!(*in.eta_tilde > 0.0)) throw InputError("eta_tilde must be positive");
        mult = std::max(in.gamma_bar, 2.0 * *in.eta_tilde);
    }
    return lambda_gaussian(in) * mult;
}

struct FdistLambda
{
    double lambda0 = 0.0;
    double tau0 = 0.0;
    /// sqrt(zeta tau0 / (T_min tau0 + n - T_max)), so that lambda0 = n * root.
    double root = 0.0;
};

/// tau_0 = F^{-1}_{T_min, n - T_min}(1 - alpha/q) and
/// lambda_0 = n sqrt(zeta tau_0 / (T_min tau_0 + n - T_max)).
inline FdistLambda lambda_fdist(const TuningInputs& in)
{
    detail::check_alpha(in.alpha);
    if (in.t_max >= in.n) {
        throw InputError("precondition T_max < n violated: T_max = " + std::to_string(in.t_max) + ", n = " +
                         std::to_string(in.n));
    }
    const double level = in.alpha / static_cast<double>(in.q);
    if (!(level > 0.0 && level < 1.0)) throw InputError("alpha / q must lie in (0, 1)");
    FdistLambda out;
    const double tmin = static_cast<double>(in.t_min);
    const double n = static_cast<double>(in.n);
    out.tau0 = dist::f_quantile(tmin, n - tmin, 1.0 - level);
    out.root = std::sqrt(in.zeta * out.tau0 / (tmin * out.tau0 + n - static_cast<double>(in.t_max)));
    out.lambda0 = n * out.root;
    return out;
}

/// Constants lambda_j = root * sqrt(n T_j) / K of the scaled criterion.
inline Vector fdist_scaled_lambdas(const FdistLambda& f, const GroupPartition& partition, Index n, double k)
{
    Vector out(partition.num_groups());
    for (Index j = 0; j < partition.num_groups(); ++j) {
        out(j) = f.root * std::sqrt(static_cast<double>(n) * static_cast<double>(partition.size(j))) / k;
    }
    return out;
}

/// sqrt(n) * 1.1 * Phi^{-1}(1 - 0.05 / (2p)).
inline double lambda_srl_theoretical(Index n, Index p)
{
    if (p < 1) throw InputError("lambda_srl_theoretical: p must be positive");
    if (n < 1) throw InputError("lambda_srl_theoretical: n must be positive");
    return std::sqrt(static_cast<double>(n)) * 1.1 * dist::normal_quantile(1.0 - 0.05 / (2.0 * static_cast<double>(p)));
}

struct RestrictedOls
{
    Vector beta;
    bool rank_deficient = false;
};

/// Least squares on the columns of the selected groups, zeros elsewhere;
/// minimum-norm solution when the restricted design is rank deficient.
inline RestrictedOls restricted_ols(const Matrix& X, const Vector& Y, const GroupPartition& partition,
                                    const std::vector<Index>& support)
{
    RestrictedOls out;
    out.beta = Vector::Zero(X.cols());
    for (Index j : support) {
        if (j < 0 || j >= partition.num_groups()) {
            throw InputError("support index " + std::to_string(j) + " is not a valid group");
        }
    }
    if (support.empty()) return out;
    const auto cols = partition.columns_of(support);
    const auto ls = linalg::least_squares(linalg::select_columns(X, cols), Y);
    for (std::size_t k = 0; k < cols.size(); ++k) out.beta(cols[k]) = ls.coef(static_cast<Index>(k));
    out.rank_deficient = ls.rank_deficient;
    return out;
}

inline RestrictedOls restricted_ols(const GsrlProblem& problem, const std::vector<Index>& support)
{
    return restricted_ols(problem.X, problem.Y, problem.partition, support);
}

struct TuningMetadata
{
    // closed-form rules
    std::optional<double> tau0;
    std::optional<double> zeta;
    std::optional<double> alpha;
    // cross-validation over lambda
    std::vector<double> grid;
    std::vector<double> cv_errors;
    // SCV-BIC over sparsity patterns
    std::vector<std::vector<Index>> patterns;
    std::vector<double> pattern_first_lambda;
    std::vector<double> pattern_cv_sse;
    std::vector<double> pattern_criterion;
    std::vector<Index> pattern_df;
    std::vector<bool> pattern_flagged;
    Index folds = 0;
    std::optional<Index> selected_index;
    bool bias_correction_rank_deficient = false;
};

struct TuningResult
{
    TuningMethod method = TuningMethod::th_f;
    std::optional<double> lambda;
    GsrlFit selected_fit;
    Vector bias_corrected_beta;
    TuningMetadata metadata;
};

/// Seeded uniform shuffle of the rows, cut into near-equal contiguous blocks.
inline std::vector<std::vector<Index>> make_folds(Index n, Index folds, std::uint64_t seed)
{
    if (folds < 2) throw InputError("folds must be at least 2, got " + std::to_string(folds));
    if (folds > n) throw InputError("folds = " + std::to_string(folds) + " exceeds n = " + std::to_string(n));
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<Index>> out(static_cast<std::size_t>(folds));
    const Index base = n / folds;
    const Index extra = n % folds;
    Index pos = 0;
    for (Index f = 0; f < folds; ++f) {
        const Index len = base + (f < extra ? 1 : 0);
        out[static_cast<std::size_t>(f)].assign(perm.begin() + pos, perm.begin() + pos + len);
        pos += len;
    }
    return out;
}

namespace detail {

inline std::vector<Index> complement_rows(Index n, const std::vector<Index>& held_out)
{
    std::vector<char> mask(static_cast<std::size_t>(n), 0);
    for (Index i : held_out) mask[static_cast<std::size_t>(i)] = 1;
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(n) - held_out.size());
    for (Index i = 0; i < n; ++i) {
        if (!mask[static_cast<std::size_t>(i)]) out.push_back(i);
    }
    return out;
}

inline double validation_sse(const GsrlProblem& problem, const std::vector<Index>& rows, const Vector& beta)
{
    double s = 0.0;
    for (Index i : rows) {
        const double e = problem.Y(i) - problem.X.row(i).dot(beta);
        s += e * e;
    }
    return s;
}

inline TuningResult finish_with_fit(TuningMethod method, const GsrlProblem& problem, GsrlFit f)
{
    TuningResult out;
    out.method = method;
    out.lambda = f.lambda;
    const auto ols = restricted_ols(problem, f.support);
    out.bias_corrected_beta = ols.beta;
    out.metadata.bias_correction_rank_deficient = ols.rank_deficient;
    out.selected_fit = std::move(f);
    return out;
}

} // namespace detail

/// Fit at a fixed tuning level followed by restricted-OLS bias correction.
inline TuningResult tune_fixed(TuningMethod method, const GsrlProblem& problem, double lambda, const SolverConfig& config)
{
    return detail::finish_with_fit(method, problem, fit(problem, lambda, config));
}

/// F-distribution rule at level alpha.
inline TuningResult tune_th_f(const GsrlProblem& problem, double alpha, const SolverConfig& config)
{
    const auto in = make_tuning_inputs(problem, alpha);
    const auto f = lambda_fdist(in);
    auto out = tune_fixed(TuningMethod::th_f, problem, f.lambda0, config);
    out.metadata.tau0 = f.tau0;
    out.metadata.zeta = in.zeta;
    out.metadata.alpha = alpha;
    return out;
}

/// Gaussian-bound rule at level alpha, inflated by gamma_bar when event A is requested.
inline TuningResult tune_th_gauss(const GsrlProblem& problem, double alpha, const SolverConfig& config,
                                  std::optional<NoiseEvent> event = std::nullopt, double gamma_bar = 2.0,
                                  std::optional<double> eta_tilde = 3.0)
{
    const auto in = make_tuning_inputs(problem, alpha, gamma_bar, eta_tilde);
    const double lambda = event ? lambda_corollary(in, *event) : lambda_gaussian(in);
    auto out = tune_fixed(TuningMethod::th_gauss, problem, lambda, config);
    out.metadata.zeta = in.zeta;
    out.metadata.alpha = alpha;
    return out;
}

inline TuningResult tune_th_srl(const GsrlProblem& problem, const SolverConfig& config)
{
    return tune_fixed(TuningMethod::th_srl, problem, lambda_srl_theoretical(problem.n(), problem.p()), config);
}

/**
 * K-fold cross-validation over the lambda grid.
 *
 * Each training split is fitted along the whole grid with warm starts. The
 * per-group constants lambda sqrt(T_j / n) are held fixed across splits, i.e.
 * a training split with n_train rows is fitted at lambda sqrt(n_train / n).
 * The selected lambda minimizes the summed validation squared error; ties go
 * to the larger lambda.
 */
inline TuningResult cross_validate(const GsrlProblem& problem, const PathConfig& grid,
                                   const std::vector<std::vector<Index>>& fold_rows, const SolverConfig& config)
{
    grid.validate();
    if (fold_rows.size() < 2) throw InputError("cross-validation needs at least 2 folds");
    const std::size_t L = grid.grid.size();
    std::vector<double> errors(L, 0.0);
    for (const auto& held : fold_rows) {
        const auto train_rows = detail::complement_rows(problem.n(), held);
        if (train_rows.size() < 2) throw InputError("cross-validation: training split has fewer than 2 rows");
        const GsrlProblem train = problem.subset_rows(train_rows);
        const double rescale = std::sqrt(static_cast<double>(train.n()) / static_cast<double>(problem.n()));
        PathConfig train_grid = grid;
        for (auto& l : train_grid.grid) l *= rescale;
        const auto path = fit_path(train, train_grid, config);
        for (std::size_t l = 0; l < L; ++l) errors[l] += detail::validation_sse(problem, held, path.fits[l].beta);
    }
    std::size_t best = 0;
    for (std::size_t l = 1; l < L; ++l) {
        if (errors[l] < errors[best]) best = l;
    }
    auto out = detail::finish_with_fit(TuningMethod::cv, problem, fit(problem, grid.grid[best], config));
    out.metadata.grid = grid.grid;
    out.metadata.cv_errors = std::move(errors);
    out.metadata.folds = static_cast<Index>(fold_rows.size());
    out.metadata.selected_index = static_cast<Index>(best);
    return out;
}

/// As above with folds from make_folds(n, folds, seed).
inline TuningResult cross_validate(const GsrlProblem& problem, const PathConfig& grid, Index folds,
                                   const SolverConfig& config, std::uint64_t seed)
{
    return cross_validate(problem, grid, make_folds(problem.n(), folds, seed), config);
}

/// BIC-corrected validation criterion  sse + df log(n) sse / n.
inline double scv_bic_criterion(double sse, Index df, Index n)
{
    return sse + static_cast<double>(df) * std::log(static_cast<double>(n)) * sse / static_cast<double>(n);
}

/**
 * Cross-validation over the sparsity patterns visited by one full-data path.
 *
 * Candidates are the distinct group supports along the path, in path order.
 * Each is scored by restricted OLS on the training splits plus the BIC
 * correction; ties go to the pattern with fewer coefficients, then to the
 * earlier one. Patterns with more coefficients than a training split has
 * rows, or with a rank-deficient restricted design, fall back to the
 * minimum-norm solution and are flagged.
 */
inline TuningResult scv_bic(const GsrlProblem& problem, const PathConfig& grid, Index folds, const SolverConfig& config,
                            std::uint64_t seed)
{
    grid.validate();
    const auto fold_rows = make_folds(problem.n(), folds, seed);
    const auto path = fit_path(problem, grid, config);

    TuningMetadata meta;
    std::vector<std::size_t> first_fit;
    for (std::size_t l = 0; l < path.fits.size(); ++l) {
        const auto& s = path.fits[l].support;
        if (std::find(meta.patterns.begin(), meta.patterns.end(), s) == meta.patterns.end()) {
            meta.patterns.push_back(s);
            meta.pattern_first_lambda.push_back(path.lambdas[l]);
            first_fit.push_back(l);
        }
    }

    std::vector<std::vector<Index>> train_rows;
    for (const auto& held : fold_rows) train_rows.push_back(detail::complement_rows(problem.n(), held));

    for (const auto& pattern : meta.patterns) {
        Index df = 0;
        for (Index j : pattern) df += problem.partition.size(j);
        bool flagged = false;
        double sse = 0.0;
        for (std::size_t f = 0; f < fold_rows.size(); ++f) {
            const GsrlProblem train = problem.subset_rows(train_rows[f]);
            const auto ols = restricted_ols(train, pattern);
            flagged = flagged || ols.rank_deficient || df > train.n();
            sse += detail::validation_sse(problem, fold_rows[f], ols.beta);
        }
        meta.pattern_df.push_back(df);
        meta.pattern_flagged.push_back(flagged);
        meta.pattern_cv_sse.push_back(sse);
        meta.pattern_criterion.push_back(scv_bic_criterion(sse, df, problem.n()));
    }

    std::size_t best = 0;
    for (std::size_t c = 1; c < meta.patterns.size(); ++c) {
        const double a = meta.pattern_criterion[c];
        const double b = meta.pattern_criterion[best];
        if (a < b || (a == b && meta.pattern_df[c] < meta.pattern_df[best])) best = c;
    }

    TuningResult out;
    out.method = TuningMethod::scv_bic;
    out.selected_fit = path.fits[first_fit[best]];
    out.lambda = out.selected_fit.lambda;
    const auto ols = restricted_ols(problem, meta.patterns[best]);
    out.bias_corrected_beta = ols.beta;
    meta.bias_correction_rank_deficient = ols.rank_deficient;
    meta.grid = grid.grid;
    meta.folds = folds;
    meta.selected_index = static_cast<Index>(best);
    out.metadata = std::move(meta);
    return out;
}

} // namespace gsrl
