#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "core.hpp"
#include "solver.hpp"
#include "tuning.hpp"

namespace gsrl::sim {

/**
 * n iid rows from N(0, Sigma) with Sigma_ij = rho^{|i-j|}.
 *
 * The lower Cholesky factor of this Toeplitz matrix is
 * L_i1 = rho^{i-1}, L_ik = sqrt(1 - rho^2) rho^{i-k} (2 <= k <= i), so L z is
 * the stationary AR(1) recursion x_1 = z_1, x_k = rho x_{k-1} + sqrt(1-rho^2) z_k,
 * evaluated here in O(p) per row.
 */
template <std::uniform_random_bit_generator Rng>
Matrix toeplitz_sample(Index n, Index p, double rho, Rng& rng)
{
    if (!(std::abs(rho) < 1.0)) throw InputError("toeplitz_sample: |rho| must be < 1");
    if (n < 0 || p < 1) throw InputError("toeplitz_sample: invalid shape");
    std::normal_distribution<double> normal;
    const double innov = std::sqrt(1.0 - rho * rho);
    Matrix X(n, p);
    for (Index i = 0; i < n; ++i) {
        double prev = normal(rng);
        X(i, 0) = prev;
        for (Index k = 1; k < p; ++k) {
            prev = rho * prev + innov * normal(rng);
            X(i, k) = prev;
        }
    }
    return X;
}

inline Matrix toeplitz_sample(Index n, Index p, double rho, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    return toeplitz_sample(n, p, rho, rng);
}

inline Matrix toeplitz_covariance(Index p, double rho)
{
    Matrix s(p, p);
    for (Index i = 0; i < p; ++i) {
        for (Index j = 0; j < p; ++j) s(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
    }
    return s;
}

/// 100 (sum_i (y_i - x_i' b)^2 / (N_test sigma^2) - 1).
inline double mse_metric(const Matrix& test_X, const Vector& test_Y, const Vector& beta_hat, double sigma)
{
    if (!(sigma > 0.0)) throw InputError("mse_metric: sigma must be positive");
    if (test_X.rows() < 1) throw InputError("mse_metric: empty test set");
    if (test_Y.size() != test_X.rows() || beta_hat.size() != test_X.cols()) {
        throw InputError("dimension mismatch in mse_metric");
    }
    const double sse = (test_Y - test_X * beta_hat).squaredNorm();
    return 100.0 * (sse / (static_cast<double>(test_X.rows()) * sigma * sigma) - 1.0);
}

struct MissFa
{
    double miss = 0.0;
    double false_alarm = 0.0;
    /// false when the true support is empty (miss rate undefined, reported as 0)
    bool miss_defined = true;
};

/// Fractions of true groups missed and of null groups selected.
inline MissFa miss_fa(const std::vector<Index>& true_support, const std::vector<Index>& estimated, Index q)
{
    std::vector<char> truth(static_cast<std::size_t>(q), 0);
    std::vector<char> est(static_cast<std::size_t>(q), 0);
    for (Index j : true_support) {
        if (j < 0 || j >= q) throw InputError("miss_fa: group index out of range");
        truth[static_cast<std::size_t>(j)] = 1;
    }
    for (Index j : estimated) {
        if (j < 0 || j >= q) throw InputError("miss_fa: group index out of range");
        est[static_cast<std::size_t>(j)] = 1;
    }
    Index active = 0, missed = 0, inactive = 0, alarms = 0;
    for (std::size_t j = 0; j < truth.size(); ++j) {
        if (truth[j]) {
            ++active;
            if (!est[j]) ++missed;
        } else {
            ++inactive;
            if (est[j]) ++alarms;
        }
    }
    MissFa out;
    out.miss_defined = active > 0;
    out.miss = active > 0 ? static_cast<double>(missed) / static_cast<double>(active) : 0.0;
    out.false_alarm = inactive > 0 ? static_cast<double>(alarms) / static_cast<double>(inactive) : 0.0;
    return out;
}

inline MissFa miss_fa(const TrueModel& truth, const std::vector<Index>& estimated, Index q)
{
    return miss_fa(truth.active_set, estimated, q);
}

/// Symmetric trimmed mean: floor(k * fraction / 2) values dropped from each tail.
inline double trimmed_mean(std::vector<double> values, double trim_fraction)
{
    if (!(trim_fraction >= 0.0 && trim_fraction < 1.0)) throw InputError("trimmed_mean: fraction must lie in [0, 1)");
    const auto k = values.size();
    const auto drop = static_cast<std::size_t>(std::floor(static_cast<double>(k) * trim_fraction / 2.0));
    if (k == 0 || 2 * drop >= k) throw InputError("trimmed_mean: nothing left after trimming");
    std::sort(values.begin(), values.end());
    double s = 0.0;
    for (std::size_t i = drop; i < k - drop; ++i) s += values[i];
    return s / static_cast<double>(k - 2 * drop);
}

enum class PresetName
{
    table1_path,
    table1_th,
    table2,
};

inline const char* to_string(PresetName p)
{
    switch (p) {
    case PresetName::table1_path: return "table1-path";
    case PresetName::table1_th: return "table1-th";
    case PresetName::table2: return "table2";
    }
    return "unknown";
}

enum class SimMethod
{
    path,
    th_f,
    th_gauss,
    th_srl,
    cv,
    scv_bic,
};

inline const char* to_string(SimMethod m)
{
    switch (m) {
    case SimMethod::path: return "PATH";
    case SimMethod::th_f: return "TH";
    case SimMethod::th_gauss: return "TH_GAUSS";
    case SimMethod::th_srl: return "TH_SRL";
    case SimMethod::cv: return "CV";
    case SimMethod::scv_bic: return "SCV_BIC";
    }
    return "unknown";
}

struct ExperimentPreset
{
    PresetName name = PresetName::table2;
    Index n = 100;
    Index p = 60;
    Index group_size = 3;
    Vector beta0;
    double sigma = 1.0;
    double rho = 0.5;
    Index replications = 50;
    Index n_test = 10000;
    std::uint64_t seed = 1;
    bool normalize = false;
    double alpha = 0.01;
    Index folds = 5;
    std::vector<SimMethod> methods;
    /// Record wall-clock seconds of each solver call.
    bool timing = false;

    GroupPartition partition() const { return GroupPartition::equal(p, group_size); }

    void validate() const
    {
        if (n < 2 || p < 1) throw InputError("preset: invalid n or p");
        if (group_size < 1 || p % group_size != 0) throw InputError("preset: group size must divide p");
        if (beta0.size() != p) throw InputError("preset: beta0 length differs from p");
        if (!(sigma > 0.0)) throw InputError("preset: sigma must be positive");
        if (!(std::abs(rho) < 1.0)) throw InputError("preset: |rho| must be < 1");
        if (replications < 1) throw InputError("preset: replications must be positive");
        if (n_test < 0) throw InputError("preset: n_test must be nonnegative");
        if (methods.empty()) throw InputError("preset: no methods");
    }
};

/// n = 50, beta0 = (2.5, 0, 2.5, 2.5, 0, ..., 0), singleton groups, sigma = 1, rho = 0.5.
inline ExperimentPreset table1_preset(PresetName name, Index p, std::uint64_t seed = 1, Index replications = 50)
{
    if (p < 4) throw InputError("table1 preset needs p >= 4");
    ExperimentPreset e;
    e.name = name;
    e.n = 50;
    e.p = p;
    e.group_size = 1;
    e.beta0 = Vector::Zero(p);
    e.beta0(0) = 2.5;
    e.beta0(2) = 2.5;
    e.beta0(3) = 2.5;
    e.replications = replications;
    e.n_test = 0;
    e.seed = seed;
    e.timing = true;
    e.methods = {name == PresetName::table1_path ? SimMethod::path : SimMethod::th_srl};
    return e;
}

/// n = 100, groups of 3, beta0 = ({2.5}^3, {0}^3, {2.5}^3, {2.5}^3, 0, ...), N_test = 1e4.
inline ExperimentPreset table2_preset(Index p, std::uint64_t seed = 1, Index replications = 50)
{
    if (p < 12 || p % 3 != 0) throw InputError("table2 preset needs p >= 12 and divisible by 3");
    ExperimentPreset e;
    e.name = PresetName::table2;
    e.n = 100;
    e.p = p;
    e.group_size = 3;
    e.beta0 = Vector::Zero(p);
    for (Index i : {0, 1, 2, 6, 7, 8, 9, 10, 11}) e.beta0(i) = 2.5;
    e.replications = replications;
    e.n_test = 10000;
    e.seed = seed;
    e.methods = {SimMethod::th_f, SimMethod::cv, SimMethod::scv_bic};
    return e;
}

struct ReplicationRecord
{
    Index replication = 0;
    std::vector<Index> support;
    MissFa selection;
    std::optional<double> mse;
    std::optional<double> lambda;
    std::optional<double> seconds;
    /// V of the noise draw, and whether V <= lambda (closed-form rules only).
    std::optional<double> noise_v;
    std::optional<bool> noise_event;
    bool converged = true;
    Index nonconverged_fits = 0;
    std::string error;
};

struct MethodSummary
{
    SimMethod method = SimMethod::th_f;
    std::vector<ReplicationRecord> records;
    double mean_miss = 0.0;
    double mean_false_alarm = 0.0;
    std::optional<double> trimmed_mse;
    std::optional<double> mean_seconds;
    Index failures = 0;
    Index nonconverged = 0;
};

struct SimulationReport
{
    ExperimentPreset preset;
    double trim_fraction = 0.4;
    std::string trim_convention = "symmetric: floor(k*0.4/2) values dropped from each tail";
    std::vector<MethodSummary> methods;
};

namespace detail {

inline std::uint64_t replication_seed(std::uint64_t seed, Index replication, std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replication), static_cast<std::uint32_t>(stream)};
    std::array<std::uint32_t, 2> words{};
    seq.generate(words.begin(), words.end());
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

struct MethodOutcome
{
    ReplicationRecord record;
    Vector beta;
};

template <class F>
double timed(F&& f)
{
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::vector<MethodOutcome> run_replication(const ExperimentPreset& e, Index rep, const SolverConfig& config)
{
    std::mt19937_64 rng(replication_seed(e.seed, rep, 0));
    const GroupPartition part = e.partition();
    const TrueModel truth(e.beta0, e.sigma, part);

    Matrix X = toeplitz_sample(e.n, e.p, e.rho, rng);
    std::normal_distribution<double> normal;
    Vector eps(e.n);
    for (Index i = 0; i < e.n; ++i) eps(i) = normal(rng);
    Vector Y = X * e.beta0 + e.sigma * eps;

    GsrlProblem problem(X, Y, part);
    Vector unscale = Vector::Ones(e.p);
    if (e.normalize) {
        auto nd = normalize_design(problem);
        unscale = nd.scale;
        problem = std::move(nd.problem);
    }
    const std::uint64_t fold_seed = replication_seed(e.seed, rep, 1);

    std::vector<MethodOutcome> out;
    for (SimMethod m : e.methods) {
        MethodOutcome mo;
        mo.record.replication = rep;
        mo.beta = Vector::Zero(e.p);
        try {
            if (m == SimMethod::path) {
                SolutionPath path;
                PathConfig pc;
                const double secs = timed([&] {
                    SolverConfig c = config;
                    c.k = resolve_k(problem, config);
                    pc.grid = path_grid(problem.n(), *c.k);
                    path = fit_path(problem, pc, c);
                });
                if (e.timing) mo.record.seconds = secs;
                for (const auto& f : path.fits) {
                    if (f.status == FitStatus::max_iterations) ++mo.record.nonconverged_fits;
                }
                mo.record.converged = mo.record.nonconverged_fits == 0;
                out.push_back(std::move(mo));
                continue;
            }
            TuningResult tr;
            const double secs = timed([&] {
                switch (m) {
                case SimMethod::th_f: tr = tune_th_f(problem, e.alpha, config); break;
                case SimMethod::th_gauss: tr = tune_th_gauss(problem, e.alpha, config); break;
                case SimMethod::th_srl: tr = tune_th_srl(problem, config); break;
                case SimMethod::cv: {
                    PathConfig pc;
                    pc.grid = path_grid(problem.n(), resolve_k(problem, config));
                    tr = cross_validate(problem, pc, e.folds, config, fold_seed);
                    break;
                }
                case SimMethod::scv_bic: {
                    PathConfig pc;
                    pc.grid = path_grid(problem.n(), resolve_k(problem, config));
                    tr = scv_bic(problem, pc, e.folds, config, fold_seed);
                    break;
                }
                case SimMethod::path: break;
                }
            });
            if (e.timing) mo.record.seconds = secs;
            mo.record.lambda = tr.lambda;
            mo.record.converged = tr.selected_fit.status != FitStatus::max_iterations;
            mo.record.nonconverged_fits = mo.record.converged ? 0 : 1;
            mo.record.support = tr.selected_fit.support;
            mo.record.selection = miss_fa(truth, mo.record.support, part.num_groups());
            mo.beta = tr.bias_corrected_beta.cwiseProduct(unscale);
            if (tr.lambda && (m == SimMethod::th_f || m == SimMethod::th_gauss || m == SimMethod::th_srl)) {
                const double v = noise_statistic_v(problem.X, part, eps);
                mo.record.noise_v = v;
                mo.record.noise_event = v <= *tr.lambda;
            }
        } catch (const Error& ex) {
            mo.record.error = ex.what();
            mo.record.converged = false;
        }
        out.push_back(std::move(mo));
    }

    if (e.n_test > 0) {
        std::mt19937_64 test_rng(replication_seed(e.seed, rep, 2));
        const Matrix tx = toeplitz_sample(e.n_test, e.p, e.rho, test_rng);
        Vector ty = tx * e.beta0;
        for (Index i = 0; i < e.n_test; ++i) ty(i) += e.sigma * normal(test_rng);
        for (std::size_t k = 0; k < out.size(); ++k) {
            if (e.methods[k] == SimMethod::path || !out[k].record.error.empty()) continue;
            out[k].record.mse = mse_metric(tx, ty, out[k].beta, e.sigma);
        }
    }
    return out;
}

} // namespace detail

/**
 * Runs every replication of a preset and aggregates Miss / False-Alarm rates,
 * the 40%-trimmed mean of MSE and mean solver wall-clock time.
 *
 * Replications are distributed over `threads` workers; each replication draws
 * from its own seed substream and results are reduced in replication order,
 * so the report does not depend on the thread count (timings aside).
 */
inline SimulationReport run_experiment(const ExperimentPreset& preset, const SolverConfig& config, unsigned threads = 1)
{
    preset.validate();
    config.validate();
    const auto reps = static_cast<std::size_t>(preset.replications);
    std::vector<std::vector<detail::MethodOutcome>> results(reps);
    std::vector<std::string> failures(reps);

    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(reps)));
    auto work = [&](unsigned w) {
        for (std::size_t r = w; r < reps; r += workers) {
            try {
                results[r] = detail::run_replication(preset, static_cast<Index>(r), config);
            } catch (const std::exception& ex) {
                failures[r] = ex.what();
            }
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    }
    for (const auto& f : failures) {
        if (!f.empty()) throw Error("simulation replication failed: " + f);
    }

    SimulationReport report;
    report.preset = preset;
    for (std::size_t k = 0; k < preset.methods.size(); ++k) {
        MethodSummary ms;
        ms.method = preset.methods[k];
        std::vector<double> mses;
        double miss = 0.0, fa = 0.0, secs = 0.0;
        Index counted = 0, timed_count = 0;
        for (std::size_t r = 0; r < reps; ++r) {
            auto rec = results[r][k].record;
            if (!rec.error.empty()) {
                ++ms.failures;
            } else if (ms.method != SimMethod::path) {
                miss += rec.selection.miss;
                fa += rec.selection.false_alarm;
                ++counted;
                if (rec.mse) mses.push_back(*rec.mse);
            }
            if (rec.seconds) {
                secs += *rec.seconds;
                ++timed_count;
            }
            if (!rec.converged) ++ms.nonconverged;
            ms.records.push_back(std::move(rec));
        }
        if (counted > 0) {
            ms.mean_miss = miss / static_cast<double>(counted);
            ms.mean_false_alarm = fa / static_cast<double>(counted);
        }
        if (!mses.empty()) ms.trimmed_mse = trimmed_mean(mses, report.trim_fraction);
        if (timed_count > 0) ms.mean_seconds = secs / static_cast<double>(timed_count);
        report.methods.push_back(std::move(ms));
    }
    return report;
}

} // namespace gsrl::sim
