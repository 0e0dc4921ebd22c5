#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <gsrl/gsrl.hpp>

// File formats of the command-line tool: numeric CSV in, JSON out.

namespace gsrl::io {

using json = nlohmann::json;

inline constexpr int schema_version = 1;

/// Numeric CSV: comma separated, '.' decimal point, optional single header row.
inline Matrix read_csv(const std::string& path, bool header)
{
    std::ifstream in(path);
    if (!in) throw InputError(path + ": cannot open file");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (header && line_no == 1) continue;
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(ss, cell, ',')) {
            ++col;
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || cell.find_first_not_of(" \t", used) != std::string::npos) {
                throw InputError(path + ":" + std::to_string(line_no) + ": column " + std::to_string(col) +
                                 " is not a number: '" + cell + "'");
            }
            if (!std::isfinite(v)) {
                throw InputError(path + ":" + std::to_string(line_no) + ": column " + std::to_string(col) +
                                 " is not finite");
            }
            row.push_back(v);
        }
        if (!line.empty() && line.back() == ',') {
            throw InputError(path + ":" + std::to_string(line_no) + ": trailing empty column");
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw InputError(path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(rows.front().size()) + " columns, found " + std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw InputError(path + ": no data rows");
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
    return m;
}

inline Vector read_vector_csv(const std::string& path, bool header)
{
    const Matrix m = read_csv(path, header);
    if (m.cols() != 1) throw InputError(path + ": expected a single column, found " + std::to_string(m.cols()));
    return m.col(0);
}

inline json read_json(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InputError(path + ": cannot open file");
    try {
        return json::parse(in);
    } catch (const json::parse_error& ex) {
        throw InputError(path + ": malformed JSON at byte " + std::to_string(ex.byte));
    }
}

/// groups.json: an array of arrays of zero-based column indices.
inline GroupPartition read_groups(const std::string& path, Index p)
{
    const json j = read_json(path);
    if (!j.is_array()) throw InputError(path + ": expected an array of arrays of column indices");
    std::vector<std::vector<Index>> groups;
    for (std::size_t g = 0; g < j.size(); ++g) {
        if (!j[g].is_array()) throw InputError(path + ": group " + std::to_string(g) + " is not an array");
        std::vector<Index> cols;
        for (const auto& v : j[g]) {
            if (!v.is_number_integer()) {
                throw InputError(path + ": group " + std::to_string(g) + " contains a non-integer entry");
            }
            cols.push_back(v.get<Index>());
        }
        groups.push_back(std::move(cols));
    }
    try {
        return GroupPartition(std::move(groups), p);
    } catch (const InputError& ex) {
        throw InputError(path + ": " + ex.what());
    }
}

inline GsrlProblem read_problem(const std::string& x_path, const std::string& y_path, const std::string& groups_path,
                                bool header)
{
    Matrix X = read_csv(x_path, header);
    Vector Y = read_vector_csv(y_path, header);
    if (Y.size() != X.rows()) {
        throw InputError(y_path + ": has " + std::to_string(Y.size()) + " rows but " + x_path + " has " +
                         std::to_string(X.rows()));
    }
    GroupPartition part = read_groups(groups_path, X.cols());
    return GsrlProblem(std::move(X), std::move(Y), std::move(part));
}

inline json to_json(const Vector& v)
{
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline json grouped(const GroupPartition& part, const Vector& beta)
{
    json a = json::array();
    for (Index g = 0; g < part.num_groups(); ++g) a.push_back(to_json(part.gather(beta, g)));
    return a;
}

inline json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

/// NaN has no JSON spelling; it is written as null.
inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json fit_json(const GroupPartition& part, const GsrlFit& f)
{
    json j;
    j["lambda"] = nullable(f.lambda);
    j["coefficients"] = grouped(part, f.beta);
    j["beta"] = to_json(f.beta);
    j["support"] = f.support;
    j["objective"] = f.objective;
    j["kkt_residual"] = finite_or_null(f.kkt_residual);
    j["iterations"] = f.iterations;
    j["converged"] = f.converged;
    j["status"] = to_string(f.status);
    j["k_scale"] = f.k_scale;
    return j;
}

inline json tuning_json(const GroupPartition& part, const TuningResult& t)
{
    json j;
    j["schema_version"] = schema_version;
    j["method"] = to_string(t.method);
    j["lambda"] = nullable(t.lambda);
    j["group_weights"] = to_json(t.selected_fit.group_weights);
    j["selected_fit"] = fit_json(part, t.selected_fit);
    j["bias_corrected_coefficients"] = grouped(part, t.bias_corrected_beta);
    j["bias_corrected_beta"] = to_json(t.bias_corrected_beta);
    const auto& m = t.metadata;
    json meta;
    meta["tau0"] = nullable(m.tau0);
    meta["zeta"] = nullable(m.zeta);
    meta["alpha"] = nullable(m.alpha);
    meta["grid"] = m.grid;
    meta["cv_errors"] = m.cv_errors;
    meta["patterns"] = m.patterns;
    meta["pattern_first_lambda"] = m.pattern_first_lambda;
    meta["pattern_cv_sse"] = m.pattern_cv_sse;
    meta["pattern_criterion"] = m.pattern_criterion;
    meta["pattern_df"] = m.pattern_df;
    meta["pattern_rank_deficient"] = m.pattern_flagged;
    meta["folds"] = m.folds;
    meta["selected_index"] = m.selected_index ? json(*m.selected_index) : json(nullptr);
    meta["bias_correction_rank_deficient"] = m.bias_correction_rank_deficient;
    j["metadata"] = std::move(meta);
    return j;
}

inline json design_json(const diagnostics::DesignReport& r)
{
    json j;
    j["schema_version"] = schema_version;
    j["support"] = r.blocks.support;
    j["complement"] = r.blocks.complement;
    j["s11_invertible"] = r.s11_invertible;
    j["s11_min_eigenvalue"] = r.s11_min_eigenvalue;
    j["s11_max_eigenvalue"] = r.s11_max_eigenvalue;
    j["gir_upper_bound"] = finite_or_null(r.gir_upper_bound);
    j["gir_ascent_estimate"] = finite_or_null(r.gir_ascent_estimate);
    j["xi_inf_bound"] = finite_or_null(r.xi_inf_bound);
    j["xi_ascent_estimate"] = finite_or_null(r.xi_ascent_estimate);
    j["gram_diagonal_support"] = to_json(r.blocks.s11.diagonal());
    j["gram_diagonal_complement"] = to_json(r.blocks.s22.diagonal());
    j["notes"] = r.notes;
    return j;
}

inline json simulation_json(const sim::SimulationReport& r)
{
    const auto& e = r.preset;
    json j;
    j["schema_version"] = schema_version;
    json preset;
    preset["name"] = to_string(e.name);
    preset["n"] = e.n;
    preset["p"] = e.p;
    preset["group_size"] = e.group_size;
    preset["beta0"] = to_json(e.beta0);
    preset["sigma"] = e.sigma;
    preset["rho"] = e.rho;
    preset["replications"] = e.replications;
    preset["n_test"] = e.n_test;
    preset["seed"] = e.seed;
    preset["normalize"] = e.normalize;
    preset["alpha"] = e.alpha;
    preset["folds"] = e.folds;
    preset["timing"] = e.timing;
    j["preset"] = std::move(preset);
    j["trim_fraction"] = r.trim_fraction;
    j["trim_convention"] = r.trim_convention;
    json methods = json::array();
    for (const auto& m : r.methods) {
        json mj;
        mj["method"] = to_string(m.method);
        mj["mean_miss"] = m.mean_miss;
        mj["mean_false_alarm"] = m.mean_false_alarm;
        mj["trimmed_mse"] = nullable(m.trimmed_mse);
        if (e.timing) mj["mean_seconds"] = nullable(m.mean_seconds);
        mj["failures"] = m.failures;
        mj["nonconverged"] = m.nonconverged;
        json recs = json::array();
        for (const auto& rec : m.records) {
            json rj;
            rj["replication"] = rec.replication;
            rj["support"] = rec.support;
            rj["miss"] = rec.selection.miss;
            rj["false_alarm"] = rec.selection.false_alarm;
            rj["mse"] = nullable(rec.mse);
            rj["lambda"] = nullable(rec.lambda);
            if (e.timing) rj["seconds"] = nullable(rec.seconds);
            rj["noise_v"] = nullable(rec.noise_v);
            rj["noise_event"] = rec.noise_event ? json(*rec.noise_event) : json(nullptr);
            rj["converged"] = rec.converged;
            rj["nonconverged_fits"] = rec.nonconverged_fits;
            if (!rec.error.empty()) rj["error"] = rec.error;
            recs.push_back(std::move(rj));
        }
        mj["records"] = std::move(recs);
        methods.push_back(std::move(mj));
    }
    j["methods"] = std::move(methods);
    return j;
}

/// Writes through a sibling temporary file and renames it into place.
inline void write_atomic(const std::string& path, const std::string& content)
{
    const std::filesystem::path target(path);
    std::filesystem::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError(path + ": cannot open for writing");
        out << content;
        out.flush();
        if (!out) throw InputError(path + ": write failed");
    }
    std::filesystem::rename(tmp, target);
}

inline void write_json(const std::string& path, const json& j) { write_atomic(path, j.dump(2) + "\n"); }

} // namespace gsrl::io
