#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "gsrl_io.hpp"

namespace {

using gsrl::Index;
using gsrl::io::json;

constexpr int exit_ok = 0;
constexpr int exit_input = 1;
constexpr int exit_unconverged = 2;

struct CommonInputs
{
    std::string x;
    std::string y;
    std::string groups;
    bool header = false;
    std::string k = "auto";
    double tol = 1e-8;
    double kkt_tol = 1e-6;
    Index max_iter = 100000;
    std::string out;
};

void add_problem_options(CLI::App* cmd, CommonInputs& in, bool with_y = true)
{
    cmd->add_option("--x", in.x, "design matrix CSV (n rows, p columns)")->required();
    if (with_y) cmd->add_option("--y", in.y, "response CSV (single column)")->required();
    cmd->add_option("--groups", in.groups, "groups JSON: array of arrays of zero-based column indices")->required();
    cmd->add_flag("--header", in.header, "CSV files start with a header row");
    cmd->add_option("--out", in.out, "output JSON path (stdout when omitted)");
}

void add_solver_options(CLI::App* cmd, CommonInputs& in)
{
    cmd->add_option("--k", in.k, "scaling constant K: 'auto' (||X|| / sqrt 2) or a positive value");
    cmd->add_option("--tol", in.tol, "relative iterate-change tolerance");
    cmd->add_option("--kkt-tol", in.kkt_tol, "KKT residual required to declare convergence");
    cmd->add_option("--max-iter", in.max_iter, "iteration cap per fit");
}

gsrl::SolverConfig solver_config(const CommonInputs& in)
{
    gsrl::SolverConfig c;
    if (in.k != "auto") {
        std::size_t used = 0;
        double k = 0.0;
        try {
            k = std::stod(in.k, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != in.k.size()) throw gsrl::InputError("--k: expected 'auto' or a number, got '" + in.k + "'");
        c.k = k;
    }
    c.tolerance = in.tol;
    c.kkt_tolerance = in.kkt_tol;
    c.max_iterations = in.max_iter;
    c.validate();
    return c;
}

void emit(const std::string& out, const json& j)
{
    if (out.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        gsrl::io::write_json(out, j);
    }
}

bool unconverged(const gsrl::GsrlFit& f) { return f.status == gsrl::FitStatus::max_iterations; }

int run_fit(const CommonInputs& in, double lambda)
{
    const auto problem = gsrl::io::read_problem(in.x, in.y, in.groups, in.header);
    const auto config = solver_config(in);
    const auto f = gsrl::fit(problem, lambda, config);
    json j = gsrl::io::fit_json(problem.partition, f);
    j["schema_version"] = gsrl::io::schema_version;
    j["group_weights"] = gsrl::io::to_json(f.group_weights);
    emit(in.out, j);
    return unconverged(f) ? exit_unconverged : exit_ok;
}

struct GridOptions
{
    double min_exp = -6.0;
    double max_exp = 0.0;
    double step = 0.2;
    std::string file;
};

std::vector<double> read_grid_file(const std::string& path)
{
    const json j = gsrl::io::read_json(path);
    if (!j.is_array()) throw gsrl::InputError(path + ": expected a JSON array of lambda values");
    std::vector<double> grid;
    for (const auto& v : j) {
        if (!v.is_number()) throw gsrl::InputError(path + ": grid entries must be numbers");
        grid.push_back(v.get<double>());
    }
    return grid;
}

std::vector<double> build_grid(const gsrl::GsrlProblem& problem, const gsrl::SolverConfig& config,
                               const GridOptions& g)
{
    if (!g.file.empty()) return read_grid_file(g.file);
    return gsrl::path_grid(problem.n(), gsrl::resolve_k(problem, config), g.min_exp, g.max_exp, g.step);
}

int run_path(const CommonInputs& in, const GridOptions& g)
{
    const auto problem = gsrl::io::read_problem(in.x, in.y, in.groups, in.header);
    auto config = solver_config(in);
    config.k = gsrl::resolve_k(problem, config);
    gsrl::PathConfig pc;
    pc.grid = build_grid(problem, config, g);
    const auto path = gsrl::fit_path(problem, pc, config);
    json j;
    j["schema_version"] = gsrl::io::schema_version;
    j["k_scale"] = path.k_scale;
    json entries = json::array();
    bool bad = false;
    for (const auto& f : path.fits) {
        entries.push_back(gsrl::io::fit_json(problem.partition, f));
        bad = bad || unconverged(f);
    }
    j["entries"] = std::move(entries);
    emit(in.out, j);
    return bad ? exit_unconverged : exit_ok;
}

struct TuneOptions
{
    std::string method = "th";
    double alpha = 0.01;
    Index folds = 5;
    std::uint64_t seed = 1;
    std::string event = "none";
};

int run_tune(const CommonInputs& in, const TuneOptions& t, const GridOptions& g)
{
    const auto problem = gsrl::io::read_problem(in.x, in.y, in.groups, in.header);
    const auto config = solver_config(in);
    gsrl::TuningResult r;
    if (t.method == "th") {
        r = gsrl::tune_th_f(problem, t.alpha, config);
    } else if (t.method == "th-gauss") {
        std::optional<gsrl::NoiseEvent> ev;
        if (t.event == "a") ev = gsrl::NoiseEvent::a;
        else if (t.event == "a1") ev = gsrl::NoiseEvent::a1;
        else if (t.event != "none") throw gsrl::InputError("--event: expected none, a or a1");
        r = gsrl::tune_th_gauss(problem, t.alpha, config, ev);
    } else if (t.method == "srl-th") {
        r = gsrl::tune_th_srl(problem, config);
    } else if (t.method == "cv" || t.method == "scv-bic") {
        gsrl::PathConfig pc;
        pc.grid = build_grid(problem, config, g);
        r = t.method == "cv" ? gsrl::cross_validate(problem, pc, t.folds, config, t.seed)
                             : gsrl::scv_bic(problem, pc, t.folds, config, t.seed);
    } else {
        throw gsrl::InputError("--method: expected th, th-gauss, srl-th, cv or scv-bic, got '" + t.method + "'");
    }
    emit(in.out, gsrl::io::tuning_json(problem.partition, r));
    return unconverged(r.selected_fit) ? exit_unconverged : exit_ok;
}

std::vector<Index> parse_support(const std::string& text)
{
    std::vector<Index> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        if (cell.empty()) continue;
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(cell, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != cell.size()) throw gsrl::InputError("--support: '" + cell + "' is not an integer");
        out.push_back(static_cast<Index>(v));
    }
    return out;
}

struct DiagnoseOptions
{
    std::string support;
    Index rounds = 100;
    Index restarts = 5;
    std::uint64_t seed = 2024;
};

int run_diagnose(const CommonInputs& in, const DiagnoseOptions& d)
{
    const gsrl::Matrix X = gsrl::io::read_csv(in.x, in.header);
    const auto part = gsrl::io::read_groups(in.groups, X.cols());
    gsrl::diagnostics::AscentOptions opt;
    opt.rounds = d.rounds;
    opt.restarts = d.restarts;
    opt.seed = d.seed;
    const auto report = gsrl::diagnostics::analyze_design(X, part, parse_support(d.support), opt);
    emit(in.out, gsrl::io::design_json(report));
    return exit_ok;
}

struct SimulateOptions
{
    std::string preset;
    Index p = 60;
    Index reps = 50;
    std::uint64_t seed = 1;
    std::string out;
    bool no_timing = false;
    bool normalize = false;
    unsigned threads = 0;
};

unsigned thread_count(unsigned requested)
{
    if (requested > 0) return requested;
    if (const char* env = std::getenv("GSRL_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void print_summary(const gsrl::sim::SimulationReport& r)
{
    std::printf("%-10s %8s %8s %12s %12s\n", "method", "M(%)", "FA(%)", "trim-MSE", "mean-sec");
    for (const auto& m : r.methods) {
        std::string mse = m.trimmed_mse ? std::to_string(*m.trimmed_mse) : "-";
        std::string secs = m.mean_seconds ? std::to_string(*m.mean_seconds) : "-";
        std::printf("%-10s %8.2f %8.2f %12s %12s\n", gsrl::sim::to_string(m.method), 100.0 * m.mean_miss,
                    100.0 * m.mean_false_alarm, mse.c_str(), secs.c_str());
    }
}

int run_simulate(const SimulateOptions& s)
{
    gsrl::sim::ExperimentPreset e;
    if (s.preset == "table1-path") {
        e = gsrl::sim::table1_preset(gsrl::sim::PresetName::table1_path, s.p, s.seed, s.reps);
    } else if (s.preset == "table1-th") {
        e = gsrl::sim::table1_preset(gsrl::sim::PresetName::table1_th, s.p, s.seed, s.reps);
    } else if (s.preset == "table2") {
        e = gsrl::sim::table2_preset(s.p, s.seed, s.reps);
    } else {
        throw gsrl::InputError("--preset: expected table1-path, table1-th or table2, got '" + s.preset + "'");
    }
    if (s.no_timing) e.timing = false;
    if (s.normalize) e.normalize = true;
    const auto report = gsrl::sim::run_experiment(e, gsrl::SolverConfig{}, thread_count(s.threads));
    const json j = gsrl::io::simulation_json(report);
    if (!s.out.empty()) gsrl::io::write_json(s.out, j);
    print_summary(report);
    bool bad = false;
    for (const auto& m : report.methods) bad = bad || m.nonconverged > 0;
    return bad ? exit_unconverged : exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Group square-root lasso: fitting, tuning, design diagnostics and simulation"};
    app.require_subcommand(1);

    CommonInputs fit_in;
    double lambda = 0.0;
    auto* fit_cmd = app.add_subcommand("fit", "fit at a single lambda");
    add_problem_options(fit_cmd, fit_in);
    add_solver_options(fit_cmd, fit_in);
    fit_cmd->add_option("--lambda", lambda, "tuning parameter (objective scale ||r||/sqrt n)")->required();

    CommonInputs path_in;
    GridOptions path_grid;
    auto* path_cmd = app.add_subcommand("path", "fit along a decreasing lambda grid with warm starts");
    add_problem_options(path_cmd, path_in);
    add_solver_options(path_cmd, path_in);
    auto add_grid = [](CLI::App* cmd, GridOptions& g) {
        auto* file = cmd->add_option("--grid", g.file, "JSON array of lambda values, used as given");
        cmd->add_option("--grid-min-exp", g.min_exp, "smallest exponent e in lambda = sqrt(n) K 2^e")->excludes(file);
        cmd->add_option("--grid-max-exp", g.max_exp, "largest exponent")->excludes(file);
        cmd->add_option("--grid-step", g.step, "exponent spacing")->excludes(file);
    };
    add_grid(path_cmd, path_grid);

    CommonInputs tune_in;
    TuneOptions tune_opt;
    GridOptions tune_grid;
    auto* tune_cmd = app.add_subcommand("tune", "choose lambda by a closed-form rule or by cross-validation");
    add_problem_options(tune_cmd, tune_in);
    add_solver_options(tune_cmd, tune_in);
    tune_cmd->add_option("--method", tune_opt.method, "th | th-gauss | srl-th | cv | scv-bic");
    tune_cmd->add_option("--alpha", tune_opt.alpha, "level of the closed-form rules");
    tune_cmd->add_option("--folds", tune_opt.folds, "number of cross-validation folds");
    tune_cmd->add_option("--seed", tune_opt.seed, "seed of the fold assignment");
    tune_cmd->add_option("--event", tune_opt.event, "th-gauss inflation: none | a | a1");
    add_grid(tune_cmd, tune_grid);

    CommonInputs diag_in;
    DiagnoseOptions diag_opt;
    auto* diag_cmd = app.add_subcommand("diagnose", "irrepresentable-condition and invertibility report");
    add_problem_options(diag_cmd, diag_in, false);
    diag_cmd->add_option("--support", diag_opt.support, "comma separated active group indices")->required();
    diag_cmd->add_option("--rounds", diag_opt.rounds, "ascent rounds per restart");
    diag_cmd->add_option("--restarts", diag_opt.restarts, "ascent restarts");
    diag_cmd->add_option("--seed", diag_opt.seed, "ascent seed");

    SimulateOptions sim_opt;
    auto* sim_cmd = app.add_subcommand("simulate", "run a Monte-Carlo preset");
    sim_cmd->add_option("--preset", sim_opt.preset, "table1-path | table1-th | table2")->required();
    sim_cmd->add_option("--p", sim_opt.p, "number of predictors");
    sim_cmd->add_option("--reps", sim_opt.reps, "replications");
    sim_cmd->add_option("--seed", sim_opt.seed, "master seed");
    sim_cmd->add_option("--out", sim_opt.out, "report JSON path");
    sim_cmd->add_option("--threads", sim_opt.threads, "worker threads (default: GSRL_THREADS or all cores)");
    sim_cmd->add_flag("--no-timing", sim_opt.no_timing, "omit wall-clock fields so reports are reproducible");
    sim_cmd->add_flag("--normalize", sim_opt.normalize, "normalize design columns before fitting");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex);
        return exit_input;
    }

    try {
        if (*fit_cmd) return run_fit(fit_in, lambda);
        if (*path_cmd) return run_path(path_in, path_grid);
        if (*tune_cmd) return run_tune(tune_in, tune_opt, tune_grid);
        if (*diag_cmd) return run_diagnose(diag_in, diag_opt);
        if (*sim_cmd) return run_simulate(sim_opt);
    } catch (const std::exception& ex) {
        std::cerr << "gsrl: error: " << ex.what() << "\n";
        return exit_input;
    }
    return exit_input;
}
