// Command-line front end: fit partially linear models from CSV data, run the
// Monte Carlo comparison scenarios, and apply the forward/inverse wavelet
// transform to columns. Every subcommand is a pure function of its inputs,
// flags, and seed; outputs are byte-stable unless timings are requested.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "waveplm/serialize.hpp"

using namespace waveplm;

namespace {

/// Requested strict behavior failed: distinct exit code (2) from input errors.
struct StrictFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(s);
    while (std::getline(is, field, sep)) out.push_back(trim(field));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns; // column-major
    Index rows = 0;

    Index find(const std::string& name) const {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return static_cast<Index>(j);
        return -1;
    }
};

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open input file '" + path + "'");

    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;

        const auto fields = split(line, ',');
        if (t.header.empty()) {
            t.header = fields;
            t.columns.resize(fields.size());
            continue;
        }
        if (fields.size() != t.header.size())
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected " +
                                     std::to_string(t.header.size()) +
                                     " fields, got " +
                                     std::to_string(fields.size()));
        for (std::size_t j = 0; j < fields.size(); ++j) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(fields[j], &pos);
                if (pos != fields[j].size()) throw std::invalid_argument(fields[j]);
                t.columns[j].push_back(v);
            } catch (const std::exception&) {
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": cannot parse '" + fields[j] +
                                         "' in column '" + t.header[j] +
                                         "' as a number");
            }
        }
        ++t.rows;
    }
    if (t.header.empty())
        throw std::runtime_error(path + ": no header row found");
    if (t.rows == 0) throw std::runtime_error(path + ": no data rows");
    return t;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file '" + path + "'");
    out << text;
}

std::string format_cell(double mean, double sd) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f(%.4f)", mean, sd);
    return buf;
}

std::string format_num(double v, const char* fmt = "%.4f") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitArgs {
    std::string input;
    std::string response = "y";
    std::string covariates; // comma list; empty means "all other columns"
    std::string out;        // JSON destination; empty/- means stdout
    std::string fitted_csv;
    std::string filter = "sym8";
    int j0 = 3;
    std::string rule = "soft";
    double scad_a = 3.7;
    std::string method = "artur"; // artur | legend | backfit
    std::string lambda_mode = "universal";
    double lambda = -1.0; // >= 0 activates fixed mode
    std::string sigma_mode = "qr"; // qr | naive | fixed
    double sigma = -1.0;           // >= 0 activates fixed mode
    double delta = -1.0;           // < 0 keeps the method default
    int max_iter = 2000;
    bool strict = false;
};

PlmConfig config_from(const FitArgs& a) {
    PlmConfig cfg;
    cfg.filter = a.filter;
    cfg.j0 = a.j0;
    cfg.rule = threshold_kind_from_string(a.rule);
    cfg.scad_a = a.scad_a;

    if (a.lambda >= 0.0) {
        cfg.lambda_mode = LambdaMode::fixed;
        cfg.lambda_fixed = a.lambda;
    } else if (a.lambda_mode == "universal") {
        cfg.lambda_mode = LambdaMode::universal;
    } else if (a.lambda_mode == "fixed") {
        throw std::runtime_error("--lambda-mode fixed requires --lambda");
    } else {
        throw std::runtime_error("unknown lambda mode '" + a.lambda_mode + "'");
    }

    if (a.sigma >= 0.0) {
        cfg.sigma_mode = SigmaMode::fixed;
        cfg.sigma_fixed = a.sigma;
    } else if (a.sigma_mode == "qr") {
        cfg.sigma_mode = SigmaMode::qr_mad;
    } else if (a.sigma_mode == "naive") {
        cfg.sigma_mode = SigmaMode::naive_mad;
    } else if (a.sigma_mode == "fixed") {
        throw std::runtime_error("--sigma-mode fixed requires --sigma");
    } else {
        throw std::runtime_error("unknown sigma mode '" + a.sigma_mode + "'");
    }

    if (a.method == "artur" || a.method == "legend") {
        cfg.solver = SolverOptions::defaults_for(hq_algorithm_from_string(a.method));
        if (a.delta > 0.0) cfg.solver.delta = a.delta;
        cfg.solver.max_iter = a.max_iter;
    } else if (a.method != "backfit") {
        throw std::runtime_error("unknown method '" + a.method +
                                 "' (available: artur, legend, backfit)");
    }
    return cfg;
}

int run_fit(const FitArgs& args) {
    const CsvTable table = read_csv(args.input);

    const Index yc = table.find(args.response);
    if (yc < 0)
        throw std::runtime_error("input has no response column '" +
                                 args.response + "'");

    std::vector<std::string> covs;
    if (!args.covariates.empty() && args.covariates != "none") {
        covs = split(args.covariates, ',');
        covs.erase(std::remove(covs.begin(), covs.end(), std::string()),
                   covs.end());
    } else if (args.covariates.empty()) {
        for (const auto& name : table.header)
            if (name != args.response && name != "t") covs.push_back(name);
    }

    const Index n = table.rows;
    VectorXd y(n);
    for (Index i = 0; i < n; ++i) y[i] = table.columns[yc][i];

    MatrixXd x(n, static_cast<Index>(covs.size()));
    for (std::size_t j = 0; j < covs.size(); ++j) {
        const Index c = table.find(covs[j]);
        if (c < 0)
            throw std::runtime_error("input has no covariate column '" +
                                     covs[j] + "'");
        for (Index i = 0; i < n; ++i) x(i, static_cast<Index>(j)) =
            table.columns[c][i];
    }

    const PlmConfig cfg = config_from(args);
    PlmFit fit;
    if (args.method == "backfit") {
        BackfitOptions bo;
        if (args.delta > 0.0) bo.delta = args.delta;
        bo.max_iter = args.max_iter;
        fit = fit_plm_backfit(y, x, cfg, bo);
    } else {
        fit = fit_plm(y, x, cfg);
    }

    nlohmann::json j = fit_to_json(fit);
    j["input"] = {{"file", args.input},
                  {"response", args.response},
                  {"covariates", covs}};
    write_text(args.out, j.dump(2) + "\n");

    if (!args.fitted_csv.empty()) {
        std::ostringstream os;
        os << "t,y,xb,f_hat,y_hat\n";
        for (Index i = 0; i < n; ++i) {
            const double t = static_cast<double>(i + 1) / static_cast<double>(n);
            const double xb =
                fit.p > 0 ? x.row(i).dot(fit.beta_hat) : 0.0;
            os << fmt17(t) << ',' << fmt17(y[i]) << ',' << fmt17(xb) << ','
               << fmt17(fit.f_hat[i]) << ',' << fmt17(xb + fit.f_hat[i]) << "\n";
        }
        write_text(args.fitted_csv, os.str());
    }

    if (args.strict && !fit.converged)
        throw StrictFailure("solver did not converge within " +
                            std::to_string(args.max_iter) + " iterations");
    return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimArgs {
    std::string preset;
    int reps = -1;
    std::uint64_t seed = 0;
    bool seed_set = false;
    Index n = -1;
    int j0 = -999;
    double snr_f = -1.0;
    std::string filter;
    std::string rule;
    std::string estimators = "artur,legend,backfit";
    int jobs = 1;
    std::string out_csv;
    std::string out_json;
    bool timings = false;
};

std::vector<McEstimator> build_estimators(const SimArgs& args, const Scenario& sc) {
    std::vector<McEstimator> out;
    for (const auto& name : split(args.estimators, ',')) {
        if (name.empty()) continue;
        McEstimator e;
        if (name == "artur" || name == "legend")
            e = McEstimator::half_quadratic(name,
                                            hq_algorithm_from_string(name));
        else if (name == "backfit")
            e = McEstimator::backfitting(name);
        else
            throw std::runtime_error("unknown estimator '" + name +
                                     "' (available: artur, legend, backfit)");
        e.config.j0 = sc.j0;
        if (!args.filter.empty()) e.config.filter = args.filter;
        if (!args.rule.empty()) e.config.rule = threshold_kind_from_string(args.rule);
        out.push_back(e);
    }
    if (out.empty()) throw std::runtime_error("no estimators selected");
    return out;
}

void print_table(const McReport& r, int jobs, bool timings) {
    const Scenario& sc = r.scenario;
    std::ostringstream os;
    os << "# scenario " << sc.name << ": n=" << sc.n << " p=" << sc.p
       << " f=" << to_string(sc.f_kind) << " snr_f=" << sc.snr_f
       << " sigma=" << sc.sigma << " seed=" << sc.seed
       << " replications=" << sc.replications << " jobs=" << jobs << "\n";
    os << "# coarse level j0=" << sc.j0
       << ", expected linear-part snr=" << format_num(r.snr_lin_expected, "%.3f")
       << "\n";

    const int label_w = 18, cell_w = 18;
    auto pad = [&](const std::string& s, int w) {
        std::string out = s;
        if (static_cast<int>(out.size()) < w) out.resize(w, ' ');
        return out;
    };

    os << pad("", label_w);
    for (const auto& st : r.stats) os << pad(st.label, cell_w);
    os << "\n";

    for (Index j = 0; j < sc.p; ++j) {
        os << pad("beta_" + std::to_string(j + 1) + " (=" +
                      format_num(sc.beta_true[j], "%g") + ")",
                  label_w);
        for (const auto& st : r.stats)
            os << pad(st.replications_ok > 0
                          ? format_cell(st.beta_mean[j], st.beta_sd[j])
                          : "-",
                      cell_w);
        os << "\n";
    }

    os << pad("MSE(beta)", label_w);
    for (const auto& st : r.stats)
        os << pad(format_num(st.beta_mse, "%.6f"), cell_w);
    os << "\n";

    os << pad("sigma_hat", label_w);
    for (const auto& st : r.stats)
        os << pad(format_cell(st.sigma_mean, st.sigma_sd), cell_w);
    os << "\n";

    os << pad("MISE(f)", label_w);
    for (const auto& st : r.stats)
        os << pad(format_num(st.mise_mean, "%.6f"), cell_w);
    os << "\n";

    os << pad("mean iterations", label_w);
    for (const auto& st : r.stats)
        os << pad(format_num(st.mean_iterations, "%.1f"), cell_w);
    os << "\n";

    if (timings) {
        os << pad("mean solve (ms)", label_w);
        for (const auto& st : r.stats)
            os << pad(format_num(1e3 * st.mean_wall_time, "%.4f"), cell_w);
        os << "\n";
    }

    os << pad("converged", label_w);
    for (const auto& st : r.stats) {
        const int total = st.replications_ok + st.failures;
        os << pad(format_num(total > 0 ? 100.0 * st.convergence_rate *
                                             st.replications_ok / total
                                       : 0.0,
                             "%.1f%%"),
                  cell_w);
    }
    os << "\n";

    os << pad("failures", label_w);
    for (const auto& st : r.stats)
        os << pad(std::to_string(st.failures), cell_w);
    os << "\n";

    std::cout << os.str();
}

int run_simulate(const SimArgs& args) {
    Scenario sc = scenario_preset(args.preset);
    if (args.reps > 0) sc.replications = args.reps;
    if (args.seed_set) sc.seed = args.seed;
    if (args.n > 0) sc.n = args.n;
    if (args.j0 != -999) sc.j0 = args.j0;
    if (args.snr_f > 0.0) sc.snr_f = args.snr_f;
    sc.validate();

    const auto estimators = build_estimators(args, sc);
    const McReport report = run_monte_carlo(sc, estimators, args.jobs);

    if (!args.out_csv.empty()) {
        std::ostringstream os;
        write_mc_csv(os, report, args.timings);
        write_text(args.out_csv, os.str());
    }
    if (!args.out_json.empty())
        write_text(args.out_json,
                   mc_report_to_json(report, args.timings).dump(2) + "\n");

    print_table(report, args.jobs, args.timings);
    return 0;
}

// ---------------------------------------------------------------------------
// transform
// ---------------------------------------------------------------------------

struct TransformArgs {
    std::string input;
    std::string column; // empty: first column
    std::string out;
    std::string filter = "sym8";
    int j0 = 3;
    bool filter_set = false; // explicit flags beat file metadata on inversion
    bool j0_set = false;
    bool inverse = false;
};

int run_transform_forward(const TransformArgs& args) {
    const CsvTable table = read_csv(args.input);
    Index col = 0;
    if (!args.column.empty()) {
        col = table.find(args.column);
        if (col < 0)
            throw std::runtime_error("input has no column '" + args.column + "'");
    }
    VectorXd v(table.rows);
    for (Index i = 0; i < table.rows; ++i) v[i] = table.columns[col][i];

    const WaveletCoeffs c = dwt_forward(v, wavelet_filter(args.filter), args.j0);

    std::ostringstream os;
    os << "# waveplm-dwt schema=" << k_json_schema_version
       << " filter=" << args.filter << " j0=" << args.j0 << " n=" << table.rows
       << "\n";
    os << "level,position,value\n";
    for (Index k = 0; k < c.scaling.size(); ++k)
        os << "-1," << (k + 1) << ',' << fmt17(c.scaling[k]) << "\n";
    for (int j = c.j0; j < c.J; ++j) {
        const VectorXd& d = c.detail(j);
        for (Index k = 0; k < d.size(); ++k)
            os << j << ',' << (k + 1) << ',' << fmt17(d[k]) << "\n";
    }
    write_text(args.out, os.str());
    return 0;
}

int run_transform_inverse(const TransformArgs& args) {
    std::ifstream in(args.input);
    if (!in)
        throw std::runtime_error("cannot open input file '" + args.input + "'");

    std::string filter = args.filter;
    int j0 = args.j0;
    std::map<int, std::map<Index, double>> blocks; // level -> position -> value

    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        if (stripped[0] == '#') {
            // Metadata written by the forward transform; explicit flags win.
            std::istringstream ms(stripped.substr(1));
            std::string tok;
            while (ms >> tok) {
                if (tok.rfind("filter=", 0) == 0 && !args.filter_set)
                    filter = tok.substr(7);
                if (tok.rfind("j0=", 0) == 0 && !args.j0_set)
                    j0 = std::stoi(tok.substr(3));
            }
            continue;
        }
        const auto fields = split(line, ',');
        if (!header_seen) {
            if (fields.size() != 3 || fields[0] != "level")
                throw std::runtime_error(
                    args.input +
                    ": inverse input must have a level,position,value header");
            header_seen = true;
            continue;
        }
        if (fields.size() != 3)
            throw std::runtime_error(args.input + ":" + std::to_string(lineno) +
                                     ": expected 3 fields");
        try {
            const int level = std::stoi(fields[0]);
            const Index pos = std::stol(fields[1]);
            const double val = std::stod(fields[2]);
            if (!blocks[level].emplace(pos, val).second)
                throw std::runtime_error("duplicate coefficient");
        } catch (const std::exception& ex) {
            throw std::runtime_error(args.input + ":" + std::to_string(lineno) +
                                     ": " + ex.what());
        }
    }
    if (blocks.empty())
        throw std::runtime_error(args.input + ": no coefficients found");

    WaveletCoeffs c;
    c.j0 = j0;
    const auto take_block = [&](int level, Index expect) {
        auto it = blocks.find(level);
        if (it == blocks.end())
            throw std::runtime_error("missing coefficient block for level " +
                                     std::to_string(level));
        VectorXd v(expect);
        if (static_cast<Index>(it->second.size()) != expect)
            throw std::runtime_error("level " + std::to_string(level) + " has " +
                                     std::to_string(it->second.size()) +
                                     " coefficients, expected " +
                                     std::to_string(expect));
        for (const auto& [pos, val] : it->second) {
            if (pos < 1 || pos > expect)
                throw std::runtime_error("position " + std::to_string(pos) +
                                         " outside level " +
                                         std::to_string(level));
            v[pos - 1] = val;
        }
        blocks.erase(it);
        return v;
    };

    c.scaling = take_block(-1, Index(1) << j0);
    int J = j0;
    while (blocks.count(J)) {
        c.details.push_back(take_block(J, Index(1) << J));
        ++J;
    }
    c.J = J;
    if (!blocks.empty())
        throw std::runtime_error("unexpected coefficient level " +
                                 std::to_string(blocks.begin()->first));

    const VectorXd v = dwt_inverse(c, wavelet_filter(filter));

    std::ostringstream os;
    os << "value\n";
    for (Index i = 0; i < v.size(); ++i) os << fmt17(v[i]) << "\n";
    write_text(args.out, os.str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Partially linear models by wavelet-domain penalized least "
                 "squares"};
    app.require_subcommand(1);
    // Options the subcommand does not know (notably --config) climb to the
    // parent, so `waveplm fit data.csv --config run.ini` works as expected.
    app.fallthrough();
    app.set_config("--config", "",
                   "Read options from an INI-style config file; subcommand "
                   "options live in a [fit]/[simulate]/[transform] section");
    app.allow_config_extras(false);

    FitArgs fa;
    CLI::App* fit = app.add_subcommand(
        "fit", "Fit y = x.beta + f(t) + noise from a CSV file");
    fit->add_option("input", fa.input, "Input CSV (header row required)")
        ->required();
    fit->add_option("--response", fa.response,
                    "Response column name (default y)");
    fit->add_option("--covariates", fa.covariates,
                    "Comma-separated covariate columns ('none' for pure "
                    "denoising; default: every other column except 't')");
    fit->add_option("--out", fa.out, "Fit JSON destination (default stdout)");
    fit->add_option("--fitted-csv", fa.fitted_csv,
                    "Also write per-point fitted values (t,y,xb,f_hat,y_hat)");
    fit->add_option("--filter", fa.filter, "Wavelet filter: haar, db4, sym8");
    fit->add_option("--j0", fa.j0, "Coarse resolution level")
        ->check(CLI::Range(0, 30));
    fit->add_option("--rule", fa.rule, "Shrinkage rule: soft, hard, scad");
    fit->add_option("--scad-a", fa.scad_a, "SCAD parameter a (> 2)");
    fit->add_option("--method", fa.method,
                    "Estimation path: artur, legend, backfit");
    fit->add_option("--lambda-mode", fa.lambda_mode,
                    "Threshold choice: universal, fixed");
    fit->add_option("--lambda", fa.lambda, "Fixed threshold value");
    fit->add_option("--sigma-mode", fa.sigma_mode,
                    "Noise scale: qr, naive, fixed");
    fit->add_option("--sigma", fa.sigma, "Fixed noise scale value");
    fit->add_option("--delta", fa.delta, "Solver stopping tolerance");
    fit->add_option("--max-iter", fa.max_iter, "Solver iteration cap")
        ->check(CLI::PositiveNumber);
    fit->add_flag("--strict", fa.strict,
                  "Exit with status 2 if the solver does not converge");

    SimArgs sa;
    CLI::App* sim = app.add_subcommand(
        "simulate", "Run a Monte Carlo comparison scenario");
    sim->add_option("--preset", sa.preset,
                    "Scenario preset: example1, example2, example3")
        ->required();
    sim->add_option("--reps", sa.reps, "Replication count override");
    sim->add_option("--seed", sa.seed, "Master seed override");
    sim->add_option("--n", sa.n, "Sample size override (power of two)");
    sim->add_option("--j0", sa.j0, "Coarse level override");
    sim->add_option("--snr-f", sa.snr_f, "Nonparametric SNR override");
    sim->add_option("--filter", sa.filter, "Wavelet filter override");
    sim->add_option("--rule", sa.rule, "Shrinkage rule override");
    sim->add_option("--estimators", sa.estimators,
                    "Comma list from {artur, legend, backfit}");
    sim->add_option("--jobs", sa.jobs, "Worker threads")
        ->check(CLI::PositiveNumber);
    sim->add_option("--out-csv", sa.out_csv, "Per-replication CSV destination");
    sim->add_option("--out-json", sa.out_json, "Aggregate JSON destination");
    sim->add_flag("--timings", sa.timings,
                  "Include wall times (makes outputs nondeterministic)");

    TransformArgs ta;
    CLI::App* tr = app.add_subcommand(
        "transform", "Apply the forward or inverse wavelet transform");
    tr->add_option("input", ta.input, "Input CSV")->required();
    tr->add_option("--column", ta.column,
                   "Column to transform (default: first)");
    tr->add_option("--out", ta.out, "Output destination (default stdout)");
    tr->add_option("--filter", ta.filter, "Wavelet filter: haar, db4, sym8");
    tr->add_option("--j0", ta.j0, "Coarse resolution level")
        ->check(CLI::Range(0, 30));
    tr->add_flag("--inverse", ta.inverse,
                 "Invert a level,position,value coefficient file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    sa.seed_set = sim->count("--seed") > 0;
    ta.filter_set = tr->count("--filter") > 0;
    ta.j0_set = tr->count("--j0") > 0;

    try {
        if (fit->parsed()) return run_fit(fa);
        if (sim->parsed()) return run_simulate(sa);
        if (tr->parsed())
            return ta.inverse ? run_transform_inverse(ta)
                              : run_transform_forward(ta);
    } catch (const StrictFailure& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
