#pragma once

#include <cstdio>
#include <ostream>
#include <string>

#include <json.hpp>

#include "waveplm/plm.hpp"
#include "waveplm/sim.hpp"

namespace waveplm {

using nlohmann::json;

/// Shortest 17-significant-digit decimal form; round-trips any double, so
/// files written with it are exact and byte-stable across reruns.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline json to_json(const VectorXd& v) {
    json arr = json::array();
    for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

/// Schema version written into every JSON document this library produces.
inline constexpr int k_json_schema_version = 1;

inline json fit_to_json(const PlmFit& fit) {
    json j;
    j["schema_version"] = k_json_schema_version;
    j["kind"] = "plm_fit";
    j["n"] = fit.n;
    j["p"] = fit.p;
    j["filter"] = fit.filter;
    j["j0"] = fit.j0;
    j["rule"] = to_string(fit.rule);
    j["method"] = fit.method;
    j["beta_hat"] = to_json(fit.beta_hat);
    j["theta_hat"] = to_json(fit.theta_hat);
    j["f_hat"] = to_json(fit.f_hat);
    j["sigma_hat"] = {{"sigma_hat", fit.sigma.sigma_hat},
                      {"method", to_string(fit.sigma.method)},
                      {"n_used", fit.sigma.n_used}};
    j["lambda"] = fit.lambda;
    j["solver"] = {{"iterations", fit.iterations},
                   {"converged", fit.converged},
                   {"criterion_value", fit.criterion_value},
                   {"grad_norm", fit.grad_norm}};
    return j;
}

inline json scenario_to_json(const Scenario& sc, double snr_lin_expected) {
    json j;
    j["name"] = sc.name;
    j["n"] = sc.n;
    j["p"] = sc.p;
    j["f_kind"] = to_string(sc.f_kind);
    j["g_polys"] = sc.resolved_g_polys();
    j["eta_sd"] = sc.eta_sd;
    j["snr_f"] = sc.snr_f;
    j["snr_lin_expected"] = snr_lin_expected;
    j["beta_true"] = to_json(sc.beta_true);
    j["sigma"] = sc.sigma;
    j["seed"] = sc.seed;
    j["replications"] = sc.replications;
    j["j0"] = sc.j0;
    return j;
}

/// Aggregate JSON report. Wall-time averages are nondeterministic, so they are
/// only included when `timings` is set; everything else is byte-stable for a
/// fixed scenario and seed.
inline json mc_report_to_json(const McReport& report, bool timings = false) {
    json j;
    j["schema_version"] = k_json_schema_version;
    j["kind"] = "mc_report";
    j["scenario"] = scenario_to_json(report.scenario, report.snr_lin_expected);
    json est = json::array();
    for (const auto& st : report.stats) {
        json e;
        e["label"] = st.label;
        e["replications_ok"] = st.replications_ok;
        e["failures"] = st.failures;
        e["beta_mean"] = to_json(st.beta_mean);
        e["beta_sd"] = to_json(st.beta_sd);
        e["beta_mse"] = st.beta_mse;
        e["beta_mean_abs_err"] = st.beta_mean_abs_err;
        e["sigma_mean"] = st.sigma_mean;
        e["sigma_sd"] = st.sigma_sd;
        e["mise_mean"] = st.mise_mean;
        e["mean_iterations"] = st.mean_iterations;
        e["convergence_rate"] = st.convergence_rate;
        if (timings) e["mean_wall_time"] = st.mean_wall_time;
        est.push_back(e);
    }
    j["estimators"] = est;
    return j;
}

/// Per-replication CSV. First line is a schema comment, second the header.
/// Column count depends on the scenario's p; wall_time appears only with
/// `timings` (it is the one nondeterministic field).
inline void write_mc_csv(std::ostream& os, const McReport& report,
                         bool timings = false) {
    const Index p = report.scenario.p;
    os << "# waveplm-mc schema=" << k_json_schema_version << "\n";
    os << "replication,estimator,converged,iterations,sigma_hat,lambda,mise_f";
    for (Index j = 0; j < p; ++j) os << ",beta_hat_" << (j + 1);
    if (timings) os << ",wall_time";
    os << "\n";
    for (const auto& r : report.records) {
        os << r.replication << ',' << r.estimator << ','
           << (r.failed ? "error" : (r.converged ? "true" : "false")) << ','
           << r.iterations << ',' << fmt17(r.sigma_hat) << ',' << fmt17(r.lambda)
           << ',' << fmt17(r.mise_f);
        for (Index j = 0; j < p; ++j) os << ',' << fmt17(r.beta_hat[j]);
        if (timings) os << ',' << fmt17(r.wall_time);
        os << "\n";
    }
}

} // namespace waveplm
