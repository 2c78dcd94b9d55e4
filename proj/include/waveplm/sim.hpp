#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "waveplm/plm.hpp"

namespace waveplm {

enum class TestFunction { sinusoid, piecewise_constant };

inline std::string to_string(TestFunction f) {
    return f == TestFunction::sinusoid ? "sinusoid" : "piecewise";
}

inline TestFunction test_function_from_string(const std::string& s) {
    if (s == "sinusoid") return TestFunction::sinusoid;
    if (s == "piecewise") return TestFunction::piecewise_constant;
    throw std::invalid_argument("unknown test function '" + s +
                                "' (available: sinusoid, piecewise)");
}

/// Population (1/n) standard deviation; the convention used for every
/// signal-to-noise ratio in this library: SNR(component) = sd(component)/sigma.
inline double population_sd(const VectorXd& v) {
    if (v.size() == 0) return 0.0;
    const double mean = v.mean();
    return std::sqrt((v.array() - mean).square().mean());
}

/// A synthetic data-generating configuration on the grid t_i = i/n, i = 1..n:
///   y_i = x_i . beta_true + f(t_i) + sigma * e_i,      e_i ~ N(0,1)
///   x_ij = g_j(t_i) + eta_sd * eta_ij,                 eta_ij ~ N(0,1)
/// with f the chosen shape rescaled so that sd(f)/sigma = snr_f.
struct Scenario {
    std::string name = "custom";
    Index n = 256;
    Index p = 1;
    TestFunction f_kind = TestFunction::sinusoid;
    /// Deterministic trend of each covariate as ascending polynomial
    /// coefficients in t; empty means the default single-covariate trend
    /// t^5 + 2t (only valid when p == 1).
    std::vector<std::vector<double>> g_polys;
    double eta_sd = 1.0;
    double snr_f = 2.2;
    VectorXd beta_true = VectorXd::Ones(1);
    double sigma = 0.5;
    std::uint64_t seed = 1234;
    int replications = 500;
    /// Coarse level the bundled estimator configurations fit this scenario
    /// with. The sinusoid preset uses 2 because its approximation space must
    /// not swallow the function (V_3 of a 16-tap filter represents a
    /// two-period sinusoid almost exactly, which would make the nonparametric
    /// problem trivial); the discontinuous presets keep the library default.
    int j0 = 3;

    void validate() const {
        if (!is_power_of_two(n) || n < 8)
            throw std::invalid_argument(
                "scenario: n must be a power of two >= 8, got " + std::to_string(n));
        if (p < 0 || 2 * p >= n)
            throw std::invalid_argument("scenario: need 0 <= p < n/2");
        if (beta_true.size() != p)
            throw std::invalid_argument("scenario: beta_true has " +
                                        std::to_string(beta_true.size()) +
                                        " entries for p = " + std::to_string(p));
        if (!g_polys.empty() && g_polys.size() != static_cast<std::size_t>(p))
            throw std::invalid_argument("scenario: g_polys must have one entry per "
                                        "covariate (or be empty for the default)");
        if (g_polys.empty() && p > 1)
            throw std::invalid_argument(
                "scenario: explicit g_polys are required when p > 1");
        if (sigma <= 0.0) throw std::invalid_argument("scenario: sigma must be > 0");
        if (snr_f <= 0.0) throw std::invalid_argument("scenario: snr_f must be > 0");
        if (eta_sd < 0.0) throw std::invalid_argument("scenario: eta_sd must be >= 0");
        if (replications < 1)
            throw std::invalid_argument("scenario: replications must be >= 1");
    }

    std::vector<std::vector<double>> resolved_g_polys() const {
        if (!g_polys.empty()) return g_polys;
        if (p == 0) return {};
        return {{0.0, 2.0, 0.0, 0.0, 0.0, 1.0}}; // t^5 + 2t
    }
};

/// splitmix64-style mixing of the master seed with a stream index; gives every
/// replication an independent, reproducible generator regardless of how the
/// replications are scheduled across threads.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// The two nonparametric shapes, sampled at t_i = i/n and centered to exact
/// zero mean (the scale is irrelevant here; calibrate() sets it):
///  - sinusoid: sin(4 pi t), two full periods;
///  - piecewise: constant levels {0, 3, -2, 1.5, 0} on the intervals split at
///    t = 0.2, 0.45, 0.6, 0.85 (four interior jumps on any grid with n >= 8).
inline VectorXd make_test_function(TestFunction kind, Index n) {
    if (n < 8)
        throw std::invalid_argument("test functions are defined for n >= 8");
    VectorXd f(n);
    if (kind == TestFunction::sinusoid) {
        for (Index i = 0; i < n; ++i) {
            const double t = static_cast<double>(i + 1) / static_cast<double>(n);
            f[i] = std::sin(4.0 * std::numbers::pi * t);
        }
    } else {
        static constexpr double breaks[] = {0.0, 0.2, 0.45, 0.6, 0.85, 1.0};
        static constexpr double levels[] = {0.0, 3.0, -2.0, 1.5, 0.0};
        for (Index i = 0; i < n; ++i) {
            const double t = static_cast<double>(i + 1) / static_cast<double>(n);
            int k = 0;
            while (k < 4 && t > breaks[k + 1]) ++k;
            f[i] = levels[k];
        }
    }
    f.array() -= f.mean();
    return f;
}

struct Calibration {
    /// The test function rescaled so sd(f) = snr_f * sigma.
    VectorXd f;
    double sigma = 0.0;
    /// Expected sd(x.beta)/sigma implied by the deterministic trends plus the
    /// design noise: sqrt(Var_t(sum_j beta_j g_j(t)) + eta_sd^2 ||beta||^2) / sigma.
    /// Reported for reference, never enforced.
    double snr_lin_expected = 0.0;
};

/// Rescales a raw test-function sample to the scenario's target SNR. Exposed
/// separately from the scenario-level overload so degenerate inputs can be
/// exercised directly.
inline Calibration calibrate(const VectorXd& f_raw, const Scenario& sc) {
    sc.validate();
    const double sd = population_sd(f_raw);
    if (sd < 1e-12)
        throw std::invalid_argument(
            "calibrate: test function has zero variance, SNR target unattainable");
    Calibration cal;
    cal.sigma = sc.sigma;
    cal.f = f_raw * (sc.snr_f * sc.sigma / sd);

    const auto polys = sc.resolved_g_polys();
    VectorXd trend = VectorXd::Zero(sc.n);
    for (Index j = 0; j < sc.p; ++j) {
        const auto& c = polys[static_cast<std::size_t>(j)];
        for (Index i = 0; i < sc.n; ++i) {
            const double t = static_cast<double>(i + 1) / static_cast<double>(sc.n);
            double g = 0.0;
            for (std::size_t k = c.size(); k-- > 0;) g = g * t + c[k];
            trend[i] += sc.beta_true[j] * g;
        }
    }
    const double var_trend = sc.p > 0 ? population_sd(trend) * population_sd(trend) : 0.0;
    const double var_eta = sc.eta_sd * sc.eta_sd * sc.beta_true.squaredNorm();
    cal.snr_lin_expected = std::sqrt(var_trend + var_eta) / sc.sigma;
    return cal;
}

inline Calibration calibrate(const Scenario& sc) {
    return calibrate(make_test_function(sc.f_kind, sc.n), sc);
}

/// Draws the n x p design for one replication: column j is g_j(t) plus
/// eta_sd * N(0,1) noise, columns drawn left to right (each column's entries
/// in row order) so the stream layout is part of the reproducibility contract.
inline MatrixXd make_design(const Scenario& sc, std::mt19937_64& rng) {
    const auto polys = sc.resolved_g_polys();
    MatrixXd x(sc.n, sc.p);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Index j = 0; j < sc.p; ++j) {
        const auto& c = polys[static_cast<std::size_t>(j)];
        for (Index i = 0; i < sc.n; ++i) {
            const double t = static_cast<double>(i + 1) / static_cast<double>(sc.n);
            double g = 0.0;
            for (std::size_t k = c.size(); k-- > 0;) g = g * t + c[k];
            x(i, j) = g + sc.eta_sd * gauss(rng);
        }
    }
    return x;
}

struct Dataset {
    VectorXd y;
    MatrixXd x;
    VectorXd f_true;
};

/// Generates replication `rep` of a scenario from its own seeded stream:
/// design noise first (column-major), then the n observation-noise draws.
inline Dataset generate_data(const Scenario& sc, std::uint64_t rep) {
    sc.validate();
    const Calibration cal = calibrate(sc);
    std::mt19937_64 rng(mix_seed(sc.seed, rep));
    Dataset d;
    d.x = make_design(sc, rng);
    d.f_true = cal.f;
    std::normal_distribution<double> gauss(0.0, 1.0);
    VectorXd noise(sc.n);
    for (Index i = 0; i < sc.n; ++i) noise[i] = sc.sigma * gauss(rng);
    d.y = d.f_true + noise;
    if (sc.p > 0) d.y += d.x * sc.beta_true;
    return d;
}

/// One estimator entry in a Monte Carlo comparison: either the two-step
/// half-quadratic fit described by `config`, or the alternating penalized
/// least-squares fit (same sigma/lambda pipeline) when use_backfit is set.
struct McEstimator {
    std::string label;
    bool use_backfit = false;
    PlmConfig config;
    BackfitOptions backfit;

    static McEstimator half_quadratic(const std::string& label, HqAlgorithm alg) {
        McEstimator e;
        e.label = label;
        e.config.solver = SolverOptions::defaults_for(alg);
        return e;
    }
    static McEstimator backfitting(const std::string& label) {
        McEstimator e;
        e.label = label;
        e.use_backfit = true;
        return e;
    }
};

struct McRecord {
    int replication = 0;
    std::string estimator;
    VectorXd beta_hat;
    double sigma_hat = 0.0;
    double lambda = 0.0;
    /// (1/n) sum_i (f_hat(t_i) - f(t_i))^2 for this replication.
    double mise_f = 0.0;
    double wall_time = 0.0;
    int iterations = 0;
    bool converged = false;
    bool failed = false;
    std::string error;
};

struct McEstimatorStats {
    std::string label;
    int replications_ok = 0;
    int failures = 0;
    VectorXd beta_mean;
    VectorXd beta_sd; // sample sd, n-1 denominator
    /// Mean over replications of ||beta_hat - beta_true||^2.
    double beta_mse = 0.0;
    /// Mean over replications of (1/p) sum_j |beta_hat_j - beta_true_j|.
    double beta_mean_abs_err = 0.0;
    double sigma_mean = 0.0;
    double sigma_sd = 0.0;
    double mise_mean = 0.0;
    double mean_iterations = 0.0;
    double mean_wall_time = 0.0;
    double convergence_rate = 0.0;
};

struct McReport {
    Scenario scenario;
    double snr_lin_expected = 0.0;
    std::vector<std::string> estimator_labels;
    /// records[rep * n_estimators + e]; ordering is independent of the number
    /// of worker threads used.
    std::vector<McRecord> records;
    std::vector<McEstimatorStats> stats;
};

namespace detail {

inline McRecord run_single(const Scenario& sc, const Dataset& data,
                           const McEstimator& est, int rep) {
    McRecord rec;
    rec.replication = rep;
    rec.estimator = est.label;
    try {
        const PlmFit fit = est.use_backfit
                               ? fit_plm_backfit(data.y, data.x, est.config, est.backfit)
                               : fit_plm(data.y, data.x, est.config);
        rec.beta_hat = fit.beta_hat;
        rec.sigma_hat = fit.sigma.sigma_hat;
        rec.lambda = fit.lambda;
        rec.mise_f = (fit.f_hat - data.f_true).squaredNorm() /
                     static_cast<double>(sc.n);
        rec.wall_time = fit.wall_time;
        rec.iterations = fit.iterations;
        rec.converged = fit.converged;
    } catch (const std::exception& ex) {
        rec.failed = true;
        rec.error = ex.what();
        rec.beta_hat = VectorXd::Constant(sc.p,
                                          std::numeric_limits<double>::quiet_NaN());
    }
    return rec;
}

inline McEstimatorStats aggregate(const Scenario& sc, const std::string& label,
                                  const std::vector<McRecord>& records,
                                  std::size_t stride, std::size_t offset) {
    McEstimatorStats st;
    st.label = label;
    st.beta_mean = VectorXd::Zero(sc.p);
    st.beta_sd = VectorXd::Zero(sc.p);

    std::vector<const McRecord*> ok;
    for (std::size_t i = offset; i < records.size(); i += stride) {
        if (records[i].failed)
            ++st.failures;
        else
            ok.push_back(&records[i]);
    }
    st.replications_ok = static_cast<int>(ok.size());
    if (ok.empty()) return st;

    const double m = static_cast<double>(ok.size());
    for (const auto* r : ok) {
        st.beta_mean += r->beta_hat;
        st.beta_mse += (r->beta_hat - sc.beta_true).squaredNorm();
        st.beta_mean_abs_err +=
            sc.p > 0 ? (r->beta_hat - sc.beta_true).lpNorm<1>() / sc.p : 0.0;
        st.sigma_mean += r->sigma_hat;
        st.mise_mean += r->mise_f;
        st.mean_iterations += r->iterations;
        st.mean_wall_time += r->wall_time;
        st.convergence_rate += r->converged ? 1.0 : 0.0;
    }
    st.beta_mean /= m;
    st.beta_mse /= m;
    st.beta_mean_abs_err /= m;
    st.sigma_mean /= m;
    st.mise_mean /= m;
    st.mean_iterations /= m;
    st.mean_wall_time /= m;
    st.convergence_rate /= m;

    if (ok.size() > 1) {
        VectorXd ssq = VectorXd::Zero(sc.p);
        double sigma_ssq = 0.0;
        for (const auto* r : ok) {
            ssq += (r->beta_hat - st.beta_mean).cwiseAbs2();
            sigma_ssq += (r->sigma_hat - st.sigma_mean) * (r->sigma_hat - st.sigma_mean);
        }
        st.beta_sd = (ssq / (m - 1.0)).cwiseSqrt();
        st.sigma_sd = std::sqrt(sigma_ssq / (m - 1.0));
    }
    return st;
}

} // namespace detail

/// Runs every estimator on every replication of the scenario. Replications
/// are distributed over `jobs` worker threads; each replication draws from
/// its own seed-mixed stream and results are stored by replication index, so
/// the report (and any file written from it) is identical for any job count.
inline McReport run_monte_carlo(const Scenario& sc,
                                const std::vector<McEstimator>& estimators,
                                int jobs = 1) {
    sc.validate();
    if (estimators.empty())
        throw std::invalid_argument("run_monte_carlo: need at least one estimator");
    for (std::size_t i = 0; i < estimators.size(); ++i)
        for (std::size_t k = i + 1; k < estimators.size(); ++k)
            if (estimators[i].label == estimators[k].label)
                throw std::invalid_argument("run_monte_carlo: duplicate estimator "
                                            "label '" + estimators[i].label + "'");
    if (jobs < 1) throw std::invalid_argument("run_monte_carlo: jobs must be >= 1");

    const std::size_t reps = static_cast<std::size_t>(sc.replications);
    const std::size_t ne = estimators.size();
    McReport report;
    report.scenario = sc;
    report.snr_lin_expected = calibrate(sc).snr_lin_expected;
    for (const auto& e : estimators) report.estimator_labels.push_back(e.label);
    report.records.resize(reps * ne);

    std::atomic<std::size_t> next{0};
    const auto worker = [&]() {
        for (std::size_t rep = next.fetch_add(1); rep < reps;
             rep = next.fetch_add(1)) {
            const Dataset data = generate_data(sc, rep);
            for (std::size_t e = 0; e < ne; ++e)
                report.records[rep * ne + e] = detail::run_single(
                    sc, data, estimators[e], static_cast<int>(rep));
        }
    };

    const int nthreads = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(jobs), reps));
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nthreads));
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (std::size_t e = 0; e < ne; ++e)
        report.stats.push_back(detail::aggregate(sc, estimators[e].label,
                                                 report.records, ne, e));
    return report;
}

/// Single sinusoid + one covariate with trend t^5 + 2t; SNRs 2.2 (function)
/// and ~4.38 (linear part, emergent), beta = 1, sigma = 0.5.
inline Scenario example1_scenario() {
    Scenario s;
    s.name = "example1";
    s.n = 256;
    s.p = 1;
    s.f_kind = TestFunction::sinusoid;
    s.g_polys = {{0.0, 2.0, 0.0, 0.0, 0.0, 1.0}};
    s.snr_f = 2.2;
    s.beta_true = VectorXd::Ones(1);
    s.sigma = 0.5;
    s.j0 = 2;
    return s;
}

/// Same linear part as example1 but a discontinuous (piecewise constant)
/// nonparametric component.
inline Scenario example2_scenario() {
    Scenario s = example1_scenario();
    s.name = "example2";
    s.f_kind = TestFunction::piecewise_constant;
    s.j0 = 3;
    return s;
}

/// Four covariates with polynomial trends, beta = (-1, 3, 0, 8), the
/// discontinuous function, and a stronger nonparametric SNR of 4.38.
inline Scenario example3_scenario() {
    Scenario s;
    s.name = "example3";
    s.n = 256;
    s.p = 4;
    s.f_kind = TestFunction::piecewise_constant;
    s.g_polys = {{0.0, 2.0, 0.0, 0.0, 0.0, 1.0}, // t^5 + 2t
                 {0.0, 2.0},                     // 2t
                 {0.0, 0.0, 1.0},                // t^2
                 {0.0, 0.0, 0.0, 1.0}};          // t^3
    s.snr_f = 4.38;
    s.beta_true = VectorXd(4);
    s.beta_true << -1.0, 3.0, 0.0, 8.0;
    s.sigma = 0.5;
    s.replications = 500;
    return s;
}

inline Scenario scenario_preset(const std::string& name) {
    if (name == "example1") return example1_scenario();
    if (name == "example2") return example2_scenario();
    if (name == "example3") return example3_scenario();
    throw std::invalid_argument("unknown scenario preset '" + name +
                                "' (available: example1, example2, example3)");
}

/// The standard three-way comparison (both half-quadratic solvers plus the
/// alternating minimizer), fitted at the scenario's coarse level.
inline std::vector<McEstimator> default_estimators(const Scenario& sc,
                                                   bool with_backfit = true) {
    auto artur = McEstimator::half_quadratic("artur", HqAlgorithm::artur);
    auto legend = McEstimator::half_quadratic("legend", HqAlgorithm::legend);
    artur.config.j0 = sc.j0;
    legend.config.j0 = sc.j0;
    std::vector<McEstimator> est{artur, legend};
    if (with_backfit) {
        auto bf = McEstimator::backfitting("backfit");
        bf.config.j0 = sc.j0;
        est.push_back(bf);
    }
    return est;
}

} // namespace waveplm
