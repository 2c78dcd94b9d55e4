// Acceptance gate: one pass/fail line per shipping criterion, with the
// measured quantities printed so a reader can audit each verdict. The process
// exit code is the number of failed criteria.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "waveplm/serialize.hpp"

using namespace waveplm;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

int g_failures = 0;

void report(int id, const std::string& name,
            const std::function<Verdict()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& ex) {
        v.pass = false;
        v.detail = std::string("exception: ") + ex.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::printf("[%s] %d. %s: %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", id,
                name.c_str(), v.detail.c_str(), secs);
    std::fflush(stdout);
    if (!v.pass) ++g_failures;
}

std::string num(double v, const char* fmt = "%.6g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}

// --------------------------------------------------------------------------
// 1. Transform correctness across filters and sizes.
// --------------------------------------------------------------------------
Verdict dwt_correctness() {
    double worst_recon = 0.0, worst_parseval = 0.0;
    std::mt19937_64 gen(20260815);
    std::normal_distribution<double> nd;
    for (const std::string name : {"haar", "db4", "sym8"}) {
        const WaveletFilter filter = wavelet_filter(name);
        for (const Index n : {Index(64), Index(256), Index(1024)}) {
            for (int trial = 0; trial < 100; ++trial) {
                VectorXd x(n);
                for (Index i = 0; i < n; ++i) x[i] = nd(gen);
                const int j0 = trial % log2_exact(n);
                const WaveletCoeffs c = dwt_forward(x, filter, j0);
                const VectorXd back = dwt_inverse(c, filter);
                worst_recon = std::max(
                    worst_recon, (back - x).lpNorm<Eigen::Infinity>());
                worst_parseval = std::max(
                    worst_parseval,
                    std::abs(c.flatten().squaredNorm() - x.squaredNorm()) /
                        x.squaredNorm());
            }
        }
    }
    Verdict v;
    v.pass = worst_recon < 1e-10 && worst_parseval < 1e-9;
    v.detail = "max reconstruction error " + num(worst_recon) +
               " (< 1e-10), max relative Parseval defect " +
               num(worst_parseval) + " (< 1e-9)";
    return v;
}

// --------------------------------------------------------------------------
// 2. Two-step estimate == joint-criterion minimizer on random instances.
// --------------------------------------------------------------------------
Verdict two_step_equivalence() {
    const double lambdas[] = {0.5, 1.0, 2.0};
    double worst_beta = 0.0, worst_theta = 0.0;
    for (int i = 0; i < 100; ++i) {
        Scenario sc;
        sc.n = 32;
        sc.p = 1 + i % 2;
        sc.beta_true = VectorXd::LinSpaced(sc.p, 1.0, sc.p == 1 ? 1.0 : -2.0);
        if (sc.p == 2) sc.g_polys = {{0.0, 1.0}, {0.0, 0.0, 1.0}};
        sc.j0 = 2;
        sc.seed = 9000 + static_cast<std::uint64_t>(i);
        const Dataset d = generate_data(sc, 0);

        PlmConfig cfg;
        cfg.j0 = sc.j0;
        cfg.lambda_mode = LambdaMode::fixed;
        cfg.lambda_fixed = lambdas[i % 3];
        cfg.solver.delta = 1e-12;
        cfg.solver.max_iter = 10000;
        const EquivalenceReport rep = equivalence_check(d.y, d.x, cfg);
        worst_beta = std::max(worst_beta, rep.delta_beta);
        worst_theta = std::max(worst_theta, rep.delta_theta_inf);
    }
    Verdict v;
    v.pass = worst_beta < 1e-6 && worst_theta < 1e-6;
    v.detail = "100 instances (n=32, p in {1,2}, lambda in {0.5,1,2}): max "
               "|delta beta| " +
               num(worst_beta) + ", max |delta theta|_inf " + num(worst_theta) +
               " (both < 1e-6)";
    return v;
}

// --------------------------------------------------------------------------
// 3. Noise-scale estimation: QR projection removes the covariate part.
// --------------------------------------------------------------------------
Verdict sigma_table() {
    const Scenario sc = example1_scenario();
    McEstimator with_qr = McEstimator::half_quadratic("qr", HqAlgorithm::artur);
    with_qr.config.j0 = sc.j0;
    McEstimator naive = McEstimator::half_quadratic("naive", HqAlgorithm::artur);
    naive.config.j0 = sc.j0;
    naive.config.sigma_mode = SigmaMode::naive_mad;

    const McReport rep = run_monte_carlo(sc, {with_qr, naive}, 4);
    const auto& q = rep.stats[0];
    const auto& m = rep.stats[1];

    Verdict v;
    v.pass = q.sigma_mean > 0.47 && q.sigma_mean < 0.53 && q.sigma_sd < 0.08 &&
             m.sigma_mean > 0.9;
    v.detail = "500 replications: QR sigma_hat " + num(q.sigma_mean, "%.4f") +
               "(" + num(q.sigma_sd, "%.4f") +
               ") vs target 0.50 in [0.47,0.53] sd<0.08; naive sigma_hat " +
               num(m.sigma_mean, "%.4f") + "(" + num(m.sigma_sd, "%.4f") +
               ") > 0.9";
    return v;
}

// --------------------------------------------------------------------------
// 4. Monte Carlo tables for both test functions.
// --------------------------------------------------------------------------
Verdict mc_tables() {
    Verdict v;
    v.pass = true;
    std::ostringstream os;
    for (const Scenario& sc : {example1_scenario(), example2_scenario()}) {
        const McReport rep =
            run_monte_carlo(sc, default_estimators(sc, false), 4);
        const auto& a = rep.stats[0];
        const auto& l = rep.stats[1];
        const double mean_gap =
            (a.beta_mean - l.beta_mean).lpNorm<Eigen::Infinity>();
        const bool ok = mean_gap <= 1e-4 &&
                        std::abs(a.beta_mean[0] - 1.0) <= 0.10 &&
                        a.beta_sd[0] <= 0.06 && a.mise_mean >= 0.05 &&
                        a.mise_mean <= 0.20 &&
                        std::abs(l.beta_mean[0] - 1.0) <= 0.10 &&
                        l.beta_sd[0] <= 0.06 && l.mise_mean >= 0.05 &&
                        l.mise_mean <= 0.20;
        v.pass = v.pass && ok;
        os << sc.name << " beta_hat " << num(a.beta_mean[0], "%.4f") << "("
           << num(a.beta_sd[0], "%.4f") << ") MISE "
           << num(a.mise_mean, "%.4f") << " solver-mean-gap "
           << num(mean_gap) << "; ";
    }
    v.detail = os.str() +
               "bands: |mean-1|<=0.10, sd<=0.06, MISE in [0.05,0.20], gap<=1e-4";
    return v;
}

// --------------------------------------------------------------------------
// 5. Ordinal solver timing at n = 1024.
// --------------------------------------------------------------------------
Verdict solver_timing() {
    Scenario sc = example1_scenario();
    sc.n = 1024;
    sc.replications = 100;
    const auto estimators = default_estimators(sc, false);
    const McReport rep = run_monte_carlo(sc, estimators, 1);
    const auto& a = rep.stats[0];
    const auto& l = rep.stats[1];

    double worst_gap = 0.0;
    for (int r = 0; r < sc.replications; ++r) {
        const auto& ra = rep.records[static_cast<std::size_t>(r) * 2];
        const auto& rl = rep.records[static_cast<std::size_t>(r) * 2 + 1];
        worst_gap = std::max(
            worst_gap, (ra.beta_hat - rl.beta_hat).lpNorm<Eigen::Infinity>());
    }

    Verdict v;
    v.pass = l.mean_wall_time < a.mean_wall_time && worst_gap < 1e-5;
    v.detail = "mean solve time artur " + num(1e6 * a.mean_wall_time, "%.1f") +
               " us (" + num(a.mean_iterations, "%.1f") +
               " iters) vs legend " + num(1e6 * l.mean_wall_time, "%.1f") +
               " us (" + num(l.mean_iterations, "%.1f") +
               " iters); required legend < artur; max |delta beta| " +
               num(worst_gap) + " (< 1e-5)";
    return v;
}

// --------------------------------------------------------------------------
// 6. Four-covariate comparison against iteration-capped backfitting.
// --------------------------------------------------------------------------
Verdict hq_vs_backfit() {
    Scenario sc = example3_scenario();
    sc.replications = 200;
    const McReport rep = run_monte_carlo(sc, default_estimators(sc, true), 4);
    const auto& a = rep.stats[0];
    const auto& l = rep.stats[1];
    const auto& b = rep.stats[2];

    Verdict v;
    v.pass = a.beta_mse < b.beta_mse && l.beta_mse < b.beta_mse;
    v.detail = "beta MSE artur " + num(a.beta_mse, "%.17g") + ", legend " +
               num(l.beta_mse, "%.17g") + ", backfit(cap 2000) " +
               num(b.beta_mse, "%.17g") +
               "; required both half-quadratic MSEs strictly below backfit";
    return v;
}

// --------------------------------------------------------------------------
// 7. Errors shrink when n grows.
// --------------------------------------------------------------------------
Verdict consistency_trend() {
    auto run = [](Index n) {
        Scenario sc = example1_scenario();
        sc.n = n;
        sc.replications = 200;
        McEstimator e = McEstimator::half_quadratic("artur", HqAlgorithm::artur);
        e.config.j0 = sc.j0;
        return run_monte_carlo(sc, {e}, 4).stats[0];
    };
    const auto small = run(256);
    const auto large = run(1024);

    Verdict v;
    v.pass = large.beta_mean_abs_err < small.beta_mean_abs_err &&
             large.mise_mean < small.mise_mean;
    v.detail = "mean |beta_hat - 1|: " + num(small.beta_mean_abs_err, "%.4f") +
               " (n=256) -> " + num(large.beta_mean_abs_err, "%.4f") +
               " (n=1024); MISE: " + num(small.mise_mean, "%.4f") + " -> " +
               num(large.mise_mean, "%.4f") + "; both must decrease";
    return v;
}

// --------------------------------------------------------------------------
// 8. Robust-solver invariants.
// --------------------------------------------------------------------------
Verdict solver_invariants() {
    std::ostringstream os;
    bool pass = true;

    // Contaminated regression instances shared by the sub-checks.
    std::mt19937_64 gen(7);
    std::normal_distribution<double> nd;
    const Index m = 60, p = 2;
    MatrixXd a(m, p);
    VectorXd z(m);
    const Eigen::Vector2d beta_true(1.5, -0.5);
    for (Index i = 0; i < m; ++i) {
        a(i, 0) = nd(gen);
        a(i, 1) = nd(gen);
        z[i] = a.row(i).dot(beta_true) + 0.3 * nd(gen);
        if (i % 10 == 0) z[i] += 25.0;
    }

    double hist_violation = 0.0, worst_grad = 0.0;
    for (const RhoFamily& rho :
         {RhoFamily::huber(1.345), RhoFamily::hampel(1.345, 3.7)}) {
        for (const HqAlgorithm alg : {HqAlgorithm::artur, HqAlgorithm::legend}) {
            SolverOptions o = SolverOptions::defaults_for(alg);
            o.delta = 1e-12;
            o.max_iter = 5000;
            const SolverResult r = hq_fit(a, z, rho, o);
            for (std::size_t k = 1; k < r.criterion_history.size(); ++k)
                hist_violation =
                    std::max(hist_violation, r.criterion_history[k] -
                                                 r.criterion_history[k - 1]);
            worst_grad = std::max(
                worst_grad, r.grad_norm / (1.0 + r.beta_hat.norm()));
        }
    }
    const bool mono_ok = hist_violation <= 1e-9;
    const bool grad_ok = worst_grad <= 1e-6;
    pass = pass && mono_ok && grad_ok;
    os << "monotone criterion (max uptick " << num(hist_violation)
       << "); stationarity " << num(worst_grad) << " (<= 1e-6)";

    // lambda -> infinity recovers ordinary least squares.
    const VectorXd ols = a.colPivHouseholderQr().solve(z);
    SolverOptions o = SolverOptions::defaults_for(HqAlgorithm::artur);
    o.delta = 1e-14;
    const SolverResult r = hq_fit(a, z, RhoFamily::huber(1e8), o);
    const double ols_gap = (r.beta_hat - ols).lpNorm<Eigen::Infinity>();
    pass = pass && ols_gap < 1e-8;
    os << "; huge-lambda vs OLS " << num(ols_gap) << " (< 1e-8)";

    // Scale relation rho_l(u) = v^2 rho_{l/v}(u/v) on a grid.
    double scale_err = 0.0;
    for (const double lam : {0.5, 1.0, 2.0})
        for (const double vfac : {0.25, 1.0, 4.0})
            for (double u = -3.0; u <= 3.0; u += 0.37) {
                const double lhs = huber_rho(u, lam);
                const double rhs = vfac * vfac * huber_rho(u / vfac, lam / vfac);
                scale_err = std::max(scale_err, std::abs(lhs - rhs));
            }
    pass = pass && scale_err < 1e-12;
    os << "; scale identity " << num(scale_err) << " (< 1e-12)";

    // psi matches a centered difference of rho away from the kink.
    double fd_err = 0.0;
    const double lam = 1.0, h = 1e-6;
    for (double u = -4.0; u <= 4.0; u += 0.0173) {
        if (std::abs(std::abs(u) - lam) < 1e-3) continue;
        const double fd = (huber_rho(u + h, lam) - huber_rho(u - h, lam)) / (2 * h);
        fd_err = std::max(fd_err, std::abs(fd - huber_psi(u, lam)));
    }
    pass = pass && fd_err < 1e-6;
    os << "; psi vs finite difference " << num(fd_err) << " (< 1e-6)";

    Verdict v;
    v.pass = pass;
    v.detail = os.str();
    return v;
}

// --------------------------------------------------------------------------
// 9. Command-line determinism across thread counts and reruns.
// --------------------------------------------------------------------------
Verdict cli_determinism() {
    const fs::path dir =
        fs::temp_directory_path() /
        ("waveplm_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream os;
        os << in.rdbuf();
        return os.str();
    };
    auto run = [&](const std::string& tag, int jobs) {
        const fs::path csv = dir / (tag + ".csv");
        const fs::path json = dir / (tag + ".json");
        const std::string cmd =
            std::string(WAVEPLM_CLI_PATH) +
            " simulate --preset example1 --reps 6 --seed 99 --jobs " +
            std::to_string(jobs) + " --out-csv " + csv.string() +
            " --out-json " + json.string() + " > " + (dir / "stdout").string() +
            " 2> " + (dir / "stderr").string();
        const int rc = std::system(cmd.c_str());
        if (rc == -1 || !WIFEXITED(rc) || WEXITSTATUS(rc) != 0)
            throw std::runtime_error("CLI run failed: " + cmd);
        return std::pair{slurp(csv), slurp(json)};
    };

    const auto [csv1, json1] = run("jobs1", 1);
    const auto [csv4, json4] = run("jobs4", 4);
    const auto [csv1b, json1b] = run("jobs1_again", 1);

    Verdict v;
    v.pass = !csv1.empty() && csv1 == csv4 && json1 == json4 &&
             csv1 == csv1b && json1 == json1b;
    v.detail = std::string("simulate --reps 6 --seed 99: jobs=1 vs jobs=4 ") +
               (csv1 == csv4 && json1 == json4 ? "byte-identical"
                                               : "DIFFER") +
               ", rerun " +
               (csv1 == csv1b && json1 == json1b ? "byte-identical" : "DIFFER") +
               " (" + std::to_string(csv1.size()) + "-byte CSV, " +
               std::to_string(json1.size()) + "-byte JSON)";
    return v;
}

} // namespace

int main() {
    std::printf("acceptance: wavelet-domain partially linear models\n");
    report(1, "transform correctness", dwt_correctness);
    report(2, "two-step / joint-minimizer equivalence", two_step_equivalence);
    report(3, "noise-scale estimation with and without QR projection",
           sigma_table);
    report(4, "Monte Carlo tables, sinusoid and piecewise scenarios",
           mc_tables);
    report(5, "ordinal solver timing at n = 1024", solver_timing);
    report(6, "half-quadratic vs iteration-capped backfitting, four "
              "covariates",
           hq_vs_backfit);
    report(7, "error decreases from n = 256 to n = 1024", consistency_trend);
    report(8, "robust-solver invariant suite", solver_invariants);
    report(9, "command-line determinism across jobs and reruns",
           cli_determinism);

    std::printf("%d criterion(s) failed\n", g_failures);
    return g_failures;
}
